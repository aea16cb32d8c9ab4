#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>

#include "doctest.h"
#include "mtxplain/error.h"
#include "mtxplain/metrics.h"
#include "mtxplain/rng.h"
#include "oracles.h"

using namespace mtx;
using namespace mtx::testing;

namespace {

// Two-tailed p of Student's t by Simpson integration of the density.
double t_pvalue_oracle(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) /
                   std::sqrt(df * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 200000;
  const double x1 = std::abs(t), h = x1 / n;
  double s = f(0) + f(x1);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * s * h / 3.0;
}

}  // namespace

TEST_CASE("classification report examples") {
  ClassificationReport perfect = classification_report({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
  CHECK(perfect.accuracy == 100.0);
  CHECK(perfect.macro_f1 == 100.0);

  ClassificationReport r = classification_report({1, 1, 0, 0}, {1, 0, 0, 0}, 2);
  CHECK(r.accuracy == 75.0);
  CHECK(r.per_class[1].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_class[0].f1 == doctest::Approx(4.0 / 5.0).epsilon(1e-15));
  CHECK(r.macro_f1 == doctest::Approx(100.0 * 11.0 / 15.0).epsilon(1e-14));
  CHECK(r.confusion == std::vector<std::vector<size_t>>{{2, 0}, {1, 1}});

  ClassificationReport one = classification_report({0, 0, 1, 1}, {1, 1, 1, 1}, 2);
  CHECK(one.accuracy == 50.0);

  ClassificationReport absent = classification_report({0, 1}, {0, 1}, 3);
  CHECK(absent.per_class[2].absent);
  CHECK(absent.per_class[2].f1 == 0.0);
  CHECK(absent.macro_f1 == doctest::Approx(200.0 / 3.0));

  CHECK_THROWS_AS(classification_report({0, 2}, {0, 1}, 2), DataError);
  CHECK_THROWS_AS(classification_report({0}, {0, 1}, 2), DataError);
  CHECK_THROWS_AS(classification_report({}, {}, 2), DataError);
}

TEST_CASE("classification report invariants") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t k = 2 + rng.below(7), n = 1 + rng.below(40);
    std::vector<size_t> gold(n), pred(n);
    for (size_t i = 0; i < n; ++i) {
      gold[i] = rng.below(k);
      pred[i] = rng.below(k);
    }
    ClassificationReport r = classification_report(gold, pred, k);
    size_t trace = 0;
    double f1 = 0;
    for (size_t c = 0; c < k; ++c) {
      trace += r.confusion[c][c];
      f1 += r.per_class[c].f1;
    }
    CHECK(r.accuracy == doctest::Approx(100.0 * trace / n).epsilon(1e-14));
    CHECK(r.macro_f1 == doctest::Approx(100.0 * f1 / k).epsilon(1e-14));
  }
}

TEST_CASE("jaccard and hamming examples") {
  MaskV p{0, 1, 0, 1, 0, 0}, g{0, 0, 0, 1, 0, 1};
  CHECK(jaccard(p, g) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(jaccard(p, p) == 1.0);
  CHECK(jaccard({0, 0}, {0, 0}) == 1.0);
  CHECK(hamming_similarity({0, 1, 1, 0}, {0, 1, 0, 0}) == 0.75);
  CHECK(hamming_similarity(p, p) == 1.0);
  CHECK(hamming_similarity({1, 0, 1}, {0, 1, 0}) == 0.0);
  CHECK_THROWS_AS(jaccard({1}, {1, 0}), DataError);
  CHECK_THROWS_AS(hamming_similarity({}, {}), DataError);
}

TEST_CASE("ROS examples") {
  CHECK(ros({"a", "b", "c"}, {"a", "b", "c"}) == 1.0);
  CHECK(ros({"a", "b"}, {"x", "y"}) == 0.0);
  CHECK(ros({"a", "b", "c", "d"}, {"b", "c", "d", "e"}) == 0.75);
  CHECK(ros({}, {}) == 1.0);
  CHECK(ros({"a"}, {}) == 0.0);
  // Flank recursion: block "c d", then "a" on the left flank.
  CHECK(ros_matches({"a", "x", "c", "d"}, {"a", "c", "d", "y"}) == 3);
  // Earliest-block choice changes the total: the first "a b" in a is used.
  CHECK(ros_matches({"a", "b", "z", "a", "b"}, {"a", "b"}) == 2);
  // Tied blocks make the directional count order-dependent; ros takes the
  // larger one.
  Tokens x{"a", "a", "b", "a"}, y{"b", "a", "a", "a"};
  CHECK(ros_matches(x, y) == 3);
  CHECK(ros_matches(y, x) == 2);
  CHECK(ros(x, y) == 0.75);
  CHECK(ros(x, y) == ros(y, x));
}

TEST_CASE("metrics agree with brute-force references on random masks") {
  Rng rng(2024);
  const Tokens alphabet{"a", "b", "c", "d"};
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 1 + rng.below(12);
    MaskV p(n), g(n);
    Tokens tokens(n);
    for (size_t i = 0; i < n; ++i) {
      p[i] = static_cast<uint8_t>(rng.below(2));
      g[i] = static_cast<uint8_t>(rng.below(2));
      tokens[i] = alphabet[rng.below(alphabet.size())];
    }
    CHECK(std::abs(jaccard(p, g) - jaccard_oracle(p, g)) < 1e-9);
    CHECK(std::abs(hamming_similarity(p, g) - hamming_oracle(p, g)) < 1e-9);
    Tokens sp = selected_tokens(tokens, p), sg = selected_tokens(tokens, g);
    CHECK(std::abs(ros(sp, sg) - ros_oracle(sp, sg)) < 1e-9);

    // Symmetry and complement identity.
    CHECK(jaccard(p, g) == jaccard(g, p));
    CHECK(hamming_similarity(p, g) == hamming_similarity(g, p));
    CHECK(std::abs(ros(sp, sg) - ros(sg, sp)) < 1e-12);
    MaskV not_g(n);
    for (size_t i = 0; i < n; ++i) not_g[i] = 1 - g[i];
    CHECK(std::abs(hamming_similarity(p, g) + hamming_similarity(p, not_g) - 1.0) < 1e-12);
    CHECK((jaccard(p, g) == 1.0) == (index_set(p) == index_set(g)));
    CHECK((ros(sp, sg) == 1.0) == (sp == sg));
  }
}

TEST_CASE("ROS on longer random token sequences matches the oracle") {
  Rng rng(77);
  const Tokens alphabet{"x", "y", "z"};
  for (int trial = 0; trial < 300; ++trial) {
    Tokens a(rng.below(15)), b(rng.below(15));
    for (auto& t : a) t = alphabet[rng.below(3)];
    for (auto& t : b) t = alphabet[rng.below(3)];
    CHECK(std::abs(ros(a, b) - ros_oracle(a, b)) < 1e-9);
  }
}

TEST_CASE("corpus rationale scores are percent means over posts") {
  std::vector<RationaleCase> cases = {
      {{"tu", "pagal", "hai"}, {0, 1, 0}, {0, 1, 0}},
      {{"a", "b", "c", "d"}, {1, 0, 1, 0}, {0, 0, 1, 1}},
  };
  RationaleScore s = rationale_scores(cases);
  CHECK(s.js == doctest::Approx(100.0 * (1.0 + 1.0 / 3.0) / 2.0));
  CHECK(s.hd == doctest::Approx(100.0 * (1.0 + 0.5) / 2.0));
  // [a, c] vs [c, d]: one matched token.
  CHECK(s.ros == doctest::Approx(100.0 * (1.0 + 0.5) / 2.0));
  CHECK_THROWS_AS(rationale_scores({}), DataError);
}

TEST_CASE("incomplete beta matches closed forms") {
  // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1 - x)^b.
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.92, 1.0}) {
    CHECK(std::abs(incomplete_beta(1, 1, x) - x) < 1e-13);
    CHECK(std::abs(incomplete_beta(2.5, 1, x) - std::pow(x, 2.5)) < 1e-13);
    CHECK(std::abs(incomplete_beta(1, 3.5, x) - (1 - std::pow(1 - x, 3.5))) < 1e-13);
    CHECK(std::abs(incomplete_beta(2.0, 3.0, x) + incomplete_beta(3.0, 2.0, 1 - x) - 1) < 1e-13);
  }
  CHECK_THROWS_AS(incomplete_beta(0, 1, 0.5), NumericError);
}

TEST_CASE("paired t-test") {
  std::vector<double> a{83.1, 82.7, 84.0, 83.5, 82.9, 83.8, 84.2, 83.0, 82.6, 83.4};
  std::vector<double> b{82.2, 82.5, 83.1, 82.0, 82.8, 83.0, 83.9, 81.9, 82.4, 82.7};
  // Hand statistic from the difference list.
  double mean = 0, ss = 0;
  for (size_t i = 0; i < a.size(); ++i) mean += (a[i] - b[i]) / 10.0;
  for (size_t i = 0; i < a.size(); ++i) ss += std::pow(a[i] - b[i] - mean, 2);
  const double t = mean / (std::sqrt(ss / 9.0) / std::sqrt(10.0));

  TTestResult r = paired_ttest(a, b);
  CHECK(r.df == 9.0);
  CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
  CHECK(std::abs(r.p - t_pvalue_oracle(r.t, 9.0)) < 1e-6);
  CHECK(r.p < 0.05);
  CHECK(paired_ttest(b, a).t == -r.t);
  CHECK(paired_ttest(b, a).p == doctest::Approx(r.p).epsilon(1e-14));

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(2 + rng.below(12)), y(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal() + 0.3;
    }
    TTestResult s = paired_ttest(x, y);
    CHECK(std::abs(s.p - t_pvalue_oracle(s.t, s.df)) < 1e-6);
  }

  TTestResult same = paired_ttest(a, a);
  CHECK(same.p == 1.0);
  CHECK(same.zero_variance);
  std::vector<double> shifted = a;
  for (double& v : shifted) v += 0.5;
  TTestResult constant = paired_ttest(shifted, a);
  CHECK(constant.zero_variance);
  CHECK(constant.p == 0.0);

  CHECK_THROWS_AS(paired_ttest({1.0}, {2.0}), DataError);
  CHECK_THROWS_AS(paired_ttest({1.0, 2.0}, {2.0}), DataError);
}

TEST_CASE("summaries use the sample standard deviation") {
  Summary s = summarize({1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(summarize({7}).std == 0.0);
}
