#include "mtxplain/metrics.h"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "mtxplain/error.h"

namespace mtx {

namespace {

void check_masks(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b,
                 const char* what) {
  if (a.size() != b.size()) {
    throw DataError(std::string(what) + ": mask lengths " + std::to_string(a.size()) +
                    " and " + std::to_string(b.size()) + " differ");
  }
}

struct Block {
  size_t i = 0, j = 0, size = 0;
};

// Longest common contiguous block of a[alo, ahi) and b[blo, bhi).
Block longest_block(const std::vector<std::string>& a, size_t alo, size_t ahi,
                    const std::vector<std::string>& b, size_t blo, size_t bhi) {
  Block best{alo, blo, 0};
  const size_t m = bhi - blo;
  std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = alo; i < ahi; ++i) {
    for (size_t jj = 1; jj <= m; ++jj) {
      const size_t j = blo + jj - 1;
      cur[jj] = a[i] == b[j] ? prev[jj - 1] + 1 : 0;
      const size_t len = cur[jj];
      if (len == 0) continue;
      const size_t si = i + 1 - len, sj = j + 1 - len;
      if (len > best.size || (len == best.size && (si < best.i || (si == best.i && sj < best.j)))) {
        best = {si, sj, len};
      }
    }
    std::swap(prev, cur);
  }
  return best;
}

size_t match_range(const std::vector<std::string>& a, size_t alo, size_t ahi,
                   const std::vector<std::string>& b, size_t blo, size_t bhi) {
  if (alo >= ahi || blo >= bhi) return 0;
  Block k = longest_block(a, alo, ahi, b, blo, bhi);
  if (k.size == 0) return 0;
  return k.size + match_range(a, alo, k.i, b, blo, k.j) +
         match_range(a, k.i + k.size, ahi, b, k.j + k.size, bhi);
}

}  // namespace

ClassificationReport classification_report(const std::vector<size_t>& gold,
                                           const std::vector<size_t>& pred, size_t k) {
  if (gold.empty()) throw DataError("classification_report: no predictions");
  if (gold.size() != pred.size()) {
    throw DataError("classification_report: " + std::to_string(gold.size()) + " gold labels but " +
                    std::to_string(pred.size()) + " predictions");
  }
  ClassificationReport r;
  r.confusion.assign(k, std::vector<size_t>(k, 0));
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= k || pred[i] >= k) {
      throw DataError("classification_report: label out of range for " + std::to_string(k) +
                      " classes");
    }
    ++r.confusion[gold[i]][pred[i]];
  }
  size_t correct = 0;
  double f1_sum = 0.0;
  r.per_class.resize(k);
  for (size_t c = 0; c < k; ++c) {
    ClassScores& s = r.per_class[c];
    const size_t tp = r.confusion[c][c];
    correct += tp;
    for (size_t o = 0; o < k; ++o) {
      s.support += r.confusion[c][o];
      s.predicted += r.confusion[o][c];
    }
    s.absent = s.support == 0 && s.predicted == 0;
    if (s.predicted > 0) s.precision = static_cast<double>(tp) / static_cast<double>(s.predicted);
    if (s.support > 0) s.recall = static_cast<double>(tp) / static_cast<double>(s.support);
    if (s.precision + s.recall > 0) {
      s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    f1_sum += s.f1;
  }
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
  r.macro_f1 = 100.0 * f1_sum / static_cast<double>(k);
  return r;
}

nlohmann::json report_to_json(const ClassificationReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassScores& s : r.per_class) {
    classes.push_back({{"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support},
                       {"absent", s.absent}});
  }
  return {{"accuracy", r.accuracy},
          {"macro_f1", r.macro_f1},
          {"per_class", classes},
          {"confusion", r.confusion}};
}

double jaccard(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gold) {
  check_masks(pred, gold, "jaccard");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] && gold[i];
    uni += pred[i] || gold[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double hamming_similarity(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gold) {
  check_masks(pred, gold, "hamming_similarity");
  if (pred.empty()) throw DataError("hamming_similarity: zero-length masks");
  size_t diff = 0;
  for (size_t i = 0; i < pred.size(); ++i) diff += (pred[i] != 0) != (gold[i] != 0);
  return 1.0 - static_cast<double>(diff) / static_cast<double>(pred.size());
}

size_t ros_matches(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return match_range(a, 0, a.size(), b, 0, b.size());
}

double ros(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  const size_t m = std::max(ros_matches(a, b), ros_matches(b, a));
  return 2.0 * static_cast<double>(m) / static_cast<double>(a.size() + b.size());
}

std::vector<std::string> selected_tokens(const std::vector<std::string>& tokens,
                                         const std::vector<uint8_t>& mask) {
  if (tokens.size() != mask.size()) {
    throw DataError("selected_tokens: " + std::to_string(tokens.size()) + " tokens but mask of " +
                    std::to_string(mask.size()));
  }
  std::vector<std::string> out;
  for (size_t i = 0; i < tokens.size(); ++i)
    if (mask[i]) out.push_back(tokens[i]);
  return out;
}

RationaleScore rationale_scores(const std::vector<RationaleCase>& cases) {
  if (cases.empty()) throw DataError("rationale_scores: no posts");
  RationaleScore s;
  for (const RationaleCase& c : cases) {
    s.js += jaccard(c.pred, c.gold);
    s.hd += hamming_similarity(c.pred, c.gold);
    s.ros += ros(selected_tokens(c.tokens, c.pred), selected_tokens(c.tokens, c.gold));
  }
  const double scale = 100.0 / static_cast<double>(cases.size());
  s.js *= scale;
  s.hd *= scale;
  s.ros *= scale;
  return s;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0 && b > 0)) throw NumericError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw NumericError("incomplete_beta: x outside [0, 1]");
  return boost::math::ibeta(a, b, x);
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("paired_ttest: samples differ in length");
  const size_t k = a.size();
  if (k < 2) throw DataError("paired_ttest: need at least two pairs");
  std::vector<double> d(k);
  double mean = 0.0;
  for (size_t i = 0; i < k; ++i) {
    d[i] = a[i] - b[i];
    mean += d[i];
  }
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  TTestResult r;
  r.df = static_cast<double>(k - 1);
  const double sd = std::sqrt(ss / r.df);
  if (sd == 0.0 || sd <= 1e-15 * std::abs(mean)) {
    r.zero_variance = true;
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = mean > 0 ? INFINITY : -INFINITY;
      r.p = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(k)));
  r.p = incomplete_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace mtx
