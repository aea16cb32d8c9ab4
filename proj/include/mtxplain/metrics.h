#ifndef MTXPLAIN_METRICS_H_
#define MTXPLAIN_METRICS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace mtx {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  size_t support = 0;    // gold count
  size_t predicted = 0;  // predicted count
  // No gold and no predicted instances: F1 is 0 by convention.
  bool absent = false;
};

struct ClassificationReport {
  double accuracy = 0.0;  // percent
  double macro_f1 = 0.0;  // percent, unweighted over all K classes
  std::vector<ClassScores> per_class;
  std::vector<std::vector<size_t>> confusion;  // [gold][pred]
};

// Throws DataError for empty or unequal inputs and labels >= k.
ClassificationReport classification_report(const std::vector<size_t>& gold,
                                           const std::vector<size_t>& pred, size_t k);
nlohmann::json report_to_json(const ClassificationReport& r);

// |P & G| / |P | G| over selected positions; 1 when both are empty.
double jaccard(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gold);
// 1 - mismatches / length. Throws DataError on empty input.
double hamming_similarity(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gold);

// Ratcliff-Obershelp matched length: take the longest common block (the
// earliest in `a`, then in `b`, on ties) and recurse on the unmatched
// flanks. Not symmetric when blocks tie.
size_t ros_matches(const std::vector<std::string>& a, const std::vector<std::string>& b);

// 2M / (|a| + |b|) with M the larger of ros_matches(a, b) and
// ros_matches(b, a), so the score does not depend on argument order.
// 1 when both are empty.
double ros(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Tokens whose mask entry is 1, in order.
std::vector<std::string> selected_tokens(const std::vector<std::string>& tokens,
                                         const std::vector<uint8_t>& mask);

struct RationaleCase {
  std::vector<std::string> tokens;  // real tokens only
  std::vector<uint8_t> pred;
  std::vector<uint8_t> gold;
};

// Per-post scores averaged over posts, in percent.
struct RationaleScore {
  double js = 0.0;
  double hd = 0.0;
  double ros = 0.0;
};

RationaleScore rationale_scores(const std::vector<RationaleCase>& cases);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-tailed
  // All differences equal: p is 0 for a nonzero mean difference, else 1.
  bool zero_variance = false;
};

// Paired t-test on a[i] - b[i]. Throws DataError for k < 2 or unequal sizes.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for one value
};

Summary summarize(const std::vector<double>& values);

}  // namespace mtx

#endif  // MTXPLAIN_METRICS_H_
