#ifndef MTXPLAIN_DATA_H_
#define MTXPLAIN_DATA_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mtx {

enum class Sentiment { kPositive = 0, kNeutral = 1, kNegative = 2 };

// Index order is the class order of the target head; kNA is last.
enum class Target {
  kReligion = 0,
  kSexualOrientation,
  kAttackingRelativesAndFriends,
  kOrganization,
  kCommunity,
  kProfession,
  kMiscellaneous,
  kNA,
};

inline constexpr size_t kNumTargets = 8;

std::string sentiment_name(Sentiment s);
std::string target_name(Target t);
std::string bully_name(bool bully);
// Case-insensitive; '_' and ' ' are read as '-'. Return nullopt if unknown.
std::optional<Sentiment> parse_sentiment(const std::string& s);
std::optional<Target> parse_target(const std::string& s);
std::optional<bool> parse_bully(const std::string& s);

// Lowercased whitespace split. Only ASCII letters are lowercased; other
// bytes pass through untouched.
std::vector<std::string> tokenize(const std::string& text);

struct Example {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  bool bully = false;
  Sentiment sentiment = Sentiment::kNeutral;
  Target target = Target::kNA;
  std::vector<uint8_t> rationale;  // one 0/1 entry per token

  size_t rationale_count() const;
};

struct Violation {
  size_t line = 0;
  std::string id;
  std::string message;
};

struct ParseOptions {
  // Throw on the first invariant violation instead of collecting it.
  bool strict = false;
};

struct ParsedDataset {
  std::vector<Example> examples;
  // Label-consistency problems (non-bully with a target or highlighted
  // tokens, bully with target NA). The examples are kept as read.
  std::vector<Violation> violations;
};

// JSON lines with fields id (optional), text, bully, sentiment, target
// (omitted or "NA" for non-bully posts) and rationale. Blank lines are
// skipped. Throws SchemaError with the line number for malformed JSON,
// missing fields, unknown labels and rationale/token length mismatches;
// FormatError if the file cannot be opened.
ParsedDataset parse_dataset(const std::string& path, const ParseOptions& options = {});
ParsedDataset parse_dataset(std::istream& in, const ParseOptions& options = {});

nlohmann::json example_to_json(const Example& e);
void write_dataset(std::ostream& out, const std::vector<Example>& examples);
void write_dataset(const std::string& path, const std::vector<Example>& examples);

struct WordCoverage {
  std::string word;
  size_t posts = 0;       // bully posts where the word is highlighted
  double coverage = 0.0;  // percent of bully posts
};

struct DatasetStats {
  size_t total = 0;
  size_t bully = 0;
  size_t non_bully = 0;
  std::array<size_t, 3> sentiment{};  // Sentiment order
  std::array<size_t, kNumTargets> target{};
  double mean_tokens = 0.0;
  // Mean highlighted tokens per bully post. Reported as 0 with
  // rationale_mean_defined == false when there are no bully posts.
  double mean_rationale_tokens = 0.0;
  bool rationale_mean_defined = false;
  std::vector<WordCoverage> top_rationale_words;
};

// Throws DataError on an empty input. Punctuation-only tokens are left out
// of the word ranking; ties rank alphabetically.
DatasetStats dataset_stats(const std::vector<Example>& examples, size_t top_words = 10);
nlohmann::json stats_to_json(const DatasetStats& s);

enum class StratifyOn { kBully, kBullySentiment };

// Splits indices 0..labels.size()-1 into k folds. Each class is shuffled
// with `seed` and dealt round-robin, continuing the deal position across
// classes, so every fold gets floor or ceil of its proportional share.
// Throws ConfigError for k < 2 and DataError when a class has fewer than
// k members.
std::vector<std::vector<size_t>> stratified_kfold(const std::vector<size_t>& labels, size_t k,
                                                  uint64_t seed);
std::vector<std::vector<size_t>> stratified_kfold(const std::vector<Example>& examples,
                                                  size_t k, uint64_t seed,
                                                  StratifyOn on = StratifyOn::kBully);

// All indices of 0..n-1 not in `fold`, ascending.
std::vector<size_t> complement(const std::vector<size_t>& fold, size_t n);

struct VoteResult {
  std::vector<uint8_t> mask;
  // Positions with an exact tie. They are set to 0 until adjudicated.
  std::vector<size_t> ties;
};

// Per-position majority over annotator masks. Throws DataError for fewer
// than two annotators, unequal lengths or values other than 0/1.
VoteResult majority_vote(const std::vector<std::vector<uint8_t>>& masks);

// n items x k categories; each row counts how many of the r annotators
// chose each category.
struct AnnotationMatrix {
  std::vector<std::vector<size_t>> counts;

  size_t items() const { return counts.size(); }
  size_t categories() const { return counts.empty() ? 0 : counts[0].size(); }
  // Throws DataError unless every row has the same width and sum r >= 2.
  size_t raters() const;
};

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;  // mean per-item agreement
  double expected = 0.0;  // chance agreement
  // Every rating fell in one category, so chance agreement is 1 and kappa
  // is undefined; kappa is left at 0.
  bool degenerate = false;
};

KappaResult fleiss_kappa(const AnnotationMatrix& m);

// One annotated post: per-annotator rationale masks and, optionally,
// per-annotator categorical labels (e.g. bully / non-bully).
struct AnnotationRecord {
  std::string id;
  std::map<std::string, std::vector<uint8_t>> masks;
  std::map<std::string, std::string> labels;
};

// JSON lines: {"id": ..., "masks": {annotator: [0/1 ...]}, "labels":
// {annotator: "..."}}; "labels" is optional. Throws SchemaError.
std::vector<AnnotationRecord> load_annotations(const std::string& path);
std::vector<AnnotationRecord> load_annotations(std::istream& in);

// Token-level matrix over categories {0, 1}; every token of every record is
// one item.
AnnotationMatrix rationale_matrix(const std::vector<AnnotationRecord>& records);
// Post-level matrix over the sorted set of label values seen. Records
// without labels are skipped. `categories` receives the column names.
AnnotationMatrix label_matrix(const std::vector<AnnotationRecord>& records,
                              std::vector<std::string>* categories = nullptr);

}  // namespace mtx

#endif  // MTXPLAIN_DATA_H_
