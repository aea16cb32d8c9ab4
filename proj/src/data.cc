#include "mtxplain/data.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "mtxplain/error.h"
#include "mtxplain/rng.h"

namespace mtx {

namespace {

const std::array<const char*, 3> kSentimentNames = {"positive", "neutral", "negative"};
const std::array<const char*, kNumTargets> kTargetNames = {
    "religion",  "sexual-orientation", "attacking-relatives-and-friends",
    "organization", "community",       "profession",
    "miscellaneous", "NA"};

std::string normalize_label(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '_' || ch == ' ') ch = '-';
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

bool is_punctuation(const std::string& token) {
  return std::all_of(token.begin(), token.end(),
                     [](char c) { return std::ispunct(static_cast<unsigned char>(c)); });
}

std::vector<uint8_t> read_mask(const nlohmann::json& j, size_t line, const std::string& what) {
  if (!j.is_array()) throw SchemaError(line, what + " must be a list of 0/1 values");
  std::vector<uint8_t> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (v.is_boolean()) {
      out.push_back(v.get<bool>() ? 1 : 0);
    } else if (v.is_number_integer() && (v.get<int64_t>() == 0 || v.get<int64_t>() == 1)) {
      out.push_back(static_cast<uint8_t>(v.get<int64_t>()));
    } else {
      throw SchemaError(line, what + " must contain only 0/1 values, got " + v.dump());
    }
  }
  return out;
}

std::string required_string(const nlohmann::json& j, const char* key, size_t line) {
  if (!j.contains(key)) throw SchemaError(line, std::string("missing field \"") + key + "\"");
  if (!j.at(key).is_string()) {
    throw SchemaError(line, std::string("field \"") + key + "\" must be a string");
  }
  return j.at(key).get<std::string>();
}

Example parse_record(const nlohmann::json& j, size_t line) {
  if (!j.is_object()) throw SchemaError(line, "record must be a JSON object");
  Example e;
  if (j.contains("id")) {
    const auto& id = j.at("id");
    e.id = id.is_string() ? id.get<std::string>() : id.dump();
  } else {
    e.id = "line-" + std::to_string(line);
  }
  e.text = required_string(j, "text", line);
  e.tokens = tokenize(e.text);
  if (e.tokens.empty()) throw SchemaError(line, "text has no tokens");

  std::string bully = required_string(j, "bully", line);
  auto b = parse_bully(bully);
  if (!b) throw SchemaError(line, "illegal bully label \"" + bully + "\"");
  e.bully = *b;

  std::string sentiment = required_string(j, "sentiment", line);
  auto s = parse_sentiment(sentiment);
  if (!s) throw SchemaError(line, "illegal sentiment label \"" + sentiment + "\"");
  e.sentiment = *s;

  e.target = Target::kNA;
  if (j.contains("target") && !j.at("target").is_null()) {
    std::string target = required_string(j, "target", line);
    auto t = parse_target(target);
    if (!t) throw SchemaError(line, "illegal target label \"" + target + "\"");
    e.target = *t;
  }

  if (!j.contains("rationale")) throw SchemaError(line, "missing field \"rationale\"");
  e.rationale = read_mask(j.at("rationale"), line, "rationale");
  if (e.rationale.size() != e.tokens.size()) {
    throw SchemaError(line, "rationale has " + std::to_string(e.rationale.size()) +
                                " entries but the text has " + std::to_string(e.tokens.size()) +
                                " tokens");
  }
  return e;
}

std::optional<std::string> invariant_problem(const Example& e) {
  if (!e.bully && e.target != Target::kNA) return "non-bully post has a target";
  if (!e.bully && e.rationale_count() > 0) return "non-bully post has highlighted tokens";
  if (e.bully && e.target == Target::kNA) return "bully post has target NA";
  return std::nullopt;
}

}  // namespace

std::string sentiment_name(Sentiment s) { return kSentimentNames[static_cast<size_t>(s)]; }
std::string target_name(Target t) { return kTargetNames[static_cast<size_t>(t)]; }
std::string bully_name(bool bully) { return bully ? "bully" : "non-bully"; }

std::optional<Sentiment> parse_sentiment(const std::string& s) {
  std::string n = normalize_label(s);
  for (size_t i = 0; i < kSentimentNames.size(); ++i)
    if (n == kSentimentNames[i]) return static_cast<Sentiment>(i);
  return std::nullopt;
}

std::optional<Target> parse_target(const std::string& s) {
  std::string n = normalize_label(s);
  for (size_t i = 0; i < kNumTargets; ++i)
    if (n == normalize_label(kTargetNames[i])) return static_cast<Target>(i);
  return std::nullopt;
}

std::optional<bool> parse_bully(const std::string& s) {
  std::string n = normalize_label(s);
  if (n == "bully") return true;
  if (n == "non-bully" || n == "nonbully") return false;
  return std::nullopt;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
      current += ch;
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

size_t Example::rationale_count() const {
  return static_cast<size_t>(std::count(rationale.begin(), rationale.end(), 1));
}

ParsedDataset parse_dataset(std::istream& in, const ParseOptions& options) {
  ParsedDataset out;
  std::string text;
  size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw SchemaError(line, std::string("malformed JSON: ") + ex.what());
    }
    Example e = parse_record(j, line);
    if (auto problem = invariant_problem(e)) {
      if (options.strict) throw SchemaError(line, *problem);
      out.violations.push_back({line, e.id, *problem});
    }
    out.examples.push_back(std::move(e));
  }
  return out;
}

ParsedDataset parse_dataset(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset " + path);
  return parse_dataset(in, options);
}

nlohmann::json example_to_json(const Example& e) {
  nlohmann::json j = {
      {"id", e.id},
      {"text", e.text},
      {"bully", bully_name(e.bully)},
      {"sentiment", sentiment_name(e.sentiment)},
      {"target", target_name(e.target)},
  };
  std::vector<int> rationale(e.rationale.begin(), e.rationale.end());
  j["rationale"] = rationale;
  return j;
}

void write_dataset(std::ostream& out, const std::vector<Example>& examples) {
  for (const Example& e : examples) out << example_to_json(e).dump() << '\n';
}

void write_dataset(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write dataset " + path);
  write_dataset(out, examples);
}

DatasetStats dataset_stats(const std::vector<Example>& examples, size_t top_words) {
  if (examples.empty()) throw DataError("dataset_stats: no examples");
  DatasetStats s;
  s.total = examples.size();
  size_t tokens = 0, highlighted = 0;
  std::map<std::string, size_t> posts_with_word;
  for (const Example& e : examples) {
    tokens += e.tokens.size();
    ++s.sentiment[static_cast<size_t>(e.sentiment)];
    ++s.target[static_cast<size_t>(e.target)];
    if (!e.bully) {
      ++s.non_bully;
      continue;
    }
    ++s.bully;
    highlighted += e.rationale_count();
    std::set<std::string> seen;
    for (size_t i = 0; i < e.tokens.size(); ++i) {
      if (e.rationale[i] && !is_punctuation(e.tokens[i])) seen.insert(e.tokens[i]);
    }
    for (const auto& w : seen) ++posts_with_word[w];
  }
  s.mean_tokens = static_cast<double>(tokens) / static_cast<double>(s.total);
  s.rationale_mean_defined = s.bully > 0;
  if (s.bully > 0) {
    s.mean_rationale_tokens = static_cast<double>(highlighted) / static_cast<double>(s.bully);
  }

  std::vector<WordCoverage> words;
  for (const auto& [w, n] : posts_with_word) {
    words.push_back({w, n, 100.0 * static_cast<double>(n) / static_cast<double>(s.bully)});
  }
  // posts_with_word is already alphabetical, so a stable sort keeps ties in
  // that order.
  std::stable_sort(words.begin(), words.end(),
                   [](const WordCoverage& a, const WordCoverage& b) { return a.posts > b.posts; });
  if (words.size() > top_words) words.resize(top_words);
  s.top_rationale_words = std::move(words);
  return s;
}

nlohmann::json stats_to_json(const DatasetStats& s) {
  nlohmann::json sentiment, target, words = nlohmann::json::array();
  for (size_t i = 0; i < s.sentiment.size(); ++i) sentiment[kSentimentNames[i]] = s.sentiment[i];
  for (size_t i = 0; i < kNumTargets; ++i) target[kTargetNames[i]] = s.target[i];
  for (const auto& w : s.top_rationale_words) {
    words.push_back({{"word", w.word}, {"posts", w.posts}, {"coverage", w.coverage}});
  }
  return {
      {"total", s.total},
      {"bully", s.bully},
      {"non_bully", s.non_bully},
      {"sentiment", sentiment},
      {"target", target},
      {"mean_tokens", s.mean_tokens},
      {"mean_rationale_tokens", s.mean_rationale_tokens},
      {"rationale_mean_defined", s.rationale_mean_defined},
      {"top_rationale_words", words},
  };
}

std::vector<std::vector<size_t>> stratified_kfold(const std::vector<size_t>& labels, size_t k,
                                                  uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2, got " + std::to_string(k));
  std::map<size_t, std::vector<size_t>> classes;
  for (size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
  for (const auto& [label, members] : classes) {
    if (members.size() < k) {
      throw DataError("cannot stratify into " + std::to_string(k) + " folds: class " +
                      std::to_string(label) + " has only " + std::to_string(members.size()) +
                      " examples");
    }
  }
  Rng rng(seed);
  std::vector<std::vector<size_t>> folds(k);
  size_t next = 0;
  for (auto& [label, members] : classes) {
    rng.shuffle(std::span<size_t>(members));
    for (size_t idx : members) {
      folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::vector<size_t>> stratified_kfold(const std::vector<Example>& examples,
                                                  size_t k, uint64_t seed, StratifyOn on) {
  std::vector<size_t> labels;
  labels.reserve(examples.size());
  for (const Example& e : examples) {
    size_t label = e.bully ? 1 : 0;
    if (on == StratifyOn::kBullySentiment) label = label * 3 + static_cast<size_t>(e.sentiment);
    labels.push_back(label);
  }
  return stratified_kfold(labels, k, seed);
}

std::vector<size_t> complement(const std::vector<size_t>& fold, size_t n) {
  std::vector<uint8_t> held(n, 0);
  for (size_t i : fold) {
    if (i >= n) throw DimensionError("fold index " + std::to_string(i) + " out of range");
    held[i] = 1;
  }
  std::vector<size_t> out;
  for (size_t i = 0; i < n; ++i)
    if (!held[i]) out.push_back(i);
  return out;
}

VoteResult majority_vote(const std::vector<std::vector<uint8_t>>& masks) {
  if (masks.size() < 2) throw DataError("majority vote needs at least two annotators");
  const size_t n = masks[0].size();
  for (const auto& m : masks) {
    if (m.size() != n) throw DataError("annotator masks have different lengths");
    for (uint8_t v : m)
      if (v > 1) throw DataError("annotator masks must be 0/1");
  }
  VoteResult r;
  r.mask.assign(n, 0);
  for (size_t i = 0; i < n; ++i) {
    size_t ones = 0;
    for (const auto& m : masks) ones += m[i];
    const size_t zeros = masks.size() - ones;
    if (ones > zeros) {
      r.mask[i] = 1;
    } else if (ones == zeros) {
      r.ties.push_back(i);
    }
  }
  return r;
}

size_t AnnotationMatrix::raters() const {
  if (counts.empty()) throw DataError("annotation matrix has no items");
  const size_t k = counts[0].size();
  size_t r = 0;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != k) throw DataError("annotation matrix rows differ in width");
    size_t row = 0;
    for (size_t c : counts[i]) row += c;
    if (i == 0) r = row;
    if (row != r) {
      throw DataError("item " + std::to_string(i) + " has " + std::to_string(row) +
                      " ratings, expected " + std::to_string(r));
    }
  }
  if (r < 2) throw DataError("agreement needs at least two annotators per item");
  return r;
}

KappaResult fleiss_kappa(const AnnotationMatrix& m) {
  const size_t r = m.raters();
  const size_t n = m.items();
  const size_t k = m.categories();
  const double rd = static_cast<double>(r);
  std::vector<double> column(k, 0.0);
  double observed = 0.0;
  for (const auto& row : m.counts) {
    double squares = 0.0;
    for (size_t j = 0; j < k; ++j) {
      const double c = static_cast<double>(row[j]);
      squares += c * c;
      column[j] += c;
    }
    observed += (squares - rd) / (rd * (rd - 1.0));
  }
  KappaResult out;
  out.observed = observed / static_cast<double>(n);
  for (double c : column) {
    const double p = c / (static_cast<double>(n) * rd);
    out.expected += p * p;
  }
  if (out.expected >= 1.0 - 1e-15) {
    out.degenerate = true;
    return out;
  }
  out.kappa = (out.observed - out.expected) / (1.0 - out.expected);
  return out;
}

std::vector<AnnotationRecord> load_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string text;
  size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw SchemaError(line, std::string("malformed JSON: ") + ex.what());
    }
    if (!j.is_object()) throw SchemaError(line, "record must be a JSON object");
    AnnotationRecord rec;
    rec.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                              : "line-" + std::to_string(line);
    if (!j.contains("masks") || !j["masks"].is_object()) {
      throw SchemaError(line, "missing object field \"masks\"");
    }
    for (const auto& [who, mask] : j["masks"].items()) {
      rec.masks[who] = read_mask(mask, line, "mask of annotator " + who);
    }
    if (j.contains("labels")) {
      if (!j["labels"].is_object()) throw SchemaError(line, "\"labels\" must be an object");
      for (const auto& [who, label] : j["labels"].items()) {
        if (!label.is_string()) throw SchemaError(line, "labels must be strings");
        rec.labels[who] = label.get<std::string>();
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open annotations " + path);
  return load_annotations(in);
}

AnnotationMatrix rationale_matrix(const std::vector<AnnotationRecord>& records) {
  AnnotationMatrix m;
  for (const auto& rec : records) {
    std::vector<std::vector<uint8_t>> masks;
    for (const auto& [who, mask] : rec.masks) masks.push_back(mask);
    if (masks.empty()) continue;
    const size_t n = masks[0].size();
    for (const auto& mask : masks) {
      if (mask.size() != n) throw DataError("record " + rec.id + ": mask lengths differ");
    }
    for (size_t i = 0; i < n; ++i) {
      std::vector<size_t> row(2, 0);
      for (const auto& mask : masks) ++row[mask[i]];
      m.counts.push_back(std::move(row));
    }
  }
  return m;
}

AnnotationMatrix label_matrix(const std::vector<AnnotationRecord>& records,
                              std::vector<std::string>* categories) {
  std::set<std::string> names;
  for (const auto& rec : records)
    for (const auto& [who, label] : rec.labels) names.insert(label);
  std::vector<std::string> cols(names.begin(), names.end());
  AnnotationMatrix m;
  for (const auto& rec : records) {
    if (rec.labels.empty()) continue;
    std::vector<size_t> row(cols.size(), 0);
    for (const auto& [who, label] : rec.labels) {
      ++row[static_cast<size_t>(std::lower_bound(cols.begin(), cols.end(), label) -
                                cols.begin())];
    }
    m.counts.push_back(std::move(row));
  }
  if (categories) *categories = std::move(cols);
  return m;
}

}  // namespace mtx
