#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mtxplain/data.h"
#include "mtxplain/error.h"
#include "mtxplain/rng.h"
#include "test_util.h"

using namespace mtx;

namespace {

const char* kThreeLines =
    R"({"id":"a","text":"Tum  BAHUT bure ho","bully":"bully","sentiment":"negative","target":"community","rationale":[0,1,1,0]})"
    "\n"
    R"({"id":"b","text":"nice pic yaar","bully":"non-bully","sentiment":"positive","rationale":[0,0,0]})"
    "\n\n"
    R"({"text":"ok","bully":"Non_Bully","sentiment":"Neutral","target":"NA","rationale":[false]})"
    "\n";

ParsedDataset parse_string(const std::string& text, bool strict = false) {
  std::istringstream in(text);
  return parse_dataset(in, ParseOptions{strict});
}

Example make(bool bully, size_t tokens, size_t highlighted,
             Sentiment s = Sentiment::kNegative) {
  Example e;
  for (size_t i = 0; i < tokens; ++i) e.tokens.push_back("w" + std::to_string(i));
  e.rationale.assign(tokens, 0);
  for (size_t i = 0; i < highlighted; ++i) e.rationale[i] = 1;
  e.bully = bully;
  e.sentiment = s;
  e.target = bully ? Target::kCommunity : Target::kNA;
  return e;
}

std::vector<size_t> labels_of(size_t ones, size_t zeros) {
  std::vector<size_t> labels(ones, 1);
  labels.insert(labels.end(), zeros, 0);
  return labels;
}

}  // namespace

TEST_CASE("tokenize lowercases ASCII and splits on whitespace") {
  CHECK(tokenize("  Hello\tWORLD  yaar!\n") == std::vector<std::string>{"hello", "world", "yaar!"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("\xE0\xA4\x85 B") == std::vector<std::string>{"\xE0\xA4\x85", "b"});
}

TEST_CASE("label parsing") {
  CHECK(parse_target("attacking_relatives_and_friends") == Target::kAttackingRelativesAndFriends);
  CHECK(parse_target("Sexual Orientation") == Target::kSexualOrientation);
  CHECK(parse_target("na") == Target::kNA);
  CHECK_FALSE(parse_target("politics"));
  CHECK(parse_sentiment("NEGATIVE") == Sentiment::kNegative);
  CHECK_FALSE(parse_sentiment("angry"));
  CHECK(parse_bully("nonbully") == false);
  CHECK_FALSE(parse_bully("yes"));
  for (size_t i = 0; i < kNumTargets; ++i) {
    CHECK(parse_target(target_name(static_cast<Target>(i))) == static_cast<Target>(i));
  }
}

TEST_CASE("well-formed three-record file parses") {
  ParsedDataset d = parse_string(kThreeLines);
  REQUIRE(d.examples.size() == 3);
  CHECK(d.violations.empty());
  const Example& a = d.examples[0];
  CHECK(a.id == "a");
  CHECK(a.tokens == std::vector<std::string>{"tum", "bahut", "bure", "ho"});
  CHECK(a.bully);
  CHECK(a.sentiment == Sentiment::kNegative);
  CHECK(a.target == Target::kCommunity);
  CHECK(a.rationale_count() == 2);
  CHECK(d.examples[1].target == Target::kNA);
  CHECK(d.examples[2].id == "line-4");
  CHECK(d.examples[2].sentiment == Sentiment::kNeutral);
}

TEST_CASE("schema errors name the line") {
  auto line_of = [](const std::string& text) -> size_t {
    try {
      parse_string(text);
    } catch (const SchemaError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string good =
      R"({"text":"a b","bully":"non-bully","sentiment":"neutral","rationale":[0,0]})"
      "\n";
  CHECK(line_of(good + R"({"text":"a b c","bully":"bully","sentiment":"negative","target":"religion","rationale":[0,1]})") == 2);
  CHECK(line_of(good + good + "{not json") == 3);
  CHECK(line_of(R"({"text":"a","bully":"maybe","sentiment":"neutral","rationale":[0]})") == 1);
  CHECK(line_of(R"({"text":"a","bully":"bully","sentiment":"neutral","target":"x","rationale":[1]})") == 1);
  CHECK(line_of(R"({"text":"a","bully":"bully","sentiment":"neutral","rationale":[2]})") == 1);
  CHECK(line_of(R"({"text":"a","sentiment":"neutral","rationale":[0]})") == 1);
  CHECK(line_of(R"({"text":"   ","bully":"bully","sentiment":"neutral","rationale":[]})") == 1);
  CHECK(line_of("[1,2]") == 1);
  CHECK_THROWS_AS(parse_dataset("/nonexistent/data.jsonl"), FormatError);
}

TEST_CASE("label-consistency violations are reported or fatal in strict mode") {
  const std::string text =
      R"({"id":"x","text":"a b","bully":"non-bully","sentiment":"neutral","rationale":[1,0]})"
      "\n"
      R"({"id":"y","text":"a b","bully":"bully","sentiment":"neutral","rationale":[1,0]})"
      "\n"
      R"({"id":"z","text":"a b","bully":"non-bully","sentiment":"neutral","target":"religion","rationale":[0,0]})"
      "\n";
  ParsedDataset d = parse_string(text);
  CHECK(d.examples.size() == 3);
  REQUIRE(d.violations.size() == 3);
  CHECK(d.violations[0].line == 1);
  CHECK(d.violations[0].id == "x");
  CHECK(d.violations[0].message.find("highlighted") != std::string::npos);
  CHECK(d.violations[1].message.find("target NA") != std::string::npos);
  CHECK(d.violations[2].line == 3);
  try {
    parse_string(text, true);
    FAIL("strict mode accepted a violation");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 1);
  }
}

TEST_CASE("parse, write, parse is the identity") {
  ParsedDataset first = parse_string(kThreeLines);
  std::ostringstream out;
  write_dataset(out, first.examples);
  ParsedDataset second = parse_string(out.str());
  REQUIRE(second.examples.size() == first.examples.size());
  for (size_t i = 0; i < first.examples.size(); ++i) {
    const Example& a = first.examples[i];
    const Example& b = second.examples[i];
    CHECK(a.id == b.id);
    CHECK(a.text == b.text);
    CHECK(a.tokens == b.tokens);
    CHECK(a.bully == b.bully);
    CHECK(a.sentiment == b.sentiment);
    CHECK(a.target == b.target);
    CHECK(a.rationale == b.rationale);
  }
  std::ostringstream again;
  write_dataset(again, second.examples);
  CHECK(again.str() == out.str());

  mtx::testing::TempDir dir("data");
  write_dataset(dir.file("d.jsonl"), first.examples);
  CHECK(parse_dataset(dir.file("d.jsonl")).examples.size() == 3);
}

TEST_CASE("dataset statistics") {
  SUBCASE("single bully post") {
    DatasetStats s = dataset_stats({make(true, 4, 2)});
    CHECK(s.total == 1);
    CHECK(s.bully == 1);
    CHECK(s.mean_tokens == 4.0);
    CHECK(s.mean_rationale_tokens == 2.0);
    CHECK(s.rationale_mean_defined);
  }
  SUBCASE("all non-bully") {
    DatasetStats s = dataset_stats({make(false, 3, 0), make(false, 5, 0)});
    CHECK(s.non_bully == 2);
    CHECK(s.mean_tokens == 4.0);
    CHECK(s.mean_rationale_tokens == 0.0);
    CHECK_FALSE(s.rationale_mean_defined);
    CHECK(s.top_rationale_words.empty());
  }
  SUBCASE("counts and word coverage") {
    ParsedDataset d = parse_string(
        R"({"text":"tu pagal hai pagal !","bully":"bully","sentiment":"negative","target":"profession","rationale":[0,1,0,1,1]})"
        "\n"
        R"({"text":"pagal kutta","bully":"bully","sentiment":"neutral","target":"religion","rationale":[1,1]})"
        "\n"
        R"({"text":"good","bully":"non-bully","sentiment":"positive","rationale":[0]})"
        "\n");
    DatasetStats s = dataset_stats(d.examples, 5);
    CHECK(s.total == 3);
    CHECK(s.bully + s.non_bully == s.total);
    CHECK(s.sentiment[0] + s.sentiment[1] + s.sentiment[2] == s.total);
    CHECK(s.target[static_cast<size_t>(Target::kNA)] == 1);
    CHECK(s.target[static_cast<size_t>(Target::kProfession)] == 1);
    CHECK(s.mean_tokens == doctest::Approx(8.0 / 3.0));
    CHECK(s.mean_rationale_tokens == 2.5);
    REQUIRE(s.top_rationale_words.size() == 2);
    CHECK(s.top_rationale_words[0].word == "pagal");
    CHECK(s.top_rationale_words[0].posts == 2);
    CHECK(s.top_rationale_words[0].coverage == 100.0);
    CHECK(s.top_rationale_words[1].word == "kutta");
    CHECK(s.top_rationale_words[1].coverage == 50.0);
    nlohmann::json j = stats_to_json(s);
    CHECK(j["sentiment"]["negative"] == 1);
    CHECK(j["target"]["NA"] == 1);
  }
  CHECK_THROWS_AS(dataset_stats({}), DataError);
}

TEST_CASE("stratified k-fold: exact divisibility") {
  auto folds = stratified_kfold(labels_of(50, 50), 10, 3);
  REQUIRE(folds.size() == 10);
  for (const auto& f : folds) {
    size_t ones = 0;
    for (size_t i : f) ones += i < 50;
    CHECK(ones == 5);
    CHECK(f.size() - ones == 5);
  }
}

TEST_CASE("stratified k-fold: 52/51 split over 10 folds stays proportional") {
  const std::vector<size_t> labels = labels_of(52, 51);
  for (uint64_t seed : {1u, 2u, 99u}) {
    auto folds = stratified_kfold(labels, 10, seed);
    std::vector<size_t> seen(labels.size(), 0);
    for (const auto& f : folds) {
      size_t c1 = 0, c0 = 0;
      for (size_t i : f) {
        ++seen[i];
        (labels[i] ? c1 : c0)++;
      }
      // Against the per-fold share and against the fold's own size.
      CHECK(std::abs(static_cast<double>(c1) - 52.0 / 10) <= 1.0);
      CHECK(std::abs(static_cast<double>(c0) - 51.0 / 10) <= 1.0);
      CHECK(std::abs(static_cast<double>(c1) - 52.0 * f.size() / 103.0) <= 1.0);
      CHECK(std::abs(static_cast<double>(c0) - 51.0 * f.size() / 103.0) <= 1.0);
    }
    // Disjoint and exhaustive.
    for (size_t n : seen) CHECK(n == 1);
  }
}

TEST_CASE("stratified k-fold determinism and errors") {
  const std::vector<size_t> labels = labels_of(30, 17);
  CHECK(stratified_kfold(labels, 5, 8) == stratified_kfold(labels, 5, 8));
  CHECK(stratified_kfold(labels, 5, 8) != stratified_kfold(labels, 5, 9));
  CHECK_THROWS_AS(stratified_kfold(labels_of(30, 3), 5, 1), DataError);
  CHECK_THROWS_AS(stratified_kfold(labels, 1, 1), ConfigError);
  auto folds = stratified_kfold(labels, 5, 8);
  auto rest = complement(folds[0], labels.size());
  CHECK(rest.size() + folds[0].size() == labels.size());

  std::vector<Example> ex;
  for (int i = 0; i < 12; ++i) ex.push_back(make(i % 2 == 0, 2, 0, static_cast<Sentiment>(i % 3)));
  CHECK(stratified_kfold(ex, 2, 1, StratifyOn::kBullySentiment).size() == 2);
  CHECK_THROWS_AS(stratified_kfold(ex, 3, 1, StratifyOn::kBullySentiment), DataError);
}

TEST_CASE("majority vote examples") {
  VoteResult clear = majority_vote({{1, 0}, {1, 0}, {1, 1}});
  CHECK(clear.mask == std::vector<uint8_t>{1, 0});
  CHECK(clear.ties.empty());

  VoteResult tie = majority_vote({{1}, {0}});
  CHECK(tie.mask == std::vector<uint8_t>{0});
  CHECK(tie.ties == std::vector<size_t>{0});

  std::vector<uint8_t> m{0, 1, 1, 0, 1};
  CHECK(majority_vote({m, m, m}).mask == m);

  CHECK_THROWS_AS(majority_vote({{1}}), DataError);
  CHECK_THROWS_AS(majority_vote({{1, 0}, {1}}), DataError);
  CHECK_THROWS_AS(majority_vote({{2}, {1}}), DataError);
}

TEST_CASE("majority vote ignores annotator order") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<uint8_t>> masks(2 + rng.below(4), std::vector<uint8_t>(7));
    for (auto& m : masks)
      for (auto& v : m) v = static_cast<uint8_t>(rng.below(2));
    VoteResult a = majority_vote(masks);
    rng.shuffle(std::span(masks));
    VoteResult b = majority_vote(masks);
    CHECK(a.mask == b.mask);
    CHECK(a.ties == b.ties);
  }
}

TEST_CASE("Fleiss kappa: perfect agreement and degenerate input") {
  AnnotationMatrix perfect{{{3, 0}, {0, 3}, {3, 0}}};
  KappaResult k = fleiss_kappa(perfect);
  CHECK(k.kappa == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_FALSE(k.degenerate);

  KappaResult d = fleiss_kappa(AnnotationMatrix{{{4, 0}, {4, 0}}});
  CHECK(d.degenerate);
  CHECK(d.observed == 1.0);

  CHECK_THROWS_AS(fleiss_kappa(AnnotationMatrix{{{2, 1}, {1, 1}}}), DataError);
  CHECK_THROWS_AS(fleiss_kappa(AnnotationMatrix{{{1, 0}}}), DataError);
  CHECK_THROWS_AS(fleiss_kappa(AnnotationMatrix{}), DataError);
}

TEST_CASE("Fleiss kappa: 4 items by 3 raters hand matrix") {
  // Per-item agreement 1, 1, 1/3, 0 -> mean 7/12. Category shares 5/12,
  // 6/12, 1/12 -> chance 62/144 = 31/72. Kappa = (7/12 - 31/72) / (41/72).
  AnnotationMatrix m{{{3, 0, 0}, {0, 3, 0}, {1, 2, 0}, {1, 1, 1}}};
  KappaResult k = fleiss_kappa(m);
  CHECK(std::abs(k.observed - 7.0 / 12.0) < 1e-12);
  CHECK(std::abs(k.expected - 31.0 / 72.0) < 1e-12);
  CHECK(std::abs(k.kappa - 11.0 / 41.0) < 1e-9);

  AnnotationMatrix items_permuted{{m.counts[2], m.counts[0], m.counts[3], m.counts[1]}};
  CHECK(std::abs(fleiss_kappa(items_permuted).kappa - k.kappa) < 1e-12);
  AnnotationMatrix cols_permuted;
  for (const auto& row : m.counts) cols_permuted.counts.push_back({row[2], row[0], row[1]});
  CHECK(std::abs(fleiss_kappa(cols_permuted).kappa - k.kappa) < 1e-12);
}

TEST_CASE("annotation files feed agreement matrices") {
  std::istringstream in(
      R"({"id":"p1","masks":{"a":[1,0,1],"b":[1,0,0],"c":[1,1,1]},"labels":{"a":"bully","b":"bully","c":"non-bully"}})"
      "\n"
      R"({"id":"p2","masks":{"a":[0,0],"b":[0,0],"c":[0,1]},"labels":{"a":"non-bully","b":"non-bully","c":"non-bully"}})"
      "\n");
  auto records = load_annotations(in);
  REQUIRE(records.size() == 2);
  AnnotationMatrix tokens = rationale_matrix(records);
  CHECK(tokens.items() == 5);
  CHECK(tokens.raters() == 3);
  CHECK(tokens.counts[0] == std::vector<size_t>{0, 3});
  CHECK(tokens.counts[2] == std::vector<size_t>{1, 2});
  std::vector<std::string> names;
  AnnotationMatrix labels = label_matrix(records, &names);
  CHECK(names == std::vector<std::string>{"bully", "non-bully"});
  CHECK(labels.counts == std::vector<std::vector<size_t>>{{2, 1}, {0, 3}});

  std::istringstream bad(R"({"id":"p","masks":{"a":[1,3]}})");
  CHECK_THROWS_AS(load_annotations(bad), SchemaError);
  std::istringstream mismatch(R"({"id":"p","masks":{"a":[1,0],"b":[1]}})");
  CHECK_THROWS_AS(rationale_matrix(load_annotations(mismatch)), DataError);
}
