#include "mtxplain/cli.h"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mtxplain/data.h"
#include "mtxplain/embed.h"
#include "mtxplain/error.h"
#include "mtxplain/metrics.h"
#include "mtxplain/train.h"

namespace mtx {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  template <typename... Args>
  void operator()(const Args&... args) const {
    if (quiet_) return;
    err_ << "[mtxplain] ";
    (err_ << ... << args);
    err_ << '\n';
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

uint64_t parse_seed(const std::string& text, const std::string& source) {
  size_t used = 0;
  unsigned long long v = 0;
  try {
    if (text.empty() || text[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(source + " is not a non-negative integer: \"" + text + "\"");
  }
  if (used != text.size()) {
    throw ConfigError(source + " is not a non-negative integer: \"" + text + "\"");
  }
  return v;
}

json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + what + " " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw FormatError("malformed " + what + " " + path + ": " + ex.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("cannot write " + path);
}

std::vector<double> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open score file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const size_t first = text.find_first_not_of(" \t\r\n");
  std::vector<double> values;
  if (first != std::string::npos && text[first] == '[') {
    try {
      values = json::parse(text).get<std::vector<double>>();
    } catch (const json::exception& ex) {
      throw FormatError("malformed score file " + path + ": " + ex.what());
    }
    return values;
  }
  std::istringstream words(text);
  std::string word;
  while (words >> word) {
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(word, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != word.size()) throw FormatError("score file " + path + ": not a number: " + word);
    values.push_back(v);
  }
  return values;
}

// Options shared by train and kfold.
struct RunOptions {
  std::string data;
  std::string embeddings;
  std::string contextual;
  std::string config;
  std::string tasks;
  std::string variant;
  std::string oov = "random";
  std::string seed;
  size_t limit = 0;
  size_t epochs = 0;
  double lr = 0;
  size_t batch_size = 0;
  double dropout = 0;
  double weight_decay = 0;
  size_t max_len = 0;
  bool decoupled = false;
  bool strict = false;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* dropout_opt = nullptr;
  CLI::Option* wd_opt = nullptr;
  CLI::Option* max_len_opt = nullptr;
};

void add_run_options(CLI::App* sub, RunOptions& o) {
  sub->add_option("--data", o.data, "Dataset, JSON lines")->required();
  auto* emb = sub->add_option("--embeddings", o.embeddings,
                              "Word vectors in text format (\"count dim\" header)");
  auto* ctx = sub->add_option("--contextual", o.contextual,
                              "Precomputed per-post vectors, JSON lines keyed by id");
  emb->excludes(ctx);
  sub->add_option("--limit", o.limit, "Read at most this many word vectors (0 = all)");
  sub->add_option("--oov", o.oov, "Unknown-word vectors: zeros or random (default)")
      ->check(CLI::IsMember({"zeros", "random"}));
  sub->add_option("--tasks", o.tasks, "Comma-separated tasks: cd,rd[,sa][,ti] (default cd,rd)");
  sub->add_option("--variant", o.variant,
                  "Encoder: mExCB (default), mExCB_CNN, mExCB_GRU, BiRNN, BiRNN_attn, CNN_GRU");
  sub->add_option("--config", o.config, "JSON object of configuration keys; flags override it");
  o.seed_opt = sub->add_option("--seed", o.seed, "Seed (falls back to MTXPLAIN_SEED, then 42)");
  o.epochs_opt = sub->add_option("--epochs", o.epochs, "Training epochs (default 20)");
  o.lr_opt = sub->add_option("--lr", o.lr, "Adam learning rate (default 1e-4)");
  o.batch_opt = sub->add_option("--batch-size", o.batch_size, "Mini-batch size (default 32)");
  o.dropout_opt = sub->add_option("--dropout", o.dropout, "Dropout rate in the heads (default 0.25)");
  o.wd_opt = sub->add_option("--weight-decay", o.weight_decay, "Weight decay (default 1e-3)");
  o.max_len_opt = sub->add_option("--max-len", o.max_len, "Tokens per post after padding (default 64)");
  sub->add_flag("--decoupled-wd", o.decoupled, "Decoupled weight decay instead of L2");
  sub->add_flag("--strict", o.strict, "Reject posts whose labels contradict each other");
}

std::set<std::string> known_config_keys() {
  std::set<std::string> keys{"folds", "jobs", "stratify"};
  const json model = model_config_to_json(ModelConfig{});
  const json train = train_config_to_json(TrainConfig{});
  for (const auto& [k, v] : model.items()) keys.insert(k);
  for (const auto& [k, v] : train.items()) keys.insert(k);
  return keys;
}

struct Resolved {
  json settings;  // merged configuration file and flags
  ModelConfig model;
  TrainConfig train;
};

// Config file < MTXPLAIN_SEED (seed only, when the file has none) < flags.
Resolved resolve_config(const RunOptions& o, size_t embed_dim) {
  json s = json::object();
  if (!o.config.empty()) {
    s = read_json_file(o.config, "configuration");
    if (!s.is_object()) throw ConfigError("configuration " + o.config + " must be a JSON object");
    const std::set<std::string> known = known_config_keys();
    for (const auto& [k, v] : s.items()) {
      if (!known.count(k)) throw ConfigError("unknown configuration key \"" + k + "\"");
    }
  }
  if (o.seed_opt->count()) {
    s["seed"] = parse_seed(o.seed, "--seed");
  } else if (!s.contains("seed")) {
    if (const char* env = std::getenv("MTXPLAIN_SEED")) s["seed"] = parse_seed(env, "MTXPLAIN_SEED");
  }
  if (!o.tasks.empty()) s["tasks"] = o.tasks;
  if (!o.variant.empty()) s["variant"] = o.variant;
  if (o.epochs_opt->count()) s["epochs"] = o.epochs;
  if (o.lr_opt->count()) s["lr"] = o.lr;
  if (o.batch_opt->count()) s["batch_size"] = o.batch_size;
  if (o.dropout_opt->count()) s["dropout"] = o.dropout;
  if (o.wd_opt->count()) s["weight_decay"] = o.weight_decay;
  if (o.max_len_opt->count()) s["max_len"] = o.max_len;
  if (o.decoupled) s["decoupled_weight_decay"] = true;
  if (s.contains("embed_dim") && s["embed_dim"] != embed_dim) {
    throw ConfigError("configuration sets embed_dim " + s["embed_dim"].dump() +
                      " but the vectors have " + std::to_string(embed_dim) + " dimensions");
  }
  s["embed_dim"] = embed_dim;

  Resolved r;
  r.model = model_config_from_json(s);
  r.model.validate();
  r.train = train_config_from_json(s);
  r.train.validate();
  r.settings = std::move(s);
  return r;
}

struct LoadedInputs {
  std::vector<Example> examples;
  std::shared_ptr<EmbeddingTable> table;
  std::unique_ptr<Embedder> embedder;
};

uint64_t seed_for_loading(const RunOptions& o) {
  if (o.seed_opt->count()) return parse_seed(o.seed, "--seed");
  if (!o.config.empty()) {
    json s = read_json_file(o.config, "configuration");
    if (s.is_object() && s.contains("seed") && s["seed"].is_number_unsigned()) {
      return s["seed"].get<uint64_t>();
    }
  }
  if (const char* env = std::getenv("MTXPLAIN_SEED")) return parse_seed(env, "MTXPLAIN_SEED");
  return ModelConfig{}.seed;
}

LoadedInputs load_inputs(const RunOptions& o, const Log& log) {
  if (o.embeddings.empty() && o.contextual.empty()) {
    throw ConfigError("one of --embeddings or --contextual is required");
  }
  LoadedInputs in;
  ParsedDataset parsed = parse_dataset(o.data, ParseOptions{o.strict});
  for (const Violation& v : parsed.violations) {
    log("warning: line ", v.line, " (", v.id, "): ", v.message);
  }
  in.examples = std::move(parsed.examples);
  if (in.examples.empty()) throw DataError("dataset " + o.data + " has no posts");
  log("read ", in.examples.size(), " posts from ", o.data);

  if (!o.embeddings.empty()) {
    LoadReport report;
    std::optional<size_t> limit;
    if (o.limit > 0) limit = o.limit;
    in.table = std::make_shared<EmbeddingTable>(load_embeddings(
        o.embeddings, limit, &report, parse_oov_policy(o.oov), seed_for_loading(o)));
    log("loaded ", report.loaded, " vectors of width ", in.table->dim(), " (", report.skipped_lines,
        " lines skipped)");
    in.embedder = std::make_unique<StaticEmbedder>(in.table);
  } else {
    auto store = std::make_shared<ContextualStore>(load_contextual(o.contextual));
    for (const Example& e : in.examples) {
      if (!store->contains(e.id)) throw DataError("no contextual vectors for post " + e.id);
    }
    log("loaded contextual vectors for ", store->size(), " posts, width ", store->dim());
    in.embedder = std::make_unique<ContextualEmbedder>(store);
  }
  return in;
}

int cmd_train(const RunOptions& o, const std::string& out_dir, std::ostream& out, const Log& log) {
  const auto start = std::chrono::steady_clock::now();
  LoadedInputs in = load_inputs(o, log);
  Resolved cfg = resolve_config(o, in.embedder->dim());
  log("tasks ", cfg.model.tasks.to_string(), ", variant ", variant_name(cfg.model.encoder.variant),
      ", ", cfg.train.epochs, " epochs");

  MultiTaskModel model(cfg.model);
  FitResult fitted = fit(model, *in.embedder, in.examples, cfg.train,
                         [&](size_t epoch, double loss) {
                           log("epoch ", epoch, "/", cfg.train.epochs, " loss ", loss);
                         });
  save_checkpoint(out_dir, model, cfg.train, in.table.get(), cfg.train.epochs);
  write_json_file((fs::path(out_dir) / "loss_trace.json").string(),
                  json{{"loss_trace", fitted.epoch_loss}});
  Evaluation eval = evaluate(model, *in.embedder, in.examples);
  log("checkpoint written to ", out_dir, " in ", seconds_since(start), " s");

  out << json{{"checkpoint", out_dir},
              {"config_hash", config_hash(cfg.model)},
              {"config", model_config_to_json(cfg.model)},
              {"train", train_config_to_json(cfg.train)},
              {"examples", in.examples.size()},
              {"steps", fitted.steps},
              {"loss_trace", fitted.epoch_loss},
              {"train_metrics", evaluation_to_json(eval)}}
             .dump(2)
      << '\n';
  return 0;
}

struct KFoldFlags {
  size_t folds = 10;
  size_t jobs = 1;
  std::string stratify = "bully";
  std::string out;
  CLI::Option* folds_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
  CLI::Option* stratify_opt = nullptr;
};

int cmd_kfold(const RunOptions& o, const KFoldFlags& f, std::ostream& out, const Log& log) {
  const auto start = std::chrono::steady_clock::now();
  LoadedInputs in = load_inputs(o, log);
  Resolved cfg = resolve_config(o, in.embedder->dim());
  KFoldOptions opt;
  try {
    opt.folds = f.folds_opt->count() ? f.folds : cfg.settings.value("folds", f.folds);
    opt.jobs = f.jobs_opt->count() ? f.jobs : cfg.settings.value("jobs", f.jobs);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad folds/jobs setting: ") + ex.what());
  }
  std::string strat = f.stratify;
  if (!f.stratify_opt->count() && cfg.settings.contains("stratify")) {
    if (!cfg.settings["stratify"].is_string()) throw ConfigError("stratify must be a string");
    strat = cfg.settings["stratify"].get<std::string>();
  }
  if (strat == "bully") {
    opt.stratify = StratifyOn::kBully;
  } else if (strat == "bully-sentiment") {
    opt.stratify = StratifyOn::kBullySentiment;
  } else {
    throw ConfigError("stratify must be bully or bully-sentiment, got \"" + strat + "\"");
  }
  if (opt.folds < 2) throw ConfigError("--folds must be at least 2");
  if (opt.jobs < 1) throw ConfigError("--jobs must be at least 1");
  log(opt.folds, "-fold run on ", in.examples.size(), " posts with ", opt.jobs, " worker(s)");

  KFoldReport report =
      run_kfold(in.examples, *in.embedder, cfg.model, cfg.train, opt, [&](const FoldReport& f) {
        log("fold ", f.fold + 1, " done: CD accuracy ", f.eval.cd.accuracy, " macro-F1 ",
            f.eval.cd.macro_f1);
      });
  json j = kfold_to_json(report);
  j["config"] = model_config_to_json(cfg.model);
  j["train"] = train_config_to_json(cfg.train);
  j["stratify"] = strat;
  if (!f.out.empty()) write_json_file(f.out, j);
  log("finished in ", seconds_since(start), " s");
  out << j.dump(2) << '\n';
  return 0;
}

json class_json(size_t label, const std::vector<double>& probs,
                const std::function<std::string(size_t)>& name) {
  json all = json::object();
  for (size_t i = 0; i < probs.size(); ++i) all[name(i)] = probs[i];
  return {{"label", name(label)}, {"probability", probs[label]}, {"probabilities", all}};
}

int cmd_predict(const std::string& model_dir, const std::string& text, std::ostream& out,
                const Log& log) {
  Example e;
  e.id = "input";
  e.text = text;
  e.tokens = tokenize(text);
  if (e.tokens.empty()) throw DataError("--text has no tokens");

  Checkpoint ck = load_checkpoint(model_dir);
  if (!ck.embeddings) {
    throw CheckpointError("checkpoint " + model_dir +
                          " has no word vectors (trained on contextual input); cannot embed text");
  }
  const ModelConfig& mc = ck.model->config();
  if (e.tokens.size() > mc.encoder.max_len) {
    log("warning: only the first ", mc.encoder.max_len, " of ", e.tokens.size(),
        " tokens are seen by the model");
  }
  StaticEmbedder embedder(ck.embeddings);
  Prediction p = predict(*ck.model, embedder, e);

  json j;
  j["tokens"] = e.tokens;
  j["bully"] = class_json(p.bully, p.p_bully, [](size_t i) { return bully_name(i == 1); });
  if (p.sentiment) {
    j["sentiment"] = class_json(*p.sentiment, p.p_sentiment, [](size_t i) {
      return sentiment_name(static_cast<Sentiment>(i));
    });
  }
  if (p.target) {
    j["target"] = class_json(*p.target, p.p_target,
                             [](size_t i) { return target_name(static_cast<Target>(i)); });
  }
  if (mc.tasks.rd) {
    json tokens = json::array();
    json highlighted = json::array();
    for (size_t i = 0; i < e.tokens.size(); ++i) {
      tokens.push_back({{"token", e.tokens[i]},
                        {"probability", p.rationale_probs[i]},
                        {"highlight", p.rationale[i] == 1}});
      if (p.rationale[i]) highlighted.push_back(e.tokens[i]);
    }
    j["rationale_tokens"] = tokens;
    j["highlighted"] = highlighted;
    j["threshold"] = 0.5;
  }
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_stats(const std::string& data, size_t top, bool strict, std::ostream& out,
              const Log& log) {
  ParsedDataset parsed = parse_dataset(data, ParseOptions{strict});
  json j = stats_to_json(dataset_stats(parsed.examples, top));
  json violations = json::array();
  for (const Violation& v : parsed.violations) {
    violations.push_back({{"line", v.line}, {"id", v.id}, {"message", v.message}});
  }
  if (!parsed.violations.empty()) log(parsed.violations.size(), " label inconsistencies");
  j["violations"] = violations;
  out << j.dump(2) << '\n';
  return 0;
}

json kappa_json(const KappaResult& k, const AnnotationMatrix& m) {
  return {{"kappa", k.kappa},         {"observed", k.observed}, {"expected", k.expected},
          {"degenerate", k.degenerate}, {"items", m.items()},     {"raters", m.raters()}};
}

int cmd_agreement(const std::string& path, const std::string& votes_out, std::ostream& out,
                  const Log& log) {
  std::vector<AnnotationRecord> records = load_annotations(path);
  if (records.empty()) throw DataError("no annotation records in " + path);
  log("read ", records.size(), " annotated posts");
  json j{{"posts", records.size()}};

  std::vector<AnnotationRecord> with_masks;
  for (const auto& r : records) {
    if (!r.masks.empty()) with_masks.push_back(r);
  }
  if (!with_masks.empty()) {
    AnnotationMatrix m = rationale_matrix(with_masks);
    j["rationale"] = kappa_json(fleiss_kappa(m), m);

    size_t tokens = 0, highlighted = 0, ties = 0;
    std::ofstream votes;
    if (!votes_out.empty()) {
      votes.open(votes_out);
      if (!votes) throw FormatError("cannot write " + votes_out);
    }
    for (const auto& r : with_masks) {
      std::vector<std::vector<uint8_t>> masks;
      for (const auto& [annotator, mask] : r.masks) masks.push_back(mask);
      VoteResult vote = majority_vote(masks);
      tokens += vote.mask.size();
      for (uint8_t b : vote.mask) highlighted += b;
      ties += vote.ties.size();
      if (votes.is_open()) {
        std::vector<int> mask(vote.mask.begin(), vote.mask.end());
        votes << json{{"id", r.id}, {"rationale", mask}, {"ties", vote.ties}}.dump() << '\n';
      }
    }
    j["majority"] = {{"tokens", tokens}, {"highlighted", highlighted}, {"ties", ties}};
    if (ties > 0) log(ties, " tied token votes set to 0");
  }

  std::vector<std::string> categories;
  AnnotationMatrix labels = label_matrix(records, &categories);
  if (labels.items() > 0) {
    json k = kappa_json(fleiss_kappa(labels), labels);
    k["categories"] = categories;
    j["labels"] = k;
  }
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_align(const std::string& src, const std::string& tgt, const std::string& dict,
              const std::string& out_path, size_t limit, std::ostream& out, const Log& log) {
  std::optional<size_t> cap;
  if (limit > 0) cap = limit;
  EmbeddingTable source = load_embeddings(src, cap);
  EmbeddingTable target = load_embeddings(tgt, cap);
  BilingualDictionary pairs = load_dictionary(dict);
  log("aligning ", source.size(), " source vectors to ", target.size(), " target vectors with ",
      pairs.pairs.size(), " dictionary pairs");
  Alignment a = procrustes_align(source, target, pairs);

  const size_t d = a.mapping.rows();
  double ortho = 0.0;
  for (size_t r = 0; r < d; ++r) {
    for (size_t c = 0; c < d; ++c) {
      double dot = 0.0;
      for (size_t k = 0; k < d; ++k) dot += a.mapping.at(k, r) * a.mapping.at(k, c);
      ortho = std::max(ortho, std::abs(dot - (r == c ? 1.0 : 0.0)));
    }
  }
  save_embeddings(a.mapped_source, out_path);
  out << json{{"out", out_path},
              {"dim", d},
              {"pairs_used", a.pairs_used},
              {"distance_identity", a.distance_identity},
              {"distance_mapped", a.distance_mapped},
              {"orthogonality_error", ortho}}
             .dump(2)
      << '\n';
  return 0;
}

int cmd_ttest(const std::string& a_path, const std::string& b_path, std::ostream& out) {
  std::vector<double> a = read_scores(a_path);
  std::vector<double> b = read_scores(b_path);
  TTestResult t = paired_ttest(a, b);
  Summary sa = summarize(a), sb = summarize(b);
  out << json{{"n", a.size()},         {"mean_a", sa.mean}, {"mean_b", sb.mean},
              {"mean_diff", sa.mean - sb.mean}, {"t", t.t},         {"df", t.df},
              {"p", t.p},                  {"zero_variance", t.zero_variance}}
             .dump(2)
      << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multitask cyberbullying detection with token rationales for code-mixed posts."};
  app.name("mtxplain");
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages on stderr");

  RunOptions train_opts;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  add_run_options(train, train_opts);
  train->add_option("--out", train_out, "Checkpoint directory")->required();

  RunOptions kfold_opts;
  KFoldFlags kf;
  auto* kfold = app.add_subcommand("kfold", "Stratified k-fold cross-validation report");
  add_run_options(kfold, kfold_opts);
  kf.folds_opt = kfold->add_option("--folds", kf.folds, "Number of folds (default 10)");
  kf.jobs_opt = kfold->add_option("--jobs", kf.jobs, "Folds trained in parallel (default 1)");
  kf.stratify_opt =
      kfold->add_option("--stratify", kf.stratify, "Strata: bully (default) or bully-sentiment");
  kfold->add_option("--out", kf.out, "Also write the report to this file");

  std::string model_dir, text;
  auto* pred = app.add_subcommand("predict", "Labels and highlighted rationale for one post");
  pred->add_option("--model", model_dir, "Checkpoint directory")->required();
  pred->add_option("--text", text, "Post text")->required();

  std::string stats_data;
  size_t top = 10;
  bool stats_strict = false;
  auto* stats = app.add_subcommand("stats", "Label distribution and rationale statistics");
  stats->add_option("--data", stats_data, "Dataset, JSON lines")->required();
  stats->add_option("--top", top, "Most frequently highlighted words to list");
  stats->add_flag("--strict", stats_strict, "Fail on posts whose labels contradict each other");

  std::string annotations, votes_out;
  auto* agree = app.add_subcommand("agreement", "Fleiss' kappa and majority-vote rationales");
  agree->add_option("--annotations", annotations, "Per-annotator masks/labels, JSON lines")
      ->required();
  agree->add_option("--votes-out", votes_out, "Write majority-vote masks as JSON lines");

  std::string src, tgt, dict, align_out;
  size_t align_limit = 0;
  auto* align = app.add_subcommand("align", "Orthogonal Procrustes alignment of word vectors");
  align->add_option("--src", src, "Source vectors, text format")->required();
  align->add_option("--tgt", tgt, "Target vectors, text format")->required();
  align->add_option("--dict", dict, "Seed dictionary: one \"source target\" pair per line")
      ->required();
  align->add_option("--out", align_out, "Mapped source vectors, text format")->required();
  align->add_option("--limit", align_limit, "Read at most this many vectors per file (0 = all)");

  std::string a_path, b_path;
  auto* ttest = app.add_subcommand("ttest", "Paired two-sided t-test on per-fold scores");
  ttest->add_option("--a", a_path, "Scores of system A, one per line or a JSON array")
      ->required();
  ttest->add_option("--b", b_path, "Scores of system B, same order")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const Log log(err, quiet);
  try {
    if (app.got_subcommand(train)) return cmd_train(train_opts, train_out, out, log);
    if (app.got_subcommand(kfold)) {
      return cmd_kfold(kfold_opts, kf, out, log);
    }
    if (app.got_subcommand(pred)) return cmd_predict(model_dir, text, out, log);
    if (app.got_subcommand(stats)) return cmd_stats(stats_data, top, stats_strict, out, log);
    if (app.got_subcommand(agree)) return cmd_agreement(annotations, votes_out, out, log);
    if (app.got_subcommand(align)) {
      return cmd_align(src, tgt, dict, align_out, align_limit, out, log);
    }
    if (app.got_subcommand(ttest)) return cmd_ttest(a_path, b_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace mtx
