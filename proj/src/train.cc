#include "mtxplain/train.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "mtxplain/error.h"
#include "mtxplain/rng.h"

namespace mtx {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {
      {"batch_size", c.batch_size},
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"decoupled_weight_decay", c.decoupled_weight_decay},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"eps", c.eps},
      {"dropout", c.dropout},
      {"epochs", c.epochs},
      {"seed", c.seed},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("training configuration must be a JSON object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("decoupled_weight_decay", c.decoupled_weight_decay);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("dropout", c.dropout);
    get("epochs", c.epochs);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad training configuration: ") + ex.what());
  }
  return c;
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::vector<double>& m,
                 std::vector<double>& v, size_t t, const TrainConfig& cfg,
                 const std::string& name) {
  if (t < 1) throw UsageError("adam_update: step must be >= 1");
  if (grad.size() != theta.size()) throw DimensionError("adam_update: gradient size mismatch");
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + name);
  }
  m.resize(theta.size(), 0.0);
  v.resize(theta.size(), 0.0);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double l2 = cfg.decoupled_weight_decay ? 0.0 : cfg.weight_decay;
  const double decay = cfg.decoupled_weight_decay ? cfg.lr * cfg.weight_decay : 0.0;
  for (size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i] + l2 * theta[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) + decay * theta[i];
  }
}

void adam_step(ParameterStore& params, AdamState& state, const TrainConfig& cfg) {
  const auto& entries = params.entries();
  state.m.resize(entries.size());
  state.v.resize(entries.size());
  ++state.step;
  for (size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].second;
    std::vector<double> zeros;
    std::span<const double> grad = t.grad();
    if (!t.has_grad()) {
      zeros.assign(t.numel(), 0.0);
      grad = zeros;
    }
    adam_update(t.mutable_data(), grad, state.m[i], state.v[i], state.step, cfg,
                entries[i].first);
  }
}

EmbeddedSequence StaticEmbedder::embed(const Example& e, size_t n) const {
  EmbeddedSequence s = embed_sequence(*table_, e.tokens, n);
  if (s.empty) throw DataError("example " + e.id + " has no tokens");
  return s;
}

EmbeddedSequence ContextualEmbedder::embed(const Example& e, size_t n) const {
  EmbeddedSequence s = store_->embed(e.id, n);
  if (s.empty) throw DataError("example " + e.id + " has no contextual vectors");
  return s;
}

Gold gold_for(const Example& e, size_t n) {
  Gold g;
  g.bully = e.bully ? 1 : 0;
  g.sentiment = static_cast<size_t>(e.sentiment);
  g.target = static_cast<size_t>(e.target);
  std::vector<double> r(n, 0.0);
  for (size_t i = 0; i < std::min(n, e.rationale.size()); ++i) r[i] = e.rationale[i];
  g.rationale = std::move(r);
  return g;
}

FitResult fit(MultiTaskModel& model, const Embedder& embedder,
              const std::vector<Example>& train, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw DataError("fit: empty training set");
  const ModelConfig& mc = model.config();
  const size_t n = mc.encoder.max_len;
  if (embedder.dim() != mc.encoder.embed_dim) {
    throw ConfigError("embedding width " + std::to_string(embedder.dim()) +
                      " does not match model embed_dim " + std::to_string(mc.encoder.embed_dim));
  }
  ParameterStore& params = model.parameters();
  Rng shuffle_rng(cfg.seed);
  DropoutStream dropout(cfg.dropout, mix64(cfg.seed ^ 0x6d747864726f7000ULL));
  AdamState adam;
  FitResult result;
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<size_t>(order));
    double epoch_loss = 0.0;
    for (size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      for (size_t k = start; k < end; ++k) {
        const Example& ex = train[order[k]];
        EmbeddedSequence in = embedder.embed(ex, n);
        MultiTaskOutput out = model.forward(in.values, in.mask, &dropout);
        Tensor loss = joint_loss(out, gold_for(ex, n), mc.weights, mc.tasks);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(batch + 1) + " (example " + ex.id +
                             ")");
        }
        scale(loss, inv).backward();
        epoch_loss += value;
      }
      adam_step(params, adam, cfg);
      ++result.steps;
    }
    const double mean = epoch_loss / static_cast<double>(train.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

namespace {

size_t argmax(const Tensor& p) {
  auto d = p.data();
  return static_cast<size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

std::vector<double> values_of(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

Prediction predict(const MultiTaskModel& model, const Embedder& embedder, const Example& e) {
  const size_t n = model.config().encoder.max_len;
  EmbeddedSequence in = embedder.embed(e, n);
  MultiTaskOutput out = model.forward(in.values, in.mask);
  Prediction p;
  p.bully = argmax(out.p_bully);
  p.p_bully = values_of(out.p_bully);
  if (out.p_sentiment.defined()) {
    p.sentiment = argmax(out.p_sentiment);
    p.p_sentiment = values_of(out.p_sentiment);
  }
  if (out.p_target.defined()) {
    p.target = argmax(out.p_target);
    p.p_target = values_of(out.p_target);
  }
  if (out.p_rationale.defined()) {
    std::vector<uint8_t> highlight = out.rationale_prediction();
    p.rationale_probs.assign(e.tokens.size(), 0.0);
    p.rationale.assign(e.tokens.size(), 0);
    for (size_t i = 0; i < std::min(n, e.tokens.size()); ++i) {
      p.rationale_probs[i] = out.p_rationale[i];
      p.rationale[i] = highlight[i];
    }
  }
  return p;
}

Evaluation evaluate(const MultiTaskModel& model, const Embedder& embedder,
                    const std::vector<Example>& examples) {
  if (examples.empty()) throw DataError("evaluate: no examples");
  const TaskSet& tasks = model.config().tasks;
  std::vector<size_t> cd_gold, cd_pred, sa_gold, sa_pred, ti_gold, ti_pred, tib_gold, tib_pred;
  std::vector<RationaleCase> cases;
  for (const Example& e : examples) {
    Prediction p = predict(model, embedder, e);
    cd_gold.push_back(e.bully ? 1 : 0);
    cd_pred.push_back(p.bully);
    if (tasks.sa) {
      sa_gold.push_back(static_cast<size_t>(e.sentiment));
      sa_pred.push_back(*p.sentiment);
    }
    if (tasks.ti) {
      ti_gold.push_back(static_cast<size_t>(e.target));
      ti_pred.push_back(*p.target);
      if (e.bully) {
        tib_gold.push_back(static_cast<size_t>(e.target));
        tib_pred.push_back(*p.target);
      }
    }
    if (tasks.rd) {
      std::vector<uint8_t> gold = e.bully ? e.rationale : std::vector<uint8_t>(e.tokens.size(), 0);
      cases.push_back({e.tokens, p.rationale, std::move(gold)});
    }
  }
  Evaluation ev;
  ev.cd = classification_report(cd_gold, cd_pred, kBullyClasses);
  if (tasks.sa) ev.sa = classification_report(sa_gold, sa_pred, kSentimentClasses);
  if (tasks.ti) {
    ev.ti = classification_report(ti_gold, ti_pred, kTargetClasses);
    if (!tib_gold.empty()) ev.ti_bully = classification_report(tib_gold, tib_pred, kTargetClasses);
  }
  if (tasks.rd) ev.rd = rationale_scores(cases);
  return ev;
}

nlohmann::json evaluation_to_json(const Evaluation& e) {
  nlohmann::json j;
  j["cd"] = report_to_json(e.cd);
  if (e.sa) j["sa"] = report_to_json(*e.sa);
  if (e.ti) j["ti"] = report_to_json(*e.ti);
  if (e.ti_bully) j["ti_bully"] = report_to_json(*e.ti_bully);
  if (e.rd) j["rationale"] = {{"js", e.rd->js}, {"hd", e.rd->hd}, {"ros", e.rd->ros}};
  return j;
}

std::map<std::string, double> evaluation_scores(const Evaluation& e) {
  std::map<std::string, double> s;
  auto add = [&](const std::string& task, const ClassificationReport& r) {
    s[task + ".accuracy"] = r.accuracy;
    s[task + ".macro_f1"] = r.macro_f1;
  };
  add("cd", e.cd);
  if (e.sa) add("sa", *e.sa);
  if (e.ti) add("ti", *e.ti);
  if (e.ti_bully) add("ti_bully", *e.ti_bully);
  if (e.rd) {
    s["rd.js"] = e.rd->js;
    s["rd.hd"] = e.rd->hd;
    s["rd.ros"] = e.rd->ros;
  }
  return s;
}

KFoldReport run_kfold(const std::vector<Example>& examples, const Embedder& embedder,
                      const ModelConfig& model, const TrainConfig& train,
                      const KFoldOptions& options, const FoldCallback& on_fold) {
  model.validate();
  train.validate();
  if (options.jobs < 1) throw ConfigError("jobs must be at least 1");
  const auto folds = stratified_kfold(examples, options.folds, train.seed, options.stratify);
  KFoldReport report;
  report.folds.resize(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());
  std::atomic<size_t> next{0};
  std::mutex callback_mutex;

  auto worker = [&] {
    for (size_t i = next++; i < folds.size(); i = next++) {
      try {
        std::vector<Example> train_set, test_set;
        for (size_t idx : complement(folds[i], examples.size())) train_set.push_back(examples[idx]);
        for (size_t idx : folds[i]) test_set.push_back(examples[idx]);
        ModelConfig mc = model;
        mc.seed += i;
        TrainConfig tc = train;
        tc.seed += i;
        MultiTaskModel m(mc);
        FoldReport& r = report.folds[i];
        r.fold = i;
        r.train_size = train_set.size();
        r.test_size = test_set.size();
        r.loss_trace = fit(m, embedder, train_set, tc).epoch_loss;
        r.eval = evaluate(m, embedder, test_set);
        if (on_fold) {
          std::lock_guard<std::mutex> lock(callback_mutex);
          on_fold(r);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const size_t jobs = std::min(options.jobs, folds.size());
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<std::string, std::vector<double>> columns;
  std::map<std::string, size_t> present;
  for (const FoldReport& r : report.folds) {
    for (const auto& [key, value] : evaluation_scores(r.eval)) {
      columns[key].push_back(value);
      ++present[key];
    }
  }
  for (const auto& [key, values] : columns) {
    if (present[key] == report.folds.size()) report.summary[key] = summarize(values);
  }
  return report;
}

nlohmann::json kfold_to_json(const KFoldReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldReport& r : report.folds) {
    folds.push_back({{"fold", r.fold},
                     {"train_size", r.train_size},
                     {"test_size", r.test_size},
                     {"loss_trace", r.loss_trace},
                     {"metrics", evaluation_to_json(r.eval)},
                     {"scores", evaluation_scores(r.eval)}});
  }
  nlohmann::json mean = nlohmann::json::object(), stdev = nlohmann::json::object();
  for (const auto& [key, s] : report.summary) {
    mean[key] = s.mean;
    stdev[key] = s.std;
  }
  return {{"folds", folds}, {"mean", mean}, {"std", stdev}};
}

std::string config_hash(const ModelConfig& config) {
  const std::string text = model_config_to_json(config).dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr const char* kFormat = "mtxplain-checkpoint";
constexpr int kVersion = 1;

uint64_t to_little(uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((x >> (8 * i)) & 0xff) << (8 * (7 - i));
    return out;
  }
}

void write_f64(const fs::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  for (double v : values) {
    uint64_t bits = to_little(std::bit_cast<uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  if (!out) throw CheckpointError("write failed for " + path.string());
}

std::vector<double> read_f64(const fs::path& path, size_t count) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw CheckpointError("missing buffer " + path.string());
  if (size != count * sizeof(double)) {
    throw CheckpointError("buffer " + path.string() + " has " + std::to_string(size) +
                          " bytes, expected " + std::to_string(count * sizeof(double)));
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<double> values(count);
  for (double& v : values) {
    uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
    v = std::bit_cast<double>(to_little(bits));
  }
  if (!in) throw CheckpointError("cannot read " + path.string());
  return values;
}

}  // namespace

void save_checkpoint(const std::string& dir, const MultiTaskModel& model,
                     const TrainConfig& train, const EmbeddingTable* embeddings,
                     size_t epoch) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "params", ec);
  if (ec) throw CheckpointError("cannot create " + (root / "params").string());

  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, t] : model.parameters().entries()) {
    const std::string file = "params/" + name + ".bin";
    write_f64(root / file, t.data());
    params.push_back({{"name", name},
                      {"shape", t.shape()},
                      {"dtype", "float64"},
                      {"file", file},
                      {"bytes", t.numel() * sizeof(double)}});
  }
  nlohmann::json emb = nullptr;
  if (embeddings) {
    std::ofstream vocab(root / "vocab.txt");
    for (const auto& token : embeddings->tokens()) vocab << token << '\n';
    if (!vocab) throw CheckpointError("cannot write vocabulary");
    write_f64(root / "embeddings.bin", embeddings->matrix());
    emb = {{"dim", embeddings->dim()},
           {"count", embeddings->size()},
           {"oov", oov_policy_name(embeddings->oov_policy())},
           {"oov_seed", embeddings->oov_seed()},
           {"vocab", "vocab.txt"},
           {"file", "embeddings.bin"}};
  }
  nlohmann::json manifest = {
      {"format", kFormat},
      {"version", kVersion},
      {"config", model_config_to_json(model.config())},
      {"config_hash", config_hash(model.config())},
      {"train", train_config_to_json(train)},
      {"epoch", epoch},
      {"parameters", params},
      {"embeddings", emb},
  };
  std::ofstream out(root / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw CheckpointError("cannot write manifest");
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw CheckpointError("no manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError(std::string("unreadable manifest: ") + ex.what());
  }
  Checkpoint ck;
  try {
    if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
      throw CheckpointError("not a version " + std::to_string(kVersion) + " checkpoint: " + dir);
    }
    ModelConfig config = model_config_from_json(manifest.at("config"));
    const std::string stored = manifest.at("config_hash").get<std::string>();
    if (config_hash(config) != stored) {
      throw CheckpointError("configuration hash mismatch (manifest says " + stored +
                            ", configuration hashes to " + config_hash(config) + ")");
    }
    ck.train = train_config_from_json(manifest.at("train"));
    ck.epoch = manifest.at("epoch").get<size_t>();
    ck.model = std::make_unique<MultiTaskModel>(config);

    const auto& entries = ck.model->parameters().entries();
    const auto& listed = manifest.at("parameters");
    if (listed.size() != entries.size()) {
      throw CheckpointError("manifest lists " + std::to_string(listed.size()) +
                            " parameters, model has " + std::to_string(entries.size()));
    }
    for (size_t i = 0; i < entries.size(); ++i) {
      const auto& item = listed[i];
      const auto& [name, t] = entries[i];
      if (item.at("name").get<std::string>() != name ||
          item.at("shape").get<Shape>() != t.shape() || item.at("dtype") != "float64") {
        throw CheckpointError("manifest entry " + std::to_string(i) + " does not match parameter " +
                              name + " " + shape_string(t.shape()));
      }
      std::vector<double> values = read_f64(root / item.at("file").get<std::string>(), t.numel());
      Tensor target = t;
      std::copy(values.begin(), values.end(), target.mutable_data().begin());
    }

    const auto& emb = manifest.at("embeddings");
    if (!emb.is_null()) {
      const size_t dim = emb.at("dim").get<size_t>();
      const size_t count = emb.at("count").get<size_t>();
      auto table = std::make_shared<EmbeddingTable>(dim, parse_oov_policy(emb.at("oov")),
                                                    emb.at("oov_seed").get<uint64_t>());
      std::vector<double> matrix = read_f64(root / emb.at("file").get<std::string>(), count * dim);
      std::ifstream vocab(root / emb.at("vocab").get<std::string>());
      std::string token;
      size_t row = 0;
      while (std::getline(vocab, token)) {
        if (row >= count) throw CheckpointError("vocabulary longer than embedding matrix");
        table->add(token, std::span<const double>(matrix.data() + row * dim, dim));
        ++row;
      }
      if (row != count) throw CheckpointError("vocabulary shorter than embedding matrix");
      ck.embeddings = std::move(table);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError(std::string("malformed manifest: ") + ex.what());
  } catch (const ConfigError& ex) {
    throw CheckpointError(std::string("bad configuration in manifest: ") + ex.what());
  }
  return ck;
}

}  // namespace mtx
