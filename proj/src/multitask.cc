#include "mtxplain/multitask.h"

#include <sstream>

#include "mtxplain/error.h"

namespace mtx {

std::string task_name(Task t) {
  switch (t) {
    case Task::kCD:
      return "cd";
    case Task::kRD:
      return "rd";
    case Task::kSA:
      return "sa";
    case Task::kTI:
      return "ti";
  }
  return "?";
}

size_t task_classes(Task t) {
  switch (t) {
    case Task::kCD:
      return kBullyClasses;
    case Task::kSA:
      return kSentimentClasses;
    case Task::kTI:
      return kTargetClasses;
    case Task::kRD:
      break;
  }
  throw ConfigError("task " + task_name(t) + " has no classification head");
}

TaskSet TaskSet::parse(const std::string& spec) {
  TaskSet set{false, false, false, false};
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    for (char& ch : item) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item == "cd") {
      set.cd = true;
    } else if (item == "rd") {
      set.rd = true;
    } else if (item == "sa") {
      set.sa = true;
    } else if (item == "ti") {
      set.ti = true;
    } else {
      throw ConfigError("unknown task '" + item + "' in \"" + spec +
                        "\" (expected cd, rd, sa, ti)");
    }
  }
  set.validate();
  return set;
}

std::string TaskSet::to_string() const {
  std::string out;
  for (Task t : enabled()) out += (out.empty() ? "" : ",") + task_name(t);
  return out;
}

bool TaskSet::has(Task t) const {
  switch (t) {
    case Task::kCD:
      return cd;
    case Task::kRD:
      return rd;
    case Task::kSA:
      return sa;
    case Task::kTI:
      return ti;
  }
  return false;
}

std::vector<Task> TaskSet::enabled() const {
  std::vector<Task> out;
  for (Task t : {Task::kCD, Task::kRD, Task::kSA, Task::kTI})
    if (has(t)) out.push_back(t);
  return out;
}

void TaskSet::validate() const {
  if (!cd) throw ConfigError("the cd task is always required");
  // Every multitask variant keeps RD; CD alone and CD+SA are the exceptions.
  if (!rd && ti) {
    throw ConfigError("task set \"" + to_string() + "\" is not supported: ti requires rd");
  }
}

double LossWeights::of(Task t) const {
  switch (t) {
    case Task::kCD:
      return cd;
    case Task::kRD:
      return rd;
    case Task::kSA:
      return sa;
    case Task::kTI:
      return ti;
  }
  return 0.0;
}

void LossWeights::validate() const {
  for (Task t : {Task::kCD, Task::kRD, Task::kSA, Task::kTI}) {
    double w = of(t);
    if (!(w > 0.0 && w <= 1.0)) {
      throw ConfigError("loss weight for " + task_name(t) + " must be in (0, 1], got " +
                        std::to_string(w));
    }
  }
}

Tensor DropoutStream::apply(const Tensor& x) {
  if (rate_ <= 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate_);
  std::vector<double> factors(x.numel());
  for (double& f : factors) f = hashed_uniform(seed_, counter_++) < rate_ ? 0.0 : keep_scale;
  return mul_constant(x, std::move(factors));
}

HeadParams HeadParams::create(ParameterStore& store, const std::string& prefix, size_t in,
                              size_t width, size_t classes, Rng& rng) {
  HeadParams p;
  p.w1 = store.add_xavier(prefix + ".fc1.w", {in, width}, in, width, rng);
  p.b1 = store.add_zeros(prefix + ".fc1.b", {1, width});
  p.w2 = store.add_xavier(prefix + ".fc2.w", {width, width}, width, width, rng);
  p.b2 = store.add_zeros(prefix + ".fc2.b", {1, width});
  p.wo = store.add_xavier(prefix + ".out.w", {width, classes}, width, classes, rng);
  p.bo = store.add_zeros(prefix + ".out.b", {1, classes});
  return p;
}

HeadOutput head_forward(const Tensor& sentence, const HeadParams& p, DropoutStream* dropout) {
  Tensor h1 = relu(add_row(matmul(sentence, p.w1), p.b1));
  if (dropout) h1 = dropout->apply(h1);
  Tensor h2 = relu(add_row(matmul(h1, p.w2), p.b2));
  if (dropout) h2 = dropout->apply(h2);
  return {head_output(h2, p), h2};
}

Tensor head_output(const Tensor& hidden, const HeadParams& p) {
  return add_row(matmul(hidden, p.wo), p.bo);
}

RationaleParams RationaleParams::create(ParameterStore& store, const std::string& prefix,
                                        size_t in, size_t n, Rng& rng) {
  RationaleParams p;
  p.w = store.add_xavier(prefix + ".w", {in, n}, in, n, rng);
  p.b = store.add_zeros(prefix + ".b", {1, n});
  return p;
}

RationaleOutput rationale_head(const Tensor& features, const RationaleParams& p,
                               const Mask& mask) {
  if (mask.size() != p.w.cols()) {
    throw DimensionError("rationale_head: mask length " + std::to_string(mask.size()) +
                         " != " + std::to_string(p.w.cols()));
  }
  Tensor probs = sigmoid(add_row(matmul(features, p.w), p.b));
  std::vector<double> keep(mask.begin(), mask.end());
  return {probs, mul_constant(probs, std::move(keep))};
}

Tensor fuse_bully(const Tensor& fc2_bully, const Tensor& rationale_probs,
                  const Tensor& projection, const Tensor& fc2_sentiment) {
  Tensor fused = fc2_bully;
  if (rationale_probs.defined()) fused = add(fused, matmul(rationale_probs, projection));
  if (fc2_sentiment.defined()) fused = add(fused, fc2_sentiment);
  return fused;
}

void ModelConfig::validate() const {
  encoder.validate();
  tasks.validate();
  weights.validate();
  if (head_width == 0) throw ConfigError("head width must be positive");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  const EncoderConfig& e = c.encoder;
  return {
      {"embed_dim", e.embed_dim},
      {"hidden", e.hidden},
      {"attention", e.attention},
      {"filters", e.filters},
      {"window", e.window},
      {"segment", e.segment},
      {"max_len", e.max_len},
      {"variant", variant_name(e.variant)},
      {"baseline_windows", e.baseline_windows},
      {"baseline_filters", e.baseline_filters},
      {"head_width", c.head_width},
      {"tasks", c.tasks.to_string()},
      {"weights", {{"cd", c.weights.cd}, {"rd", c.weights.rd}, {"sa", c.weights.sa},
                   {"ti", c.weights.ti}}},
      {"seed", c.seed},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
  if (!j.is_object()) throw ConfigError("model configuration must be a JSON object");
  try {
    EncoderConfig& e = c.encoder;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("embed_dim", e.embed_dim);
    get("hidden", e.hidden);
    get("attention", e.attention);
    get("filters", e.filters);
    get("window", e.window);
    get("segment", e.segment);
    get("max_len", e.max_len);
    if (j.contains("variant")) e.variant = parse_variant(j.at("variant").get<std::string>());
    get("baseline_windows", e.baseline_windows);
    get("baseline_filters", e.baseline_filters);
    get("head_width", c.head_width);
    if (j.contains("tasks")) c.tasks = TaskSet::parse(j.at("tasks").get<std::string>());
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      if (w.contains("cd")) w.at("cd").get_to(c.weights.cd);
      if (w.contains("rd")) w.at("rd").get_to(c.weights.rd);
      if (w.contains("sa")) w.at("sa").get_to(c.weights.sa);
      if (w.contains("ti")) w.at("ti").get_to(c.weights.ti);
    }
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad model configuration: ") + ex.what());
  }
  return c;
}

std::vector<uint8_t> MultiTaskOutput::rationale_prediction() const {
  std::vector<uint8_t> out;
  if (!p_rationale.defined()) return out;
  out.resize(p_rationale.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = (mask[i] && p_rationale[i] > 0.5) ? 1 : 0;
  return out;
}

TaskLosses task_losses(const MultiTaskOutput& out, const Gold& gold, const TaskSet& tasks) {
  TaskLosses losses;
  losses[Task::kCD] = nll_loss(out.p_bully, gold.bully);
  if (tasks.sa) {
    if (!gold.sentiment) throw DataError("sentiment task enabled but no gold sentiment");
    losses[Task::kSA] = nll_loss(out.p_sentiment, *gold.sentiment);
  }
  if (tasks.ti) {
    if (!gold.target) throw DataError("target task enabled but no gold target");
    losses[Task::kTI] = nll_loss(out.p_target, *gold.target);
  }
  if (tasks.rd) {
    if (!gold.rationale) throw DataError("rationale task enabled but no gold rationale");
    losses[Task::kRD] = bce_loss(out.rationale_raw, *gold.rationale, out.mask);
  }
  return losses;
}

Tensor combine_losses(const TaskLosses& losses, const LossWeights& weights,
                      const TaskSet& tasks) {
  Tensor total;
  for (Task t : tasks.enabled()) {
    auto it = losses.find(t);
    if (it == losses.end()) throw DataError("no loss supplied for task " + task_name(t));
    Tensor term = scale(it->second, weights.of(t));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

Tensor joint_loss(const MultiTaskOutput& out, const Gold& gold, const LossWeights& weights,
                  const TaskSet& tasks) {
  return combine_losses(task_losses(out, gold, tasks), weights, tasks);
}

namespace {

const ModelConfig& validated(const ModelConfig& config) {
  config.validate();
  return config;
}

}  // namespace

MultiTaskModel::MultiTaskModel(const ModelConfig& config)
    : config_(validated(config)),
      init_rng_(config.seed),
      encoder_(config.encoder, store_, init_rng_) {
  const size_t in = config_.encoder.output_dim();
  const size_t width = config_.head_width;
  bully_ = HeadParams::create(store_, "head.cd", in, width, task_classes(Task::kCD), init_rng_);
  if (config_.tasks.sa) {
    sentiment_ = HeadParams::create(store_, "head.sa", in, width,
                                   task_classes(Task::kSA), init_rng_);
  }
  if (config_.tasks.ti) {
    target_ = HeadParams::create(store_, "head.ti", in, width, task_classes(Task::kTI), init_rng_);
  }
  if (config_.tasks.rd) {
    const size_t n = config_.encoder.max_len;
    rationale_ = RationaleParams::create(store_, "head.rd", config_.encoder.rationale_dim(), n,
                                         init_rng_);
    rationale_projection_ =
        store_.add_xavier("fusion.rationale_proj", {n, width}, n, width, init_rng_);
  }
}

MultiTaskOutput MultiTaskModel::forward(const Tensor& embedded, const Mask& mask,
                                        DropoutStream* dropout) const {
  MultiTaskOutput out;
  out.mask = mask;
  out.views = encoder_.encode(embedded, mask);
  const Tensor& sentence = out.views.sentence;

  Tensor fc2_sentiment;
  if (sentiment_) {
    HeadOutput sa = head_forward(sentence, *sentiment_, dropout);
    out.p_sentiment = softmax_rows(sa.logits);
    fc2_sentiment = sa.hidden;
  }
  if (target_) {
    out.p_target = softmax_rows(head_forward(sentence, *target_, dropout).logits);
  }
  if (rationale_) {
    RationaleOutput rd = rationale_head(out.views.rationale_input, *rationale_, mask);
    out.rationale_raw = rd.probs;
    out.p_rationale = rd.masked_probs;
  }
  HeadOutput cd = head_forward(sentence, bully_, dropout);
  Tensor fused = fuse_bully(cd.hidden, out.p_rationale, rationale_projection_, fc2_sentiment);
  out.bully_logits = head_output(fused, bully_);
  out.p_bully = softmax_rows(out.bully_logits);
  return out;
}

}  // namespace mtx
