#ifndef MTXPLAIN_MULTITASK_H_
#define MTXPLAIN_MULTITASK_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtxplain/encoder.h"
#include "mtxplain/ops.h"
#include "mtxplain/parameters.h"
#include "mtxplain/tensor.h"

namespace mtx {

// CD: cyberbully detection, RD: rationale detection, SA: sentiment,
// TI: target identification.
enum class Task { kCD, kRD, kSA, kTI };

std::string task_name(Task t);

// Output classes of a classification head. Throws ConfigError for RD, which
// has no softmax head.
size_t task_classes(Task t);

inline constexpr size_t kBullyClasses = 2;
inline constexpr size_t kSentimentClasses = 3;
inline constexpr size_t kTargetClasses = 8;

struct TaskSet {
  bool cd = true;
  bool rd = true;
  bool sa = false;
  bool ti = false;

  // Comma-separated, e.g. "cd,rd,sa". Throws ConfigError for unknown names
  // or unsupported combinations.
  static TaskSet parse(const std::string& spec);
  std::string to_string() const;
  bool has(Task t) const;
  std::vector<Task> enabled() const;
  // Supported: CD, CD+SA, CD+RD, CD+RD+SA, CD+RD+TI, CD+RD+SA+TI.
  void validate() const;

  bool operator==(const TaskSet&) const = default;
};

struct LossWeights {
  double cd = 1.0;
  double rd = 0.75;
  double sa = 0.66;
  double ti = 0.50;

  double of(Task t) const;
  void validate() const;  // each weight in (0, 1]
};

// Dropout mask source. Keep decisions are a pure function of (seed, draw
// index), so a training run is reproducible from its seed.
class DropoutStream {
 public:
  DropoutStream(double rate, uint64_t seed) : rate_(rate), seed_(seed) {}
  // Inverted dropout: kept units are scaled by 1 / (1 - rate).
  Tensor apply(const Tensor& x);
  double rate() const { return rate_; }

 private:
  double rate_;
  uint64_t seed_;
  uint64_t counter_ = 0;
};

// FC1 (ReLU) -> dropout -> FC2 (ReLU) -> dropout -> output linear.
struct HeadParams {
  Tensor w1, b1, w2, b2, wo, bo;

  static HeadParams create(ParameterStore& store, const std::string& prefix, size_t in,
                           size_t width, size_t classes, Rng& rng);
  size_t classes() const { return wo.cols(); }
};

struct HeadOutput {
  Tensor logits;  // 1 x K
  Tensor hidden;  // 1 x width, the FC2 activation after dropout
};

// Pass dropout == nullptr at evaluation time.
HeadOutput head_forward(const Tensor& sentence, const HeadParams& p,
                        DropoutStream* dropout);

// Output linear layer on a (possibly fused) FC2 activation.
Tensor head_output(const Tensor& hidden, const HeadParams& p);

struct RationaleParams {
  Tensor w;  // rationale_dim x N
  Tensor b;  // 1 x N

  static RationaleParams create(ParameterStore& store, const std::string& prefix,
                                size_t in, size_t n, Rng& rng);
};

struct RationaleOutput {
  Tensor probs;         // 1 x N sigmoid output
  Tensor masked_probs;  // probs with padded positions forced to 0
};

RationaleOutput rationale_head(const Tensor& features, const RationaleParams& p,
                               const Mask& mask);

// fused = fc2_bully + rationale_probs * projection + fc2_sentiment.
// Undefined tensors mark disabled channels.
Tensor fuse_bully(const Tensor& fc2_bully, const Tensor& rationale_probs,
                  const Tensor& projection, const Tensor& fc2_sentiment);

struct ModelConfig {
  EncoderConfig encoder;
  size_t head_width = 100;
  TaskSet tasks;
  LossWeights weights;
  uint64_t seed = 42;

  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
// Missing keys keep the values from `base`; other keys are ignored.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct MultiTaskOutput {
  Tensor bully_logits;
  Tensor p_bully;      // 1 x 2
  Tensor p_sentiment;  // 1 x 3, when SA is enabled
  Tensor p_target;     // 1 x 8, when TI is enabled
  Tensor p_rationale;  // 1 x N masked probabilities, when RD is enabled
  Tensor rationale_raw;
  Mask mask;
  EncodedViews views;

  // p_rationale > 0.5 on real tokens; empty when RD is disabled.
  std::vector<uint8_t> rationale_prediction() const;
};

struct Gold {
  size_t bully = 0;
  std::optional<size_t> sentiment;
  std::optional<size_t> target;
  // Token-aligned 0/1 targets, padded or truncated to N.
  std::optional<std::vector<double>> rationale;
};

using TaskLosses = std::map<Task, Tensor>;

// Cross-entropy for CD/SA/TI, masked mean BCE for RD. Throws DataError when
// an enabled task has no gold label.
TaskLosses task_losses(const MultiTaskOutput& out, const Gold& gold, const TaskSet& tasks);

// sum_k beta_k * L_k over the enabled tasks present in `losses`.
Tensor combine_losses(const TaskLosses& losses, const LossWeights& weights,
                      const TaskSet& tasks);

Tensor joint_loss(const MultiTaskOutput& out, const Gold& gold, const LossWeights& weights,
                  const TaskSet& tasks);

class MultiTaskModel {
 public:
  // Parameters are initialized from config.seed.
  explicit MultiTaskModel(const ModelConfig& config);
  // Copies would alias the same parameter storage.
  MultiTaskModel(const MultiTaskModel&) = delete;
  MultiTaskModel& operator=(const MultiTaskModel&) = delete;
  MultiTaskModel(MultiTaskModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const Encoder& encoder() const { return encoder_; }

  MultiTaskOutput forward(const Tensor& embedded, const Mask& mask,
                          DropoutStream* dropout = nullptr) const;

 private:
  ModelConfig config_;
  ParameterStore store_;
  Rng init_rng_;
  Encoder encoder_;
  HeadParams bully_;
  std::optional<HeadParams> sentiment_;
  std::optional<HeadParams> target_;
  std::optional<RationaleParams> rationale_;
  Tensor rationale_projection_;  // N x width, when RD is enabled
};

}  // namespace mtx

#endif  // MTXPLAIN_MULTITASK_H_
