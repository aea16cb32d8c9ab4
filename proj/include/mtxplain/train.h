#ifndef MTXPLAIN_TRAIN_H_
#define MTXPLAIN_TRAIN_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtxplain/data.h"
#include "mtxplain/embed.h"
#include "mtxplain/metrics.h"
#include "mtxplain/multitask.h"

namespace mtx {

struct TrainConfig {
  size_t batch_size = 32;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  // Decoupled (AdamW-style) decay instead of adding wd * theta to the
  // gradient.
  bool decoupled_weight_decay = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double dropout = 0.25;
  size_t epochs = 20;
  uint64_t seed = 42;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
// Missing keys keep the values from `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct AdamState {
  size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One Adam update of `theta` with bias correction at step t >= 1. Throws
// NumericError naming `name` if the gradient is not finite.
void adam_update(std::span<double> theta, std::span<const double> grad, std::vector<double>& m,
                 std::vector<double>& v, size_t t, const TrainConfig& cfg,
                 const std::string& name);

// Advances state.step and updates every parameter from its gradient.
void adam_step(ParameterStore& params, AdamState& state, const TrainConfig& cfg);

// Turns an example into model input.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual size_t dim() const = 0;
  // Throws DataError if the example cannot be embedded.
  virtual EmbeddedSequence embed(const Example& e, size_t n) const = 0;
};

class StaticEmbedder : public Embedder {
 public:
  explicit StaticEmbedder(std::shared_ptr<const EmbeddingTable> table)
      : table_(std::move(table)) {}
  size_t dim() const override { return table_->dim(); }
  EmbeddedSequence embed(const Example& e, size_t n) const override;
  const EmbeddingTable& table() const { return *table_; }

 private:
  std::shared_ptr<const EmbeddingTable> table_;
};

// Precomputed per-example vectors looked up by example id.
class ContextualEmbedder : public Embedder {
 public:
  explicit ContextualEmbedder(std::shared_ptr<const ContextualStore> store)
      : store_(std::move(store)) {}
  size_t dim() const override { return store_->dim(); }
  EmbeddedSequence embed(const Example& e, size_t n) const override;

 private:
  std::shared_ptr<const ContextualStore> store_;
};

// Labels of `e` in model terms; the rationale is padded or cut to n.
Gold gold_for(const Example& e, size_t n);

struct FitResult {
  std::vector<double> epoch_loss;  // mean joint loss per epoch
  size_t steps = 0;
};

using EpochCallback = std::function<void(size_t epoch, double mean_loss)>;

// Mini-batch training with a seeded shuffle each epoch. The last partial
// batch is kept; the batch loss is the mean joint loss of its examples.
// Throws NumericError on a non-finite loss, naming the epoch and batch.
FitResult fit(MultiTaskModel& model, const Embedder& embedder,
              const std::vector<Example>& train, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

struct Prediction {
  size_t bully = 0;
  std::vector<double> p_bully;
  std::optional<size_t> sentiment;
  std::vector<double> p_sentiment;
  std::optional<size_t> target;
  std::vector<double> p_target;
  // One entry per token of the example. Tokens past the model length get
  // probability 0 and are never highlighted.
  std::vector<double> rationale_probs;
  std::vector<uint8_t> rationale;
};

Prediction predict(const MultiTaskModel& model, const Embedder& embedder, const Example& e);

struct Evaluation {
  ClassificationReport cd;
  std::optional<ClassificationReport> sa;
  std::optional<ClassificationReport> ti;
  // TI restricted to gold-bully posts (NA rows left out).
  std::optional<ClassificationReport> ti_bully;
  std::optional<RationaleScore> rd;
};

Evaluation evaluate(const MultiTaskModel& model, const Embedder& embedder,
                    const std::vector<Example>& examples);

nlohmann::json evaluation_to_json(const Evaluation& e);
// Flat metric name -> value, e.g. "cd.accuracy", "rd.js".
std::map<std::string, double> evaluation_scores(const Evaluation& e);

struct KFoldOptions {
  size_t folds = 10;
  size_t jobs = 1;
  StratifyOn stratify = StratifyOn::kBully;
};

struct FoldReport {
  size_t fold = 0;
  size_t train_size = 0;
  size_t test_size = 0;
  std::vector<double> loss_trace;
  Evaluation eval;
};

struct KFoldReport {
  std::vector<FoldReport> folds;
  std::map<std::string, Summary> summary;
};

using FoldCallback = std::function<void(const FoldReport&)>;

// Trains one model per fold and evaluates it on the held-out fold. Fold i
// uses seeds model.seed + i and train.seed + i, so the report does not
// depend on `jobs`. The callback may run on worker threads but never
// concurrently.
KFoldReport run_kfold(const std::vector<Example>& examples, const Embedder& embedder,
                      const ModelConfig& model, const TrainConfig& train,
                      const KFoldOptions& options, const FoldCallback& on_fold = {});

nlohmann::json kfold_to_json(const KFoldReport& report);

// FNV-1a 64 of the compact JSON form of the model configuration, as hex.
std::string config_hash(const ModelConfig& config);

struct Checkpoint {
  std::unique_ptr<MultiTaskModel> model;
  TrainConfig train;
  // Static vocabulary saved with the model, if any.
  std::shared_ptr<EmbeddingTable> embeddings;
  size_t epoch = 0;
};

// Writes manifest.json, one little-endian float64 .bin per parameter and,
// when `embeddings` is given, vocab.txt plus embeddings.bin. The output is
// a pure function of the inputs.
void save_checkpoint(const std::string& dir, const MultiTaskModel& model,
                     const TrainConfig& train, const EmbeddingTable* embeddings,
                     size_t epoch);

// Throws CheckpointError for a missing or inconsistent manifest, a buffer
// of the wrong length, or a configuration that does not match its hash.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace mtx

#endif  // MTXPLAIN_TRAIN_H_
