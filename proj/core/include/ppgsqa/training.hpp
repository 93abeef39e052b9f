#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ppgsqa/dsp.hpp"
#include "ppgsqa/model.hpp"

namespace ppgsqa {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  int step_size = 20;
  double gamma = 0.1;
  int epochs = 60;
  std::size_t batch_size = 64;
  std::uint64_t global_seed = 42;
  std::size_t folds = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // false: L2 term added to the gradient before the moment updates.
  bool decoupled_weight_decay = false;

  void validate() const;
};

/// lr0 * gamma^floor(epoch / step_size), evaluated as lr0 / (1/gamma)^k
double step_lr(int epoch, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Data

struct Sample {
  SegmentSource source;
  Quality label = Quality::Bad;
  std::vector<float> data;  // [channels x length]
};

struct Dataset {
  ChannelSet kinds;
  std::size_t length = 0;
  std::vector<Sample> samples;

  std::size_t channels() const { return kinds.size(); }
  /// Subject ids in order of first appearance.
  std::vector<std::string> subjects() const;
  std::vector<std::size_t> indices_for(std::span<const std::string> subject_ids) const;
};

/// Preprocesses every record; degenerate segments are dropped.
Dataset make_dataset(std::span<const SignalRecord> records, const ChannelSet& kinds, const PreprocessConfig& cfg = {});

Tensor3<float> make_batch(const Dataset& data, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Loss and optimizer

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor3<T> grad;  // d(mean loss)/d(logits), same shape as the logits
};

/// Mean softmax cross-entropy with max-subtraction. labels[i] in [0, classes).
template <typename T>
LossResult<T> cross_entropy_loss(const Tensor3<T>& logits, std::span<const int> labels);

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;

  explicit AdamState(const ParameterStore<T>& store);
};

/// One bias-corrected Adam update using the gradients currently in `store`.
template <typename T>
void adam_step(ParameterStore<T>& store, AdamState<T>& state, double lr, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Protocol

struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> val_subjects;
  std::uint64_t seed = 0;  // global_seed * 1000 + fold_index
};

inline std::uint64_t fold_seed(std::uint64_t global_seed, std::size_t fold) { return global_seed * 1000 + fold; }

/// Shuffles the subjects once with seeded_rng(global_seed), then deals them
/// round-robin into `folds` validation sets.
std::vector<FoldSplit> split_subjects(std::span<const std::string> subjects, std::size_t folds, std::uint64_t global_seed);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double val_auc = 0.0;   // NaN without a validation set or with a single class

  std::string to_json_line() const;
};

struct Evaluation {
  double loss = 0.0;
  double auc = 0.0;  // NaN when only one class is present
  std::vector<double> scores;
};

/// Eval-mode scores (softmax probability of Good) in batches of `batch_size`.
Evaluation evaluate(const Model<float>& model, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size = 64);

using EpochCallback = std::function<void(const EpochMetrics&)>;

struct TrainResult {
  Model<float> model;
  std::vector<EpochMetrics> history;
  // Shuffled sample order of every epoch; batches are consecutive slices.
  std::vector<std::vector<std::size_t>> epoch_orders;
};

/// Trains on `train_indices` with seeded_rng(seed) driving initialization,
/// per-epoch shuffling and dropout. The last partial batch is kept.
TrainResult train_model(const Dataset& data, std::span<const std::size_t> train_indices,
                        std::span<const std::size_t> val_indices, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, std::uint64_t seed, const EpochCallback& on_epoch = {});

TrainResult train_fold(const Dataset& data, const FoldSplit& split, const ModelConfig& model_cfg,
                       const TrainConfig& train_cfg, const EpochCallback& on_epoch = {});

/// All subjects, no validation; seeded with fold_seed(global_seed, folds).
TrainResult train_full(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const EpochCallback& on_epoch = {});

}  // namespace ppgsqa
