#include "ppgsqa/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"
#include "ppgsqa/errors.hpp"
#include "ppgsqa/metrics.hpp"

namespace ppgsqa {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::InvalidConfig, what); };
  if (!(lr > 0.0)) bad("lr must be positive");
  if (!(weight_decay >= 0.0)) bad("weight decay must be non-negative");
  if (step_size <= 0) bad("step size must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) bad("gamma must lie in (0, 1)");
  if (epochs < 0) bad("epochs must be non-negative");
  if (batch_size == 0) bad("batch size must be positive");
  if (folds < 2) bad("need at least two folds");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) bad("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) bad("Adam epsilon must be positive");
}

double step_lr(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) fail(ErrorKind::RangeError, "negative epoch");
  // Dividing by (1/gamma)^k keeps decades exact: 1e-4 * 0.1^2 != 1e-6 in
  // binary floating point, but 1e-4 / 10^2 == 1e-6.
  return cfg.lr / std::pow(1.0 / cfg.gamma, epoch / cfg.step_size);
}

// ---------------------------------------------------------------------------

std::vector<std::string> Dataset::subjects() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.source.subject_id).second) out.push_back(s.source.subject_id);
  }
  return out;
}

std::vector<std::size_t> Dataset::indices_for(std::span<const std::string> subject_ids) const {
  const std::set<std::string> wanted(subject_ids.begin(), subject_ids.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (wanted.contains(samples[i].source.subject_id)) out.push_back(i);
  }
  return out;
}

Dataset make_dataset(std::span<const SignalRecord> records, const ChannelSet& kinds, const PreprocessConfig& cfg) {
  Dataset data;
  data.kinds = kinds;
  for (const auto& rec : records) {
    for (auto& seg : preprocess_record(rec, kinds, cfg)) {
      if (!seg.stack) continue;
      Sample s;
      s.source = seg.source;
      s.label = seg.label;
      s.data.assign(seg.stack->data.begin(), seg.stack->data.end());
      if (data.length == 0) data.length = seg.stack->length;
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

Tensor3<float> make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t per = data.channels() * data.length;
  Tensor3<float> x(indices.size(), data.channels(), data.length);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = data.samples.at(indices[i]);
    if (s.data.size() != per) fail(ErrorKind::ShapeMismatch, "sample size does not match the dataset layout");
    std::copy(s.data.begin(), s.data.end(), x.data() + i * per);
  }
  return x;
}

// ---------------------------------------------------------------------------

template <typename T>
LossResult<T> cross_entropy_loss(const Tensor3<T>& logits, std::span<const int> labels) {
  const std::size_t B = logits.batch();
  const std::size_t K = logits.channels();
  if (labels.size() != B || logits.length() != 1 || B == 0) {
    fail(ErrorKind::ShapeMismatch, "logits " + logits.shape().to_string() + " vs " + std::to_string(labels.size()) +
                                       " labels");
  }
  LossResult<T> out;
  out.grad = Tensor3<T>(logits.shape());
  double total = 0.0;
  std::vector<double> p(K);
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= K) fail(ErrorKind::RangeError, "label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(logits(b, k, 0)));
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      p[k] = std::exp(static_cast<double>(logits(b, k, 0)) - mx);
      z += p[k];
    }
    const double log_z = std::log(z);
    total += -(static_cast<double>(logits(b, static_cast<std::size_t>(y), 0)) - mx - log_z);
    for (std::size_t k = 0; k < K; ++k) {
      const double prob = p[k] / z;
      out.grad(b, k, 0) = static_cast<T>((prob - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0)) / static_cast<double>(B));
    }
  }
  out.loss = total / static_cast<double>(B);
  if (!std::isfinite(out.loss)) fail(ErrorKind::NonFinite, "cross-entropy loss");
  return out;
}

template <typename T>
AdamState<T>::AdamState(const ParameterStore<T>& store) {
  for (const auto& p : store.params()) {
    m.emplace_back(p.value.size(), T(0));
    v.emplace_back(p.value.size(), T(0));
  }
}

template <typename T>
void adam_step(ParameterStore<T>& store, AdamState<T>& state, double lr, const TrainConfig& cfg) {
  if (state.m.size() != store.params().size()) fail(ErrorKind::ShapeMismatch, "optimizer state does not match store");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < store.params().size(); ++i) {
    auto& p = store.param(i);
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      double theta = static_cast<double>(p.value[j]);
      double g = static_cast<double>(p.grad[j]);
      if (cfg.decoupled_weight_decay) theta -= lr * cfg.weight_decay * theta;
      else g += cfg.weight_decay * theta;
      const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * g;
      const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      theta -= lr * (mj / bias1) / (std::sqrt(vj / bias2) + cfg.eps);
      p.value[j] = static_cast<T>(theta);
    }
  }
}

template LossResult<float> cross_entropy_loss<float>(const Tensor3<float>&, std::span<const int>);
template LossResult<double> cross_entropy_loss<double>(const Tensor3<double>&, std::span<const int>);
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParameterStore<float>&, AdamState<float>&, double, const TrainConfig&);
template void adam_step<double>(ParameterStore<double>&, AdamState<double>&, double, const TrainConfig&);

// ---------------------------------------------------------------------------

std::vector<FoldSplit> split_subjects(std::span<const std::string> subjects, std::size_t folds,
                                      std::uint64_t global_seed) {
  if (folds < 2) fail(ErrorKind::InvalidConfig, "need at least two folds");
  if (subjects.size() < folds) {
    fail(ErrorKind::TooFewSubjects, std::to_string(subjects.size()) + " subjects cannot fill " +
                                        std::to_string(folds) + " folds");
  }
  const std::set<std::string> unique(subjects.begin(), subjects.end());
  if (unique.size() != subjects.size()) fail(ErrorKind::InvalidConfig, "duplicate subject id");

  std::vector<std::string> shuffled(subjects.begin(), subjects.end());
  Rng rng = seeded_rng(global_seed);
  rng.shuffle(std::span<std::string>(shuffled));

  std::vector<FoldSplit> splits(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    splits[f].fold_index = f;
    splits[f].seed = fold_seed(global_seed, f);
  }
  for (std::size_t i = 0; i < shuffled.size(); ++i) splits[i % folds].val_subjects.push_back(shuffled[i]);
  for (std::size_t f = 0; f < folds; ++f) {
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      if (i % folds != f) splits[f].train_subjects.push_back(shuffled[i]);
    }
  }
  return splits;
}

std::string EpochMetrics::to_json_line() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["train_loss"] = num(train_loss);
  j["val_loss"] = num(val_loss);
  j["val_auc"] = num(val_auc);
  return j.dump();
}

Evaluation evaluate(const Model<float>& model, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size) {
  Evaluation ev;
  ev.loss = std::numeric_limits<double>::quiet_NaN();
  ev.auc = std::numeric_limits<double>::quiet_NaN();
  if (indices.empty()) return ev;
  std::vector<ScoredSample> scored;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
    const auto logits = model.infer(make_batch(data, chunk));
    std::vector<int> labels;
    for (std::size_t i : chunk) labels.push_back(static_cast<int>(data.samples[i].label));
    loss_sum += cross_entropy_loss(logits, labels).loss * static_cast<double>(chunk.size());
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const double d = static_cast<double>(logits(b, 0, 0)) - static_cast<double>(logits(b, 1, 0));
      const double score = 1.0 / (1.0 + std::exp(d));
      ev.scores.push_back(score);
      scored.push_back({score, data.samples[chunk[b]].label});
    }
  }
  ev.loss = loss_sum / static_cast<double>(indices.size());
  try {
    ev.auc = auc(scored);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingleClass) throw;
  }
  return ev;
}

TrainResult train_model(const Dataset& data, std::span<const std::size_t> train_indices,
                        std::span<const std::size_t> val_indices, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, std::uint64_t seed, const EpochCallback& on_epoch) {
  train_cfg.validate();
  if (model_cfg.in_channels != data.channels() || model_cfg.segment_len != data.length) {
    fail(ErrorKind::ShapeMismatch, "model expects [" + std::to_string(model_cfg.in_channels) + "," +
                                       std::to_string(model_cfg.segment_len) + "] inputs, dataset provides [" +
                                       std::to_string(data.channels()) + "," + std::to_string(data.length) + "]");
  }

  if (train_indices.empty()) fail(ErrorKind::EmptyFold, "no training segments");

  Rng rng = seeded_rng(seed);
  TrainResult result{Model<float>(model_cfg), {}, {}};
  Model<float>& model = result.model;
  model.initialize(rng);
  AdamState<float> adam(model.store());

  std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const double lr = step_lr(epoch, train_cfg);
    rng.shuffle(std::span<std::size_t>(order));
    result.epoch_orders.push_back(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
      const auto chunk = std::span<const std::size_t>(order).subspan(
          start, std::min(train_cfg.batch_size, order.size() - start));
      std::vector<int> labels;
      for (std::size_t i : chunk) labels.push_back(static_cast<int>(data.samples[i].label));
      const auto logits = model.forward(make_batch(data, chunk), true, &rng);
      const auto loss = cross_entropy_loss(logits, labels);
      model.backward(loss.grad);
      adam_step(model.store(), adam, lr, train_cfg);
      loss_sum += loss.loss * static_cast<double>(chunk.size());
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    const auto ev = evaluate(model, data, val_indices, train_cfg.batch_size);
    m.val_loss = ev.loss;
    m.val_auc = ev.auc;
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

TrainResult train_fold(const Dataset& data, const FoldSplit& split, const ModelConfig& model_cfg,
                       const TrainConfig& train_cfg, const EpochCallback& on_epoch) {
  const auto train_idx = data.indices_for(split.train_subjects);
  const auto val_idx = data.indices_for(split.val_subjects);
  if (train_idx.empty()) fail(ErrorKind::EmptyFold, "fold " + std::to_string(split.fold_index) + " has no training segments");
  return train_model(data, train_idx, val_idx, model_cfg, train_cfg, split.seed, on_epoch);
}

TrainResult train_full(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const EpochCallback& on_epoch) {
  if (data.samples.empty()) fail(ErrorKind::EmptyDataset, "no training segments");
  std::vector<std::size_t> all(data.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return train_model(data, all, {}, model_cfg, train_cfg, fold_seed(train_cfg.global_seed, train_cfg.folds), on_epoch);
}

}  // namespace ppgsqa
