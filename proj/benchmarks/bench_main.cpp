#include <benchmark/benchmark.h>

#include "ppgsqa/accounting.hpp"
#include "ppgsqa/data_io.hpp"
#include "ppgsqa/dsp.hpp"
#include "ppgsqa/metrics.hpp"
#include "ppgsqa/model.hpp"
#include "ppgsqa/rng.hpp"
#include "ppgsqa/training.hpp"

using namespace ppgsqa;

namespace {

ModelConfig three_channel(bool se) {
  ModelConfig c;
  c.in_channels = 3;
  c.use_se = se;
  return c;
}

Tensor3<float> random_batch(std::size_t batch, std::size_t channels) {
  Rng rng(3);
  Tensor3<float> x(batch, channels, 960);
  for (auto& v : x.values()) v = static_cast<float>(rng.normal());
  return x;
}

void BM_Forward(benchmark::State& state) {
  Model<float> model(three_channel(state.range(1) != 0));
  const auto x = random_batch(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Args({1, 1})->Args({32, 0})->Args({32, 1})->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  Model<float> model(three_channel(true));
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto x = random_batch(batch, 3);
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % 2);
  Rng rng(5);
  for (auto _ : state) {
    const auto logits = model.forward(x, true, &rng);
    const auto loss = cross_entropy_loss<float>(logits, labels);
    model.backward(loss.grad);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Preprocess(benchmark::State& state) {
  SynthesisConfig cfg;
  cfg.n_subjects = 1;
  cfg.minutes_per_subject = 5.0;
  const auto rec = synthesize_records(cfg).front();
  const auto kinds = ChannelSet::parse("ppg,fdp,sdp,atc");
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_record(rec, kinds));
}
BENCHMARK(BM_Preprocess)->Unit(benchmark::kMillisecond);

void BM_CountMacs(benchmark::State& state) {
  const auto cfg = three_channel(true);
  for (auto _ : state) benchmark::DoNotOptimize(count_macs(cfg, 960));
}
BENCHMARK(BM_CountMacs);

void BM_Auc(benchmark::State& state) {
  Rng rng(11);
  std::vector<ScoredSample> s(static_cast<std::size_t>(state.range(0)));
  for (auto& v : s) {
    v.label = rng.below(2) ? Quality::Good : Quality::Bad;
    v.score = rng.uniform();
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(s));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
