#pragma once

// Central finite-difference checks of every backward kernel and of the full
// model, in double precision. Each check uses the scalar loss sum(y * R) for a
// fixed random R, so dL/dy = R is fed to the backward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ppgsqa/layers.hpp"
#include "ppgsqa/model.hpp"
#include "ppgsqa/rng.hpp"
#include "ppgsqa/training.hpp"

namespace gradcheck {

using ppgsqa::Tensor3;
using D = double;

inline constexpr double kStep = 1e-4;
// Denominator floor: gradients below this magnitude are compared absolutely.
inline constexpr double kFloor = 1e-6;

struct Result {
  std::string name;
  double max_rel = 0.0;
  std::size_t checked = 0;
  // Stencils rejected because theta +/- h switched a ReLU or max-pool branch.
  std::size_t skipped = 0;
  // Parameter tensors that received at least one accepted stencil.
  std::vector<std::string> covered;
};

/// conv, batchnorm, se or linear, from a hierarchical parameter name.
inline std::string layer_kind(const std::string& name) {
  if (name.find(".se.") != std::string::npos) return "se";
  if (name.rfind("fc.", 0) == 0) return "linear";
  if (name.find(".bn") != std::string::npos) return "batchnorm";
  return "conv";
}

inline bool covers_kind(const Result& r, const std::string& kind) {
  return std::any_of(r.covered.begin(), r.covered.end(), [&](const std::string& n) { return layer_kind(n) == kind; });
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

inline Tensor3<D> random_tensor(ppgsqa::Rng& rng, std::size_t b, std::size_t c, std::size_t l, double scale = 1.0) {
  Tensor3<D> t(b, c, l);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

inline std::vector<D> random_vec(ppgsqa::Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<D> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline double weighted_sum(const Tensor3<D>& y, const Tensor3<D>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * r.values()[i];
  return s;
}

/// Perturbs theta[i] for each i in `which` (all entries when empty) and
/// compares the central difference of loss() with analytic[i].
inline void check(Result& res, std::vector<D>& theta, const std::vector<D>& analytic,
                  const std::function<double()>& loss, std::vector<std::size_t> which = {}) {
  if (which.empty()) {
    which.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) which[i] = i;
  }
  for (std::size_t i : which) {
    const D saved = theta[i];
    theta[i] = saved + kStep;
    const double lp = loss();
    theta[i] = saved - kStep;
    const double lm = loss();
    theta[i] = saved;
    const double numeric = (lp - lm) / (2.0 * kStep);
    res.max_rel = std::max(res.max_rel, rel_error(analytic[i], numeric));
    ++res.checked;
  }
}

inline Result conv(std::uint64_t seed, const ppgsqa::ConvGeometry& g, std::size_t batch, std::size_t len, bool bias,
                   const std::string& name) {
  ppgsqa::Rng rng(seed);
  auto x = random_tensor(rng, batch, g.in_channels, len);
  auto w = random_vec(rng, g.weight_size(), 0.5);
  auto b = bias ? random_vec(rng, g.out_channels) : std::vector<D>{};
  const auto y0 = ppgsqa::conv1d_forward<D>(x, w, g, b);
  const auto r = random_tensor(rng, y0.batch(), y0.channels(), y0.length());
  std::vector<D> dw(w.size(), 0.0), db(b.size(), 0.0);
  const auto dx = ppgsqa::conv1d_backward<D>(x, w, g, r, dw, db);
  auto loss = [&] { return weighted_sum(ppgsqa::conv1d_forward<D>(x, w, g, b), r); };
  Result res{name};
  check(res, x.values(), dx.values(), loss);
  check(res, w, dw, loss);
  if (bias) check(res, b, db, loss);
  return res;
}

inline Result batchnorm(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  auto x = random_tensor(rng, 3, 4, 7, 2.0);
  for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] += static_cast<double>(i % 4);
  auto gamma = random_vec(rng, 4);
  auto beta = random_vec(rng, 4);
  std::vector<D> rm(4, 0.0), rv(4, 1.0);
  ppgsqa::BatchNormCache<D> cache;
  const auto y0 = ppgsqa::batchnorm1d_forward<D>(x, gamma, beta, rm, rv, true, &cache);
  const auto r = random_tensor(rng, 3, 4, 7);
  std::vector<D> dg(4, 0.0), dbeta(4, 0.0);
  const auto dx = ppgsqa::batchnorm1d_backward<D>(r, gamma, cache, dg, dbeta);
  auto loss = [&] {
    std::vector<D> m(4, 0.0), v(4, 1.0);
    return weighted_sum(ppgsqa::batchnorm1d_forward<D>(x, gamma, beta, m, v, true, nullptr), r);
  };
  Result res{"batchnorm1d"};
  check(res, x.values(), dx.values(), loss);
  check(res, gamma, dg, loss);
  check(res, beta, dbeta, loss);
  return res;
}

inline Result relu(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  auto x = random_tensor(rng, 2, 3, 10);
  // Keep inputs away from the kink so the central difference is exact.
  for (auto& v : x.values()) v += v >= 0 ? 0.05 : -0.05;
  const auto y = ppgsqa::relu_forward(x);
  const auto r = random_tensor(rng, 2, 3, 10);
  const auto dx = ppgsqa::relu_backward(y, r);
  Result res{"relu"};
  check(res, x.values(), dx.values(), [&] { return weighted_sum(ppgsqa::relu_forward(x), r); });
  return res;
}

inline Result maxpool(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  auto x = random_tensor(rng, 2, 3, 13);
  std::vector<std::uint32_t> argmax;
  const auto y = ppgsqa::maxpool1d_forward(x, 3, 2, 1, &argmax);
  const auto r = random_tensor(rng, y.batch(), y.channels(), y.length());
  const auto dx = ppgsqa::maxpool1d_backward(x.shape(), r, argmax);
  Result res{"maxpool1d"};
  check(res, x.values(), dx.values(),
        [&] { return weighted_sum(ppgsqa::maxpool1d_forward<D>(x, 3, 2, 1, nullptr), r); });
  return res;
}

inline Result dropout(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  auto x = random_tensor(rng, 2, 4, 9);
  const auto r = random_tensor(rng, 2, 4, 9);
  const std::uint64_t mask_seed = rng.next_u64();
  std::vector<D> mask;
  ppgsqa::Rng mrng(mask_seed);
  ppgsqa::dropout_forward(x, 0.2, &mrng, true, &mask);
  const auto dx = ppgsqa::dropout_backward(r, mask);
  Result res{"dropout"};
  check(res, x.values(), dx.values(), [&] {
    ppgsqa::Rng again(mask_seed);
    std::vector<D> m;
    return weighted_sum(ppgsqa::dropout_forward(x, 0.2, &again, true, &m), r);
  });
  return res;
}

inline Result avgpool(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  auto x = random_tensor(rng, 2, 3, 9);
  const auto r = random_tensor(rng, 2, 3, 1);
  const auto dx = ppgsqa::global_avgpool_backward(x.shape(), r);
  Result res{"global_avgpool"};
  check(res, x.values(), dx.values(), [&] { return weighted_sum(ppgsqa::global_avgpool_forward(x), r); });
  return res;
}

inline Result linear(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  auto x = random_tensor(rng, 3, 5, 1);
  auto w = random_vec(rng, 4 * 5);
  auto b = random_vec(rng, 4);
  const auto r = random_tensor(rng, 3, 4, 1);
  std::vector<D> dw(w.size(), 0.0), db(4, 0.0);
  const auto dx = ppgsqa::linear_backward<D>(x, w, 4, r, dw, db);
  auto loss = [&] { return weighted_sum(ppgsqa::linear_forward<D>(x, w, 4, b), r); };
  Result res{"linear"};
  check(res, x.values(), dx.values(), loss);
  check(res, w, dw, loss);
  check(res, b, db, loss);
  return res;
}

inline Result se(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  const std::size_t C = 16, h = 2;
  auto x = random_tensor(rng, 2, C, 9);
  auto fc1 = random_vec(rng, h * C, 0.5);
  auto fc2 = random_vec(rng, C * h, 0.5);
  ppgsqa::SECache<D> cache;
  ppgsqa::se_forward<D>(x, fc1, fc2, h, &cache);
  const auto r = random_tensor(rng, 2, C, 9);
  std::vector<D> d1(fc1.size(), 0.0), d2(fc2.size(), 0.0);
  const auto dx = ppgsqa::se_backward<D>(x, fc1, fc2, h, cache, r, d1, d2);
  auto loss = [&] { return weighted_sum(ppgsqa::se_forward<D>(x, fc1, fc2, h, nullptr), r); };
  Result res{"se_block"};
  check(res, x.values(), dx.values(), loss);
  check(res, fc1, d1, loss);
  check(res, fc2, d2, loss);
  return res;
}

inline Result cross_entropy(std::uint64_t seed) {
  ppgsqa::Rng rng(seed);
  auto logits = random_tensor(rng, 6, 2, 1, 3.0);
  std::vector<int> labels(6);
  for (auto& l : labels) l = static_cast<int>(rng.below(2));
  const auto out = ppgsqa::cross_entropy_loss<D>(logits, labels);
  Result res{"cross_entropy"};
  check(res, logits.values(), out.grad.values(), [&] { return ppgsqa::cross_entropy_loss<D>(logits, labels).loss; });
  return res;
}

/// End-to-end: cross-entropy of the full network in training mode (batch
/// statistics, dropout masks replayed from a fixed seed) on a [4, 3, 960]
/// batch, `per_tensor` entries of every parameter tensor. The loss is only
/// piecewise smooth, so a stencil whose endpoints change the activation
/// signature is rejected and another entry of the same tensor is drawn.
inline Result model(std::uint64_t seed, bool use_se = true, std::size_t per_tensor = 3) {
  ppgsqa::Rng rng(seed);
  ppgsqa::ModelConfig cfg;
  cfg.in_channels = 3;
  cfg.use_se = use_se;
  ppgsqa::Model<D> net(cfg);
  net.initialize(rng);
  auto x = random_tensor(rng, 4, 3, 960);
  const std::vector<int> labels{0, 1, 1, 0};
  const std::uint64_t drop_seed = rng.next_u64();

  auto loss = [&](std::uint64_t* signature) {
    ppgsqa::Rng drop(drop_seed);
    const double l = ppgsqa::cross_entropy_loss<D>(net.forward(x, true, &drop), labels).loss;
    *signature = net.activation_signature();
    return l;
  };
  std::uint64_t base_sig = 0;
  {
    ppgsqa::Rng drop(drop_seed);
    const auto out = ppgsqa::cross_entropy_loss<D>(net.forward(x, true, &drop), labels);
    base_sig = net.activation_signature();
    net.backward(out.grad);
  }
  Result res{use_se ? "model_end_to_end_se" : "model_end_to_end"};
  for (auto& p : net.store().params()) {
    const std::vector<D> analytic = p.grad;
    const std::size_t want = std::min(per_tensor, p.value.size());
    std::size_t done = 0;
    for (std::size_t attempt = 0; done < want && attempt < 20 * want; ++attempt) {
      const auto i = static_cast<std::size_t>(rng.below(p.value.size()));
      const D saved = p.value[i];
      std::uint64_t sp = 0, sm = 0;
      p.value[i] = saved + kStep;
      const double lp = loss(&sp);
      p.value[i] = saved - kStep;
      const double lm = loss(&sm);
      p.value[i] = saved;
      if (sp != base_sig || sm != base_sig) {
        ++res.skipped;
        continue;
      }
      res.max_rel = std::max(res.max_rel, rel_error(analytic[i], (lp - lm) / (2.0 * kStep)));
      ++res.checked;
      ++done;
    }
    if (done > 0) res.covered.push_back(p.name);
  }
  return res;
}

/// Every layer kind in isolation for one seed.
inline std::vector<Result> layers(std::uint64_t seed) {
  return {
      conv(seed, {3, 4, 3, 1, 1}, 2, 11, true, "conv1d_k3_s1"),
      conv(seed, {3, 5, 7, 2, 3}, 2, 16, false, "conv1d_k7_s2"),
      conv(seed, {4, 6, 1, 2, 0}, 2, 10, false, "conv1d_k1_s2"),
      batchnorm(seed),
      relu(seed),
      maxpool(seed),
      dropout(seed),
      avgpool(seed),
      linear(seed),
      se(seed),
      cross_entropy(seed),
  };
}

}  // namespace gradcheck
