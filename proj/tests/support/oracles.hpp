#pragma once

// Slow, direct reference implementations used as test oracles. None of these
// share code with the library under test.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "ppgsqa/dsp.hpp"
#include "ppgsqa/metrics.hpp"
#include "ppgsqa/tensor.hpp"

namespace oracle {

/// |X(f)| of a real sequence at frequency f (Hz), by direct summation.
inline double dft_magnitude(std::span<const double> x, double f, double fs) {
  std::complex<double> acc{0.0, 0.0};
  const double w = -2.0 * std::numbers::pi * f / fs;
  for (std::size_t n = 0; n < x.size(); ++n) acc += x[n] * std::polar(1.0, w * static_cast<double>(n));
  return std::abs(acc);
}

inline double to_db(double mag) { return 20.0 * std::log10(mag); }

/// Plain direct-form I difference equation.
inline std::vector<double> iir_direct(std::span<const double> b, std::span<const double> a,
                                      std::span<const double> x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < b.size() && k <= n; ++k) acc += b[k] * x[n - k];
    for (std::size_t k = 1; k < a.size() && k <= n; ++k) acc -= a[k] * y[n - k];
    y[n] = acc / a[0];
  }
  return y;
}

inline std::vector<double> autocorr_direct(std::span<const double> x) {
  const std::size_t n = x.size();
  double e = 0.0;
  for (double v : x) e += v * v;
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) s += x[i] * x[i + k];
    r[k] = s / e;
  }
  return r;
}

inline std::vector<double> zscore_direct(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / sd;
  return y;
}

inline std::vector<double> central_diff(std::span<const double> x, double fs) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) y[i] = (x[1] - x[0]) * fs;
    else if (i == n - 1) y[i] = (x[n - 1] - x[n - 2]) * fs;
    else y[i] = 0.5 * (x[i + 1] - x[i - 1]) * fs;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Network layers, nested loops straight from the definitions.

template <typename T>
ppgsqa::Tensor3<T> conv1d(const ppgsqa::Tensor3<T>& x, std::span<const T> w, std::size_t cout, std::size_t k,
                          std::size_t stride, std::size_t pad, std::span<const T> bias = {}) {
  const std::size_t B = x.batch(), C = x.channels(), L = x.length();
  const std::size_t lout = (L + 2 * pad - k) / stride + 1;
  ppgsqa::Tensor3<T> y(B, cout, lout);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t l = 0; l < lout; ++l) {
        double acc = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t j = 0; j < k; ++j) {
            const auto pos = static_cast<std::ptrdiff_t>(l * stride + j) - static_cast<std::ptrdiff_t>(pad);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(L)) continue;
            acc += static_cast<double>(w[(o * C + c) * k + j]) * static_cast<double>(x(b, c, static_cast<std::size_t>(pos)));
          }
        y(b, o, l) = static_cast<T>(acc);
      }
  return y;
}

template <typename T>
ppgsqa::Tensor3<T> maxpool(const ppgsqa::Tensor3<T>& x, std::size_t k, std::size_t stride, std::size_t pad) {
  const std::size_t lout = (x.length() + 2 * pad - k) / stride + 1;
  ppgsqa::Tensor3<T> y(x.batch(), x.channels(), lout);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t l = 0; l < lout; ++l) {
        T m = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
          const auto pos = static_cast<std::ptrdiff_t>(l * stride + j) - static_cast<std::ptrdiff_t>(pad);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(x.length())) continue;
          m = std::max(m, x(b, c, static_cast<std::size_t>(pos)));
        }
        y(b, c, l) = m;
      }
  return y;
}

/// Batch-statistics normalization followed by the affine map.
template <typename T>
ppgsqa::Tensor3<T> batchnorm_train(const ppgsqa::Tensor3<T>& x, std::span<const T> gamma, std::span<const T> beta,
                                   double eps = 1e-5) {
  ppgsqa::Tensor3<T> y(x.shape());
  const double n = static_cast<double>(x.batch() * x.length());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t l = 0; l < x.length(); ++l) mean += x(b, c, l);
    mean /= n;
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t l = 0; l < x.length(); ++l) var += (x(b, c, l) - mean) * (x(b, c, l) - mean);
    var /= n;
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t l = 0; l < x.length(); ++l)
        y(b, c, l) = static_cast<T>(gamma[c] * (x(b, c, l) - mean) / std::sqrt(var + eps) + beta[c]);
  }
  return y;
}

template <typename T>
ppgsqa::Tensor3<T> batchnorm_eval(const ppgsqa::Tensor3<T>& x, std::span<const T> gamma, std::span<const T> beta,
                                  std::span<const T> mean, std::span<const T> var, double eps = 1e-5) {
  ppgsqa::Tensor3<T> y(x.shape());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t l = 0; l < x.length(); ++l)
        y(b, c, l) = static_cast<T>(gamma[c] * (x(b, c, l) - mean[c]) / std::sqrt(var[c] + eps) + beta[c]);
  return y;
}

template <typename T>
ppgsqa::Tensor3<T> relu(ppgsqa::Tensor3<T> x) {
  for (auto& v : x.values()) v = v > T(0) ? v : T(0);
  return x;
}

template <typename T>
ppgsqa::Tensor3<T> add(const ppgsqa::Tensor3<T>& a, const ppgsqa::Tensor3<T>& b) {
  ppgsqa::Tensor3<T> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y.values()[i] = a.values()[i] + b.values()[i];
  return y;
}

template <typename T>
ppgsqa::Tensor3<T> mean_over_length(const ppgsqa::Tensor3<T>& x) {
  ppgsqa::Tensor3<T> y(x.batch(), x.channels(), 1);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c) {
      double s = 0.0;
      for (std::size_t l = 0; l < x.length(); ++l) s += x(b, c, l);
      y(b, c, 0) = static_cast<T>(s / static_cast<double>(x.length()));
    }
  return y;
}

/// y[b, o] = sum_i W[o, i] x[b, i] (+ bias[o]) on [B, in, 1] tensors.
template <typename T>
ppgsqa::Tensor3<T> dense(const ppgsqa::Tensor3<T>& x, std::span<const T> w, std::size_t out,
                         std::span<const T> bias = {}) {
  ppgsqa::Tensor3<T> y(x.batch(), out, 1);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t o = 0; o < out; ++o) {
      double s = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
      for (std::size_t i = 0; i < x.channels(); ++i) s += static_cast<double>(w[o * x.channels() + i]) * x(b, i, 0);
      y(b, o, 0) = static_cast<T>(s);
    }
  return y;
}

/// Squeeze-and-excitation written as explicit mean, two matrix products,
/// ReLU and sigmoid.
template <typename T>
ppgsqa::Tensor3<T> se(const ppgsqa::Tensor3<T>& x, std::span<const T> fc1, std::span<const T> fc2,
                      std::size_t hidden, std::vector<double>* scales = nullptr) {
  const auto pooled = mean_over_length(x);
  const auto h = relu(dense(pooled, fc1, hidden));
  const auto z = dense(h, fc2, x.channels());
  ppgsqa::Tensor3<T> y(x.shape());
  if (scales) scales->clear();
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(z(b, c, 0))));
      if (scales) scales->push_back(s);
      for (std::size_t l = 0; l < x.length(); ++l) y(b, c, l) = static_cast<T>(x(b, c, l) * s);
    }
  return y;
}

// ---------------------------------------------------------------------------
// Metrics

/// Fraction of (good, bad) pairs ranked correctly, ties counting one half.
inline double auc_pairs(std::span<const ppgsqa::ScoredSample> s) {
  double num = 0.0, den = 0.0;
  for (const auto& g : s) {
    if (g.label != ppgsqa::Quality::Good) continue;
    for (const auto& b : s) {
      if (b.label != ppgsqa::Quality::Bad) continue;
      den += 1.0;
      if (g.score > b.score) num += 1.0;
      else if (g.score == b.score) num += 0.5;
    }
  }
  return num / den;
}

}  // namespace oracle
