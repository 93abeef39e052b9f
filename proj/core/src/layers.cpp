#include "ppgsqa/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ppgsqa {

namespace {

using idx = std::ptrdiff_t;

// Output positions lo for which lo*stride + offset indexes inside [0, in_len).
struct ValidRange {
  std::size_t begin;
  std::size_t end;
};

ValidRange valid_outputs(idx offset, std::size_t stride, std::size_t in_len, std::size_t out_len) {
  const idx s = static_cast<idx>(stride);
  const idx begin = offset >= 0 ? 0 : (-offset + s - 1) / s;
  const idx last_in = static_cast<idx>(in_len) - 1 - offset;
  const idx end = last_in < 0 ? 0 : std::min<idx>(static_cast<idx>(out_len), last_in / s + 1);
  return {static_cast<std::size_t>(begin), static_cast<std::size_t>(std::max(begin, end))};
}

// Eight independent partial sums so the reduction vectorizes without
// reassociation flags; the summation order is fixed.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
void check_shape(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::ShapeMismatch, what);
}

}  // namespace

std::size_t pooled_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (stride == 0 || kernel == 0) fail(ErrorKind::ShapeMismatch, "kernel and stride must be positive");
  if (length + 2 * padding < kernel) {
    fail(ErrorKind::ShapeMismatch, "window of " + std::to_string(kernel) + " does not fit length " +
                                       std::to_string(length) + " with padding " + std::to_string(padding));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------
// Conv1d, lowered to im2col + GEMM per batch element.

namespace {

// col[(ci*K + k) * lout + lo] = x[ci, lo*stride + k - padding], zero outside.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t lin, std::size_t lout, T* col) {
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    const T* xr = x + ci * lin;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      T* cr = col + (ci * g.kernel + k) * lout;
      const idx off = static_cast<idx>(k) - static_cast<idx>(g.padding);
      const auto r = valid_outputs(off, g.stride, lin, lout);
      std::fill(cr, cr + r.begin, T(0));
      if (g.stride == 1) {
        std::copy(xr + static_cast<idx>(r.begin) + off, xr + static_cast<idx>(r.end) + off, cr + r.begin);
      } else {
        for (std::size_t lo = r.begin; lo < r.end; ++lo) cr[lo] = xr[static_cast<idx>(lo * g.stride) + off];
      }
      std::fill(cr + r.end, cr + lout, T(0));
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, std::size_t lin, std::size_t lout, T* dx) {
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    T* dxr = dx + ci * lin;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      const T* cr = col + (ci * g.kernel + k) * lout;
      const idx off = static_cast<idx>(k) - static_cast<idx>(g.padding);
      const auto r = valid_outputs(off, g.stride, lin, lout);
      if (g.stride == 1) {
        T* xs = dxr + off;
        for (std::size_t lo = r.begin; lo < r.end; ++lo) xs[lo] += cr[lo];
      } else {
        for (std::size_t lo = r.begin; lo < r.end; ++lo) dxr[static_cast<idx>(lo * g.stride) + off] += cr[lo];
      }
    }
  }
}

// C[M,N] += A[M,K] * B[K,N], B and C row-major, A(i,k) = a[i*ars + k*acs].
// Four output rows share each streamed row of B.
template <typename T>
void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const T* a, std::size_t ars, std::size_t acs, const T* b,
              T* c) {
  constexpr std::size_t kTileN = 256;
  for (std::size_t n0 = 0; n0 < N; n0 += kTileN) {
    const std::size_t n1 = std::min(N, n0 + kTileN);
    std::size_t i = 0;
    for (; i + 4 <= M; i += 4) {
      T* c0 = c + i * N;
      T* c1 = c0 + N;
      T* c2 = c1 + N;
      T* c3 = c2 + N;
      for (std::size_t k = 0; k < K; ++k) {
        const T w0 = a[i * ars + k * acs], w1 = a[(i + 1) * ars + k * acs];
        const T w2 = a[(i + 2) * ars + k * acs], w3 = a[(i + 3) * ars + k * acs];
        const T* br = b + k * N;
        for (std::size_t n = n0; n < n1; ++n) {
          const T v = br[n];
          c0[n] += w0 * v;
          c1[n] += w1 * v;
          c2[n] += w2 * v;
          c3[n] += w3 * v;
        }
      }
    }
    for (; i < M; ++i) {
      T* ci = c + i * N;
      for (std::size_t k = 0; k < K; ++k) {
        const T w = a[i * ars + k * acs];
        const T* br = b + k * N;
        for (std::size_t n = n0; n < n1; ++n) ci[n] += w * br[n];
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor3<T> conv1d_forward(const Tensor3<T>& x, std::span<const T> weight, const ConvGeometry& g,
                          std::span<const T> bias) {
  check_shape<T>(x.channels() == g.in_channels, "conv1d input has " + std::to_string(x.channels()) +
                                                    " channels, expected " + std::to_string(g.in_channels));
  check_shape<T>(weight.size() == g.weight_size(), "conv1d weight size mismatch");
  check_shape<T>(bias.empty() || bias.size() == g.out_channels, "conv1d bias size mismatch");
  const std::size_t lin = x.length();
  const std::size_t lout = pooled_length(lin, g.kernel, g.stride, g.padding);
  const std::size_t ck = g.in_channels * g.kernel;
  Tensor3<T> y(x.batch(), g.out_channels, lout);
  std::vector<T> col(ck * lout);

  for (std::size_t b = 0; b < x.batch(); ++b) {
    T* yb = y.row(b, 0).data();
    if (!bias.empty()) {
      for (std::size_t co = 0; co < g.out_channels; ++co) std::fill(yb + co * lout, yb + (co + 1) * lout, bias[co]);
    }
    im2col(x.row(b, 0).data(), g, lin, lout, col.data());
    gemm_acc(g.out_channels, lout, ck, weight.data(), ck, std::size_t{1}, col.data(), yb);
  }
  return y;
}

template <typename T>
Tensor3<T> conv1d_backward(const Tensor3<T>& x, std::span<const T> weight, const ConvGeometry& g,
                           const Tensor3<T>& dy, std::span<T> dweight, std::span<T> dbias,
                           bool need_input_grad) {
  const std::size_t lin = x.length();
  const std::size_t lout = dy.length();
  check_shape<T>(dy.batch() == x.batch() && dy.channels() == g.out_channels &&
                     lout == pooled_length(lin, g.kernel, g.stride, g.padding),
                 "conv1d gradient shape mismatch");
  check_shape<T>(dweight.size() == g.weight_size(), "conv1d weight gradient size mismatch");
  const std::size_t ck = g.in_channels * g.kernel;

  if (!dbias.empty()) {
    for (std::size_t b = 0; b < dy.batch(); ++b) {
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        const T* dr = dy.row(b, co).data();
        T s = T(0);
        for (std::size_t l = 0; l < lout; ++l) s += dr[l];
        dbias[co] += s;
      }
    }
  }

  Tensor3<T> dx;
  if (need_input_grad) dx = Tensor3<T>(x.shape());
  std::vector<T> col(ck * lout);
  std::vector<T> dcol(need_input_grad ? ck * lout : 0);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const T* db = dy.row(b, 0).data();
    im2col(x.row(b, 0).data(), g, lin, lout, col.data());
    // dW[co, j] += <dy[co, :], col[j, :]>
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      T* dw = dweight.data() + co * ck;
      for (std::size_t j = 0; j < ck; ++j) dw[j] += dot(db + co * lout, col.data() + j * lout, lout);
    }
    if (need_input_grad) {
      // dcol = W^T dy, then scatter back onto the input positions.
      std::fill(dcol.begin(), dcol.end(), T(0));
      gemm_acc(ck, lout, g.out_channels, weight.data(), std::size_t{1}, ck, db, dcol.data());
      col2im_add(dcol.data(), g, lin, lout, dx.row(b, 0).data());
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm1d

template <typename T>
Tensor3<T> batchnorm1d_forward(const Tensor3<T>& x, std::span<const T> gamma, std::span<const T> beta,
                               std::span<T> running_mean, std::span<T> running_var, bool training,
                               BatchNormCache<T>* cache, double momentum, double eps) {
  const std::size_t C = x.channels();
  check_shape<T>(gamma.size() == C && beta.size() == C, "batchnorm affine size mismatch");
  Tensor3<T> y(x.shape());

  if (!training) {
    if (running_mean.size() != C || running_var.size() != C) {
      fail(ErrorKind::InvalidMode, "eval-mode batchnorm without running statistics");
    }
    for (std::size_t c = 0; c < C; ++c) {
      const T scale = gamma[c] / static_cast<T>(std::sqrt(static_cast<double>(running_var[c]) + eps));
      const T shift = beta[c] - running_mean[c] * scale;
      for (std::size_t b = 0; b < x.batch(); ++b) {
        const T* xr = x.row(b, c).data();
        T* yr = y.row(b, c).data();
        for (std::size_t l = 0; l < x.length(); ++l) yr[l] = xr[l] * scale + shift;
      }
    }
    return y;
  }

  const std::size_t m = x.batch() * x.length();
  if (m < 2) fail(ErrorKind::InvalidMode, "training-mode batchnorm needs more than one value per channel");
  if (cache) {
    cache->xhat.resize(x.size());
    cache->inv_std.resize(C);
  }
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < x.batch(); ++b) {
      for (T v : x.row(b, c)) sum += static_cast<double>(v);
    }
    const double mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t b = 0; b < x.batch(); ++b) {
      for (T v : x.row(b, c)) ss += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
    }
    const double var = ss / static_cast<double>(m);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    if (cache) cache->inv_std[c] = static_cast<T>(inv_std);

    for (std::size_t b = 0; b < x.batch(); ++b) {
      const T* xr = x.row(b, c).data();
      T* yr = y.row(b, c).data();
      T* hr = cache ? cache->xhat.data() + (b * C + c) * x.length() : nullptr;
      for (std::size_t l = 0; l < x.length(); ++l) {
        const T xh = static_cast<T>((static_cast<double>(xr[l]) - mean) * inv_std);
        if (hr) hr[l] = xh;
        yr[l] = gamma[c] * xh + beta[c];
      }
    }
    if (running_mean.size() == C && running_var.size() == C) {
      const double unbiased = ss / static_cast<double>(m - 1);
      running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    }
  }
  return y;
}

template <typename T>
Tensor3<T> batchnorm1d_backward(const Tensor3<T>& dy, std::span<const T> gamma, const BatchNormCache<T>& cache,
                                std::span<T> dgamma, std::span<T> dbeta) {
  const std::size_t C = dy.channels();
  const std::size_t L = dy.length();
  check_shape<T>(cache.xhat.size() == dy.size() && cache.inv_std.size() == C, "batchnorm cache mismatch");
  const double m = static_cast<double>(dy.batch() * L);
  Tensor3<T> dx(dy.shape());
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < dy.batch(); ++b) {
      const T* dr = dy.row(b, c).data();
      const T* hr = cache.xhat.data() + (b * C + c) * L;
      for (std::size_t l = 0; l < L; ++l) {
        sum_dy += static_cast<double>(dr[l]);
        sum_dy_xhat += static_cast<double>(dr[l]) * static_cast<double>(hr[l]);
      }
    }
    dgamma[c] += static_cast<T>(sum_dy_xhat);
    dbeta[c] += static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma[c]) * static_cast<double>(cache.inv_std[c]);
    const double mean_dy = sum_dy / m;
    const double mean_dy_xhat = sum_dy_xhat / m;
    for (std::size_t b = 0; b < dy.batch(); ++b) {
      const T* dr = dy.row(b, c).data();
      const T* hr = cache.xhat.data() + (b * C + c) * L;
      T* dxr = dx.row(b, c).data();
      for (std::size_t l = 0; l < L; ++l) {
        dxr[l] = static_cast<T>(k * (static_cast<double>(dr[l]) - mean_dy - static_cast<double>(hr[l]) * mean_dy_xhat));
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise, pooling, dropout

template <typename T>
Tensor3<T> relu_forward(const Tensor3<T>& x) {
  Tensor3<T> y(x.shape());
  const T* xs = x.data();
  T* ys = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) ys[i] = xs[i] > T(0) ? xs[i] : T(0);
  return y;
}

template <typename T>
Tensor3<T> relu_backward(const Tensor3<T>& y, const Tensor3<T>& dy) {
  check_shape<T>(y.shape() == dy.shape(), "relu gradient shape mismatch");
  Tensor3<T> dx(dy.shape());
  const T* ys = y.data();
  const T* ds = dy.data();
  T* out = dx.data();
  for (std::size_t i = 0; i < dy.size(); ++i) out[i] = ys[i] > T(0) ? ds[i] : T(0);
  return dx;
}

template <typename T>
Tensor3<T> maxpool1d_forward(const Tensor3<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding,
                             std::vector<std::uint32_t>* argmax) {
  const std::size_t lin = x.length();
  const std::size_t lout = pooled_length(lin, kernel, stride, padding);
  if (padding * 2 > kernel) fail(ErrorKind::ShapeMismatch, "maxpool padding must be at most half the kernel");
  Tensor3<T> y(x.batch(), x.channels(), lout);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const T* xr = x.row(b, c).data();
      T* yr = y.row(b, c).data();
      for (std::size_t lo = 0; lo < lout; ++lo, ++o) {
        const idx start = static_cast<idx>(lo * stride) - static_cast<idx>(padding);
        T best = -std::numeric_limits<T>::infinity();
        std::uint32_t best_i = 0;
        for (std::size_t k = 0; k < kernel; ++k) {
          const idx i = start + static_cast<idx>(k);
          if (i < 0 || i >= static_cast<idx>(lin)) continue;
          if (xr[i] > best) {
            best = xr[i];
            best_i = static_cast<std::uint32_t>(i);
          }
        }
        yr[lo] = best;
        if (argmax) (*argmax)[o] = best_i;
      }
    }
  }
  return y;
}

template <typename T>
Tensor3<T> maxpool1d_backward(const Shape3& input_shape, const Tensor3<T>& dy, const std::vector<std::uint32_t>& argmax) {
  check_shape<T>(argmax.size() == dy.size(), "maxpool argmax cache mismatch");
  Tensor3<T> dx(input_shape);
  std::size_t o = 0;
  for (std::size_t b = 0; b < dy.batch(); ++b) {
    for (std::size_t c = 0; c < dy.channels(); ++c) {
      const T* dr = dy.row(b, c).data();
      T* dxr = dx.row(b, c).data();
      for (std::size_t lo = 0; lo < dy.length(); ++lo, ++o) dxr[argmax[o]] += dr[lo];
    }
  }
  return dx;
}

template <typename T>
Tensor3<T> dropout_forward(const Tensor3<T>& x, double p, Rng* rng, bool training, std::vector<T>* mask) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::InvalidP, "dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) {
    if (mask) mask->assign(x.size(), T(1));
    return x;
  }
  if (!rng) fail(ErrorKind::InvalidMode, "training-mode dropout requires a generator");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  Tensor3<T> y(x.shape());
  if (mask) mask->resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng->uniform() < p ? T(0) : keep_scale;
    if (mask) (*mask)[i] = m;
    y.data()[i] = x.data()[i] * m;
  }
  return y;
}

template <typename T>
Tensor3<T> dropout_backward(const Tensor3<T>& dy, const std::vector<T>& mask) {
  check_shape<T>(mask.size() == dy.size(), "dropout mask mismatch");
  Tensor3<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data()[i] = dy.data()[i] * mask[i];
  return dx;
}

template <typename T>
Tensor3<T> global_avgpool_forward(const Tensor3<T>& x) {
  Tensor3<T> y(x.batch(), x.channels(), 1);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      double s = 0.0;
      for (T v : x.row(b, c)) s += static_cast<double>(v);
      y(b, c, 0) = static_cast<T>(s / static_cast<double>(x.length()));
    }
  }
  return y;
}

template <typename T>
Tensor3<T> global_avgpool_backward(const Shape3& input_shape, const Tensor3<T>& dy) {
  Tensor3<T> dx(input_shape);
  const T inv = T(1) / static_cast<T>(input_shape.length);
  for (std::size_t b = 0; b < input_shape.batch; ++b) {
    for (std::size_t c = 0; c < input_shape.channels; ++c) {
      const T g = dy(b, c, 0) * inv;
      for (T& v : dx.row(b, c)) v = g;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear and squeeze-and-excitation

template <typename T>
Tensor3<T> linear_forward(const Tensor3<T>& x, std::span<const T> weight, std::size_t out_features,
                          std::span<const T> bias) {
  const std::size_t in = x.channels() * x.length();
  check_shape<T>(weight.size() == out_features * in, "linear weight size mismatch");
  Tensor3<T> y(x.batch(), out_features, 1);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const T* xr = x.data() + b * in;
    for (std::size_t o = 0; o < out_features; ++o) {
      y(b, o, 0) = dot(weight.data() + o * in, xr, in) + (bias.empty() ? T(0) : bias[o]);
    }
  }
  return y;
}

template <typename T>
Tensor3<T> linear_backward(const Tensor3<T>& x, std::span<const T> weight, std::size_t out_features,
                           const Tensor3<T>& dy, std::span<T> dweight, std::span<T> dbias) {
  const std::size_t in = x.channels() * x.length();
  Tensor3<T> dx(x.shape());
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const T* xr = x.data() + b * in;
    T* dxr = dx.data() + b * in;
    for (std::size_t o = 0; o < out_features; ++o) {
      const T g = dy(b, o, 0);
      if (!dbias.empty()) dbias[o] += g;
      T* dw = dweight.data() + o * in;
      const T* w = weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        dw[i] += g * xr[i];
        dxr[i] += g * w[i];
      }
    }
  }
  return dx;
}

template <typename T>
Tensor3<T> se_forward(const Tensor3<T>& x, std::span<const T> fc1, std::span<const T> fc2, std::size_t hidden,
                      SECache<T>* cache) {
  const std::size_t B = x.batch(), C = x.channels(), L = x.length();
  check_shape<T>(fc1.size() == hidden * C && fc2.size() == C * hidden, "SE weight size mismatch");
  std::vector<T> pooled(B * C), z1(B * hidden), s(B * C);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (T v : x.row(b, c)) acc += static_cast<double>(v);
      pooled[b * C + c] = static_cast<T>(acc / static_cast<double>(L));
    }
    for (std::size_t h = 0; h < hidden; ++h) z1[b * hidden + h] = dot(fc1.data() + h * C, pooled.data() + b * C, C);
    std::vector<T> a1(hidden);
    for (std::size_t h = 0; h < hidden; ++h) a1[h] = std::max(z1[b * hidden + h], T(0));
    for (std::size_t c = 0; c < C; ++c) {
      const T z2 = dot(fc2.data() + c * hidden, a1.data(), hidden);
      s[b * C + c] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(z2))));
    }
  }
  Tensor3<T> y(x.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T sc = s[b * C + c];
      const T* xr = x.row(b, c).data();
      T* yr = y.row(b, c).data();
      for (std::size_t l = 0; l < L; ++l) yr[l] = xr[l] * sc;
    }
  }
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(z1);
    cache->scale = std::move(s);
  }
  return y;
}

template <typename T>
Tensor3<T> se_backward(const Tensor3<T>& x, std::span<const T> fc1, std::span<const T> fc2, std::size_t hidden,
                       const SECache<T>& cache, const Tensor3<T>& dy, std::span<T> dfc1, std::span<T> dfc2) {
  const std::size_t B = x.batch(), C = x.channels(), L = x.length();
  check_shape<T>(cache.scale.size() == B * C && cache.hidden.size() == B * hidden, "SE cache mismatch");
  Tensor3<T> dx(x.shape());
  std::vector<T> dz2(C), da1(hidden), dz1(hidden), a1(hidden);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T sc = cache.scale[b * C + c];
      const T* xr = x.row(b, c).data();
      const T* dr = dy.row(b, c).data();
      T* dxr = dx.row(b, c).data();
      for (std::size_t l = 0; l < L; ++l) dxr[l] = dr[l] * sc;
      const T ds = dot(dr, xr, L);
      dz2[c] = ds * sc * (T(1) - sc);
    }
    for (std::size_t h = 0; h < hidden; ++h) a1[h] = std::max(cache.hidden[b * hidden + h], T(0));
    std::fill(da1.begin(), da1.end(), T(0));
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t h = 0; h < hidden; ++h) {
        dfc2[c * hidden + h] += dz2[c] * a1[h];
        da1[h] += dz2[c] * fc2[c * hidden + h];
      }
    }
    for (std::size_t h = 0; h < hidden; ++h) dz1[h] = cache.hidden[b * hidden + h] > T(0) ? da1[h] : T(0);
    for (std::size_t c = 0; c < C; ++c) {
      T dp = T(0);
      for (std::size_t h = 0; h < hidden; ++h) {
        dfc1[h * C + c] += dz1[h] * cache.pooled[b * C + c];
        dp += dz1[h] * fc1[h * C + c];
      }
      const T g = dp / static_cast<T>(L);
      T* dxr = dx.row(b, c).data();
      for (std::size_t l = 0; l < L; ++l) dxr[l] += g;
    }
  }
  return dx;
}

template <typename T>
Tensor3<T> add(const Tensor3<T>& a, const Tensor3<T>& b) {
  check_shape<T>(a.shape() == b.shape(), "residual add shape mismatch " + a.shape().to_string() + " vs " + b.shape().to_string());
  Tensor3<T> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
  return y;
}

#define PPGSQA_INSTANTIATE_LAYERS(T)                                                                                   \
  template Tensor3<T> conv1d_forward<T>(const Tensor3<T>&, std::span<const T>, const ConvGeometry&,                   \
                                        std::span<const T>);                                                          \
  template Tensor3<T> conv1d_backward<T>(const Tensor3<T>&, std::span<const T>, const ConvGeometry&,                  \
                                         const Tensor3<T>&, std::span<T>, std::span<T>, bool);                        \
  template Tensor3<T> batchnorm1d_forward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, std::span<T>, \
                                             std::span<T>, bool, BatchNormCache<T>*, double, double);                 \
  template Tensor3<T> batchnorm1d_backward<T>(const Tensor3<T>&, std::span<const T>, const BatchNormCache<T>&,        \
                                              std::span<T>, std::span<T>);                                            \
  template Tensor3<T> relu_forward<T>(const Tensor3<T>&);                                                             \
  template Tensor3<T> relu_backward<T>(const Tensor3<T>&, const Tensor3<T>&);                                         \
  template Tensor3<T> maxpool1d_forward<T>(const Tensor3<T>&, std::size_t, std::size_t, std::size_t,                  \
                                           std::vector<std::uint32_t>*);                                              \
  template Tensor3<T> maxpool1d_backward<T>(const Shape3&, const Tensor3<T>&, const std::vector<std::uint32_t>&);     \
  template Tensor3<T> dropout_forward<T>(const Tensor3<T>&, double, Rng*, bool, std::vector<T>*);                     \
  template Tensor3<T> dropout_backward<T>(const Tensor3<T>&, const std::vector<T>&);                                  \
  template Tensor3<T> global_avgpool_forward<T>(const Tensor3<T>&);                                                   \
  template Tensor3<T> global_avgpool_backward<T>(const Shape3&, const Tensor3<T>&);                                   \
  template Tensor3<T> linear_forward<T>(const Tensor3<T>&, std::span<const T>, std::size_t, std::span<const T>);      \
  template Tensor3<T> linear_backward<T>(const Tensor3<T>&, std::span<const T>, std::size_t, const Tensor3<T>&,       \
                                         std::span<T>, std::span<T>);                                                 \
  template Tensor3<T> se_forward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, std::size_t,           \
                                    SECache<T>*);                                                                     \
  template Tensor3<T> se_backward<T>(const Tensor3<T>&, std::span<const T>, std::span<const T>, std::size_t,          \
                                     const SECache<T>&, const Tensor3<T>&, std::span<T>, std::span<T>);               \
  template Tensor3<T> add<T>(const Tensor3<T>&, const Tensor3<T>&);

PPGSQA_INSTANTIATE_LAYERS(float)
PPGSQA_INSTANTIATE_LAYERS(double)

#undef PPGSQA_INSTANTIATE_LAYERS

}  // namespace ppgsqa
