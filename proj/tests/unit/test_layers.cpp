#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ppgsqa/errors.hpp"
#include "ppgsqa/layers.hpp"

using namespace ppgsqa;

namespace {

template <typename T>
Tensor3<T> random_input(Rng& rng, std::size_t b, std::size_t c, std::size_t l) {
  Tensor3<T> t(b, c, l);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal());
  return t;
}

template <typename T>
std::vector<T> random_weights(Rng& rng, std::size_t n) {
  std::vector<T> w(n);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-1, 1));
  return w;
}

template <typename T>
double max_abs_diff(const Tensor3<T>& a, const Tensor3<T>& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i])));
  return m;
}

}  // namespace

TEST_SUITE("conv1d") {
  TEST_CASE("matches the nested-loop oracle over random geometries") {
    Rng rng(101);
    for (int trial = 0; trial < 60; ++trial) {
      ConvGeometry g;
      g.in_channels = 1 + rng.below(5);
      g.out_channels = 1 + rng.below(9);
      g.kernel = 1 + rng.below(7);
      g.stride = 1 + rng.below(3);
      g.padding = rng.below(g.kernel);
      const std::size_t len = g.kernel + rng.below(40);
      const auto x = random_input<double>(rng, 1 + rng.below(3), g.in_channels, len);
      const auto w = random_weights<double>(rng, g.weight_size());
      const auto b = rng.below(2) ? random_weights<double>(rng, g.out_channels) : std::vector<double>{};
      const auto y = conv1d_forward<double>(x, w, g, b);
      const auto ref = oracle::conv1d<double>(x, w, g.out_channels, g.kernel, g.stride, g.padding, b);
      CHECK(max_abs_diff(y, ref) < 1e-12);
    }
  }

  TEST_CASE("single-precision conv agrees with the double oracle") {
    Rng rng(5);
    const ConvGeometry g{3, 32, 7, 2, 3};
    const auto x = random_input<float>(rng, 2, 3, 960);
    const auto w = random_weights<float>(rng, g.weight_size());
    const auto y = conv1d_forward<float>(x, w, g);
    const auto ref = oracle::conv1d<float>(x, w, 32, 7, 2, 3);
    CHECK(max_abs_diff(y, ref) < 1e-4);
  }

  TEST_CASE("identity kernel and stem output shape") {
    Rng rng(1);
    const auto x = random_input<double>(rng, 2, 1, 10);
    const std::vector<double> w{0, 1, 0};
    const auto y = conv1d_forward<double>(x, w, {1, 1, 3, 1, 1});
    CHECK(max_abs_diff(x, y) == 0.0);

    const auto stem = conv1d_forward<float>(Tensor3<float>(1, 3, 960), std::vector<float>(32 * 3 * 7, 0.1f),
                                            {3, 32, 7, 2, 3});
    CHECK(stem.shape() == Shape3{1, 32, 480});
  }

  TEST_CASE("channel and weight mismatches are errors") {
    const std::vector<double> w(4 * 3 * 3, 0.0);
    try {
      conv1d_forward<double>(Tensor3<double>(1, 2, 10), w, {3, 4, 3, 1, 1});
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
    CHECK_THROWS_AS(conv1d_forward<double>(Tensor3<double>(1, 3, 10), std::vector<double>(5), {3, 4, 3, 1, 1}), Error);
  }
}

TEST_SUITE("batchnorm1d") {
  TEST_CASE("training mode normalizes with batch statistics") {
    Tensor3<double> x(Shape3{2, 1, 2}, std::vector<double>{1, 2, 3, 4});
    std::vector<double> gamma{1}, beta{0}, rm{0}, rv{1};
    const auto y = batchnorm1d_forward<double>(x, gamma, beta, rm, rv, true, nullptr);
    const double sd = std::sqrt(1.25 + 1e-5);
    CHECK(y(0, 0, 0) == doctest::Approx(-1.5 / sd).epsilon(1e-12));
    CHECK(y(1, 0, 1) == doctest::Approx(1.5 / sd).epsilon(1e-12));
    // Running stats: momentum 0.1 and unbiased variance 5/3.
    CHECK(rm[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(rv[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("both modes match the oracle") {
    Rng rng(8);
    auto x = random_input<double>(rng, 3, 5, 17);
    const auto gamma = random_weights<double>(rng, 5), beta = random_weights<double>(rng, 5);
    std::vector<double> rm(5, 0.0), rv(5, 1.0);
    const auto y = batchnorm1d_forward<double>(x, gamma, beta, rm, rv, true, nullptr);
    CHECK(max_abs_diff(y, oracle::batchnorm_train<double>(x, gamma, beta)) < 1e-12);
    const std::vector<double> rm0(rm), rv0(rv);
    const auto ye = batchnorm1d_forward<double>(x, gamma, beta, rm, rv, false, nullptr);
    CHECK(max_abs_diff(ye, oracle::batchnorm_eval<double>(x, gamma, beta, rm0, rv0)) < 1e-12);
    CHECK(rm == rm0);
    CHECK(rv == rv0);
  }

  TEST_CASE("single-value channel in training mode is rejected") {
    Tensor3<double> x(1, 1, 1, 3.0);
    std::vector<double> g{1}, b{0}, rm{0}, rv{1};
    try {
      batchnorm1d_forward<double>(x, g, b, rm, rv, true, nullptr);
      FAIL("expected InvalidMode");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidMode);
    }
  }
}

TEST_SUITE("pooling and activations") {
  TEST_CASE("maxpool matches the oracle") {
    Rng rng(12);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t k = 1 + rng.below(4), s = 1 + rng.below(3), p = rng.below(k / 2 + 1);
      const auto x = random_input<double>(rng, 2, 3, k + rng.below(30));
      const auto y = maxpool1d_forward<double>(x, k, s, p, nullptr);
      CHECK(max_abs_diff(y, oracle::maxpool<double>(x, k, s, p)) == 0.0);
    }
  }

  TEST_CASE("maxpool of a monotone ramp picks the right edge of each window") {
    Tensor3<double> x(1, 1, 8);
    for (std::size_t i = 0; i < 8; ++i) x(0, 0, i) = static_cast<double>(i);
    const auto y = maxpool1d_forward<double>(x, 3, 2, 1, nullptr);
    REQUIRE(y.length() == 4);
    CHECK(y(0, 0, 0) == 1.0);
    CHECK(y(0, 0, 1) == 3.0);
    CHECK(y(0, 0, 2) == 5.0);
    CHECK(y(0, 0, 3) == 7.0);
  }

  TEST_CASE("relu, add and global average") {
    Tensor3<double> x(Shape3{1, 2, 2}, std::vector<double>{-1, 2, 0, -3});
    CHECK(relu_forward(x).values() == std::vector<double>{0, 2, 0, 0});
    CHECK(add(x, x).values() == std::vector<double>{-2, 4, 0, -6});
    const auto g = global_avgpool_forward(x);
    CHECK(g.shape() == Shape3{1, 2, 1});
    CHECK(g(0, 0, 0) == 0.5);
    CHECK(g(0, 1, 0) == -1.5);
  }

  TEST_CASE("linear matches the oracle") {
    Rng rng(13);
    const auto x = random_input<double>(rng, 4, 6, 1);
    const auto w = random_weights<double>(rng, 12), b = random_weights<double>(rng, 2);
    CHECK(max_abs_diff(linear_forward<double>(x, w, 2, b), oracle::dense<double>(x, w, 2, b)) < 1e-14);
  }
}

TEST_SUITE("squeeze-excitation") {
  TEST_CASE("zero weights halve every channel") {
    Rng rng(2);
    const auto x = random_input<double>(rng, 2, 16, 9);
    const std::vector<double> fc1(2 * 16, 0.0), fc2(16 * 2, 0.0);
    const auto y = se_forward<double>(x, fc1, fc2, 2, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.values()[i] == doctest::Approx(0.5 * x.values()[i]).epsilon(1e-15));
  }

  TEST_CASE("matches the oracle and scales stay strictly inside (0, 1)") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t C = 8 * (1 + rng.below(8)), h = C / 8;
      const auto x = random_input<double>(rng, 1 + rng.below(4), C, 1 + rng.below(50));
      auto fc1 = random_weights<double>(rng, h * C), fc2 = random_weights<double>(rng, C * h);
      SECache<double> cache;
      const auto y = se_forward<double>(x, fc1, fc2, h, &cache);
      std::vector<double> scales;
      CHECK(max_abs_diff(y, oracle::se<double>(x, fc1, fc2, h, &scales)) < 1e-12);
      for (double s : cache.scale) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
      }
    }
  }
}

TEST_SUITE("dropout") {
  TEST_CASE("eval mode and p = 0 are exact identities") {
    Rng rng(1);
    const auto x = random_input<double>(rng, 2, 3, 50);
    std::vector<double> mask;
    CHECK(dropout_forward(x, 0.2, &rng, false, &mask).values() == x.values());
    CHECK(dropout_forward(x, 0.0, &rng, true, &mask).values() == x.values());
  }

  TEST_CASE("inverted scaling preserves the mean") {
    Rng rng(77);
    const Tensor3<double> ones(1, 1, 1000000, 1.0);
    std::vector<double> mask;
    const auto y = dropout_forward(ones, 0.2, &rng, true, &mask);
    double mean = 0.0;
    for (double v : y.values()) mean += v;
    mean /= static_cast<double>(y.size());
    CHECK(std::abs(mean - 1.0) <= 0.005);
    for (double v : y.values()) REQUIRE((v == 0.0 || v == doctest::Approx(1.25)));
  }

  TEST_CASE("invalid probabilities") {
    Rng rng(1);
    const Tensor3<double> x(1, 1, 4, 1.0);
    for (double p : {-0.1, 1.0, 1.5}) {
      try {
        dropout_forward(x, p, &rng, true, static_cast<std::vector<double>*>(nullptr));
        FAIL("expected InvalidP");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidP);
      }
    }
  }
}

TEST_CASE("output length formula holds for random geometries") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 1 + rng.below(9), s = 1 + rng.below(4), p = rng.below(5);
    const std::size_t len = 1 + rng.below(200);
    if (len + 2 * p < k) {
      CHECK_THROWS_AS(pooled_length(len, k, s, p), Error);
      continue;
    }
    const std::size_t expect = (len + 2 * p - k) / s + 1;
    REQUIRE(pooled_length(len, k, s, p) == expect);
    if (trial % 20 == 0) {
      const Tensor3<double> x(1, 2, len, 1.0);
      CHECK(conv1d_forward<double>(x, std::vector<double>(2 * 2 * k, 1.0), {2, 2, k, s, p}).length() == expect);
      if (p <= k / 2) CHECK(maxpool1d_forward<double>(x, k, s, p, nullptr).length() == expect);
    }
  }
}

TEST_CASE("every layer backward agrees with central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& r : gradcheck::layers(seed)) {
      INFO(r.name << " seed " << seed);
      CHECK(r.checked > 0);
      CHECK(r.max_rel < 1e-5);
    }
  }
}
