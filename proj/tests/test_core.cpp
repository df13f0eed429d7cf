#include <doctest.h>

#include <cmath>
#include <set>

#include "ubu/core.hpp"

using namespace ubu;

TEST_CASE("weighted norm matches hand computation") {
  PhaseState z;
  z.x = Vec(2);
  z.x << 1.0, 2.0;
  z.v = Vec(2);
  z.v << 3.0, -1.0;
  WeightedNormParams p{2.0, 0.5};
  // ||x||^2 = 5, 2b<x,v> = 1, a||v||^2 = 20
  CHECK(weighted_norm_sq(z, p) == doctest::Approx(26.0).epsilon(1e-15));
}

TEST_CASE("weighted norm rejects degenerate parameters") {
  PhaseState z;
  z.x = Vec::Ones(2);
  z.v = Vec::Ones(2);
  CHECK_THROWS(weighted_norm_sq(z, WeightedNormParams{1.0, 1.0}));
  CHECK_THROWS(weighted_norm_sq(z, WeightedNormParams{-1.0, 0.1}));
}

TEST_CASE("keyed words are deterministic and slot-sensitive") {
  NoiseKey k{42, 3, 7, 1000, kSlotXi1};
  CHECK(key_word(k, 0) == key_word(k, 0));
  NoiseKey k2 = k;
  k2.slot = kSlotXi2;
  CHECK(key_word(k, 0) != key_word(k2, 0));
  NoiseKey k3 = k;
  k3.step = 1001;
  CHECK(key_word(k, 0) != key_word(k3, 0));
  NoiseKey k4 = k;
  k4.level = 4;
  CHECK(key_word(k, 0) != key_word(k4, 0));
  NoiseKey k5 = k;
  k5.seed = 43;
  CHECK(key_word(k, 0) != key_word(k5, 0));
  CHECK(key_word(k, 0) != key_word(k, 1));
}

TEST_CASE("stream tags separate purposes and indices") {
  std::set<std::uint64_t> tags;
  for (int p = 1; p <= 10; ++p)
    for (int a = 0; a < 5; ++a)
      tags.insert(stream_tag(static_cast<Stream>(p), a, 0));
  CHECK(tags.size() == 50);
}

TEST_CASE("keyed uniforms live strictly inside the unit interval") {
  NoiseKey k{7, 0, 0, 0, 0};
  for (std::uint64_t j = 0; j < 10000; ++j) {
    const double u = key_uniform(k, j);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("keyed gaussians have standard moments") {
  // With n = 200000 samples the mean has sd ~ 0.0022 and the variance
  // estimate sd ~ 0.0032; bounds below are ~5 sigma.
  const int n = 200000;
  NoiseKey k{123, 0, 0, 0, kSlotXi1};
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double g = draw_gaussian(k, static_cast<std::uint64_t>(j));
    s1 += g;
    s2 += g * g;
    s3 += g * g * g;
    s4 += g * g * g * g;
  }
  CHECK(std::fabs(s1 / n) < 0.012);
  CHECK(std::fabs(s2 / n - 1.0) < 0.017);
  CHECK(std::fabs(s3 / n) < 0.05);
  CHECK(std::fabs(s4 / n - 3.0) < 0.12);
}

TEST_CASE("vector gaussian draw matches scalar draws") {
  NoiseKey k{5, 1, 2, 3, kSlotXi3};
  const Vec g = draw_gaussians(k, 8);
  for (int j = 0; j < 8; ++j)
    CHECK(g[j] == draw_gaussian(k, static_cast<std::uint64_t>(j)));
}

TEST_CASE("batch draws are uniform over the data index range") {
  NoiseKey k{99, 0, 0, 0, kSlotBatch};
  const int n_data = 17;
  std::vector<long> counts(n_data + 1, 0);
  for (int rep = 0; rep < 5000; ++rep) {
    NoiseKey kr = k;
    kr.step = rep;
    for (int i : draw_batch(kr, n_data, 4)) {
      REQUIRE(i >= 1);
      REQUIRE(i <= n_data);
      ++counts[i];
    }
  }
  // 20000 draws over 17 cells: expected ~1176 per cell, sd ~34.
  for (int i = 1; i <= n_data; ++i) CHECK(std::fabs(counts[i] - 20000.0 / 17) < 200);
}

TEST_CASE("coin flips are close to fair") {
  NoiseKey k{11, 0, 0, 0, kSlotCoin};
  int heads = 0;
  for (int j = 0; j < 20000; ++j)
    if (draw_coin(k, static_cast<std::uint64_t>(j))) ++heads;
  CHECK(std::fabs(heads - 10000.0) < 400);
}

TEST_CASE("run configuration validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  SUBCASE("bad step size") {
    c.h0 = 0.0;
    CHECK_THROWS(c.validate());
  }
  SUBCASE("replicate decay must exceed 2") {
    c.phi_N = 2.0;
    CHECK_THROWS(c.validate());
  }
  SUBCASE("richardson weight bounded by phi_N^{-1/2}") {
    c.c_R = 0.51;  // phi_N = 4
    CHECK_THROWS(c.validate());
  }
  SUBCASE("odd epoch rejected for subsampled gradients") {
    c.mode = GradientMode::Svrg;
    c.tau = 3;
    CHECK_THROWS(c.validate());
  }
}

TEST_CASE("mode names and default richardson weights") {
  CHECK(to_string(GradientMode::Exact) == "exact");
  CHECK(to_string(GradientMode::Svrg) == "svrg");
  CHECK(to_string(GradientMode::Approx) == "approx");
  CHECK(default_c_R(GradientMode::Exact) == doctest::Approx(0.25));
  CHECK(default_c_R(GradientMode::Svrg) == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))));
  CHECK(default_c_R(GradientMode::Approx) == doctest::Approx(0.5));
}
