#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ead/asynctime.hpp"

using namespace ead;

namespace {

AsyncConfig test_config(int C, double lambda = 0.8, int w = 2, long K = 100) {
  AsyncConfig cfg;
  cfg.C = C;
  cfg.lambda = lambda;
  cfg.w = w;
  cfg.K = K;
  cfg.K_hard_cap = 3 * K;
  return cfg;
}

}  // namespace

TEST_CASE("training timesteps") {
  RngStream rng(1);
  SUBCASE("C = 0 collapses to a constant vector") {
    const AsyncConfig cfg = test_config(0);
    for (int trial = 0; trial < 50; ++trial) {
      const auto t = sample_training_timesteps(6, 100, cfg, {}, rng);
      for (int ti : t) CHECK(ti == t[0]);
    }
  }
  SUBCASE("entries clamp to [0, T]") {
    const AsyncConfig cfg = test_config(30);
    std::vector<char> dummy(4, 0);
    dummy[3] = 1;
    for (int trial = 0; trial < 500; ++trial) {
      const auto t = sample_training_timesteps(4, 20, cfg, dummy, rng);
      for (int ti : t) {
        CHECK(ti >= 0);
        CHECK(ti <= 20);
      }
    }
  }
}

TEST_CASE("dummy offset mixture frequency") {
  // Monte-Carlo oracle: offsets land in [0, C] with probability
  // 0.5 + 0.5 (C+1)/(2C+1); checked within a 3-sigma binomial band.
  const int C = 5;
  AsyncConfig cfg = test_config(C);
  const int n = 100000;
  RngStream rng(42);
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (sample_offset(true, cfg, rng) >= 0) ++hits;
  const double p0 = 0.5 + 0.5 * (C + 1.0) / (2.0 * C + 1.0);
  const double sigma = std::sqrt(p0 * (1.0 - p0) / n);
  CHECK(std::abs(static_cast<double>(hits) / n - p0) < 3.0 * sigma);

  // Real atoms stay on the symmetric interval.
  int real_hits = 0;
  for (int i = 0; i < n; ++i)
    if (sample_offset(false, cfg, rng) >= 0) ++real_hits;
  const double p_real = (C + 1.0) / (2.0 * C + 1.0);
  const double sigma_real = std::sqrt(p_real * (1.0 - p_real) / n);
  CHECK(std::abs(static_cast<double>(real_hits) / n - p_real) < 3.0 * sigma_real);
}

TEST_CASE("velocity") {
  SUBCASE("zero for identical latents") {
    const std::vector<double> z{1.0, 2.0, 3.0, 4.0};
    const auto v = velocity(z, z, 2);
    CHECK(v == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("squared L2 norm per atom") {
    std::vector<double> prev(9, 0.0), curr(9, 0.0);
    curr[0] = 3.0;  // atom 0 channels (3,4,0,...)
    curr[1] = 4.0;
    const auto v = velocity(prev, curr, 1);
    CHECK(v[0] == doctest::Approx(25.0).epsilon(1e-15));
  }
  SUBCASE("quadratic homogeneity") {
    std::vector<double> prev{0, 0, 0}, a{1, 2, 2}, b{2, 4, 4};
    CHECK(velocity(prev, b, 1)[0] ==
          doctest::Approx(4.0 * velocity(prev, a, 1)[0]).epsilon(1e-15));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(velocity(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("compare rule") {
  VelocityHistory hist(1, 4);
  SUBCASE("empty buffer is convergent") {
    CHECK(compare(hist, std::vector<double>{123.0})[0] == 1);
  }
  SUBCASE("at or below the buffered minimum") {
    hist.push(std::vector<double>{5.0});
    hist.push(std::vector<double>{4.0});
    CHECK(compare(hist, std::vector<double>{3.9})[0] == 1);
    CHECK(compare(hist, std::vector<double>{4.5})[0] == 0);
    CHECK(compare(hist, std::vector<double>{4.0})[0] == 1);  // tie advances
  }
  SUBCASE("window evicts old entries") {
    VelocityHistory h2(1, 2);
    h2.push(std::vector<double>{1.0});
    h2.push(std::vector<double>{10.0});
    h2.push(std::vector<double>{20.0});  // the 1.0 entry is gone
    CHECK(compare(h2, std::vector<double>{5.0})[0] == 1);
  }
  SUBCASE("exhaustive small cases") {
    // All buffers of size 0..2 over a small value set, all h* choices.
    const std::vector<double> values{0.0, 1.0, 2.5};
    for (double a : values)
      for (double b : values)
        for (double h : values) {
          VelocityHistory vh(1, 2);
          vh.push(std::vector<double>{a});
          vh.push(std::vector<double>{b});
          const bool want = h <= std::min(a, b);
          CHECK(compare(vh, std::vector<double>{h})[0] == (want ? 1 : 0));
        }
  }
}

TEST_CASE("advance timesteps") {
  const int T = 20;
  SUBCASE("phase 1 uniform decrement") {
    AsyncConfig cfg = test_config(3, 0.5, 2, 100);
    VelocityHistory hist(2, 2);
    const auto out = advance_timesteps({7, 7}, 100, cfg, hist,
                                       std::vector<double>{0, 0}, T);
    CHECK(out == TimestepVector{6, 6});
  }
  SUBCASE("phase 2 compare-driven") {
    AsyncConfig cfg = test_config(3, 0.5, 2, 100);
    VelocityHistory hist(2, 2);
    hist.push(std::vector<double>{1.0, 1.0});
    // k = 0 is past the warm-up for lambda = 0.5.
    const auto out = advance_timesteps({4, 4}, 0, cfg, hist,
                                       std::vector<double>{0.5, 2.0}, T);
    CHECK(out == TimestepVector{3, 4});
  }
  SUBCASE("boundary clamp after decrement") {
    AsyncConfig cfg = test_config(2, 0.5, 2, 100);
    const std::vector<std::uint8_t> v{1, 0};
    const auto out = apply_advance({1, 7}, v, T, cfg);
    CHECK(out == TimestepVector{0, 4});  // [min, min + 2C] = [0, 4]
  }
  SUBCASE("zero entries stay at zero") {
    AsyncConfig cfg = test_config(5, 0.5, 2, 100);
    const std::vector<std::uint8_t> v{1, 1};
    const auto out = apply_advance({0, 3}, v, T, cfg);
    CHECK(out[0] == 0);
    CHECK(out[1] == 2);
  }
  SUBCASE("randomized invariants") {
    RngStream rng(9);
    for (int trial = 0; trial < 1000; ++trial) {
      const int atoms = 1 + static_cast<int>(rng.uniform_int(0, 7));
      const int C = static_cast<int>(rng.uniform_int(0, 4));
      AsyncConfig cfg = test_config(C, 0.5, 2, 50);
      VelocityHistory hist(atoms, 2);
      std::vector<double> h1(atoms), h2(atoms), hstar(atoms);
      for (int i = 0; i < atoms; ++i) {
        h1[i] = rng.uniform();
        h2[i] = rng.uniform();
        hstar[i] = rng.uniform();
      }
      hist.push(h1);
      hist.push(h2);
      TimestepVector t(atoms);
      for (int i = 0; i < atoms; ++i)
        t[i] = static_cast<int>(rng.uniform_int(0, T));
      const long k = rng.uniform_int(-10, 60);
      const auto out = advance_timesteps(t, k, cfg, hist, hstar, T);
      int lo = T, hi = 0;
      for (int i = 0; i < atoms; ++i) {
        CHECK(out[i] <= t[i]);  // monotone
        CHECK(out[i] >= 0);
        CHECK(out[i] <= T);
        lo = std::min(lo, out[i]);
        hi = std::max(hi, out[i]);
      }
      CHECK(hi - lo <= 2 * C);
    }
  }
  SUBCASE("strictly decreasing velocities advance like phase 1") {
    AsyncConfig cfg = test_config(10, 0.5, 3, 100);
    VelocityHistory hist(3, 3);
    hist.push(std::vector<double>{9.0, 8.0, 7.0});
    hist.push(std::vector<double>{5.0, 4.0, 3.0});
    const std::vector<double> hstar{4.0, 3.0, 2.0};
    const auto v = advance_decision(0, cfg, hist, hstar);
    CHECK(v == std::vector<std::uint8_t>{1, 1, 1});
  }
}

TEST_CASE("pyramid schedule") {
  SUBCASE("frozen staircase for T=3, M=2, u=1") {
    const auto rows = pyramid_schedule(3, 2, 1);
    const std::vector<TimestepVector> want{
        {3, 3}, {2, 3}, {1, 2}, {0, 1}, {0, 0}};
    CHECK(rows == want);
  }
  SUBCASE("single atom is the plain chain") {
    const auto rows = pyramid_schedule(4, 1, 1);
    REQUIRE(rows.size() == 5);
    for (int r = 0; r <= 4; ++r) CHECK(rows[r][0] == 4 - r);
  }
  SUBCASE("u = M reduces to synchronous") {
    const auto rows = pyramid_schedule(5, 3, 3);
    REQUIRE(rows.size() == 6);
    for (const auto& row : rows) {
      CHECK(row[0] == row[1]);
      CHECK(row[1] == row[2]);
    }
  }
  SUBCASE("row count and adjacency for random shapes") {
    RngStream rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const int T = 1 + static_cast<int>(rng.uniform_int(0, 19));
      const int M = 1 + static_cast<int>(rng.uniform_int(0, 9));
      const int u = 1 + static_cast<int>(rng.uniform_int(0, M - 1 >= 0 ? M : 1));
      const auto rows = pyramid_schedule(T, M, u);
      const int windows = (M + u - 1) / u;
      CHECK(static_cast<int>(rows.size()) == T + windows);
      for (int i = 0; i < M; ++i) {
        CHECK(rows.front()[i] == T);
        CHECK(rows.back()[i] == 0);
      }
      for (std::size_t r = 1; r < rows.size(); ++r)
        for (int i = 0; i < M; ++i) {
          const int d = rows[r - 1][i] - rows[r][i];
          CHECK(d >= 0);  // columns non-increasing
          CHECK(d <= 1);  // unit steps
        }
    }
  }
}
