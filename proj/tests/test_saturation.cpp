#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "rdsat/errors.hpp"
#include "rdsat/saturation.hpp"
#include "rdsat/spectral.hpp"

using namespace rdsat;

namespace {

sampled_fn sampled_from(double length, int pts, const std::function<double(double)>& g) {
  sampled_fn f;
  f.length = length;
  f.values.resize(pts);
  for (int i = 0; i < pts; ++i) f.values[i] = g(f.x(i));
  return f;
}

}  // namespace

TEST_SUITE("saturation") {

TEST_CASE("componentwise clipping") {
  CHECK(sat({0.5, -0.3}, 2.0) == vec{0.5, -0.3});
  CHECK(sat({5.0, -7.0}, 2.0) == vec{2.0, -2.0});
  CHECK(sat({0.0, 0.0}, 1.0) == vec{0.0, 0.0});
  CHECK_THROWS_AS(sat({1.0}, 0.0), precondition_error);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> lev(0.1, 3.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double ell = lev(rng);
    vec v{u(rng), u(rng), u(rng)};
    vec w{u(rng), u(rng), u(rng)};
    vec sv = sat(v, ell), sw = sat(w, ell);
    vec neg(3), sneg(3);
    for (int i = 0; i < 3; ++i) neg[i] = -v[i];
    sneg = sat(neg, ell);
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(sv[i]) <= ell);
      CHECK(std::abs(sv[i] - sw[i]) <= std::abs(v[i] - w[i]));  // 1-Lipschitz
      CHECK(sneg[i] == -sv[i]);                                 // odd, exactly
    }
  }
}

TEST_CASE("deadzone") {
  CHECK(deadzone({1.0}, 2.0) == vec{0.0});
  CHECK(deadzone({5.0}, 2.0) == vec{-3.0});

  std::mt19937 rng(12);
  std::uniform_real_distribution<double> lev(0.5, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double ell = lev(rng);
    std::uniform_real_distribution<double> u(-ell, ell);
    vec v{u(rng), u(rng), u(rng), u(rng)};
    for (double d : deadzone(v, ell)) CHECK(d == 0.0);  // exact below the level
  }
}

TEST_CASE("norm saturation") {
  CHECK(sat_norm({3.0, 4.0}, 10.0) == vec{3.0, 4.0});
  vec scaled = sat_norm({3.0, 4.0}, 1.0);
  CHECK(scaled[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(scaled[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(sat_norm({0.0, 0.0}, 1.0) == vec{0.0, 0.0});

  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    vec v{u(rng), u(rng), u(rng)};
    vec s = sat_norm(v, 1.5);
    CHECK(norm2(s) <= 1.5 * (1 + 1e-12));
    // direction preserved: cross terms vanish against the original
    const double vv = norm2(v);
    if (vv > 1e-9) CHECK(dot(s, v) == doctest::Approx(norm2(s) * vv).epsilon(1e-12));
  }
}

TEST_CASE("pointwise saturation of a field") {
  sampled_fn zero = sampled_from(2.0, 101, [](double) { return 0.0; });
  sampled_fn szero = sat_pointwise(zero, 1.0);
  for (double v : szero.values) CHECK(v == 0.0);

  sampled_fn mild = sampled_from(2.0, 101, [](double x) { return 0.5 * std::sin(x); });
  sampled_fn smild = sat_pointwise(mild, 1.0);
  for (int i = 0; i < 101; ++i) CHECK(smild.values[i] == mild.values[i]);

  sampled_fn tall = sampled_from(2.0, 201, [](double x) {
    return 3.0 * std::sin(3.14159265358979323846 * x / 2.0);
  });
  sampled_fn stall = sat_pointwise(tall, 1.0);
  int plateau = 0;
  for (int i = 0; i < 201; ++i) {
    CHECK(std::abs(stall.values[i]) <= 1.0);
    if (stall.values[i] == 1.0) ++plateau;
    if (std::abs(tall.values[i]) <= 1.0) CHECK(stall.values[i] == tall.values[i]);
  }
  CHECK(plateau > 50);  // the clipped crest is a genuine plateau
}

TEST_CASE("generalized sector condition") {
  mat K(1, 2);
  K(0, 0) = -9.8;
  K(0, 1) = 0.17;
  mat C = K;

  SUBCASE("zero state gives zero value") {
    sector_result r = sector_check({0.0, 0.0}, K, C, {1.0}, 2.0);
    CHECK(r.in_region);
    CHECK(r.value == 0.0);
    CHECK(r.nonpositive);
  }
  SUBCASE("K equals C with small gain output") {
    sector_result r = sector_check({0.01, 0.1}, K, C, {3.0}, 2.0);
    CHECK(r.in_region);
    CHECK(r.value == 0.0);  // deadzone vanishes below the level
  }
  SUBCASE("hypothesis violation reports the row") {
    mat C2(1, 2);  // K - C2 = K, and |K z| > ell for this z
    sector_result r = sector_check({1.0, 0.0}, K, C2, {1.0}, 2.0);
    CHECK_FALSE(r.in_region);
    CHECK(r.offending_index == 0);
  }
  SUBCASE("random instances satisfying the hypothesis stay nonpositive") {
    std::mt19937 rng(14);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 4);
    for (int trial = 0; trial < 10000; ++trial) {
      const int m = dim(rng), n = dim(rng);
      const double ell = 0.1 + 2.9 * unit(rng);
      vec z(n);
      for (double& v : z) v = u(rng);
      mat Km(m, n), E(m, n);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          Km(i, j) = u(rng);
          E(i, j) = u(rng);
        }
      // scale the gap matrix so |E z|_inf <= ell, then C = K - E
      const vec ez = E * z;
      const double s = norm_inf(ez);
      const double shrink = (s > 0.0) ? unit(rng) * ell / s : 1.0;
      mat Cm = Km - shrink * E;
      vec D(m);
      for (double& d : D) d = 0.1 + 2.0 * unit(rng);
      sector_result r = sector_check(z, Km, Cm, D, ell);
      REQUIRE(r.in_region);
      CHECK(r.value <= 1e-12);
      CHECK(r.nonpositive);
    }
  }
}

TEST_CASE("saturation mismatch bounds") {
  const double L = 2.0;

  SUBCASE("inside both levels the mismatch vanishes exactly") {
    sampled_fn b = sampled_from(L, 201, [](double x) { return 0.8 * std::sin(x) + 0.1; });
    sampled_fn d = delta(b, 0.9, 1.0);  // |k| <= 1, |b k|_inf < 1
    for (double v : d.values) CHECK(v == 0.0);
  }
  SUBCASE("constant unit profile cancels for any amplitude") {
    sampled_fn one = sampled_from(L, 101, [](double) { return 1.0; });
    for (double k : {0.3, 1.0, 5.0, -17.0}) {
      sampled_fn d = delta(one, k, 1.0);
      for (double v : d.values) CHECK(v == 0.0);
    }
  }
  SUBCASE("random profiles obey the L2 and Linf bounds") {
    std::mt19937 rng(15);
    std::uniform_real_distribution<double> amp(-3.0, 3.0);
    std::uniform_real_distribution<double> kdist(-6.0, 6.0);
    std::uniform_real_distribution<double> lev(0.2, 2.0);
    for (int trial = 0; trial < 10000; ++trial) {
      const double a0 = amp(rng), a1 = amp(rng), a2 = amp(rng);
      sampled_fn b = sampled_from(L, 101, [&](double x) {
        return a0 + a1 * std::sin(x) + a2 * std::cos(3 * x);
      });
      const double k = kdist(rng), ell = lev(rng);
      sampled_fn d = delta(b, k, ell);

      double binf = 0.0, dinf = 0.0;
      for (int i = 0; i < 101; ++i) {
        binf = std::max(binf, std::abs(b.values[i]));
        dinf = std::max(dinf, std::abs(d.values[i]));
        CHECK(std::abs(d.values[i]) <= ell * (1.0 + std::abs(b.values[i])) + 1e-12);
      }
      CHECK(dinf <= ell * (1.0 + binf) + 1e-12);

      sampled_fn envelope = b;
      for (double& v : envelope.values) v = 1.0 + std::abs(v);
      CHECK(l2_norm(d) <= ell * l2_norm(envelope) + 1e-12);
    }
  }
  SUBCASE("indicator refinement of the L2 bound") {
    std::mt19937 rng(16);
    std::uniform_real_distribution<double> amp(-3.0, 3.0);
    std::uniform_real_distribution<double> lev(0.2, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
      const double a0 = amp(rng), a1 = amp(rng);
      sampled_fn b = sampled_from(L, 201, [&](double x) { return a0 + a1 * std::sin(2 * x); });
      const double ell = lev(rng);
      std::uniform_real_distribution<double> kdist(-ell, ell);
      const double k = kdist(rng);  // refinement needs |k| <= ell
      sampled_fn d = delta(b, k, ell);

      sampled_fn chi_env = b;  // chi + |b| chi on the overflow set
      for (double& v : chi_env.values) v = (std::abs(k * v) > ell) ? 1.0 + std::abs(v) : 0.0;
      CHECK(l2_norm(d) <= ell * l2_norm(chi_env) + 1e-12);
    }
  }
}

}  // TEST_SUITE
