#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "rdsat/errors.hpp"
#include "rdsat/spectral.hpp"
#include "reference_data.hpp"

using namespace rdsat;

namespace {

operator_spec benchmark_spec() {
  operator_spec spec;
  spec.length = refdata::length;
  spec.sat_level = refdata::ell;
  spec.reaction_const = refdata::c_coeff;
  input_shape b;
  b.mode_coeffs = {{1, 1.0}, {2, 1.0}};
  spec.inputs.push_back(b);
  return spec;
}

sampled_fn sine_profile(double length, int pts, double freq, double amp) {
  sampled_fn f;
  f.length = length;
  f.values.resize(pts);
  for (int i = 0; i < pts; ++i) f.values[i] = amp * std::sin(freq * f.x(i));
  return f;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("simpson quadrature") {
  // exact on cubics with an odd sample count
  sampled_fn cubic;
  cubic.length = 1.0;
  cubic.values.resize(101);
  for (int i = 0; i < 101; ++i) {
    const double x = cubic.x(i);
    cubic.values[i] = x * x * x;
  }
  CHECK(simpson(cubic) == doctest::Approx(0.25).epsilon(1e-14));

  sampled_fn sine = sine_profile(3.14159265358979323846, 101, 1.0, 1.0);
  CHECK(simpson(sine) == doctest::Approx(2.0).epsilon(1e-7));

  // even count engages the interpolated final cell
  sampled_fn sine_even = sine_profile(3.14159265358979323846, 100, 1.0, 1.0);
  CHECK(simpson(sine_even) == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("analytic spectrum of the benchmark operator") {
  modal_system ms = analytic_spectrum(benchmark_spec(), 3);
  CHECK(ms.eigvals[0] == doctest::Approx(7.5325989).epsilon(1e-7));
  CHECK(ms.eigvals[1] == doctest::Approx(0.1303956).epsilon(1e-6));
  CHECK(ms.eigvals[2] == doctest::Approx(refdata::lambda3).epsilon(1e-12));
  CHECK(ms.n == 2);
  CHECK_FALSE(ms.already_stable);
  CHECK(ms.eta == doctest::Approx(0.999 * (-refdata::lambda3)));
  // amplitude sqrt(2/L) = 1 for L = 2: e_1(1) = sin(pi/2) = 1
  const sampled_fn& e1 = ms.eigfuncs[0];
  CHECK(e1.values[e1.size() / 2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(l2_norm(e1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("analytic spectrum of the pure Laplacian") {
  operator_spec spec;
  spec.length = 3.14159265358979323846;
  spec.sat_level = 1.0;
  spec.reaction_const = 0.0;
  input_shape b;
  b.mode_coeffs = {{1, 1.0}};
  spec.inputs.push_back(b);
  modal_system ms = analytic_spectrum(spec, 2);
  CHECK(ms.eigvals[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ms.n == 0);
  CHECK(ms.already_stable);
  const double amp = std::sqrt(2.0 / spec.length);
  CHECK(ms.eigfuncs[0].values[ms.eigfuncs[0].size() / 2] == doctest::Approx(amp).epsilon(1e-9));
}

TEST_CASE("analytic spectrum rejects sampled reaction") {
  operator_spec spec = benchmark_spec();
  spec.reaction_const.reset();
  spec.reaction_profile = sine_profile(refdata::length, 2001, 1.0, 1.0);
  CHECK_THROWS_WITH_AS(analytic_spectrum(spec, 2), doctest::Contains("numeric_spectrum"),
                       precondition_error);
}

TEST_CASE("numeric spectrum matches the closed form") {
  modal_system ms = numeric_spectrum(benchmark_spec(), 2, 2001);
  CHECK(std::abs(ms.eigvals[0] - refdata::lambda1) < 1e-3);
  CHECK(std::abs(ms.eigvals[1] - refdata::lambda2) < 1e-3);

  modal_system with_tail = numeric_spectrum(benchmark_spec(), 3, 2001);
  select_n(with_tail, 0.0);
  CHECK(with_tail.n == 2);
  CHECK(with_tail.eta == doctest::Approx(0.999 * (-refdata::lambda3)).epsilon(1e-3));

  // eigenfunction shape: compare against the sine at a probe point
  modal_system exact = analytic_spectrum(benchmark_spec(), 2, 2001);
  double worst = 0.0;
  for (int i = 0; i < 2001; i += 50)
    worst = std::max(worst, std::abs(ms.eigfuncs[0].values[i] - exact.eigfuncs[0].values[i]));
  CHECK(worst < 1e-3);

  // Gram matrix within quadrature tolerance
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double g = inner_product(ms.eigfuncs[a], ms.eigfuncs[b]);
      CHECK(std::abs(g - (a == b ? 1.0 : 0.0)) < 1e-6);
    }
}

TEST_CASE("numeric spectrum converges at second order") {
  auto err_at = [&](int pts) {
    modal_system ms = numeric_spectrum(benchmark_spec(), 1, pts);
    return std::abs(ms.eigvals[0] - refdata::lambda1);
  };
  const double e1 = err_at(501);
  const double e2 = err_at(1001);
  CHECK(e1 / e2 > 3.0);
  CHECK(e1 / e2 < 5.5);
}

TEST_CASE("numeric spectrum with a piecewise reaction") {
  operator_spec spec;
  spec.length = 2.0;
  spec.sat_level = 1.0;
  sampled_fn c;
  c.length = 2.0;
  c.values.resize(4001);
  for (int i = 0; i < 4001; ++i) c.values[i] = (c.x(i) < 1.0) ? 10.0 : 0.0;
  spec.reaction_profile = c;
  input_shape b;
  b.profile = sine_profile(2.0, 4001, 1.0, 1.0);
  spec.inputs.push_back(b);

  modal_system ms = numeric_spectrum(spec, 3, 4001);
  CHECK(ms.eigvals[0] > ms.eigvals[1]);
  CHECK(ms.eigvals[1] > ms.eigvals[2]);

  // halved resolution agrees to 1e-2
  sampled_fn c2;
  c2.length = 2.0;
  c2.values.resize(2001);
  for (int i = 0; i < 2001; ++i) c2.values[i] = (c2.x(i) < 1.0) ? 10.0 : 0.0;
  operator_spec spec2 = spec;
  spec2.reaction_profile = c2;
  spec2.inputs[0].profile = sine_profile(2.0, 2001, 1.0, 1.0);
  modal_system ms2 = numeric_spectrum(spec2, 3, 2001);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(ms.eigvals[j] - ms2.eigvals[j]) < 1e-2);
}

TEST_CASE("numeric spectrum grid preconditions") {
  CHECK_THROWS_AS(numeric_spectrum(benchmark_spec(), 10, 25), precondition_error);
}

TEST_CASE("input projection onto the modal basis") {
  modal_system ms = analytic_spectrum(benchmark_spec(), 3);

  SUBCASE("mode combination lands exactly") {
    operator_spec spec = benchmark_spec();  // b = e1 + e2
    project_inputs(ms, spec);
    CHECK(ms.Bmat(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ms.Bmat(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(ms.Bmat(2, 0)) < 1e-9);
  }
  SUBCASE("sampled profile of the same shape agrees") {
    operator_spec spec = benchmark_spec();
    sampled_fn prof;
    prof.length = refdata::length;
    prof.values.resize(2001);
    for (int i = 0; i < 2001; ++i)
      prof.values[i] = ms.eigfuncs[0].values[i] + ms.eigfuncs[1].values[i];
    spec.inputs[0].mode_coeffs.clear();
    spec.inputs[0].profile = prof;
    project_inputs(ms, spec);
    CHECK(ms.Bmat(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ms.Bmat(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("higher mode is orthogonal to the retained ones") {
    operator_spec spec = benchmark_spec();
    spec.inputs[0].mode_coeffs = {{3, 1.0}};
    project_inputs(ms, spec);
    CHECK(std::abs(ms.Bmat(0, 0)) < 1e-10);
    CHECK(std::abs(ms.Bmat(1, 0)) < 1e-10);
    CHECK(ms.Bmat(2, 0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("scaling is linear") {
    operator_spec spec = benchmark_spec();
    spec.inputs[0].mode_coeffs = {{1, 2.0}};
    project_inputs(ms, spec);
    CHECK(ms.Bmat(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  }
  SUBCASE("linearity over random combinations") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
      const double a = u(rng), b = u(rng);
      operator_spec s1 = benchmark_spec();
      s1.inputs[0].mode_coeffs = {{1, a}, {2, b}};
      project_inputs(ms, s1);
      mat combined = ms.Bmat;
      operator_spec s2 = benchmark_spec();
      s2.inputs[0].mode_coeffs = {{1, a}};
      project_inputs(ms, s2);
      mat first = ms.Bmat;
      operator_spec s3 = benchmark_spec();
      s3.inputs[0].mode_coeffs = {{2, b}};
      project_inputs(ms, s3);
      mat second = ms.Bmat;
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(combined(j, 0) - first(j, 0) - second(j, 0)) < 1e-12);
    }
  }
  SUBCASE("grid mismatch is rejected") {
    operator_spec spec = benchmark_spec();
    spec.inputs[0].mode_coeffs.clear();
    spec.inputs[0].profile = sine_profile(refdata::length, 501, 1.0, 1.0);
    CHECK_THROWS_AS(project_inputs(ms, spec), precondition_error);
  }
}

TEST_CASE("truncation selection") {
  modal_system ms = analytic_spectrum(benchmark_spec(), 3);
  SUBCASE("plain split at zero") {
    select_n(ms, 0.0);
    CHECK(ms.n == 2);
    CHECK(ms.eigvals[ms.n - 1] >= 0.0);
    CHECK(ms.eigvals[ms.n] < 0.0);
  }
  SUBCASE("prescribed decay keeps the same split here") {
    select_n(ms, 2.0);
    CHECK(ms.n == 2);
    CHECK(ms.eta == doctest::Approx(0.999 * 12.206609902451056));
  }
  SUBCASE("unreachable decay target reports truncation too short") {
    CHECK_THROWS_WITH_AS(select_n(ms, 13.0), doctest::Contains("extend"), precondition_error);
  }
}

TEST_CASE("sampled function CSV round trip") {
  sampled_fn f = sine_profile(2.0, 101, 2.5, 0.7);
  const std::string path = "spectral_roundtrip.csv";
  write_sampled_csv(path, f);
  sampled_fn g = read_sampled_csv(path);
  REQUIRE(g.size() == f.size());
  CHECK(g.length == f.length);
  for (int i = 0; i < f.size(); ++i) CHECK(g.values[i] == f.values[i]);  // 17-digit exact
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_sampled_csv("does_not_exist.csv"), parse_error);
}

}  // TEST_SUITE
