#pragma once

// Direct finite-difference cross-check for boundary actuation.  Integrates
// y_t = y_xx + c y with y(0) = 0 and y(L) = C_d x_d on a fine grid, the
// actuator state driven by the saturated feedback on (x_d, w_1), so the
// folded cascade model can be compared against the unreduced field.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rdsat/linalg.hpp"
#include "rdsat/spectral.hpp"

namespace direct_fd {

struct setup {
  double length = 2.0;
  double c = 5.0;
  double a_d = -1.0;
  double b_d = 1.0;
  double c_d = 1.0;
  rdsat::vec gain;     // (k on x_d, k on w_1)
  double ell = 2.0;
  int interior = 201;  // interior grid nodes
};

struct run {
  rdsat::vec times;
  std::vector<rdsat::vec> fields;  // full grid samples, boundary nodes included
  rdsat::vec actuator;
  rdsat::vec grid;
};

inline rdsat::sampled_fn mode_shape(double length, int j, int points) {
  constexpr double kpi = 3.14159265358979323846;
  rdsat::sampled_fn e;
  e.length = length;
  e.values.resize(static_cast<size_t>(points));
  const double scale = std::sqrt(2.0 / length);
  for (int i = 0; i < points; ++i)
    e.values[static_cast<size_t>(i)] = scale * std::sin(j * kpi * i / (points - 1));
  return e;
}

// initial field: the actuator ramp plus the listed mode amplitudes
inline run integrate(const setup& s, double xd0, const rdsat::vec& mode_amps, double T,
                     double dt, int sample_every) {
  const int m = s.interior;
  const int total = m + 2;
  const double h = s.length / (m + 1);
  const rdsat::sampled_fn e1 = mode_shape(s.length, 1, total);

  rdsat::vec ramp(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) ramp[static_cast<size_t>(i)] = h * i / s.length;

  std::vector<rdsat::sampled_fn> shapes;
  for (size_t j = 0; j < mode_amps.size(); ++j)
    shapes.push_back(mode_shape(s.length, static_cast<int>(j) + 1, total));

  // state layout: x_d then the interior nodes
  rdsat::vec st(static_cast<size_t>(m + 1), 0.0);
  st[0] = xd0;
  for (int i = 1; i <= m; ++i) {
    double v = ramp[static_cast<size_t>(i)] * s.c_d * xd0;
    for (size_t j = 0; j < mode_amps.size(); ++j)
      v += mode_amps[j] * shapes[j].values[static_cast<size_t>(i)];
    st[static_cast<size_t>(i)] = v;
  }

  auto rhs = [&](const rdsat::vec& y) {
    const double xd = y[0];
    rdsat::sampled_fn dev;
    dev.length = s.length;
    dev.values.assign(static_cast<size_t>(total), 0.0);
    for (int i = 1; i <= m; ++i)
      dev.values[static_cast<size_t>(i)] =
          y[static_cast<size_t>(i)] - ramp[static_cast<size_t>(i)] * s.c_d * xd;
    const double w1 = rdsat::inner_product(dev, e1);
    const double raw = s.gain[0] * xd + s.gain[1] * w1;
    const double u = std::max(-s.ell, std::min(s.ell, raw));

    rdsat::vec d(static_cast<size_t>(m + 1));
    d[0] = s.a_d * xd + s.b_d * u;
    const double yr = s.c_d * xd;
    for (int i = 1; i <= m; ++i) {
      const double left = (i == 1) ? 0.0 : y[static_cast<size_t>(i - 1)];
      const double right = (i == m) ? yr : y[static_cast<size_t>(i + 1)];
      d[static_cast<size_t>(i)] =
          (left - 2.0 * y[static_cast<size_t>(i)] + right) / (h * h) +
          s.c * y[static_cast<size_t>(i)];
    }
    return d;
  };

  run out;
  out.grid.resize(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) out.grid[static_cast<size_t>(i)] = h * i;

  auto record = [&](double t) {
    out.times.push_back(t);
    out.actuator.push_back(st[0]);
    rdsat::vec field(static_cast<size_t>(total));
    field[0] = 0.0;
    field[static_cast<size_t>(total - 1)] = s.c_d * st[0];
    for (int i = 1; i <= m; ++i) field[static_cast<size_t>(i)] = st[static_cast<size_t>(i)];
    out.fields.push_back(std::move(field));
  };
  record(0.0);

  const long nsteps = std::lround(T / dt);
  for (long k = 1; k <= nsteps; ++k) {
    const rdsat::vec k1 = rhs(st);
    const rdsat::vec k2 = rhs(rdsat::axpy(0.5 * dt, k1, st));
    const rdsat::vec k3 = rhs(rdsat::axpy(0.5 * dt, k2, st));
    const rdsat::vec k4 = rhs(rdsat::axpy(dt, k3, st));
    for (size_t i = 0; i < st.size(); ++i)
      st[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    if (k % sample_every == 0) record(k * dt);
  }
  return out;
}

// discrete L2 distance between the recorded field and a modal reconstruction
inline double field_l2_error(const run& direct, size_t sample, double c_d,
                             const rdsat::vec& modal_state) {
  const int total = static_cast<int>(direct.grid.size());
  const double length = direct.grid.back();
  std::vector<rdsat::sampled_fn> shapes;
  for (size_t j = 1; j < modal_state.size(); ++j)
    shapes.push_back(mode_shape(length, static_cast<int>(j), total));

  rdsat::sampled_fn diff;
  diff.length = length;
  diff.values.resize(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) {
    double rec = direct.grid[static_cast<size_t>(i)] / length * c_d * modal_state[0];
    for (size_t j = 1; j < modal_state.size(); ++j)
      rec += modal_state[j] * shapes[j - 1].values[static_cast<size_t>(i)];
    const double d = direct.fields[sample][static_cast<size_t>(i)] - rec;
    diff.values[static_cast<size_t>(i)] = d * d;
  }
  return std::sqrt(rdsat::simpson(diff));
}

}  // namespace direct_fd
