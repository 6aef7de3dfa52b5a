#pragma once

// Fixed-step simulation of the saturated closed loop at three fidelities
// (modal, truncated cascade, pointwise-saturated cascade), Lyapunov
// bookkeeping, trajectory classification, decay envelopes, and the grid
// sweeps behind the region figures.
//
// The integrator is classic RK4; steps where a control channel crosses the
// saturation level are redone with ten substeps.  The cascade simulators
// refuse time steps outside the stability interval of their stiffest
// retained mode instead of returning garbage.

#include <string>
#include <vector>

#include "rdsat/design.hpp"
#include "rdsat/roa.hpp"
#include "rdsat/spectral.hpp"

namespace rdsat {

enum class traj_label { converged, diverged, undecided };
std::string label_name(traj_label l);

struct trajectory {
  vec times;                     // strictly increasing, starts at 0
  std::vector<vec> states;       // one vector per time
  vec lyapunov;                  // filled when a certificate is attached
  traj_label label = traj_label::undecided;
  int head = 0;                  // modal block size: states[i][0..head) is z
};

struct sim_opts {
  double T = 10.0;
  double dt = 0.0;                    // 0 -> T / 1000
  const certificate* cert = nullptr;  // enables the lyapunov column (uses cert->gamma)
};

// z' = A z + B sat(K z) on the finite-dimensional plant
trajectory simulate_modal(const plant_fd& plant, double ell, const vec& z0, sim_opts opts = {});

// w_j' = lambda_j w_j + b_j . sat(K z), j < N, with z the leading n modes;
// w0 shorter than N is zero padded.  The z part is bit-identical to
// simulate_modal on the same data because the tail never feeds back.
trajectory simulate_galerkin(const modal_system& ms, const mat& K, double ell, const vec& w0,
                             int N, sim_opts opts = {});

// pointwise saturation: each stage forms the spatial field
// sum_k sat(b_k(x) (K z)_k) on the grid and projects it onto the modes
trajectory simulate_pointwise(const modal_system& ms, const mat& K,
                              const std::vector<sampled_fn>& b_shapes, double ell, const vec& w0,
                              int N, sim_opts opts = {});

// V(w) = z^T P z + gamma |tail|^2 with z the leading block of the
// certificate and P its region matrix
double lyapunov_V(const vec& state, const certificate& cert, double gamma);

// tail weight of the extended function: kappa picked at half the largest
// value keeping 2 eta - kappa |b_perp| |K| > eta, then
// gamma = alpha kappa / (2 |b_perp| |K|); an unforced tail returns 1
double tail_gamma(const certificate& cert, const modal_system& ms);

struct decay_envelope {
  double M = 1.0;
  double a = 0.0;
};

// least-squares exponential envelope |w(t)| <= M e^{-a t} |w(0)|: slope from
// the final 80% of the horizon, M raised until every sample sits below
decay_envelope decay_fit(const trajectory& traj);

// per-mode cascade estimate, checked with multiplicative slack on every
// sample of every tail mode:
//   |w_j(t)| <= e^{-eta t} |w_j(0)|
//             + |b_j| (M |K| / (eta - a)) (e^{-a t} - e^{-eta t}) |z(0)|
bool tail_bound_holds(const trajectory& traj, const modal_system& ms, const mat& K,
                      const decay_envelope& env, double slack = 0.05);

struct sweep_grid {
  double z1_min = -6.0, z1_max = 6.0;
  double z2_min = -6.0, z2_max = 6.0;
  int count1 = 31, count2 = 31;
};

struct sweep_result {
  sweep_grid grid;
  std::vector<vec> points;         // row-major over (i1, i2)
  std::vector<traj_label> labels;  // one per point
  std::vector<bool> inside;        // membership in the certificate region
  int diverged_inside = 0;
  int diverged_outside = 0;
};

// parallel map over the grid, merged in grid order so the result does not
// depend on scheduling; threads = 0 picks the hardware count.  A certified
// initial state labeled diverged is a soundness violation and throws.
sweep_result sweep(const plant_fd& plant, const certificate& cert, double ell,
                   const sweep_grid& grid, sim_opts opts = {}, int threads = 0);

// csv emitters, 17 significant digits
void write_trajectory_csv(const std::string& path, const trajectory& traj);  // t,w1..wN,V
void write_sweep_csv(const std::string& path, const sweep_result& sr);       // z1,z2,label
// field reconstruction w(t, x) = sum_j w_j(t) e_j(x) on the eigenfunction grid
void write_field_csv(const std::string& path, const trajectory& traj, const modal_system& ms,
                     int time_stride = 1, int space_stride = 1);

}  // namespace rdsat
