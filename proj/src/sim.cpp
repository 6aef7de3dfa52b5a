#include "rdsat/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

#include "rdsat/errors.hpp"
#include "rdsat/ioutil.hpp"
#include "rdsat/lmi.hpp"
#include "rdsat/saturation.hpp"

namespace rdsat {

namespace {

// real-axis stability interval of the classical fourth-order scheme is
// roughly (-2.785, 0); refuse anything past this or a decaying mode turns
// into silent exponential garbage
constexpr double kStepBound = 2.5;

template <class F>
vec rk4_step(const F& rhs, const vec& y, double dt) {
  const vec k1 = rhs(y);
  const vec k2 = rhs(axpy(0.5 * dt, k1, y));
  const vec k3 = rhs(axpy(0.5 * dt, k2, y));
  const vec k4 = rhs(axpy(dt, k3, y));
  vec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
  return out;
}

struct step_plan {
  long nsteps = 0;
  double dt = 0.0;
};

step_plan plan_steps(const sim_opts& opts, const char* who) {
  if (!(opts.T > 0.0)) throw precondition_error(std::string(who) + ": horizon must be positive");
  if (opts.dt < 0.0) throw precondition_error(std::string(who) + ": dt must be nonnegative");
  const double dt = opts.dt > 0.0 ? opts.dt : opts.T / 1000.0;
  if (dt > opts.T) throw precondition_error(std::string(who) + ": dt exceeds the horizon");
  step_plan plan;
  plan.nsteps = std::lround(std::ceil(opts.T / dt - 1e-9));
  if (plan.nsteps < 1) plan.nsteps = 1;
  plan.dt = opts.T / plan.nsteps;
  return plan;
}

// Fixed-step driver shared by every simulator.  When a step moves any
// control channel across the saturation threshold the step is redone as ten
// substeps, so the scheme never integrates across the kink at full stride.
// `control` must return the channel values whose magnitude is compared
// against ell (pre-saturation, scaled where the physical kink requires it).
template <class F, class G>
trajectory integrate(const F& rhs, const G& control, const vec& y0, double ell,
                     const sim_opts& opts, int head, const char* who) {
  const step_plan plan = plan_steps(opts, who);
  trajectory traj;
  traj.head = head;
  const double r0 = norm2(y0);
  const double blowup = 100.0 * (1.0 + r0);

  vec y = y0;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(y);
    if (opts.cert) traj.lyapunov.push_back(lyapunov_V(y, *opts.cert, opts.cert->gamma));
  };
  record(0.0);

  bool diverged = false;
  for (long s = 0; s < plan.nsteps && !diverged; ++s) {
    vec next = rk4_step(rhs, y, plan.dt);
    const vec u0 = control(y);
    const vec u1 = control(next);
    bool crossing = false;
    for (std::size_t k = 0; k < u0.size() && !crossing; ++k)
      crossing = (std::abs(u0[k]) < ell) != (std::abs(u1[k]) < ell);
    if (crossing) {
      vec fine = y;
      for (int sub = 0; sub < 10; ++sub) fine = rk4_step(rhs, fine, plan.dt / 10.0);
      next = fine;
    }
    y = next;
    record((s + 1) * plan.dt);
    const double r = norm2(y);
    if (!std::isfinite(r) || r > 1e12 || r > blowup) diverged = true;
  }
  if (diverged)
    traj.label = traj_label::diverged;
  else
    traj.label = norm2(y) < 1e-6 * std::max(1.0, r0) ? traj_label::converged
                                                     : traj_label::undecided;
  return traj;
}

void check_mode_range(const modal_system& ms, const mat& K, double ell, const vec& w0,
                      int N, const char* who) {
  if (ms.n < 1 && !ms.already_stable)
    throw precondition_error(std::string(who) + ": run the truncation selection first");
  if (N < std::max(ms.n, 1) || N > ms.order())
    throw precondition_error(std::string(who) +
                             ": mode count must lie between n and the truncation order");
  if (K.cols != ms.n || K.rows < 1)
    throw precondition_error(std::string(who) +
                             ": gain must map the retained modes to the inputs");
  if (!(ell > 0.0))
    throw precondition_error(std::string(who) + ": saturation level must be positive");
  if (static_cast<int>(w0.size()) > N)
    throw precondition_error(std::string(who) + ": initial data longer than the mode count");
}

// quadrature weights replicating the composite rule used for the input
// projections (odd counts: plain Simpson; even: a half-spaced end cell)
vec quadrature_weights(int count, double length) {
  vec w(count, 0.0);
  const double h = length / (count - 1);
  if (count == 2) {
    w[0] = w[1] = 0.5 * h;
    return w;
  }
  const int last = (count % 2 == 1) ? count - 1 : count - 2;
  w[0] += h / 3.0;
  w[last] += h / 3.0;
  for (int i = 1; i < last; i += 2) w[i] += 4.0 * h / 3.0;
  for (int i = 2; i < last; i += 2) w[i] += 2.0 * h / 3.0;
  if (count % 2 == 0) {
    w[count - 2] += 0.5 * h;
    w[count - 1] += 0.5 * h;
  }
  return w;
}

}  // namespace

std::string label_name(traj_label label) {
  switch (label) {
    case traj_label::converged: return "converged";
    case traj_label::diverged: return "diverged";
    default: return "undecided";
  }
}

trajectory simulate_modal(const plant_fd& plant, double ell, const vec& z0, sim_opts opts) {
  // dimension checks only: simulation exists to observe the loop, stable or
  // not, and the design-time stability gate caps out at small state counts
  if (plant.A.rows != plant.A.cols || plant.A.rows < 1)
    throw precondition_error("simulate_modal: A must be square");
  if (plant.B.rows != plant.A.rows || plant.B.cols < 1)
    throw precondition_error("simulate_modal: B row count must match A");
  if (!plant.K) throw precondition_error("simulate_modal: attach a gain to the plant first");
  if (plant.K->rows != plant.B.cols || plant.K->cols != plant.A.rows)
    throw precondition_error("simulate_modal: gain must be m x n");
  if (!(ell > 0.0))
    throw precondition_error("simulate_modal: saturation level must be positive");
  if (static_cast<int>(z0.size()) != plant.order())
    throw precondition_error("simulate_modal: initial state size does not match the plant");
  const mat& gain = *plant.K;

  auto rhs = [&](const vec& z) {
    const vec u = sat(gain * z, ell);
    const vec az = plant.A * z;
    const vec bu = plant.B * u;
    vec d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = az[i] + bu[i];
    return d;
  };
  auto control = [&](const vec& z) { return gain * z; };
  return integrate(rhs, control, z0, ell, opts, plant.order(), "simulate_modal");
}

trajectory simulate_galerkin(const modal_system& ms, const mat& K, double ell, const vec& w0in,
                             int N, sim_opts opts) {
  check_mode_range(ms, K, ell, w0in, N, "simulate_galerkin");
  if (ms.Bmat.rows != ms.order())
    throw precondition_error("simulate_galerkin: project the input shapes first");
  const int n = ms.n;
  const int m = ms.Bmat.cols;
  if (K.rows != m)
    throw precondition_error("simulate_galerkin: gain rows must match the input count");

  vec w0(static_cast<std::size_t>(N), 0.0);
  std::copy(w0in.begin(), w0in.end(), w0.begin());

  const step_plan plan = plan_steps(opts, "simulate_galerkin");
  for (int j = 0; j < N; ++j) {
    if (std::abs(ms.eigvals[j]) * plan.dt <= kStepBound) continue;
    bool active = w0[static_cast<std::size_t>(j)] != 0.0;
    for (int r = 0; r < m && !active; ++r) active = ms.Bmat(j, r) != 0.0;
    if (active)
      throw precondition_error(
          "simulate_galerkin: time step outside the stability interval of an active mode; "
          "refine dt or drop trailing modes");
  }

  // the retained block accumulates the input sum separately so the leading
  // components match the modal simulator term for term
  auto rhs = [&, n, m, N](const vec& w) {
    vec z(w.begin(), w.begin() + n);
    const vec u = sat(K * z, ell);
    vec d(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
      double force = 0.0;
      for (int r = 0; r < m; ++r) force += ms.Bmat(j, r) * u[static_cast<std::size_t>(r)];
      d[static_cast<std::size_t>(j)] =
          ms.eigvals[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)] + force;
    }
    return d;
  };
  auto control = [&, n](const vec& w) {
    vec z(w.begin(), w.begin() + n);
    return K * z;
  };
  return integrate(rhs, control, w0, ell, opts, n, "simulate_galerkin");
}

trajectory simulate_pointwise(const modal_system& ms, const mat& K,
                              const std::vector<sampled_fn>& b_shapes, double ell,
                              const vec& w0in, int N, sim_opts opts) {
  check_mode_range(ms, K, ell, w0in, N, "simulate_pointwise");
  const int n = ms.n;
  const int m = K.rows;
  if (static_cast<int>(b_shapes.size()) != m)
    throw precondition_error("simulate_pointwise: one actuator shape per gain row");
  if (ms.eigfuncs.empty())
    throw precondition_error("simulate_pointwise: spectrum carries no eigenfunctions");
  for (const sampled_fn& b : b_shapes)
    if (!b.same_grid(ms.eigfuncs.front()))
      throw precondition_error("simulate_pointwise: actuator grid differs from the eigenfunctions");

  vec w0(static_cast<std::size_t>(N), 0.0);
  std::copy(w0in.begin(), w0in.end(), w0.begin());

  const step_plan plan = plan_steps(opts, "simulate_pointwise");
  for (int j = 0; j < N; ++j)
    if (std::abs(ms.eigvals[j]) * plan.dt > kStepBound)
      throw precondition_error(
          "simulate_pointwise: time step outside the stability interval of a retained mode; "
          "quadrature forcing reaches every mode, refine dt or drop trailing modes");

  const int g = ms.eigfuncs.front().size();
  const double length = ms.eigfuncs.front().length;
  const vec wq = quadrature_weights(g, length);
  // row j holds the quadrature weights already multiplied by e_j
  mat proj(N, g);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < g; ++i) proj(j, i) = wq[i] * ms.eigfuncs[j].values[i];

  vec sup(static_cast<std::size_t>(m), 0.0);
  for (int k = 0; k < m; ++k)
    for (double v : b_shapes[k].values) sup[static_cast<std::size_t>(k)] =
        std::max(sup[static_cast<std::size_t>(k)], std::abs(v));

  auto rhs = [&, n, m, N, g](const vec& w) {
    vec z(w.begin(), w.begin() + n);
    const vec v = K * z;
    vec field(static_cast<std::size_t>(g), 0.0);
    for (int k = 0; k < m; ++k) {
      const vec& bk = b_shapes[k].values;
      const double vk = v[static_cast<std::size_t>(k)];
      for (int i = 0; i < g; ++i) {
        const double raw = bk[i] * vk;
        field[static_cast<std::size_t>(i)] += std::max(-ell, std::min(ell, raw));
      }
    }
    vec d(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
      double force = 0.0;
      for (int i = 0; i < g; ++i) force += proj(j, i) * field[static_cast<std::size_t>(i)];
      d[static_cast<std::size_t>(j)] =
          ms.eigvals[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)] + force;
    }
    return d;
  };
  // the field kinks where max_x |b_k(x)| |v_k| hits the level, so the
  // crossing test sees the channel scaled by the sup norm
  auto control = [&, n, m](const vec& w) {
    vec z(w.begin(), w.begin() + n);
    vec v = K * z;
    for (int k = 0; k < m; ++k) v[static_cast<std::size_t>(k)] *= sup[static_cast<std::size_t>(k)];
    return v;
  };
  return integrate(rhs, control, w0, ell, opts, n, "simulate_pointwise");
}

double lyapunov_V(const vec& state, const certificate& cert, double gamma) {
  const mat q = cert.region_matrix().dense();
  const int n = q.rows;
  if (static_cast<int>(state.size()) < n)
    throw precondition_error("lyapunov_V: state shorter than the certified block");
  const vec z(state.begin(), state.begin() + n);
  double v = dot(z, q * z);
  double tail2 = 0.0;
  for (std::size_t j = static_cast<std::size_t>(n); j < state.size(); ++j)
    tail2 += state[j] * state[j];
  return v + gamma * tail2;
}

double tail_gamma(const certificate& cert, const modal_system& ms) {
  if (ms.Bmat.rows != ms.order())
    throw precondition_error("tail_gamma: project the input shapes first");
  if (!(ms.eta > 0.0))
    throw precondition_error("tail_gamma: tail decay margin must be positive");
  double bperp2 = 0.0;
  for (int j = ms.n; j < ms.order(); ++j)
    for (int r = 0; r < ms.Bmat.cols; ++r) bperp2 += ms.Bmat(j, r) * ms.Bmat(j, r);
  const double coupling = std::sqrt(bperp2) * spectral_norm(cert.K);
  // unforced tail: any positive weight works, take the simplest
  if (coupling <= 1e-12 * (1.0 + std::max(cert.alpha, 0.0))) return 1.0;
  if (!(cert.alpha > 0.0))
    throw numeric_error("tail_gamma: certificate carries no positive decay rate");
  // kappa eats half the tail margin in the cross term, the rest of the
  // budget splits the certified decay between the two blocks
  const double kappa = ms.eta / (2.0 * coupling);
  return cert.alpha * kappa / (2.0 * coupling);
}

decay_envelope decay_fit(const trajectory& traj) {
  if (traj.label != traj_label::converged)
    throw precondition_error("decay_fit: needs a converged trajectory");
  if (traj.times.size() < 10)
    throw precondition_error("decay_fit: needs at least 10 samples");
  const double w00 = norm2(traj.states.front());
  if (!(w00 > 0.0)) throw precondition_error("decay_fit: initial state is zero");

  // least squares on log |w| over the final stretch; the early transient
  // would bias the rate toward the fastest mode
  const double t_lo = 0.2 * traj.times.back();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  long cnt = 0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.times[i] < t_lo) continue;
    const double r = norm2(traj.states[i]);
    if (r < 1e-300) continue;
    const double x = traj.times[i];
    const double y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt < 2) throw numeric_error("decay_fit: too few usable samples in the fit window");
  const double denom = cnt * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0))
    throw numeric_error("decay_fit: degenerate time samples");
  decay_envelope env;
  env.a = -(cnt * sxy - sx * sy) / denom;

  env.M = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double r = norm2(traj.states[i]);
    if (r < 1e-300) continue;
    env.M = std::max(env.M, r * std::exp(env.a * traj.times[i]) / w00);
  }
  return env;
}

bool tail_bound_holds(const trajectory& traj, const modal_system& ms, const mat& K,
                      const decay_envelope& env, double slack) {
  if (traj.states.empty()) throw precondition_error("tail_bound_holds: empty trajectory");
  const int n = ms.n;
  const int N = static_cast<int>(traj.states.front().size());
  if (N <= n) throw precondition_error("tail_bound_holds: trajectory carries no tail modes");
  if (ms.Bmat.rows != ms.order() || N > ms.order())
    throw precondition_error("tail_bound_holds: project the input shapes first");
  if (!(env.a < ms.eta))
    throw precondition_error("tail_bound_holds: envelope rate must lie below the tail margin");
  if (!(env.M > 0.0)) throw precondition_error("tail_bound_holds: envelope amplitude must be positive");

  const double knorm = spectral_norm(K);
  const vec z0(traj.states.front().begin(), traj.states.front().begin() + n);
  const double z0n = norm2(z0);
  const double gap = ms.eta - env.a;

  for (int j = n; j < N; ++j) {
    double bj2 = 0.0;
    for (int r = 0; r < ms.Bmat.cols; ++r) bj2 += ms.Bmat(j, r) * ms.Bmat(j, r);
    const double bj = std::sqrt(bj2);
    const double w0j = std::abs(traj.states.front()[static_cast<std::size_t>(j)]);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const double t = traj.times[i];
      const double forced =
          bj * env.M * knorm * z0n * (std::exp(-env.a * t) - std::exp(-ms.eta * t)) / gap;
      const double bound = (1.0 + slack) * (std::exp(-ms.eta * t) * w0j + forced) + 1e-12;
      if (std::abs(traj.states[i][static_cast<std::size_t>(j)]) > bound) return false;
    }
  }
  return true;
}

sweep_result sweep(const plant_fd& plant, const certificate& cert, double ell,
                   const sweep_grid& grid, sim_opts opts, int threads) {
  plant.validate();
  if (!plant.K) throw precondition_error("sweep: attach a gain to the plant first");
  if (plant.order() < 2) throw precondition_error("sweep: needs at least two modes");
  if (grid.count1 < 1 || grid.count2 < 1)
    throw precondition_error("sweep: grid counts must be positive");
  if (grid.z1_max < grid.z1_min || grid.z2_max < grid.z2_min)
    throw precondition_error("sweep: grid bounds are reversed");
  const int nq = cert.P.n;
  if (nq > plant.order())
    throw precondition_error("sweep: certificate block larger than the plant");

  sweep_result sr;
  sr.grid = grid;
  const long total = static_cast<long>(grid.count1) * grid.count2;
  sr.points.reserve(static_cast<std::size_t>(total));
  sr.inside.reserve(static_cast<std::size_t>(total));
  sr.labels.assign(static_cast<std::size_t>(total), traj_label::undecided);

  const sym_matrix region = cert.region_matrix();
  for (int i1 = 0; i1 < grid.count1; ++i1) {
    const double z1 = grid.count1 == 1
                          ? grid.z1_min
                          : grid.z1_min + (grid.z1_max - grid.z1_min) * i1 / (grid.count1 - 1);
    for (int i2 = 0; i2 < grid.count2; ++i2) {
      const double z2 = grid.count2 == 1
                            ? grid.z2_min
                            : grid.z2_min + (grid.z2_max - grid.z2_min) * i2 / (grid.count2 - 1);
      vec z0(static_cast<std::size_t>(plant.order()), 0.0);
      z0[0] = z1;
      z0[1] = z2;
      const vec head(z0.begin(), z0.begin() + nq);
      sr.inside.push_back(ellipsoid_contains(region, cert.rho, head));
      sr.points.push_back(std::move(z0));
    }
  }

  sim_opts wopts = opts;
  wopts.cert = nullptr;  // workers only need labels, skip the quadratic form

  int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  if (static_cast<long>(nthreads) > total) nthreads = static_cast<int>(total);

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
  auto worker = [&](int tid) {
    try {
      for (long idx = tid; idx < total; idx += nthreads)
        sr.labels[static_cast<std::size_t>(idx)] =
            simulate_modal(plant, ell, sr.points[static_cast<std::size_t>(idx)], wopts).label;
    } catch (...) {
      errors[static_cast<std::size_t>(tid)] = std::current_exception();
    }
  };
  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int tid = 0; tid < nthreads; ++tid) pool.emplace_back(worker, tid);
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  for (long idx = 0; idx < total; ++idx) {
    if (sr.labels[static_cast<std::size_t>(idx)] != traj_label::diverged) continue;
    if (sr.inside[static_cast<std::size_t>(idx)])
      ++sr.diverged_inside;
    else
      ++sr.diverged_outside;
  }
  if (sr.diverged_inside > 0)
    throw numeric_error("sweep: a certified initial state diverged");
  return sr;
}

void write_trajectory_csv(const std::string& path, const trajectory& traj) {
  std::string out = "t";
  const int width = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
  for (int j = 1; j <= width; ++j) out += ",w" + std::to_string(j);
  out += ",V\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out += fmt17(traj.times[i]);
    for (double v : traj.states[i]) {
      out += ',';
      out += fmt17(v);
    }
    out += ',';
    out += fmt17(i < traj.lyapunov.size() ? traj.lyapunov[i] : 0.0);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_sweep_csv(const std::string& path, const sweep_result& sr) {
  std::string out = "z1,z2,label\n";
  for (std::size_t i = 0; i < sr.points.size(); ++i) {
    out += fmt17(sr.points[i][0]);
    out += ',';
    out += fmt17(sr.points[i][1]);
    out += ',';
    out += label_name(sr.labels[i]);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_field_csv(const std::string& path, const trajectory& traj, const modal_system& ms,
                     int time_stride, int space_stride) {
  if (time_stride < 1 || space_stride < 1)
    throw precondition_error("write_field_csv: strides must be positive");
  if (ms.eigfuncs.empty())
    throw precondition_error("write_field_csv: spectrum carries no eigenfunctions");
  const int g = ms.eigfuncs.front().size();
  std::string out = "t,x,w\n";
  for (std::size_t i = 0; i < traj.times.size(); i += static_cast<std::size_t>(time_stride)) {
    const vec& w = traj.states[i];
    const int modes = std::min(static_cast<int>(w.size()), static_cast<int>(ms.eigfuncs.size()));
    for (int gi = 0; gi < g; gi += space_stride) {
      double val = 0.0;
      for (int j = 0; j < modes; ++j) val += w[static_cast<std::size_t>(j)] * ms.eigfuncs[j].values[gi];
      out += fmt17(traj.times[i]);
      out += ',';
      out += fmt17(ms.eigfuncs.front().x(gi));
      out += ',';
      out += fmt17(val);
      out += '\n';
    }
  }
  write_text_file(path, out);
}

}  // namespace rdsat
