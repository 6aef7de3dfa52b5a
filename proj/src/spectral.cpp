#include "rdsat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rdsat/errors.hpp"
#include "rdsat/ioutil.hpp"
#include "rdsat/lmi.hpp"

namespace rdsat {

static const double kPi = 3.14159265358979323846;

void operator_spec::validate() const {
  if (!(length > 0.0)) throw precondition_error("operator_spec: length must be positive");
  if (!(sat_level > 0.0)) throw precondition_error("operator_spec: sat_level must be positive");
  if (inputs.empty()) throw precondition_error("operator_spec: at least one input shape required");
  if (reaction_const && reaction_profile)
    throw precondition_error("operator_spec: reaction given both as constant and as profile");
  const sampled_fn* grid_ref = reaction_profile ? &*reaction_profile : nullptr;
  for (const auto& in : inputs) {
    if (in.profile && !in.mode_coeffs.empty())
      throw precondition_error("operator_spec: input shape given both as modes and as profile");
    if (!in.profile && in.mode_coeffs.empty())
      throw precondition_error("operator_spec: empty input shape");
    if (in.profile) {
      if (in.profile->size() < 3)
        throw precondition_error("operator_spec: sampled functions need at least 3 points");
      if (grid_ref && !grid_ref->same_grid(*in.profile))
        throw precondition_error("operator_spec: sampled functions must share one grid");
      if (!grid_ref) grid_ref = &*in.profile;
    }
  }
  if (reaction_profile && reaction_profile->size() < 3)
    throw precondition_error("operator_spec: sampled functions need at least 3 points");
}

mat modal_system::Amat() const {
  mat a(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = eigvals[i];
  return a;
}

// ===========================================================================
// quadrature
// ===========================================================================

double simpson(const sampled_fn& f) {
  const int n = f.size();
  if (n < 2) throw precondition_error("simpson: need at least 2 samples");
  const double h = f.length / (n - 1);
  const vec& y = f.values;
  if (n == 2) return 0.5 * h * (y[0] + y[1]);

  // composite rule over the largest odd-count prefix
  const int last = (n % 2 == 1) ? n - 1 : n - 2;
  double s = y[0] + y[last];
  for (int i = 1; i < last; i += 2) s += 4.0 * y[i];
  for (int i = 2; i < last; i += 2) s += 2.0 * y[i];
  double total = s * h / 3.0;

  if (n % 2 == 0) {
    // even count: one interval remains; add its interpolated midpoint so the
    // rule still sees three points (a half-spaced Simpson cell)
    const double mid = 0.5 * (y[n - 2] + y[n - 1]);
    total += (h / 6.0) * (y[n - 2] + 4.0 * mid + y[n - 1]);
  }
  return total;
}

double inner_product(const sampled_fn& f, const sampled_fn& g) {
  if (!f.same_grid(g)) throw precondition_error("inner_product: incompatible grids");
  sampled_fn prod;
  prod.length = f.length;
  prod.values.resize(f.values.size());
  for (size_t i = 0; i < f.values.size(); ++i) prod.values[i] = f.values[i] * g.values[i];
  return simpson(prod);
}

double l2_norm(const sampled_fn& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

// ===========================================================================
// spectra
// ===========================================================================

modal_system analytic_spectrum(const operator_spec& spec, int order, int grid_points) {
  spec.validate();
  if (order < 1) throw precondition_error("analytic_spectrum: order must be >= 1");
  if (!spec.reaction_const)
    throw precondition_error("analytic form unavailable for non-constant reaction, use numeric_spectrum");
  if (grid_points < 3) throw precondition_error("analytic_spectrum: grid too coarse");

  const double L = spec.length;
  const double c = *spec.reaction_const;
  modal_system ms;
  ms.eigvals.resize(order);
  ms.eigfuncs.resize(order);
  for (int j = 1; j <= order; ++j) {
    ms.eigvals[j - 1] = -kPi * kPi * j * j / (L * L) + c;
    sampled_fn& e = ms.eigfuncs[j - 1];
    e.length = L;
    e.values.resize(grid_points);
    const double amp = std::sqrt(2.0 / L);
    for (int i = 0; i < grid_points; ++i)
      e.values[i] = amp * std::sin(j * kPi * e.x(i) / L);
  }
  // n and eta come for free: the closed form gives the first omitted eigenvalue
  // even when every retained mode is unstable.
  int n = 0;
  while (n < order && ms.eigvals[n] >= 0.0) ++n;
  const double lam_next =
      (n < order) ? ms.eigvals[n] : -kPi * kPi * (order + 1.0) * (order + 1.0) / (L * L) + c;
  if (lam_next >= 0.0)
    throw precondition_error("analytic_spectrum: unstable modes beyond the truncation; extend the order");
  ms.n = n;
  ms.eta = 0.999 * (-lam_next);
  ms.already_stable = (n == 0);
  return ms;
}

modal_system numeric_spectrum(const operator_spec& spec, int order, int grid_points) {
  spec.validate();
  if (order < 1) throw precondition_error("numeric_spectrum: order must be >= 1");
  if (grid_points < 3 * order)
    throw precondition_error("numeric_spectrum: grid too coarse for the requested order (need >= 3*order points)");
  if (spec.reaction_profile && spec.reaction_profile->size() != grid_points)
    throw precondition_error("numeric_spectrum: grid_points must match the sampled reaction grid");

  const double L = spec.length;
  const double h = L / (grid_points - 1);
  const int interior = grid_points - 2;
  if (order > interior) throw precondition_error("numeric_spectrum: order exceeds interior grid size");

  auto c_at = [&](int node) {
    if (spec.reaction_const) return *spec.reaction_const;
    return spec.reaction_profile->values[node];
  };

  // second-order central difference of u_xx + c u on interior nodes
  vec d(interior), e(interior - 1, 1.0 / (h * h));
  for (int i = 0; i < interior; ++i) d[i] = -2.0 / (h * h) + c_at(i + 1);

  vec top = tridiag_top_eigvals(d, e, order);  // ascending
  modal_system ms;
  ms.eigvals.resize(order);
  ms.eigfuncs.resize(order);
  for (int j = 0; j < order; ++j) {
    const double lam = top[order - 1 - j];  // descending
    ms.eigvals[j] = lam;
    vec v = tridiag_eigvec(d, e, lam);
    sampled_fn& f = ms.eigfuncs[j];
    f.length = L;
    f.values.assign(grid_points, 0.0);
    for (int i = 0; i < interior; ++i) f.values[i + 1] = v[i];
    const double nrm = l2_norm(f);
    if (!(nrm > 0.0)) throw numeric_error("numeric_spectrum: zero eigenfunction");
    double sign = (f.values[1] > 0.0) ? 1.0 : -1.0;  // slope positive at x = 0
    for (double& val : f.values) val *= sign / nrm;
  }
  for (int j = 0; j + 1 < order; ++j)
    if (!(ms.eigvals[j] > ms.eigvals[j + 1]))
      throw numeric_error("numeric_spectrum: eigenvalues not strictly decreasing");
  // eigenpairs only; run select_n once the truncation is settled
  return ms;
}

// ===========================================================================
// modal assembly
// ===========================================================================

static sampled_fn build_input(const modal_system& ms, const input_shape& in) {
  if (in.profile) {
    if (!ms.eigfuncs.empty() && !in.profile->same_grid(ms.eigfuncs.front()))
      throw precondition_error("project_inputs: input profile grid does not match the eigenfunction grid");
    return *in.profile;
  }
  if (ms.eigfuncs.empty()) throw precondition_error("project_inputs: eigenfunctions missing");
  sampled_fn out;
  out.length = ms.eigfuncs.front().length;
  out.values.assign(ms.eigfuncs.front().values.size(), 0.0);
  for (const auto& [mode, weight] : in.mode_coeffs) {
    if (mode < 1 || mode > ms.order())
      throw precondition_error("project_inputs: mode index outside the truncation");
    const vec& ev = ms.eigfuncs[mode - 1].values;
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += weight * ev[i];
  }
  return out;
}

void project_inputs(modal_system& ms, const operator_spec& spec) {
  spec.validate();
  if (ms.eigfuncs.empty()) throw precondition_error("project_inputs: eigenfunctions missing");
  const int N = ms.order();
  const int m = static_cast<int>(spec.inputs.size());
  ms.Bmat = mat(N, m);
  for (int k = 0; k < m; ++k) {
    // eigenfunction combinations project exactly by orthonormality; the
    // unlisted modes then carry exactly zero forcing, which keeps truncated
    // simulations honest about which modes are driven
    if (!spec.inputs[k].profile) {
      for (const auto& [mode, weight] : spec.inputs[k].mode_coeffs) {
        if (mode < 1 || mode > N)
          throw precondition_error("project_inputs: mode index outside the truncation");
        ms.Bmat(mode - 1, k) = weight;
      }
      continue;
    }
    sampled_fn bk = build_input(ms, spec.inputs[k]);
    const double bnorm = l2_norm(bk);
    for (int j = 0; j < N; ++j) {
      const double bjk = inner_product(bk, ms.eigfuncs[j]);
      const double enorm = l2_norm(ms.eigfuncs[j]);
      if (std::abs(bjk) > bnorm * enorm * (1.0 + 1e-9))
        throw numeric_error("project_inputs: coefficient exceeds the Cauchy-Bunyakovsky-Schwarz bound");
      ms.Bmat(j, k) = bjk;
    }
  }
}

void select_n(modal_system& ms, double decay_target) {
  if (decay_target < 0.0) throw precondition_error("select_n: decay target must be >= 0");
  const int N = ms.order();
  if (N < 1) throw precondition_error("select_n: empty spectrum");
  int n = 0;
  while (n < N && ms.eigvals[n] >= -decay_target) ++n;
  if (n == N)
    throw precondition_error("select_n: no tail mode below the decay target; extend the truncation");
  ms.n = n;
  ms.eta = 0.999 * (-ms.eigvals[n]);
  ms.already_stable = (n == 0);
}

// ===========================================================================
// serialization
// ===========================================================================

void write_sampled_csv(const std::string& path, const sampled_fn& f) {
  std::string out = "x,value\n";
  for (int i = 0; i < f.size(); ++i) out += fmt17(f.x(i)) + "," + fmt17(f.values[i]) + "\n";
  write_text_file(path, out);
}

sampled_fn read_sampled_csv(const std::string& path) {
  const auto lines = split_lines(read_text_file(path));
  if (lines.empty() || lines[0] != "x,value")
    throw parse_error(path + ":1: expected header \"x,value\"");
  sampled_fn f;
  std::vector<double> xs;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto comma = lines[i].find(',');
    if (comma == std::string::npos)
      throw parse_error(path + ":" + std::to_string(i + 1) + ": expected two comma-separated values");
    try {
      size_t used = 0;
      xs.push_back(std::stod(lines[i].substr(0, comma), &used));
      f.values.push_back(std::stod(lines[i].substr(comma + 1), &used));
    } catch (const std::exception&) {
      throw parse_error(path + ":" + std::to_string(i + 1) + ": malformed number");
    }
  }
  if (xs.size() < 2) throw parse_error(path + ": need at least 2 samples");
  f.length = xs.back();
  // uniformity check: parse errors beat silent misreads
  const double h = f.length / (xs.size() - 1);
  for (size_t i = 0; i < xs.size(); ++i)
    if (std::abs(xs[i] - h * i) > 1e-9 * (1.0 + f.length))
      throw parse_error(path + ":" + std::to_string(i + 2) + ": grid is not uniform from 0");
  return f;
}

void write_modal_json(const std::string& path, const modal_system& ms) {
  std::ostringstream out;
  out << "{\n  \"eigvals\": [";
  for (int j = 0; j < ms.order(); ++j) out << (j ? ", " : "") << fmt17(ms.eigvals[j]);
  out << "],\n  \"n\": " << ms.n << ",\n  \"eta\": " << fmt17(ms.eta)
      << ",\n  \"already_stable\": " << (ms.already_stable ? "true" : "false");
  out << ",\n  \"grid_points\": "
      << (ms.eigfuncs.empty() ? 0 : ms.eigfuncs.front().size())
      << ",\n  \"length\": "
      << fmt17(ms.eigfuncs.empty() ? 0.0 : ms.eigfuncs.front().length);
  out << ",\n  \"Bmat\": [";
  for (int j = 0; j < ms.Bmat.rows; ++j) {
    out << (j ? ", " : "") << "[";
    for (int k = 0; k < ms.Bmat.cols; ++k) out << (k ? ", " : "") << fmt17(ms.Bmat(j, k));
    out << "]";
  }
  out << "]\n}\n";
  write_text_file(path, out.str());
}

}  // namespace rdsat
