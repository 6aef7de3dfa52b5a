#pragma once

// Eigen-decomposition of the reaction-diffusion operator u_xx + c(x) u with
// Dirichlet ends, and assembly of the truncated modal control system.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdsat/linalg.hpp"

namespace rdsat {

// function sampled on a uniform grid over [0, length], endpoints included
struct sampled_fn {
  double length = 0.0;
  vec values;

  int size() const { return static_cast<int>(values.size()); }
  double x(int i) const { return length * i / (size() - 1); }
  bool same_grid(const sampled_fn& other) const {
    return size() == other.size() &&
           std::abs(length - other.length) <= 1e-12 * (1.0 + std::abs(length));
  }
};

// input shape: either a finite combination of eigenfunctions (1-based mode
// index -> weight) or an explicit sampled profile
struct input_shape {
  std::map<int, double> mode_coeffs;
  std::optional<sampled_fn> profile;
};

struct operator_spec {
  double length = 0.0;
  double sat_level = 0.0;
  std::optional<double> reaction_const;
  std::optional<sampled_fn> reaction_profile;
  std::vector<input_shape> inputs;

  void validate() const;  // throws precondition_error on malformed data
};

struct modal_system {
  vec eigvals;                      // strictly decreasing
  std::vector<sampled_fn> eigfuncs; // unit L2 norm, slope positive at x = 0
  int n = 0;                        // retained unstable-side modes
  double eta = 0.0;                 // tail decay rate, 0 < eta < -eigvals[n]
  bool already_stable = false;      // n = 0: every mode decays on its own
  mat Bmat;                         // order x m input coefficients

  int order() const { return static_cast<int>(eigvals.size()); }
  mat Amat() const;                 // diag(eigvals[0..n-1])
};

// Closed-form spectrum for constant reaction: lambda_j = -pi^2 j^2 / L^2 + c,
// e_j = sqrt(2/L) sin(j pi x / L).  Truncation selection runs with target 0.
modal_system analytic_spectrum(const operator_spec& spec, int order, int grid_points = 2001);

// Spectrum of the central-difference discretization with Dirichlet rows
// removed, via the tridiagonal eigensolver; eigenfunctions quadrature
// normalized.  Requires grid_points >= 3 * order.
modal_system numeric_spectrum(const operator_spec& spec, int order, int grid_points = 2001);

// Fills Bmat with the input coefficients <b_k, e_j>.  Eigenfunction
// combinations land exactly (unlisted modes carry zero forcing); sampled
// profiles go through quadrature with a Cauchy-Bunyakovsky-Schwarz check.
void project_inputs(modal_system& ms, const operator_spec& spec);

// Picks n minimal with eigvals[n] < -decay_target (0-based: the first
// excluded mode), sets eta = 0.999 * (-eigvals[n]); throws when the
// truncation has no stable tail to certify against.
void select_n(modal_system& ms, double decay_target);

// composite Simpson; an even sample count is handled by interpolating the
// midpoint of the final interval so the rule always sees an odd count
double simpson(const sampled_fn& f);
double inner_product(const sampled_fn& f, const sampled_fn& g);
double l2_norm(const sampled_fn& f);

// two-column CSV with header "x,value", 17 significant digits
void write_sampled_csv(const std::string& path, const sampled_fn& f);
sampled_fn read_sampled_csv(const std::string& path);

// structured text dump of the modal data (eigvals, n, eta, Bmat, grid)
void write_modal_json(const std::string& path, const modal_system& ms);

}  // namespace rdsat
