#pragma once

// Region-of-attraction certificates: static feedback, dynamic (controller
// augmented) feedback, pointwise saturation, and boundary control via the
// change of variables that folds the actuator dynamics into the plant.

#include <map>
#include <string>

#include "rdsat/design.hpp"
#include "rdsat/lmi.hpp"
#include "rdsat/spectral.hpp"

namespace rdsat {

enum class certificate_kind { static_fb, dynamic_fb, pointwise, boundary };

// Quadratic-Lyapunov region certificate. The region is
//   {z : z^T region_matrix() z <= rho},
// with rho = infinity as the global-case sentinel. P stores the solver-form
// matrix: P-tilde for scalar_sector (region matrix D[0]*P, rho = 1) and the
// Lyapunov matrix itself for the other forms.
struct certificate {
  certificate_kind kind = certificate_kind::static_fb;
  lmi_form form = lmi_form::scalar_sector;
  sym_matrix P;
  mat K;        // gain; dynamic kind stores (K1 K2) as one row block
  mat C;        // sector bound
  vec D;        // diagonal sector scaling
  double rho = 1.0;
  double alpha = 0.0;   // decay margin: dV/dt <= -alpha |z|^2 on the region
  double gamma = 0.0;   // tail weight of the extended Lyapunov function
  double beta = 0.0;    // pointwise level (pointwise kind only)
  double margin = 0.0;  // epsilon used in the solve
  vec residuals;        // decisive eigenvalue per verified block
  int split = 0;        // leading-block size: plant modes (dynamic) or
                        // actuator states (boundary); 0 when unstructured
  std::map<std::string, std::string> metadata;

  bool global() const;          // rho == infinity
  sym_matrix region_matrix() const;
  double volume() const;        // Lebesgue volume of the region (inf if global)
};

struct certify_opts {
  double margin = 0.0;  // 0 -> solver default
  long budget = 100000;
  bool minimize_gap = true;
};

// ellipsoid utilities for {z : z^T P z <= rho}
bool ellipsoid_contains(const sym_matrix& P, double rho, const vec& z);
std::vector<vec> ellipsoid_boundary_samples(const sym_matrix& P, double rho, int count);
double ellipsoid_volume(const sym_matrix& P, double rho);

// Static feedback: sector solve, then the minimal scaling; region
// {z^T (D P-tilde) z <= 1}; K = C collapses to the global certificate.
certificate certify_static(const plant_fd& plant, double ell, certify_opts opts = {});

// Controller augmentation. The plant gains live in dd; plant.K is ignored.
struct dynamic_design {
  mat A1;  // n_c x n_c controller dynamics
  mat A2;  // n_c x n  plant-to-controller coupling
  mat K1;  // m x n    plant feedback
  mat K2;  // m x n_c  controller feedback
  int order() const { return A1.rows; }
};

// Certifies the augmented system and enforces that the projection of its
// region onto the plant states contains {z : z^T reference_P z <= 1}.
// n_c = 0 returns certify_static of the plant with gain K1, unchanged.
certificate certify_dynamic(const plant_fd& plant, const dynamic_design& dd,
                            const sym_matrix& reference_P, double ell,
                            certify_opts opts = {});

// Schur-complement projection of a structured certificate's region onto its
// leading `split` states, and that projection's volume.
sym_matrix projection_matrix(const certificate& cert);
double projection_volume(const certificate& cert);

// Pointwise saturation: shrink the static region until every channel's
// spatial control field stays below the level, forcing the mismatch term to
// vanish on the region. K = 0 gives the unbounded sentinel.
certificate certify_pointwise(const plant_fd& plant, const std::vector<sampled_fn>& b_shapes,
                              double ell, const certificate& static_cert);

// Boundary control plumbing: fold the actuator ODE into the modal plant.
struct boundary_plant {
  mat A_d, B_d, C_d;                // n_d x n_d, n_d x 1, 1 x n_d
  modal_system ms;                  // spectrum of the PDE part
  std::vector<sampled_fn> d_shapes; // one per actuator state, row of d(x)
  sampled_fn b_shape;               // scalar b(x)
  plant_fd augmented;               // states ordered (x_d, w_1..w_n)
};

boundary_plant build_boundary(const mat& A_d, const mat& B_d, const mat& C_d,
                              const operator_spec& spec, int n_modes,
                              int grid_points = 2001);

certificate certify_boundary(const boundary_plant& bp, const mat& K, double ell,
                             certify_opts opts = {});

// certificate file round trip (structured text, 17 significant digits)
void write_certificate(const std::string& path, const certificate& cert);
certificate read_certificate(const std::string& path);

}  // namespace rdsat
