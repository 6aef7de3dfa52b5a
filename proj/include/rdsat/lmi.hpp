#pragma once

// Dense symmetric linear algebra and the matrix-inequality feasibility
// engine behind the region-of-attraction certificates.
//
// The solvers never trust their own iterates: every solution handed back has
// been re-verified with the in-house eigensolver, and budget exhaustion is
// reported as "no feasible point found within budget", which is weaker than
// a proof of infeasibility.

#include <optional>
#include <string>
#include <vector>

#include "rdsat/linalg.hpp"

namespace rdsat {

// ===========================================================================
// symmetric storage + eigensolvers
// ===========================================================================

struct sym_matrix {
  int n = 0;
  std::vector<double> lower;  // row-major lower triangle, n(n+1)/2 entries

  sym_matrix() = default;
  explicit sym_matrix(int dim) : n(dim), lower(static_cast<size_t>(dim) * (dim + 1) / 2, 0.0) {}

  double& at(int i, int j);
  double at(int i, int j) const;

  mat dense() const;
  // Symmetrizes: stores (M + M^T)/2 so the invariant holds by construction.
  static sym_matrix from_dense(const mat& m);
};

struct eig_result {
  vec values;  // ascending
  mat vectors; // columns, orthonormal, M = V diag(values) V^T
};

// Cyclic Jacobi to off-diagonal Frobenius norm < 1e-12 * ||M||; throws
// numeric_error after 100 sweeps without convergence.
eig_result sym_eig(const sym_matrix& m);
eig_result sym_eig(const mat& m);  // convenience, symmetrizes first
double eig_min(const mat& m);
double eig_max(const mat& m);

// Largest-magnitude singular value (2-norm) of a general rectangular matrix.
double spectral_norm(const mat& m);

struct cholesky_result {
  bool ok = false;
  mat L;             // lower factor, L L^T = M when ok
  int failed_pivot = -1;  // 1-based index of the failing pivot otherwise
};
cholesky_result cholesky(const sym_matrix& m);
cholesky_result cholesky(const mat& m);

// Schur-complement positive-semidefiniteness of [[A, B^T],[B, C]] with C > 0.
// Decides via A - B^T C^{-1} B >= 0 and cross-checks against the eigenvalues
// of the assembled block; disagreement of the two paths throws.
bool schur_psd(const mat& a_block, const mat& b_block, const mat& c_block);

// Eigenvalues of a symmetric tridiagonal matrix (diag d, off-diagonal e) by
// Sturm-sequence bisection; `top_k` largest, ascending.  `tridiag_eigvec`
// recovers one eigenvector by shifted inverse iteration.
vec tridiag_top_eigvals(const vec& d, const vec& e, int top_k);
vec tridiag_eigvec(const vec& d, const vec& e, double eigval);

// ===========================================================================
// matrix-inequality problems
// ===========================================================================

enum class lmi_form {
  scalar_sector,    // m = 1, normalized sector corner (the workhorse)
  congruent_sector, // (S, E, Y) linearized variables, any m
  bilinear_sector,  // (P, C, D) original variables, verification only
  dynamic_sector,   // augmented plant + projection-inclusion block
};

struct lmi_problem {
  lmi_form form = lmi_form::scalar_sector;
  mat A, B, K;
  double ell = 1.0;
  double margin = 0.0;      // 0 -> default 1e-6 * (1 + ||A + BK||)
  long budget = 100000;     // iteration cap across all phases
  bool minimize_gap = true; // approximately minimize ||K - C||^2 (else feasibility only)
};

struct lmi_solution {
  bool feasible = false;
  sym_matrix P;     // P-tilde (scalar form) or the mapped-back P (congruent form)
  mat C;            // m x n
  vec D;            // diagonal scaling entries (one entry when m = 1)
  double margin = 0.0;
  double objective_value = 0.0;        // ||K - C||_F^2
  vec residuals;                       // decisive eigenvalue of each block
  long iterations = 0;

  // Raw linearized variables, populated by solve_sector_congruent only.
  std::optional<sym_matrix> S;
  std::optional<mat> Y;
  std::optional<vec> E;
};

// Scalar-input sector feasibility: find symmetric P > 0 and row C with
//   [[(A+BK)^T P + P (A+BK), P B - C^T], [(P B)^T - C, -2]] <= -margin I,
// approximately minimizing ||K - C||^2.  Deep-cut ellipsoid localization on
// (vech P, C) with eigenvector outer-product subgradient cuts, then the
// exact inner minimizer of ||K - C|| at the returned P (a secular-equation
// projection).  Throws budget_error when no feasible point was seen.
lmi_solution solve_sector_scalar(const lmi_problem& prob);

// Any-m feasibility in the linearized variables (S, E, Y):
//   [[S Acl^T + Acl S, B E - Y], [(B E - Y)^T, -2 E]] < 0,
//   [[S, S K^T - Y], [(S K^T - Y)^T, ell^2 I]] >= 0,
// mapped back to P = S^{-1}, D = E^{-1}, C = (S^{-1} Y)^T and re-verified in
// the (P, C, D) variables before return.
lmi_solution solve_sector_congruent(const lmi_problem& prob);

// Least D with [[D P, (K - C)^T], [K - C, ell^2 I]] >= 0, closed form
// lambda_max(L^{-1} (K-C)^T (K-C) L^{-T}) / ell^2 from P = L L^T.
// K = C yields D = 0 (the certificate degenerates to a global one).
double minimal_scaling(const sym_matrix& P, const mat& K, const mat& C, double ell);
// Bisection oracle for the same quantity (monotone definiteness in D);
// retained for cross-checks.
double minimal_scaling_bisect(const sym_matrix& P, const mat& K, const mat& C, double ell,
                              double rel_tol = 1e-12);

// ===========================================================================
// verification
// ===========================================================================

struct block_report {
  std::string name;
  double lambda = 0.0;  // lambda_max for strict blocks, lambda_min for psd
  bool strict = false;  // strict block: lambda <= -tol_strict; else lambda >= -tol_psd
  bool pass = false;
};

struct verify_report {
  bool pass = false;
  std::vector<block_report> blocks;
  std::string summary() const;
};

struct verify_tols {
  double strict = 1e-9;
  double psd = 1e-6;
};

// Recomputes every constraint block of the given form and reports the
// decisive eigenvalue of each.  For scalar_sector, P is P-tilde and D the
// single sector scaling; for bilinear_sector, P is the Lyapunov matrix and D
// the diagonal of the sector scaling (m entries).  dynamic_sector verifies
// the scalar-form blocks on already-augmented matrices; the projection
// inclusion against the reference region is the caller's block.
verify_report verify_certificate(const sym_matrix& P, const mat& C, const vec& D,
                                 const mat& A, const mat& B, const mat& K,
                                 double ell, lmi_form form, verify_tols tols = {});

}  // namespace rdsat
