#pragma once

// Stabilizability checks and single-input pole placement for the truncated
// plant, plus the small nonsymmetric eigenvalue utilities they need.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "rdsat/linalg.hpp"

namespace rdsat {

using cplx = std::complex<double>;

struct plant_fd {
  mat A;                 // n x n; diagonal for modal plants, general for augmented ones
  mat B;                 // n x m
  std::optional<mat> K;  // m x n feedback gain
  std::vector<std::string> labels;  // per-state tags (mode index or controller state)

  int order() const { return A.rows; }
  int inputs() const { return B.cols; }
  void validate() const;  // dimensions; with K present, the closed loop must be Hurwitz
};

// attach a gain and enforce the closed-loop invariant
plant_fd with_gain(plant_fd p, const mat& K);
mat closed_loop(const plant_fd& p);  // A + B K

struct stabilizable_result {
  bool ok = false;
  std::string diagnostic;  // names the failing mode when !ok
};
stabilizable_result stabilizable(const plant_fd& p);

// single-input placement; poles must be closed under conjugation and lie in
// the open left half-plane. Diagonal plants use the closed-form gain, general
// ones the controllability-matrix formula. The result is checked: the closed
// loop spectrum must match the request within 1e-8.
mat place_poles(const plant_fd& p, const std::vector<cplx>& poles);

struct hurwitz_result {
  bool ok = false;
  double abscissa = 0.0;  // max real part of the spectrum
};
hurwitz_result hurwitz(const mat& M);

// monic characteristic polynomial, coefficients [1, c1, ..., cn] for
// x^n + c1 x^{n-1} + ... + cn
vec char_poly(const mat& M);

// roots of a monic real polynomial given as char_poly output; closed form up
// to cubics, simultaneous iteration beyond
std::vector<cplx> poly_roots(const vec& coeffs);

std::vector<cplx> eigenvalues(const mat& M);

}  // namespace rdsat
