#pragma once

// Small dense linear algebra sized for the control problems in this repo
// (state dimensions stay below ~100). Row-major storage, no views, no
// sparsity; clarity over cleverness.

#include <vector>
#include <string>
#include <cstddef>

namespace rdsat {

using vec = std::vector<double>;

struct mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  mat() = default;
  mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static mat identity(int n);
  static mat diag(const vec& d);
  static mat from_rows(const std::vector<vec>& rows);
  static mat row(const vec& v);     // 1 x n
  static mat col(const vec& v);     // n x 1
};

mat operator*(const mat& x, const mat& y);
vec operator*(const mat& x, const vec& v);
mat operator+(const mat& x, const mat& y);
mat operator-(const mat& x, const mat& y);
mat operator*(double s, const mat& x);
inline mat operator*(const mat& x, double s) { return s * x; }
mat transpose(const mat& x);

double dot(const vec& x, const vec& y);
double norm2(const vec& x);
double norm_inf(const vec& x);
vec axpy(double a, const vec& x, const vec& y);  // a*x + y

// Partial-pivot LU solve; throws numeric_error on (near-)singular input.
vec lu_solve(mat a, vec b);
mat lu_solve(mat a, mat b);
mat inverse(const mat& a);
double determinant(mat a);

// Frobenius norm and a symmetric block builder used by the inequality code.
double frobenius(const mat& x);
mat hcat(const mat& x, const mat& y);
mat vcat(const mat& x, const mat& y);

}  // namespace rdsat
