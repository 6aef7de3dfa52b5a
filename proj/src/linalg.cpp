#include "rdsat/linalg.hpp"

#include <cmath>
#include <cstdlib>

#include "rdsat/errors.hpp"

namespace rdsat {

mat mat::identity(int n) {
  mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

mat mat::diag(const vec& d) {
  mat m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return m;
}

mat mat::from_rows(const std::vector<vec>& rows) {
  if (rows.empty()) return {};
  mat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows; ++i) {
    if (static_cast<int>(rows[i].size()) != m.cols)
      throw numeric_error("from_rows: ragged rows");
    for (int j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

mat mat::row(const vec& v) {
  mat m(1, static_cast<int>(v.size()));
  m.a = v;
  return m;
}

mat mat::col(const vec& v) {
  mat m(static_cast<int>(v.size()), 1);
  m.a = v;
  return m;
}

mat operator*(const mat& x, const mat& y) {
  if (x.cols != y.rows) throw numeric_error("matmul: dimension mismatch");
  mat z(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const double xv = x(i, k);
      if (xv == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) z(i, j) += xv * y(k, j);
    }
  return z;
}

vec operator*(const mat& x, const vec& v) {
  if (x.cols != static_cast<int>(v.size())) throw numeric_error("matvec: dimension mismatch");
  vec z(static_cast<size_t>(x.rows), 0.0);
  for (int i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < x.cols; ++j) s += x(i, j) * v[j];
    z[i] = s;
  }
  return z;
}

mat operator+(const mat& x, const mat& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw numeric_error("mat add: dimension mismatch");
  mat z = x;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] += y.a[i];
  return z;
}

mat operator-(const mat& x, const mat& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw numeric_error("mat sub: dimension mismatch");
  mat z = x;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] -= y.a[i];
  return z;
}

mat operator*(double s, const mat& x) {
  mat z = x;
  for (double& v : z.a) v *= s;
  return z;
}

mat transpose(const mat& x) {
  mat z(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) z(j, i) = x(i, j);
  return z;
}

double dot(const vec& x, const vec& y) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(const vec& x) { return std::sqrt(dot(x, x)); }

double norm_inf(const vec& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

vec axpy(double a, const vec& x, const vec& y) {
  vec z = y;
  for (size_t i = 0; i < z.size(); ++i) z[i] += a * x[i];
  return z;
}

namespace {

// In-place LU with partial pivoting; returns pivot rows, throws when a pivot
// collapses relative to the matrix scale.
std::vector<int> lu_factor(mat& a) {
  const int n = a.rows;
  if (a.cols != n) throw numeric_error("lu: matrix not square");
  double scale = 0.0;
  for (double v : a.a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw numeric_error("lu: zero matrix");
  std::vector<int> piv(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (std::abs(a(p, k)) < 1e-14 * scale) throw numeric_error("lu: singular matrix");
    piv[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    for (int i = k + 1; i < n; ++i) {
      a(i, k) /= a(k, k);
      const double lik = a(i, k);
      for (int j = k + 1; j < n; ++j) a(i, j) -= lik * a(k, j);
    }
  }
  return piv;
}

}  // namespace

vec lu_solve(mat a, vec b) {
  const int n = a.rows;
  if (static_cast<int>(b.size()) != n) throw numeric_error("lu_solve: rhs size mismatch");
  auto piv = lu_factor(a);
  for (int k = 0; k < n; ++k)
    if (piv[k] != k) std::swap(b[k], b[piv[k]]);
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) b[i] -= a(i, j) * b[j];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) b[i] -= a(i, j) * b[j];
    b[i] /= a(i, i);
  }
  return b;
}

mat lu_solve(mat a, mat b) {
  const int n = a.rows;
  if (b.rows != n) throw numeric_error("lu_solve: rhs rows mismatch");
  auto piv = lu_factor(a);
  for (int k = 0; k < n; ++k)
    if (piv[k] != k)
      for (int j = 0; j < b.cols; ++j) std::swap(b(k, j), b(piv[k], j));
  for (int c = 0; c < b.cols; ++c) {
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < i; ++j) b(i, c) -= a(i, j) * b(j, c);
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) b(i, c) -= a(i, j) * b(j, c);
      b(i, c) /= a(i, i);
    }
  }
  return b;
}

mat inverse(const mat& a) { return lu_solve(a, mat::identity(a.rows)); }

double determinant(mat a) {
  const int n = a.rows;
  if (a.cols != n) throw numeric_error("det: matrix not square");
  double scale = 0.0;
  for (double v : a.a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (std::abs(a(p, k)) < 1e-300) return 0.0;
    if (p != k) {
      det = -det;
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    }
    det *= a(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double lik = a(i, k) / a(k, k);
      for (int j = k + 1; j < n; ++j) a(i, j) -= lik * a(k, j);
    }
  }
  return det;
}

double frobenius(const mat& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

mat hcat(const mat& x, const mat& y) {
  if (x.rows != y.rows) throw numeric_error("hcat: row mismatch");
  mat z(x.rows, x.cols + y.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) z(i, j) = x(i, j);
    for (int j = 0; j < y.cols; ++j) z(i, x.cols + j) = y(i, j);
  }
  return z;
}

mat vcat(const mat& x, const mat& y) {
  if (x.cols != y.cols) throw numeric_error("vcat: col mismatch");
  mat z(x.rows + y.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) z(i, j) = x(i, j);
  for (int i = 0; i < y.rows; ++i)
    for (int j = 0; j < x.cols; ++j) z(x.rows + i, j) = y(i, j);
  return z;
}

}  // namespace rdsat
