#include "rdsat/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>

#include "rdsat/errors.hpp"
#include "rdsat/lmi.hpp"

namespace rdsat {

// ===========================================================================
// polynomial machinery
// ===========================================================================

vec char_poly(const mat& M) {
  if (M.rows != M.cols || M.rows < 1) throw precondition_error("char_poly: square matrix required");
  const int n = M.rows;
  // Faddeev-LeVerrier: M_{k+1} = M (M_k + c_k I), c_k = -tr(M_k)/k
  vec c(n + 1, 0.0);
  c[0] = 1.0;
  mat Mk = M;
  for (int k = 1; k <= n; ++k) {
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += Mk(i, i);
    c[k] = -tr / k;
    if (k == n) break;
    mat shifted = Mk;
    for (int i = 0; i < n; ++i) shifted(i, i) += c[k];
    Mk = M * shifted;
  }
  return c;
}

static cplx horner(const vec& c, cplx x) {
  cplx r(c[0], 0.0);
  for (std::size_t i = 1; i < c.size(); ++i) r = r * x + c[i];
  return r;
}

static cplx horner_deriv(const vec& c, cplx x) {
  const int n = static_cast<int>(c.size()) - 1;
  cplx r = cplx(n, 0.0) * c[0];
  for (int i = 1; i < n; ++i) r = r * x + cplx(n - i, 0.0) * c[i];
  return r;
}

static void newton_polish(const vec& c, std::vector<cplx>& roots) {
  for (cplx& z : roots)
    for (int it = 0; it < 8; ++it) {
      const cplx d = horner_deriv(c, z);
      if (std::abs(d) < 1e-300) break;
      const cplx step = horner(c, z) / d;
      z -= step;
      if (std::abs(step) < 1e-15 * (1.0 + std::abs(z))) break;
    }
}

static std::vector<cplx> cubic_roots(double a1, double a2, double a3) {
  // depressed form t^3 + p t + q via x = t - a1/3
  const double p = a2 - a1 * a1 / 3.0;
  const double q = 2.0 * a1 * a1 * a1 / 27.0 - a1 * a2 / 3.0 + a3;
  const cplx s = std::sqrt(cplx(q * q / 4.0 + p * p * p / 27.0, 0.0));
  cplx u = std::pow(-q / 2.0 + s, 1.0 / 3.0);
  if (std::abs(u) < 1e-150) u = std::pow(-q / 2.0 - s, 1.0 / 3.0);
  const cplx v = (std::abs(u) > 0.0) ? -p / (3.0 * u) : cplx(0.0, 0.0);
  const cplx w(-0.5, std::sqrt(3.0) / 2.0);
  const cplx wb = std::conj(w);
  const double shift = a1 / 3.0;
  return {u + v - shift, w * u + wb * v - shift, wb * u + w * v - shift};
}

static std::vector<cplx> durand_kerner(const vec& c) {
  const int n = static_cast<int>(c.size()) - 1;
  double radius = 0.0;
  for (int i = 1; i <= n; ++i) radius = std::max(radius, std::abs(c[i]));
  radius = 1.0 + radius;
  std::vector<cplx> z(n);
  const cplx seed(0.4, 0.9);  // standard non-real, non-unit starting ray
  cplx g = seed;
  for (int k = 0; k < n; ++k, g *= seed) z[k] = radius * g;

  for (int sweep = 0; sweep < 500; ++sweep) {
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      cplx denom(1.0, 0.0);
      for (int j = 0; j < n; ++j)
        if (j != k) denom *= z[k] - z[j];
      if (std::abs(denom) < 1e-300) denom = cplx(1e-300, 0.0);
      const cplx step = horner(c, z[k]) / denom;
      z[k] -= step;
      worst = std::max(worst, std::abs(step) / (1.0 + std::abs(z[k])));
    }
    if (worst < 1e-14) break;
    // multiple roots stagnate at the sqrt(eps) noise floor; the residual
    // gate below decides whether the stagnation point is acceptable
  }
  return z;
}

std::vector<cplx> poly_roots(const vec& c) {
  if (c.size() < 2 || c[0] != 1.0) throw precondition_error("poly_roots: monic coefficients expected");
  const int n = static_cast<int>(c.size()) - 1;
  std::vector<cplx> roots;
  if (n == 1) {
    roots = {cplx(-c[1], 0.0)};
  } else if (n == 2) {
    const cplx s = std::sqrt(cplx(c[1] * c[1] - 4.0 * c[2], 0.0));
    roots = {(-c[1] + s) / 2.0, (-c[1] - s) / 2.0};
  } else if (n == 3) {
    roots = cubic_roots(c[1], c[2], c[3]);
  } else {
    roots = durand_kerner(c);
  }
  newton_polish(c, roots);
  double scale = 1.0;
  for (double ci : c) scale = std::max(scale, std::abs(ci));
  for (const cplx& z : roots)
    if (std::abs(horner(c, z)) > 1e-7 * scale * std::pow(std::max(1.0, std::abs(z)), n))
      throw numeric_error("poly_roots: root residual too large");
  return roots;
}

std::vector<cplx> eigenvalues(const mat& M) { return poly_roots(char_poly(M)); }

hurwitz_result hurwitz(const mat& M) {
  std::vector<cplx> ev = eigenvalues(M);
  hurwitz_result res;
  res.abscissa = ev[0].real();
  for (const cplx& z : ev) res.abscissa = std::max(res.abscissa, z.real());

  // Bendixson bound from the symmetric part as an independent sanity check
  const int n = M.rows;
  mat H(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) H(i, j) = 0.5 * (M(i, j) + M(j, i));
  const eig_result se = sym_eig(H);
  const double hi = se.values[n - 1], lo = se.values[0];
  const double slack = 1e-6 * (1.0 + std::abs(hi) + std::abs(lo));
  if (res.abscissa > hi + slack || res.abscissa < lo - slack)
    throw numeric_error("hurwitz: spectral abscissa escaped the symmetric-part bounds");

  res.ok = res.abscissa < 0.0;
  return res;
}

// ===========================================================================
// plant checks
// ===========================================================================

void plant_fd::validate() const {
  if (A.rows != A.cols || A.rows < 1) throw precondition_error("plant: A must be square");
  if (B.rows != A.rows || B.cols < 1) throw precondition_error("plant: B row count must match A");
  if (!labels.empty() && static_cast<int>(labels.size()) != A.rows)
    throw precondition_error("plant: one label per state");
  if (K) {
    if (K->rows != B.cols || K->cols != A.rows)
      throw precondition_error("plant: K must be m x n");
    if (!hurwitz(A + B * *K).ok)
      throw precondition_error("plant: closed loop A + BK is not Hurwitz");
  }
}

mat closed_loop(const plant_fd& p) {
  if (!p.K) throw precondition_error("closed_loop: no gain attached");
  return p.A + p.B * *p.K;
}

plant_fd with_gain(plant_fd p, const mat& K) {
  p.K = K;
  p.validate();
  return p;
}

static bool is_diagonal(const mat& A) {
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j)
      if (i != j && A(i, j) != 0.0) return false;
  return true;
}

stabilizable_result stabilizable(const plant_fd& p) {
  p.validate();
  const int n = p.order();
  stabilizable_result res;

  if (p.inputs() == 1 && is_diagonal(p.A)) {
    // scalar criterion: every mode actuated, no repeated eigenvalue
    double scale = 1.0;
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(p.A(j, j)));
    for (int j = 0; j < n; ++j)
      if (p.B(j, 0) == 0.0) {
        res.diagnostic = "mode " + std::to_string(j + 1) + " unreachable";
        return res;
      }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (std::abs(p.A(i, i) - p.A(j, j)) <= 1e-12 * scale) {
          res.diagnostic = "modes " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                           " share an eigenvalue";
          return res;
        }
    res.ok = true;
    return res;
  }

  // Hautus: [A - lambda I, B] must have full row rank at every eigenvalue
  // with nonnegative real part. Rank is read off the smallest eigenvalue of
  // the Hermitian Gram matrix, embedded as a real symmetric 2n x 2n block.
  const mat BBt = p.B * transpose(p.B);
  for (const cplx& lam : eigenvalues(p.A)) {
    if (lam.real() < -1e-12) continue;
    mat N = p.A;
    for (int i = 0; i < n; ++i) N(i, i) -= lam.real();
    const double b = lam.imag();
    mat R = N * transpose(N) + BBt;
    for (int i = 0; i < n; ++i) R(i, i) += b * b;
    const mat Q = b * (N - transpose(N));
    mat embed(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        embed(i, j) = R(i, j);
        embed(n + i, n + j) = R(i, j);
        embed(i, n + j) = -Q(i, j);
        embed(n + i, j) = Q(i, j);
      }
    const eig_result se = sym_eig(embed);
    const double gram_scale = std::max(1.0, std::abs(se.values[2 * n - 1]));
    if (se.values[0] <= 1e-10 * gram_scale) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g%+.6gi", lam.real(), lam.imag());
      res.diagnostic = std::string("unstable eigenvalue ") + buf + " unreachable";
      return res;
    }
  }
  res.ok = true;
  return res;
}

// ===========================================================================
// pole placement
// ===========================================================================

static void check_pole_set(const std::vector<cplx>& poles, int n) {
  if (static_cast<int>(poles.size()) != n)
    throw precondition_error("place_poles: need exactly one pole per state");
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (!(poles[i].real() < 0.0))
      throw precondition_error("place_poles: poles must lie in the open left half-plane");
    if (std::abs(poles[i].imag()) <= 1e-12) continue;
    bool matched = false;
    for (std::size_t j = 0; j < poles.size(); ++j) {
      if (j == i || used[j]) continue;
      if (std::abs(poles[j] - std::conj(poles[i])) <= 1e-12 * (1.0 + std::abs(poles[i]))) {
        used[i] = used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched && !used[i])
      throw precondition_error("place_poles: complex poles must come in conjugate pairs");
  }
}

// monic coefficients of prod (x - mu_i); conjugate-closed input gives a real result
static vec target_poly(const std::vector<cplx>& poles) {
  std::vector<cplx> c{cplx(1.0, 0.0)};
  for (const cplx& mu : poles) {
    std::vector<cplx> next(c.size() + 1, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * mu;
    }
    c = next;
  }
  vec out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (std::abs(c[i].imag()) > 1e-9 * (1.0 + std::abs(c[i].real())))
      throw numeric_error("place_poles: target polynomial came out complex");
    out[i] = c[i].real();
  }
  return out;
}

// Repeated targets make the closed-loop spectrum defective, so individual
// eigenvalues are only sqrt(eps)-accurate; comparing characteristic
// coefficients instead is exact to rounding regardless of multiplicity.
static void verify_assignment(const mat& acl, const std::vector<cplx>& poles) {
  const vec got = char_poly(acl);
  const vec want = target_poly(poles);
  double scale = 1.0;
  for (double c : want) scale = std::max(scale, std::abs(c));
  for (std::size_t i = 0; i < want.size(); ++i)
    if (std::abs(got[i] - want[i]) > 1e-8 * scale)
      throw numeric_error("place_poles: assigned spectrum missed the target");
}

mat place_poles(const plant_fd& p, const std::vector<cplx>& poles) {
  if (p.inputs() != 1) throw precondition_error("place_poles: single-input plants only");
  const stabilizable_result st = stabilizable(p);
  if (!st.ok) throw precondition_error("place_poles: plant not stabilizable (" + st.diagnostic + ")");
  const int n = p.order();
  check_pole_set(poles, n);

  mat K(1, n);
  if (is_diagonal(p.A)) {
    // closed form: residue matching at each open-loop eigenvalue
    for (int j = 0; j < n; ++j) {
      const cplx lj(p.A(j, j), 0.0);
      cplx num(1.0, 0.0);
      for (const cplx& mu : poles) num *= lj - mu;
      cplx den(p.B(j, 0), 0.0);
      for (int i = 0; i < n; ++i)
        if (i != j) den *= lj - cplx(p.A(i, i), 0.0);
      const cplx kj = -num / den;
      K(0, j) = kj.real();
    }
  } else {
    // controllability-matrix formula
    mat ctrb(n, n);
    vec col(p.B.rows);
    for (int i = 0; i < n; ++i) col[i] = p.B(i, 0);
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) ctrb(i, k) = col[i];
      col = p.A * col;
    }
    const vec tgt = target_poly(poles);
    // phi(A) by Horner
    mat phi = mat::identity(n);
    for (int k = 1; k <= n; ++k) {
      phi = phi * p.A;
      for (int i = 0; i < n; ++i) phi(i, i) += tgt[k];
    }
    mat rhs(n, 1);
    for (int i = 0; i < n; ++i) rhs(i, 0) = (i == n - 1) ? 1.0 : 0.0;
    mat q;
    try {
      q = lu_solve(transpose(ctrb), rhs);  // q = ctrb^{-T} e_n
    } catch (const numeric_error&) {
      throw precondition_error("place_poles: plant not controllable; cannot assign all poles");
    }
    const mat row = transpose(q) * phi;
    for (int j = 0; j < n; ++j) K(0, j) = -row(0, j);
  }

  verify_assignment(p.A + p.B * K, poles);
  return K;
}

}  // namespace rdsat
