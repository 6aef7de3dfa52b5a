#include "rdsat/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "rdsat/errors.hpp"

namespace rdsat {

// ===========================================================================
// symmetric storage
// ===========================================================================

static size_t tri_index(int i, int j) {
  // lower triangle, row-major: (i, j) with i >= j
  return static_cast<size_t>(i) * (i + 1) / 2 + j;
}

double& sym_matrix::at(int i, int j) {
  if (i < j) std::swap(i, j);
  return lower[tri_index(i, j)];
}

double sym_matrix::at(int i, int j) const {
  if (i < j) std::swap(i, j);
  return lower[tri_index(i, j)];
}

mat sym_matrix::dense() const {
  mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = lower[tri_index(i, j)];
  return m;
}

sym_matrix sym_matrix::from_dense(const mat& m) {
  if (m.rows != m.cols) throw precondition_error("sym_matrix: matrix not square");
  sym_matrix s(m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j <= i; ++j) s.lower[tri_index(i, j)] = 0.5 * (m(i, j) + m(j, i));
  return s;
}

// ===========================================================================
// cyclic Jacobi eigensolver
// ===========================================================================

static double offdiag_norm(const mat& a) {
  double s = 0.0;
  for (int p = 0; p < a.rows; ++p)
    for (int q = p + 1; q < a.cols; ++q) s += a(p, q) * a(p, q);
  return std::sqrt(2.0 * s);
}

eig_result sym_eig(const sym_matrix& m) { return sym_eig(m.dense()); }

eig_result sym_eig(const mat& m_in) {
  if (m_in.rows != m_in.cols) throw precondition_error("sym_eig: matrix not square");
  const int n = m_in.rows;
  mat a = sym_matrix::from_dense(m_in).dense();  // exact symmetry
  mat v = mat::identity(n);
  const double scale = frobenius(a);
  const double tol = 1e-12 * scale;

  if (scale > 0.0) {
    bool converged = false;
    for (int sweep = 0; sweep < 100; ++sweep) {
      if (offdiag_norm(a) < tol) { converged = true; break; }
      for (int p = 0; p < n - 1; ++p) {
        for (int q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (std::abs(apq) <= 1e-300) continue;
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          double t;
          if (std::abs(theta) > 1e150) {
            t = 1.0 / (2.0 * theta);  // avoid overflow in theta^2
          } else {
            t = ((theta >= 0.0) ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          }
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          const double tau = s / (1.0 + c);
          // rows/columns p and q of A
          for (int k = 0; k < n; ++k) {
            if (k == p || k == q) continue;
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = a(p, k) = akp - s * (akq + tau * akp);
            a(k, q) = a(q, k) = akq + s * (akp - tau * akq);
          }
          const double app = a(p, p), aqq = a(q, q);
          a(p, p) = app - t * apq;
          a(q, q) = aqq + t * apq;
          a(p, q) = a(q, p) = 0.0;
          for (int k = 0; k < n; ++k) {
            const double vkp = v(k, p), vkq = v(k, q);
            v(k, p) = vkp - s * (vkq + tau * vkp);
            v(k, q) = vkq + s * (vkp - tau * vkq);
          }
        }
      }
    }
    if (!converged && offdiag_norm(a) >= tol)
      throw numeric_error("sym_eig: Jacobi iteration failed to converge in 100 sweeps");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

  eig_result r;
  r.values.resize(n);
  r.vectors = mat(n, n);
  for (int k = 0; k < n; ++k) {
    r.values[k] = a(order[k], order[k]);
    for (int i = 0; i < n; ++i) r.vectors(i, k) = v(i, order[k]);
  }
  return r;
}

double eig_min(const mat& m) { return sym_eig(m).values.front(); }
double eig_max(const mat& m) { return sym_eig(m).values.back(); }

double spectral_norm(const mat& m) {
  // smaller Gram side keeps the eigenproblem cheap
  mat g = (m.rows >= m.cols) ? transpose(m) * m : m * transpose(m);
  const double lam = eig_max(g);
  return std::sqrt(std::max(0.0, lam));
}

// ===========================================================================
// Cholesky and the Schur complement test
// ===========================================================================

cholesky_result cholesky(const sym_matrix& m) { return cholesky(m.dense()); }

cholesky_result cholesky(const mat& m) {
  if (m.rows != m.cols) throw precondition_error("cholesky: matrix not square");
  const int n = m.rows;
  cholesky_result r;
  r.L = mat(n, n);
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= r.L(j, k) * r.L(j, k);
    if (!(d > 0.0)) {
      r.ok = false;
      r.failed_pivot = j + 1;
      return r;
    }
    r.L(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= r.L(i, k) * r.L(j, k);
      r.L(i, j) = s / r.L(j, j);
    }
  }
  r.ok = true;
  return r;
}

bool schur_psd(const mat& a_block, const mat& b_block, const mat& c_block) {
  if (a_block.rows != a_block.cols || c_block.rows != c_block.cols)
    throw precondition_error("schur_psd: diagonal blocks must be square");
  if (b_block.rows != c_block.rows || b_block.cols != a_block.cols)
    throw precondition_error("schur_psd: off-diagonal block has wrong shape");
  if (!cholesky(c_block).ok)
    throw precondition_error("schur_psd: lower-right block is not positive definite");

  // path 1: A - B^T C^{-1} B
  mat cinv_b = lu_solve(c_block, b_block);
  mat comp = a_block - transpose(b_block) * cinv_b;

  // path 2: the assembled block, [[A, B^T], [B, C]]
  mat full = vcat(hcat(a_block, transpose(b_block)), hcat(b_block, c_block));

  const double tol = 1e-9 * (1.0 + frobenius(full));
  const bool by_complement = eig_min(comp) >= -tol;
  const bool by_assembly = eig_min(full) >= -tol;
  if (by_complement != by_assembly)
    throw numeric_error("schur_psd: complement and assembled-block decisions disagree");
  return by_complement;
}

// ===========================================================================
// symmetric tridiagonal eigensolver (Sturm bisection + inverse iteration)
// ===========================================================================

// number of eigenvalues strictly below x
static int sturm_count(const vec& d, const vec& e, double x) {
  const int n = static_cast<int>(d.size());
  int cnt = 0;
  double q = d[0] - x;
  if (q < 0.0) ++cnt;
  for (int i = 1; i < n; ++i) {
    if (q == 0.0) q = 1e-300;
    q = (d[i] - x) - e[i - 1] * e[i - 1] / q;
    if (q < 0.0) ++cnt;
  }
  return cnt;
}

vec tridiag_top_eigvals(const vec& d, const vec& e, int top_k) {
  const int n = static_cast<int>(d.size());
  if (n < 1 || static_cast<int>(e.size()) != n - 1)
    throw precondition_error("tridiag_top_eigvals: inconsistent band sizes");
  if (top_k < 1 || top_k > n)
    throw precondition_error("tridiag_top_eigvals: top_k out of range");

  double lo = d[0], hi = d[0];
  for (int i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(e[i - 1]) : 0.0) + (i < n - 1 ? std::abs(e[i]) : 0.0);
    lo = std::min(lo, d[i] - r);
    hi = std::max(hi, d[i] + r);
  }
  hi += 1e-12 * (1.0 + std::abs(hi));
  lo -= 1e-12 * (1.0 + std::abs(lo));

  vec out(top_k);
  for (int k = 0; k < top_k; ++k) {
    const int rank = n - top_k + 1 + k;  // 1-based ascending index
    double a = lo, b = hi;
    for (int it = 0; it < 120; ++it) {
      const double mid = 0.5 * (a + b);
      if (sturm_count(d, e, mid) >= rank) b = mid; else a = mid;
    }
    out[k] = 0.5 * (a + b);
  }
  return out;
}

vec tridiag_eigvec(const vec& d, const vec& e, double eigval) {
  const int n = static_cast<int>(d.size());
  if (n < 1 || static_cast<int>(e.size()) != n - 1)
    throw precondition_error("tridiag_eigvec: inconsistent band sizes");

  double scale = 0.0;
  for (double x : d) scale = std::max(scale, std::abs(x));
  for (double x : e) scale = std::max(scale, std::abs(x));
  scale = std::max(scale, 1.0);

  vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double jitter = 1e-12 * scale;
  for (int attempt = 0; attempt < 6; ++attempt) {
    bool ok = true;
    vec w = v;
    for (int iter = 0; iter < 3 && ok; ++iter) {
      // Thomas solve of (T - (eigval + jitter) I) x = w with pivot guard
      vec diag(n), rhs = w;
      for (int i = 0; i < n; ++i) diag[i] = d[i] - (eigval + jitter);
      vec cp(n, 0.0);
      double piv = diag[0];
      if (std::abs(piv) < 1e-14 * scale) piv = std::copysign(1e-14 * scale, piv == 0.0 ? 1.0 : piv);
      cp[0] = (n > 1) ? e[0] / piv : 0.0;
      rhs[0] /= piv;
      for (int i = 1; i < n; ++i) {
        piv = diag[i] - e[i - 1] * cp[i - 1];
        if (std::abs(piv) < 1e-14 * scale) piv = std::copysign(1e-14 * scale, piv == 0.0 ? 1.0 : piv);
        if (i < n - 1) cp[i] = e[i] / piv;
        rhs[i] = (rhs[i] - e[i - 1] * rhs[i - 1]) / piv;
      }
      for (int i = n - 2; i >= 0; --i) rhs[i] -= cp[i] * rhs[i + 1];
      double nrm = norm2(rhs);
      if (!std::isfinite(nrm) || nrm == 0.0) { ok = false; break; }
      for (int i = 0; i < n; ++i) w[i] = rhs[i] / nrm;
    }
    if (ok) {
      // residual check: ||T w - eigval w||
      vec tw(n, 0.0);
      for (int i = 0; i < n; ++i) {
        tw[i] = d[i] * w[i];
        if (i > 0) tw[i] += e[i - 1] * w[i - 1];
        if (i < n - 1) tw[i] += e[i] * w[i + 1];
      }
      double resid = 0.0;
      for (int i = 0; i < n; ++i) resid = std::max(resid, std::abs(tw[i] - eigval * w[i]));
      if (resid < 1e-6 * scale) return w;
    }
    jitter *= 10.0;
  }
  throw numeric_error("tridiag_eigvec: inverse iteration failed to converge");
}

// ===========================================================================
// shared solver plumbing
// ===========================================================================

// Lyapunov solve Acl^T P + P Acl = -I via the Kronecker linear system; the
// solution is positive definite iff Acl is Hurwitz, which doubles as the
// solver's precondition check.
static mat lyapunov_identity(const mat& acl) {
  const int n = acl.rows;
  mat big(n * n, n * n);
  vec rhs(static_cast<size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int row = j * n + i;
      rhs[row] = (i == j) ? -1.0 : 0.0;
      for (int k = 0; k < n; ++k) big(row, j * n + k) += acl(k, i);
      for (int l = 0; l < n; ++l) big(row, l * n + i) += acl(l, j);
    }
  }
  vec sol;
  try {
    sol = lu_solve(big, rhs);
  } catch (const numeric_error&) {
    throw precondition_error("closed-loop matrix is not Hurwitz (Lyapunov equation is singular)");
  }
  mat p(n, n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k) p(k, l) = sol[l * n + k];
  return sym_matrix::from_dense(p).dense();
}

static const double kSqrt2 = std::sqrt(2.0);

// isometric packing of a symmetric matrix: diagonal entries as-is,
// off-diagonal entries scaled by sqrt(2), so dot products in packed
// coordinates equal Frobenius inner products
static void pack_sym(const mat& p, double* out) {
  int k = 0;
  for (int i = 0; i < p.rows; ++i)
    for (int j = 0; j <= i; ++j) out[k++] = (i == j) ? p(i, i) : kSqrt2 * 0.5 * (p(i, j) + p(j, i));
}

static mat unpack_sym(const double* x, int n) {
  mat p(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = (i == j) ? x[k] : x[k] / kSqrt2;
      p(i, j) = p(j, i) = v;
      ++k;
    }
  return p;
}

namespace {

enum class cut_status { ok, empty, degenerate };

// Deep-cut ellipsoid localization over R^d.  Cuts remove the half space
// {y : g.(y - x) > -violation}; violation >= 0 means x itself is cut away.
struct ellipsoid_state {
  int d = 0;
  vec x;
  mat E;  // shape matrix, localization = {y : (y-x)^T E^{-1} (y-x) <= 1}

  ellipsoid_state(vec x0, double radius) : d(static_cast<int>(x0.size())), x(std::move(x0)) {
    E = mat::identity(d);
    for (int i = 0; i < d; ++i) E(i, i) = radius * radius;
  }

  cut_status cut(const vec& g, double violation) {
    vec eg(d, 0.0);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += E(i, j) * g[j];
      eg[i] = s;
    }
    double denom = 0.0;
    for (int i = 0; i < d; ++i) denom += g[i] * eg[i];
    if (!(denom > 0.0) || !std::isfinite(denom)) return cut_status::degenerate;
    const double gnorm = std::sqrt(denom);
    double alpha = violation / gnorm;
    if (alpha >= 1.0) return cut_status::empty;
    alpha = std::max(alpha, -0.99 / d);

    const double dd = static_cast<double>(d);
    const double tau = (1.0 + dd * alpha) / (dd + 1.0);
    const double delta = (dd * dd / (dd * dd - 1.0)) * (1.0 - alpha * alpha);
    const double sigma = 2.0 * (1.0 + dd * alpha) / ((dd + 1.0) * (1.0 + alpha));

    for (int i = 0; i < d; ++i) {
      const double bi = eg[i] / gnorm;
      x[i] -= tau * bi;
      for (int j = 0; j <= i; ++j) {
        const double bj = eg[j] / gnorm;
        const double val = delta * (E(i, j) - sigma * bi * bj);
        E(i, j) = E(j, i) = val;
      }
    }
    return cut_status::ok;
  }
};

}  // namespace

static double default_margin(const mat& acl) { return 1e-6 * (1.0 + spectral_norm(acl)); }

// M1 block of the normalized scalar sector form:
// [[Acl^T P + P Acl, P B - C^T], [(P B)^T - C, -2]]
static mat sector_block_scalar(const mat& p, const mat& c, const mat& acl, const mat& b) {
  const int n = p.rows;
  mat m(n + 1, n + 1);
  mat tl = transpose(acl) * p + p * acl;
  mat pb = p * b;  // n x 1
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = tl(i, j);
    m(i, n) = m(n, i) = pb(i, 0) - c(0, i);
  }
  m(n, n) = -2.0;
  return m;
}

// M2 block pairing the scaled weight with the gain gap:
// [[D P, (K - C)^T], [K - C, ell^2 I_m]]
static mat scaling_block(const mat& p, const mat& k, const mat& c, const vec& d_diag, double ell,
                         bool scale_p_by_d) {
  const int n = p.rows;
  const int m = k.rows;
  mat blk(n + m, n + m);
  const double dscale = scale_p_by_d ? d_diag[0] : 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) blk(i, j) = dscale * p(i, j);
  for (int r = 0; r < m; ++r)
    for (int j = 0; j < n; ++j) blk(n + r, j) = blk(j, n + r) = k(r, j) - c(r, j);
  for (int r = 0; r < m; ++r) blk(n + r, n + r) = ell * ell;
  return blk;
}

// Exact minimizer of ||K - C|| over the feasible C's at fixed P: the sector
// block constraint reduces by Schur complement to an ellipsoid on
// q = P B - C^T, and the closest point is found on the secular equation.
static bool gap_projection_scalar(const mat& p, const mat& acl, const mat& b, const mat& k,
                                  double eps, mat* c_out) {
  const int n = p.rows;
  mat q_mat = transpose(acl) * p + p * acl;
  for (int i = 0; i < n; ++i) q_mat(i, i) += eps;
  // feasibility of C <=> q q^T <= (2 - eps) (-Q); shrink slightly so the
  // projected point stays strictly inside and re-verifies
  mat m = q_mat * (-(2.0 - eps) * (1.0 - 1e-4));
  eig_result em = sym_eig(m);
  vec q0(n, 0.0);
  {
    mat pb = p * b;
    for (int i = 0; i < n; ++i) q0[i] = pb(i, 0) - k(0, i);
  }
  vec qt0(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int r = 0; r < n; ++r) s += em.vectors(r, i) * q0[r];
    qt0[i] = s;
  }
  vec lam(n);
  for (int i = 0; i < n; ++i) lam[i] = std::max(0.0, em.values[i]);

  auto secular = [&](double nu) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      if (lam[i] <= 0.0) continue;
      const double t = lam[i] + nu;
      s += lam[i] * qt0[i] * qt0[i] / (t * t);
    }
    return s;
  };

  double nu = 0.0;
  bool degenerate_component = false;
  for (int i = 0; i < n; ++i)
    if (lam[i] <= 0.0 && std::abs(qt0[i]) > 0.0) degenerate_component = true;

  if (!degenerate_component && secular(0.0) <= 1.0) {
    // K itself is feasible at this P
    *c_out = k;
    return true;
  }
  double hi = 1.0;
  for (int it = 0; it < 2000 && secular(hi) > 1.0; ++it) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 300; ++it) {
    nu = 0.5 * (lo + hi);
    if (secular(nu) > 1.0) lo = nu; else hi = nu;
  }
  nu = hi;

  vec qt(n, 0.0);
  for (int i = 0; i < n; ++i) qt[i] = (lam[i] > 0.0) ? lam[i] * qt0[i] / (lam[i] + nu) : 0.0;
  vec q(n, 0.0);
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += em.vectors(r, i) * qt[i];
    q[r] = s;
  }
  mat c(1, n);
  mat pb = p * b;
  for (int i = 0; i < n; ++i) c(0, i) = pb(i, 0) - q[i];
  *c_out = c;
  return true;
}

// ===========================================================================
// scalar-input sector feasibility (deep-cut ellipsoid localization)
// ===========================================================================

lmi_solution solve_sector_scalar(const lmi_problem& prob) {
  const mat& A = prob.A;
  const mat& B = prob.B;
  const mat& K = prob.K;
  const int n = A.rows;
  if (A.rows != A.cols) throw precondition_error("solve_sector_scalar: A must be square");
  if (B.rows != n || B.cols != 1) throw precondition_error("solve_sector_scalar: B must be n x 1");
  if (K.rows != 1 || K.cols != n) throw precondition_error("solve_sector_scalar: K must be 1 x n");
  if (!(prob.ell > 0.0)) throw precondition_error("solve_sector_scalar: ell must be positive");

  const mat acl = A + B * K;
  const double eps = (prob.margin > 0.0) ? prob.margin : default_margin(acl);
  const int nt = n * (n + 1) / 2;
  const int dim = nt + n;

  // warm start: Lyapunov solution with C = B^T P makes the sector block
  // block-diagonal and strictly feasible; scaling keeps P comfortably above
  // the floor
  mat p0 = lyapunov_identity(acl);
  {
    const double lmin = eig_min(p0);
    if (!(lmin > 0.0))
      throw precondition_error("closed-loop matrix is not Hurwitz (Lyapunov solution not positive definite)");
    const double t = std::max(1.0, 2.0 * eps / lmin);
    p0 = p0 * t;
  }
  mat c0 = transpose(p0 * B);  // 1 x n

  vec x0(dim, 0.0);
  pack_sym(p0, x0.data());
  for (int i = 0; i < n; ++i) x0[nt + i] = c0(0, i);

  ellipsoid_state ball(x0, 100.0 * (1.0 + norm2(x0)));

  auto objective = [&](const mat& c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (K(0, i) - c(0, i)) * (K(0, i) - c(0, i));
    return s;
  };

  bool have_best = false;
  double fbest = std::numeric_limits<double>::infinity();
  mat pbest, cbest;
  {
    // the warm start is feasible by construction; verify anyway
    const double l1 = eig_max(sector_block_scalar(p0, c0, acl, B));
    if (l1 <= -eps && eig_min(p0) >= eps) {
      have_best = true;
      fbest = objective(c0);
      pbest = p0;
      cbest = c0;
    }
  }

  long used = 0;
  if (prob.minimize_gap) {
    for (long it = 0; it < prob.budget; ++it) {
      used = it + 1;
      mat p = unpack_sym(ball.x.data(), n);
      mat c(1, n);
      for (int i = 0; i < n; ++i) c(0, i) = ball.x[nt + i];

      vec g(dim, 0.0);
      cut_status st;

      eig_result ep = sym_eig(p);
      if (ep.values.front() < eps) {
        mat uu(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) uu(i, j) = -ep.vectors(i, 0) * ep.vectors(j, 0);
        pack_sym(uu, g.data());
        st = ball.cut(g, eps - ep.values.front());
      } else {
        mat m1 = sector_block_scalar(p, c, acl, B);
        eig_result e1 = sym_eig(m1);
        const double lmax = e1.values.back();
        if (lmax > -eps) {
          vec vz(n);
          for (int i = 0; i < n; ++i) vz[i] = e1.vectors(i, n);
          const double vu = e1.vectors(n, n);
          vec gcl(n, 0.0);
          for (int i = 0; i < n; ++i) {
            double s = B(i, 0) * vu;
            for (int j = 0; j < n; ++j) s += acl(i, j) * vz[j];
            gcl[i] = s;
          }
          mat gp(n, n);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) gp(i, j) = vz[i] * gcl[j] + gcl[i] * vz[j];
          pack_sym(gp, g.data());
          for (int i = 0; i < n; ++i) g[nt + i] = -2.0 * vu * vz[i];
          st = ball.cut(g, lmax + eps);
        } else {
          const double obj = objective(c);
          if (obj < fbest) {
            fbest = obj;
            pbest = p;
            cbest = c;
            have_best = true;
          }
          double gnorm = 0.0;
          for (int i = 0; i < n; ++i) {
            g[nt + i] = 2.0 * (c(0, i) - K(0, i));
            gnorm += g[nt + i] * g[nt + i];
          }
          if (std::sqrt(gnorm) < 1e-14 * (1.0 + frobenius(K))) break;  // C = K reached
          st = ball.cut(g, obj - fbest);
        }
      }
      if (st != cut_status::ok) break;
    }
  }

  if (!have_best)
    throw budget_error("solve_sector_scalar: no feasible point found within iteration budget");

  // exact gap minimization at the best weight found
  {
    mat cproj;
    if (gap_projection_scalar(pbest, acl, B, K, eps, &cproj)) {
      const double l1 = eig_max(sector_block_scalar(pbest, cproj, acl, B));
      if (l1 <= -eps && objective(cproj) < fbest) {
        fbest = objective(cproj);
        cbest = cproj;
      }
    }
  }

  lmi_solution sol;
  sol.feasible = true;
  sol.P = sym_matrix::from_dense(pbest);
  sol.C = cbest;
  sol.margin = eps;
  sol.objective_value = fbest;
  sol.iterations = used;
  const double dmin = minimal_scaling(sol.P, K, cbest, prob.ell);
  sol.D = vec{dmin};
  sol.residuals = vec{
      eig_max(sector_block_scalar(pbest, cbest, acl, B)),
      eig_min(scaling_block(pbest, K, cbest, sol.D, prob.ell, true)),
      eig_min(pbest),
  };
  return sol;
}

// ===========================================================================
// any-m feasibility in the linearized variables
// ===========================================================================

lmi_solution solve_sector_congruent(const lmi_problem& prob) {
  const mat& A = prob.A;
  const mat& B = prob.B;
  const mat& K = prob.K;
  const int n = A.rows;
  const int m = B.cols;
  if (A.rows != A.cols) throw precondition_error("solve_sector_congruent: A must be square");
  if (B.rows != n) throw precondition_error("solve_sector_congruent: B must have n rows");
  if (K.rows != m || K.cols != n) throw precondition_error("solve_sector_congruent: K must be m x n");
  if (!(prob.ell > 0.0)) throw precondition_error("solve_sector_congruent: ell must be positive");

  const mat acl = A + B * K;
  const double eps = (prob.margin > 0.0) ? prob.margin : default_margin(acl);
  const int nt = n * (n + 1) / 2;
  const int dim = nt + n * m + m;

  mat p0 = lyapunov_identity(acl);
  if (!(eig_min(p0) > 0.0))
    throw precondition_error("closed-loop matrix is not Hurwitz (Lyapunov solution not positive definite)");
  mat s0 = sym_matrix::from_dense(inverse(p0)).dense();
  {
    const double lmin = eig_min(s0);
    const double t = std::max(1.0, 2.0 * eps / lmin);
    s0 = s0 * t;
  }
  mat y0 = s0 * transpose(K);  // block 2 holds exactly at the start

  vec x0(dim, 0.0);
  pack_sym(s0, x0.data());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) x0[nt + i * m + j] = y0(i, j);
  for (int j = 0; j < m; ++j) x0[nt + n * m + j] = 1.0;

  ellipsoid_state ball(x0, 100.0 * (1.0 + norm2(x0)));

  auto block1 = [&](const mat& s, const mat& y, const vec& e_diag) {
    mat blk(n + m, n + m);
    mat tl = s * transpose(acl) + acl * s;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) blk(i, j) = tl(i, j);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) blk(i, n + j) = blk(n + j, i) = B(i, j) * e_diag[j] - y(i, j);
    for (int j = 0; j < m; ++j) blk(n + j, n + j) = -2.0 * e_diag[j];
    return blk;
  };
  auto block2 = [&](const mat& s, const mat& y) {
    mat blk(n + m, n + m);
    mat sk = s * transpose(K);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) blk(i, j) = s(i, j);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) blk(i, n + j) = blk(n + j, i) = sk(i, j) - y(i, j);
    for (int j = 0; j < m; ++j) blk(n + j, n + j) = prob.ell * prob.ell;
    return blk;
  };

  bool found = false;
  mat s_fin, y_fin;
  vec e_fin;
  long used = 0;

  for (long it = 0; it < prob.budget; ++it) {
    used = it + 1;
    mat s = unpack_sym(ball.x.data(), n);
    mat y(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) y(i, j) = ball.x[nt + i * m + j];
    vec e_diag(m);
    for (int j = 0; j < m; ++j) e_diag[j] = ball.x[nt + n * m + j];

    vec g(dim, 0.0);
    cut_status st = cut_status::ok;
    bool violated = false;

    eig_result es = sym_eig(s);
    if (es.values.front() < eps) {
      mat uu(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) uu(i, j) = -es.vectors(i, 0) * es.vectors(j, 0);
      pack_sym(uu, g.data());
      st = ball.cut(g, eps - es.values.front());
      violated = true;
    }
    if (!violated) {
      for (int j = 0; j < m; ++j) {
        if (e_diag[j] < eps) {
          g[nt + n * m + j] = -1.0;
          st = ball.cut(g, eps - e_diag[j]);
          violated = true;
          break;
        }
      }
    }
    if (!violated) {
      eig_result e1 = sym_eig(block1(s, y, e_diag));
      const double lmax = e1.values.back();
      if (lmax > -eps) {
        vec vz(n), vu(m);
        const int top = n + m - 1;
        for (int i = 0; i < n; ++i) vz[i] = e1.vectors(i, top);
        for (int j = 0; j < m; ++j) vu[j] = e1.vectors(n + j, top);
        vec w(n, 0.0);  // Acl^T vz
        for (int i = 0; i < n; ++i)
          for (int r = 0; r < n; ++r) w[i] += acl(r, i) * vz[r];
        mat gs(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) gs(i, j) = vz[i] * w[j] + w[i] * vz[j];
        pack_sym(gs, g.data());
        vec btv(m, 0.0);  // B^T vz
        for (int j = 0; j < m; ++j)
          for (int r = 0; r < n; ++r) btv[j] += B(r, j) * vz[r];
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < m; ++j) g[nt + i * m + j] = -2.0 * vz[i] * vu[j];
        for (int j = 0; j < m; ++j) g[nt + n * m + j] = 2.0 * btv[j] * vu[j] - 2.0 * vu[j] * vu[j];
        st = ball.cut(g, lmax + eps);
        violated = true;
      }
    }
    if (!violated) {
      eig_result e2 = sym_eig(block2(s, y));
      const double lmin = e2.values.front();
      if (lmin < 0.0) {
        vec vz(n), vu(m);
        for (int i = 0; i < n; ++i) vz[i] = e2.vectors(i, 0);
        for (int j = 0; j < m; ++j) vu[j] = e2.vectors(n + j, 0);
        vec u(n, 0.0);  // K^T vu
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < m; ++j) u[i] += K(j, i) * vu[j];
        mat gs(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            gs(i, j) = -(vz[i] * vz[j] + vz[i] * u[j] + u[i] * vz[j]);
        pack_sym(gs, g.data());
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < m; ++j) g[nt + i * m + j] = 2.0 * vz[i] * vu[j];
        st = ball.cut(g, -lmin);
        violated = true;
      }
    }

    if (!violated) {
      found = true;
      s_fin = s;
      y_fin = y;
      e_fin = e_diag;
      break;
    }
    if (st != cut_status::ok) break;
  }

  if (!found)
    throw budget_error("solve_sector_congruent: no feasible point found within iteration budget");

  // opportunistic polish: Y = S K^T gives C = K (the global certificate)
  // whenever the strict block tolerates it
  {
    mat y_try = s_fin * transpose(K);
    if (eig_max(block1(s_fin, y_try, e_fin)) <= -eps) y_fin = y_try;
  }

  // map back and re-verify in the original variables
  mat p = sym_matrix::from_dense(inverse(s_fin)).dense();
  mat c = transpose(lu_solve(s_fin, y_fin));  // (S^{-1} Y)^T, m x n
  vec d_diag(m);
  for (int j = 0; j < m; ++j) d_diag[j] = 1.0 / e_fin[j];

  lmi_solution sol;
  sol.P = sym_matrix::from_dense(p);
  sol.C = c;
  sol.D = d_diag;
  sol.margin = eps;
  sol.S = sym_matrix::from_dense(s_fin);
  sol.Y = y_fin;
  sol.E = e_fin;
  sol.iterations = used;
  {
    double s = 0.0;
    for (int r = 0; r < m; ++r)
      for (int i = 0; i < n; ++i) s += (K(r, i) - c(r, i)) * (K(r, i) - c(r, i));
    sol.objective_value = s;
  }

  verify_report rep = verify_certificate(sol.P, c, d_diag, A, B, K, prob.ell, lmi_form::bilinear_sector);
  if (!rep.pass)
    throw numeric_error("solve_sector_congruent: mapped-back solution failed re-verification:\n" + rep.summary());
  sol.feasible = true;
  sol.residuals.clear();
  for (const auto& blk : rep.blocks) sol.residuals.push_back(blk.lambda);
  return sol;
}

// ===========================================================================
// minimal scaling (the least D making the scaling block PSD)
// ===========================================================================

double minimal_scaling(const sym_matrix& P, const mat& K, const mat& C, double ell) {
  if (!(ell > 0.0)) throw precondition_error("minimal_scaling: ell must be positive");
  const int n = P.n;
  const int m = K.rows;
  if (K.cols != n || C.rows != m || C.cols != n)
    throw precondition_error("minimal_scaling: gain shapes inconsistent with P");

  mat gap = K - C;  // m x n
  if (frobenius(gap) == 0.0) return 0.0;  // global case: the block is PSD for D = 0

  cholesky_result ch = cholesky(P);
  if (!ch.ok) throw precondition_error("minimal_scaling: P is not positive definite");

  // X = L^{-1} (K - C)^T by forward substitution
  mat rhs = transpose(gap);  // n x m
  mat x(n, m);
  for (int col = 0; col < m; ++col) {
    for (int i = 0; i < n; ++i) {
      double s = rhs(i, col);
      for (int k = 0; k < i; ++k) s -= ch.L(i, k) * x(k, col);
      x(i, col) = s / ch.L(i, i);
    }
  }
  if (m == 1) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x(i, 0) * x(i, 0);
    return s / (ell * ell);
  }
  return eig_max(transpose(x) * x) / (ell * ell);
}

double minimal_scaling_bisect(const sym_matrix& P, const mat& K, const mat& C, double ell,
                              double rel_tol) {
  const int m = K.rows;
  auto lam = [&](double d) {
    vec dv(static_cast<size_t>(m), d);
    return eig_min(scaling_block(P.dense(), K, C, dv, ell, true));
  };
  if (lam(0.0) >= 0.0) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (lam(hi) < 0.0) {
    hi *= 2.0;
    if (++guard > 2000) throw numeric_error("minimal_scaling_bisect: no finite bracket");
  }
  double lo = 0.0;
  while (hi - lo > rel_tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (lam(mid) >= 0.0) hi = mid; else lo = mid;
  }
  return hi;
}

// ===========================================================================
// verification
// ===========================================================================

std::string verify_report::summary() const {
  std::string out;
  char line[160];
  for (const auto& b : blocks) {
    std::snprintf(line, sizeof(line), "%-22s %s = %+.6e  [%s]\n", b.name.c_str(),
                  b.strict ? "lambda_max" : "lambda_min", b.lambda, b.pass ? "pass" : "FAIL");
    out += line;
  }
  out += pass ? "certificate verified" : "certificate REJECTED";
  return out;
}

verify_report verify_certificate(const sym_matrix& P, const mat& C, const vec& D,
                                 const mat& A, const mat& B, const mat& K,
                                 double ell, lmi_form form, verify_tols tols) {
  if (form == lmi_form::congruent_sector)
    throw precondition_error("verify_certificate: verify the mapped-back bilinear form instead");

  const int n = P.n;
  const int m = K.rows;
  const mat p = P.dense();
  const mat acl = A + B * K;

  verify_report rep;
  auto add_strict = [&](const std::string& name, double lambda_max_val) {
    block_report b;
    b.name = name;
    b.lambda = lambda_max_val;
    b.strict = true;
    b.pass = lambda_max_val <= -tols.strict;
    rep.blocks.push_back(b);
  };
  auto add_psd = [&](const std::string& name, double lambda_min_val) {
    block_report b;
    b.name = name;
    b.lambda = lambda_min_val;
    b.strict = false;
    b.pass = lambda_min_val >= -tols.psd;
    rep.blocks.push_back(b);
  };

  if (form == lmi_form::scalar_sector || form == lmi_form::dynamic_sector) {
    if (m != 1 || C.rows != 1 || D.size() != 1)
      throw precondition_error("verify_certificate: scalar form requires a single input channel");
    add_strict("sector", eig_max(sector_block_scalar(p, C, acl, B)));
    add_psd("scaling", eig_min(scaling_block(p, K, C, D, ell, true)));
    add_psd("weight", eig_min(p));
  } else {  // bilinear_sector
    if (static_cast<int>(D.size()) != m || C.rows != m)
      throw precondition_error("verify_certificate: D must have one entry per input channel");
    mat m1(n + m, n + m);
    mat tl = transpose(acl) * p + p * acl;
    mat pb = p * B;  // n x m
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m1(i, j) = tl(i, j);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < m; ++r) m1(i, n + r) = m1(n + r, i) = pb(i, r) - D[r] * C(r, i);
    for (int r = 0; r < m; ++r) m1(n + r, n + r) = -2.0 * D[r];
    add_strict("sector", eig_max(m1));
    add_psd("scaling", eig_min(scaling_block(p, K, C, D, ell, false)));
    add_psd("weight", eig_min(p));
  }

  rep.pass = true;
  for (const auto& b : rep.blocks) rep.pass = rep.pass && b.pass;
  return rep;
}

}  // namespace rdsat
