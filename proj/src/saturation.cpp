#include "rdsat/saturation.hpp"

#include <cmath>
#include <cstddef>

#include "rdsat/errors.hpp"

namespace rdsat {

static double clip(double v, double ell) { return v > ell ? ell : (v < -ell ? -ell : v); }

static void require_level(double ell, const char* who) {
  if (!(ell > 0.0)) throw precondition_error(std::string(who) + ": saturation level must be positive");
}

vec sat(const vec& v, double ell) {
  require_level(ell, "sat");
  vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = clip(v[i], ell);
  return out;
}

vec deadzone(const vec& v, double ell) {
  require_level(ell, "deadzone");
  vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = clip(v[i], ell) - v[i];
  return out;
}

vec sat_norm(const vec& v, double ell) {
  require_level(ell, "sat_norm");
  const double n = norm2(v);
  if (n <= ell) return v;
  vec out(v.size());
  const double scale = ell / n;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
  return out;
}

sampled_fn sat_pointwise(const sampled_fn& f, double ell) {
  require_level(ell, "sat_pointwise");
  sampled_fn out = f;
  for (double& v : out.values) v = clip(v, ell);
  return out;
}

sector_result sector_check(const vec& z, const mat& K, const mat& C, const vec& D_diag,
                           double ell) {
  require_level(ell, "sector_check");
  const int m = K.rows, n = K.cols;
  if (C.rows != m || C.cols != n || static_cast<int>(D_diag.size()) != m ||
      static_cast<int>(z.size()) != n)
    throw precondition_error("sector_check: dimension mismatch");
  for (double d : D_diag)
    if (!(d > 0.0)) throw precondition_error("sector_check: D must have positive diagonal");

  sector_result res;
  const vec gap = (K - C) * z;
  for (int j = 0; j < m; ++j)
    if (std::abs(gap[j]) > ell) {
      res.offending_index = j;
      return res;
    }
  res.in_region = true;
  const vec phi = deadzone(K * z, ell);
  const vec cz = C * z;
  double value = 0.0;
  for (int j = 0; j < m; ++j) value += phi[j] * D_diag[j] * (phi[j] + cz[j]);
  res.value = value;
  res.nonpositive = value <= 1e-12;
  return res;
}

sampled_fn delta(const sampled_fn& b, double k, double ell) {
  require_level(ell, "delta");
  const double sk = clip(k, ell);
  sampled_fn out = b;
  for (double& v : out.values) v = v * sk - clip(v * k, ell);
  return out;
}

}  // namespace rdsat
