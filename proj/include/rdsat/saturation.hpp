#pragma once

// Saturation maps, the deadzone nonlinearity, the generalized sector
// condition, and the mismatch bounds used by the pointwise-saturation
// analysis.

#include "rdsat/linalg.hpp"
#include "rdsat/spectral.hpp"

namespace rdsat {

enum class sat_variant { component_wise, norm_wise, point_wise };

struct sat_kind {
  sat_variant variant = sat_variant::component_wise;
  double level = 1.0;  // invariant: > 0
};

// componentwise clipping at +-ell
vec sat(const vec& v, double ell);

// phi(v) = sat(v) - v; zero exactly iff |v|_inf <= ell
vec deadzone(const vec& v, double ell);

// ell * min(1/ell, 1/|v|) * v; preserves direction, caps the euclidean norm
vec sat_norm(const vec& v, double ell);

// nodewise clipping of a sampled field
sampled_fn sat_pointwise(const sampled_fn& f, double ell);

// Generalized sector condition: with phi = deadzone(K z), the form
// phi' D (phi + C z) is nonpositive whenever |(K - C) z|_inf <= ell.
struct sector_result {
  bool in_region = false;    // the |(K - C) z|_inf <= ell hypothesis held
  double value = 0.0;        // phi' D (phi + C z), meaningful when in_region
  bool nonpositive = false;  // value <= 0 within slack, meaningful when in_region
  int offending_index = -1;  // first row violating the hypothesis otherwise
};
sector_result sector_check(const vec& z, const mat& K, const mat& C, const vec& D_diag,
                           double ell);

// Mismatch between scaling a saturated amplitude by b(.) and saturating the
// scaled field: b(.)sat(k) - sat_pointwise(b(.)k). Identically zero when
// |k| <= ell and |b k|_inf <= ell; always |.|_inf <= ell(1 + |b|_inf) and
// |.|_2 <= ell * |1 + |b||_2.
sampled_fn delta(const sampled_fn& b, double k, double ell);

}  // namespace rdsat
