#pragma once

#include "smkl/common.hpp"

namespace smkl {

/// Euclidean projection of z onto the axis-aligned ellipsoid {diag(a) w : |w| <= 1}.
/// Semi-axes may be zero; the ellipsoid is then flat along those coordinates.
Vector ellipsoid_projection(const Vector& z, const Vector& semi_axes);

/// Distance from z to {diag(a) w : |w| <= 1}.
double ellipsoid_distance(const Vector& z, const Vector& semi_axes);

/// Proximal map of v -> alpha |diag(s) v| + beta |v|:
///   argmin_v 1/2 |v - z|^2 + alpha |diag(s) v| + beta |v|.
///
/// v = 0 exactly when dist(z, alpha E_s) <= beta. Otherwise the solution has the
/// form v_k = z_k / (1 + alpha s_k^2 / rho + beta / r) with rho = |diag(s) v| and
/// r = |v|; the pair is found by damped Newton on a convex two-variable
/// reformulation, with nested bracketed 1-D solves as the fallback.
Vector block_prox(const Vector& z, double alpha, double beta, const Vector& s);

/// 1/2 |v - z|^2 + alpha |diag(s) v| + beta |v|.
double prox_objective(const Vector& v, const Vector& z, double alpha, double beta, const Vector& s);

/// Norm of the smallest element of v - z + alpha d|diag(s)v| + beta d|v|
/// (the subdifferentials are single-valued when v != 0 and diag(s) v != 0).
double prox_residual(const Vector& v, const Vector& z, double alpha, double beta, const Vector& s);

}  // namespace smkl
