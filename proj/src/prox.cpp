#include "smkl/prox.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace smkl {

namespace {

constexpr int kMaxNewton = 200;

template <class F>
double solve_bracketed(F&& f, double lo, double hi) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("prox: root is not bracketed");
  boost::uintmax_t iterations = 400;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                   boost::math::tools::eps_tolerance<double>(52), iterations);
  return 0.5 * (r.first + r.second);
}

Vector block_soft_threshold(const Vector& z, double beta) {
  const double norm = z.norm();
  if (norm <= beta) return Vector::Zero(z.size());
  return (1.0 - beta / norm) * z;
}

// Convex surrogate H(t, u) = 1/2 sum z_k^2 a_k/(1+a_k) + (beta^2 t + alpha^2 u)/2 with
// a_k = 1/t + s_k^2/u; its minimiser gives t = |v|/beta and u = |diag(s)v|/alpha.
struct Surrogate {
  const Vector& z;
  const Vector& s;
  double alpha;
  double beta;

  struct Derivatives {
    double value, gt, gu, htt, huu, htu;
  };

  double weight(Eigen::Index k, double t, double u) const {
    const double s2 = s(k) * s(k);
    return t * u / (t * u + u + s2 * t);
  }

  double value(double t, double u) const {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) sum += z(k) * z(k) * (1.0 - weight(k, t, u));
    return 0.5 * sum + 0.5 * (beta * beta * t + alpha * alpha * u);
  }

  Derivatives derivatives(double t, double u) const {
    double S1 = 0, S2 = 0, S3 = 0, S2s = 0, S3s = 0, S3ss = 0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const double w = weight(k, t, u);
      const double z2 = z(k) * z(k);
      const double s2 = s(k) * s(k);
      const double w2 = w * w;
      const double w3 = w2 * w;
      S1 += z2 * (1.0 - w);
      S2 += z2 * w2;
      S3 += z2 * w3;
      S2s += s2 * z2 * w2;
      S3s += s2 * z2 * w3;
      S3ss += s2 * s2 * z2 * w3;
    }
    Derivatives d;
    d.value = 0.5 * S1 + 0.5 * (beta * beta * t + alpha * alpha * u);
    d.gt = -S2 / (2.0 * t * t) + 0.5 * beta * beta;
    d.gu = -S2s / (2.0 * u * u) + 0.5 * alpha * alpha;
    d.htt = S2 / (t * t * t) - S3 / (t * t * t * t);
    d.huu = S2s / (u * u * u) - S3ss / (u * u * u * u);
    d.htu = -S3s / (t * t * u * u);
    return d;
  }

  Vector primal(double t, double u) const {
    Vector v(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) v(k) = z(k) * weight(k, t, u);
    return v;
  }
};

bool newton_solve(const Surrogate& H, double& t, double& u) {
  for (int it = 0; it < kMaxNewton; ++it) {
    const auto d = H.derivatives(t, u);
    const double det = d.htt * d.huu - d.htu * d.htu;
    double dt, du;
    if (det > 0.0 && d.htt > 0.0) {
      dt = -(d.huu * d.gt - d.htu * d.gu) / det;
      du = -(d.htt * d.gu - d.htu * d.gt) / det;
    } else {
      dt = -d.gt * t * t;
      du = -d.gu * u * u;
    }
    const double slope = d.gt * dt + d.gu * du;
    if (!(slope < 0.0)) return true;
    // stay strictly inside t, u > 0
    double step = 1.0;
    if (t + step * dt <= 0.0) step = std::min(step, 0.5 * t / -dt);
    if (u + step * du <= 0.0) step = std::min(step, 0.5 * u / -du);
    for (int halvings = 0; halvings < 60; ++halvings) {
      const double cand = H.value(t + step * dt, u + step * du);
      if (cand <= d.value + 1e-4 * step * slope + 1e-15 * std::abs(d.value)) break;
      step *= 0.5;
    }
    t += step * dt;
    u += step * du;
    if (step == 1.0 && std::abs(dt) <= 1e-11 * t && std::abs(du) <= 1e-11 * u) return true;
  }
  return false;
}

void nested_solve(const Surrogate& H, double& t, double& u, double t_hi, double u_hi) {
  auto u_of_t = [&](double tt) {
    auto gu = [&](double uu) { return H.derivatives(tt, uu).gu; };
    double lo = u_hi * 1e-12;
    while (gu(lo) >= 0.0 && lo > 1e-300) lo *= 1e-6;
    return solve_bracketed(gu, lo, u_hi);
  };
  auto gt = [&](double tt) { return H.derivatives(tt, u_of_t(tt)).gt; };
  double lo = t_hi * 1e-12;
  while (gt(lo) >= 0.0 && lo > 1e-300) lo *= 1e-6;
  t = solve_bracketed(gt, lo, t_hi);
  u = u_of_t(t);
}

}  // namespace

Vector ellipsoid_projection(const Vector& z, const Vector& semi_axes) {
  require(z.size() == semi_axes.size(), "ellipsoid projection: dimension mismatch");
  Vector y = Vector::Zero(z.size());
  double inside = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (semi_axes(k) > 0.0) {
      const double r = z(k) / semi_axes(k);
      inside += r * r;
    }
  }
  if (inside <= 1.0) {
    for (Eigen::Index k = 0; k < z.size(); ++k) y(k) = semi_axes(k) > 0.0 ? z(k) : 0.0;
    return y;
  }
  // y_k = a_k^2 z_k / (a_k^2 + mu) with sum a_k^2 z_k^2 / (a_k^2 + mu)^2 = 1
  auto secular = [&](double mu) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const double a2 = semi_axes(k) * semi_axes(k);
      if (a2 == 0.0) continue;
      const double q = semi_axes(k) * z(k) / (a2 + mu);
      sum += q * q;
    }
    return sum - 1.0;
  };
  const double hi = semi_axes.maxCoeff() * z.norm();
  const double mu = solve_bracketed(secular, 0.0, hi);
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double a2 = semi_axes(k) * semi_axes(k);
    y(k) = a2 == 0.0 ? 0.0 : a2 * z(k) / (a2 + mu);
  }
  return y;
}

double ellipsoid_distance(const Vector& z, const Vector& semi_axes) {
  return (z - ellipsoid_projection(z, semi_axes)).norm();
}

Vector block_prox(const Vector& z, double alpha, double beta, const Vector& s) {
  require(z.size() == s.size(), "block_prox: z and s differ in length");
  require(alpha >= 0.0 && beta >= 0.0, "block_prox: penalties must be non-negative");
  require(s.size() == 0 || s.minCoeff() >= 0.0, "block_prox: scales must be non-negative");
  const Eigen::Index dim = z.size();
  if (dim == 0 || z.squaredNorm() == 0.0) return Vector::Zero(dim);
  if (alpha == 0.0 || s.maxCoeff() == 0.0) return block_soft_threshold(z, beta);

  const Vector axes = alpha * s;
  const Vector proj = ellipsoid_projection(z, axes);
  if ((z - proj).norm() <= beta) return Vector::Zero(dim);
  if (beta == 0.0) return z - proj;  // Moreau decomposition of alpha |diag(s) . |

  // Sv = 0 with v supported where s vanishes.
  double outside = 0.0;
  double null_norm2 = 0.0;
  bool has_null = false;
  for (Eigen::Index k = 0; k < dim; ++k) {
    if (s(k) > 0.0) {
      const double r = z(k) / axes(k);
      outside += r * r;
    } else {
      has_null = true;
      null_norm2 += z(k) * z(k);
    }
  }
  if (has_null && outside <= 1.0) {
    Vector v = Vector::Zero(dim);
    const double scale = 1.0 - beta / std::sqrt(null_norm2);
    for (Eigen::Index k = 0; k < dim; ++k)
      if (s(k) == 0.0) v(k) = scale * z(k);
    return v;
  }

  const Surrogate H{z, s, alpha, beta};
  const double t_hi = z.norm() / beta;
  const double u_hi = s.cwiseProduct(z).norm() / alpha;
  double t = 0.5 * t_hi;
  double u = 0.5 * u_hi;
  newton_solve(H, t, u);
  Vector v = H.primal(t, u);
  const double tol = 1e-9 * (1.0 + z.norm());
  if (!(prox_residual(v, z, alpha, beta, s) <= tol)) {
    nested_solve(H, t, u, t_hi, u_hi);
    v = H.primal(t, u);
    const double res = prox_residual(v, z, alpha, beta, s);
    if (!(res <= tol))
      throw NumericalError("block_prox: subgradient residual " + std::to_string(res) + " above tolerance");
  }
  return v;
}

double prox_objective(const Vector& v, const Vector& z, double alpha, double beta, const Vector& s) {
  return 0.5 * (v - z).squaredNorm() + alpha * s.cwiseProduct(v).norm() + beta * v.norm();
}

double prox_residual(const Vector& v, const Vector& z, double alpha, double beta, const Vector& s) {
  require(v.size() == z.size() && z.size() == s.size(), "prox_residual: dimension mismatch");
  const double r = v.norm();
  if (r == 0.0) return std::max(0.0, ellipsoid_distance(z, alpha * s) - beta);
  const Vector sv = s.cwiseProduct(v);
  const double rho = sv.norm();
  Vector g = v - z + (beta / r) * v;
  if (rho == 0.0) return ellipsoid_distance(-g, alpha * s);
  g += (alpha / rho) * s.cwiseProduct(sv);
  return g.norm();
}

}  // namespace smkl
