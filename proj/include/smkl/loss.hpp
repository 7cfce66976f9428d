#pragma once

#include "smkl/common.hpp"
#include "smkl/rng.hpp"
#include "smkl/regparam.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>

namespace smkl {

enum class LossKind { quadratic, logit, custom };

/// A convex, twice differentiable loss l(y, u) with curvature bounds on |u| <= R.
///
/// quadratic: (y - u)^2, responses bounded by `response_bound`.
/// logit: log2(1 + exp(-y u)) with y in {-1, +1}.
class LossModel {
 public:
  using Scalar2 = std::function<double(double, double)>;
  using Radius = std::function<double(double)>;

  static LossModel quadratic(double response_bound = std::numeric_limits<double>::infinity());
  static LossModel logit();
  /// Registers a user loss. d1 and d2 are validated against central differences
  /// of value and d1 on random (y, u) drawn from [-response_bound, response_bound] x [-3, 3].
  static LossModel custom(std::string name, Scalar2 value, Scalar2 d1, Scalar2 d2, Radius m, Radius M,
                          Radius L, double response_bound = 1.0);

  static LossModel by_name(const std::string& name, double response_bound = std::numeric_limits<double>::infinity());

  LossKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double response_bound() const { return response_bound_; }

  double value(double y, double u) const;
  double d1(double y, double u) const;
  double d2(double y, double u) const;

  /// Half the infimum / supremum of d2 over admissible y and |u| <= R.
  double m(double R) const;
  double M(double R) const;
  /// Bound on |d1| over admissible y and |u| <= R.
  double L(double R) const;
  /// Global bound on d2, used to seed the solver's step size.
  double curvature_bound() const;

 private:
  LossModel() = default;
  LossKind kind_ = LossKind::quadratic;
  std::string name_;
  double response_bound_ = std::numeric_limits<double>::infinity();
  Scalar2 value_, d1_, d2_;
  Radius m_, M_, L_;
};

struct LossConstants {
  double m_star = 0.0;
  double M_star = 0.0;
  double L_star = 0.0;
};

LossConstants constants(const LossModel& loss, double R);

/// Mean of l(Y_i, F_i).
double empirical_risk(const LossModel& loss, const Vector& Y, const Vector& F);

using Predictor = std::function<Vector(const PointSet&)>;
using DesignSampler = std::function<PointSet(int, Rng&)>;

/// Excess risk P(l o f) - P(l o f*) on mc_n fresh design points.
///
/// The conditional law of Y is integrated analytically: E[Y|x] = f*(x) for the
/// quadratic loss (the excess risk is then |f - f*|^2) and P(Y = 1|x) = sigma(f*(x))
/// for the logit loss.
McValue excess_risk_mc(const LossModel& loss, const Predictor& f, const Predictor& f_star,
                       const DesignSampler& design, int mc_n, std::uint64_t seed);

/// Pointwise conditional excess risk at prediction u when the target is t.
double conditional_excess(const LossModel& loss, double u, double t);

inline double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace smkl
