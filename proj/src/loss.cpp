#include "smkl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace smkl {

namespace {

const double kLn2 = std::numbers::ln2;

double log1pexp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void validate_derivatives(const std::string& name, const LossModel::Scalar2& value, const LossModel::Scalar2& d1,
                          const LossModel::Scalar2& d2, double response_bound) {
  Rng rng(0xfdc4ec);
  const double ybound = std::isfinite(response_bound) ? response_bound : 1.0;
  std::uniform_real_distribution<double> ydist(-ybound, ybound);
  std::uniform_real_distribution<double> udist(-3.0, 3.0);
  constexpr double h = 1e-5;
  for (int trial = 0; trial < 200; ++trial) {
    const double y = ydist(rng);
    const double u = udist(rng);
    const double fd1 = (value(y, u + h) - value(y, u - h)) / (2.0 * h);
    const double fd2 = (d1(y, u + h) - d1(y, u - h)) / (2.0 * h);
    if (std::abs(d1(y, u) - fd1) > 1e-6 || std::abs(d2(y, u) - fd2) > 1e-6) {
      std::ostringstream msg;
      msg << "loss '" << name << "' derivatives disagree with finite differences at (y=" << y << ", u=" << u << ")";
      throw InputError(msg.str());
    }
    if (d2(y, u) < 0.0) throw InputError("loss '" + name + "' is not convex in u");
  }
}

}  // namespace

LossModel LossModel::quadratic(double response_bound) {
  require(response_bound > 0.0, "response bound must be positive");
  LossModel l;
  l.kind_ = LossKind::quadratic;
  l.name_ = "quadratic";
  l.response_bound_ = response_bound;
  return l;
}

LossModel LossModel::logit() {
  LossModel l;
  l.kind_ = LossKind::logit;
  l.name_ = "logit";
  l.response_bound_ = 1.0;
  return l;
}

LossModel LossModel::custom(std::string name, Scalar2 value, Scalar2 d1, Scalar2 d2, Radius m, Radius M, Radius L,
                            double response_bound) {
  require(value && d1 && d2 && m && M && L, "custom loss needs value, derivatives and curvature bounds");
  validate_derivatives(name, value, d1, d2, response_bound);
  LossModel l;
  l.kind_ = LossKind::custom;
  l.name_ = std::move(name);
  l.response_bound_ = response_bound;
  l.value_ = std::move(value);
  l.d1_ = std::move(d1);
  l.d2_ = std::move(d2);
  l.m_ = std::move(m);
  l.M_ = std::move(M);
  l.L_ = std::move(L);
  return l;
}

LossModel LossModel::by_name(const std::string& name, double response_bound) {
  if (name == "quadratic") return quadratic(response_bound);
  if (name == "logit") return logit();
  throw InputError("unknown loss '" + name + "'");
}

double LossModel::value(double y, double u) const {
  switch (kind_) {
    case LossKind::quadratic: return (y - u) * (y - u);
    case LossKind::logit: return log1pexp(-y * u) / kLn2;
    case LossKind::custom: return value_(y, u);
  }
  return 0.0;
}

double LossModel::d1(double y, double u) const {
  switch (kind_) {
    case LossKind::quadratic: return -2.0 * (y - u);
    case LossKind::logit: return -y * logistic(-y * u) / kLn2;
    case LossKind::custom: return d1_(y, u);
  }
  return 0.0;
}

double LossModel::d2(double y, double u) const {
  switch (kind_) {
    case LossKind::quadratic: return 2.0;
    case LossKind::logit: {
      const double p = logistic(y * u);
      return y * y * p * (1.0 - p) / kLn2;
    }
    case LossKind::custom: return d2_(y, u);
  }
  return 0.0;
}

double LossModel::m(double R) const {
  switch (kind_) {
    case LossKind::quadratic: return 1.0;
    case LossKind::logit: {
      const double p = logistic(R);
      return p * (1.0 - p) / (2.0 * kLn2);
    }
    case LossKind::custom: return m_(R);
  }
  return 0.0;
}

double LossModel::M(double R) const {
  switch (kind_) {
    case LossKind::quadratic: return 1.0;
    case LossKind::logit: return 1.0 / (8.0 * kLn2);
    case LossKind::custom: return M_(R);
  }
  return 0.0;
}

double LossModel::L(double R) const {
  switch (kind_) {
    case LossKind::quadratic:
      if (!std::isfinite(response_bound_)) throw InputError("quadratic loss constants need a bounded response range");
      return 2.0 * (response_bound_ + R);
    case LossKind::logit: return 1.0 / kLn2;
    case LossKind::custom: return L_(R);
  }
  return 0.0;
}

double LossModel::curvature_bound() const {
  switch (kind_) {
    case LossKind::quadratic: return 2.0;
    case LossKind::logit: return 1.0 / (4.0 * kLn2);
    case LossKind::custom: return 2.0 * M_(10.0);
  }
  return 1.0;
}

LossConstants constants(const LossModel& loss, double R) {
  require(R >= 0.0 && std::isfinite(R), "radius must be finite and non-negative");
  if (loss.kind() == LossKind::quadratic && !std::isfinite(loss.response_bound()))
    throw InputError("quadratic loss constants need a bounded response range");
  return {loss.m(R), loss.M(R), loss.L(R)};
}

double empirical_risk(const LossModel& loss, const Vector& Y, const Vector& F) {
  require(Y.size() == F.size(), "responses and fitted values differ in length");
  require(Y.size() > 0, "empirical risk of an empty sample");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < Y.size(); ++i) sum += loss.value(Y(i), F(i));
  return sum / static_cast<double>(Y.size());
}

double conditional_excess(const LossModel& loss, double u, double t) {
  switch (loss.kind()) {
    case LossKind::quadratic: return (u - t) * (u - t);
    case LossKind::logit: {
      const double p = logistic(t);
      const double at_u = p * loss.value(1.0, u) + (1.0 - p) * loss.value(-1.0, u);
      const double at_t = p * loss.value(1.0, t) + (1.0 - p) * loss.value(-1.0, t);
      return at_u - at_t;
    }
    case LossKind::custom:
      // symmetric-noise model: treat t as the conditional response
      return loss.value(t, u) - loss.value(t, t);
  }
  return 0.0;
}

McValue excess_risk_mc(const LossModel& loss, const Predictor& f, const Predictor& f_star,
                       const DesignSampler& design, int mc_n, std::uint64_t seed) {
  require(mc_n >= 2, "mc_n must be at least 2");
  Rng rng(seed);
  const PointSet X = design(mc_n, rng);
  const Vector u = f(X);
  const Vector t = f_star(X);
  require(u.size() == mc_n && t.size() == mc_n, "predictors returned the wrong number of values");
  Vector e(mc_n);
  for (int i = 0; i < mc_n; ++i) e(i) = conditional_excess(loss, u(i), t(i));
  McValue out;
  out.mean = e.mean();
  out.std_error = std::sqrt((e.array() - out.mean).square().sum() / (mc_n - 1.0) / mc_n);
  return out;
}

}  // namespace smkl
