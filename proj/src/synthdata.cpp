#include "smkl/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace smkl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// stream ids for the independent parts of an instance
enum Stream : std::uint64_t { active = 1, coefficients = 2, design = 3, noise = 4 };

}  // namespace

std::string to_string(DesignKind kind) {
  return kind == DesignKind::uniform_box ? "uniform_box" : "dependent_rotation";
}

DesignKind design_kind_from_string(const std::string& name) {
  if (name == "uniform_box") return DesignKind::uniform_box;
  if (name == "dependent_rotation") return DesignKind::dependent_rotation;
  throw InputError("unknown design '" + name + "'");
}

void SyntheticSpec::validate() const {
  require(N >= 1, "N must be positive");
  require(d >= 0 && d <= N, "d must lie in [0, N]");
  require(alpha > 0.5, "alpha must exceed 1/2");
  require(n >= 1, "n must be positive");
  require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
  require(fourier_modes >= 1, "fourier_modes must be positive");
  if (latent_dim) require(*latent_dim >= 1, "latent_dim must be positive");
}

int SyntheticSpec::latent_dimension() const { return latent_dim.value_or((N + 1) / 2); }

double Component::operator()(double t) const {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < coefficients.size(); ++k)
    sum += coefficients(k) * std::cos(kTwoPi * static_cast<double>(k + 1) * t);
  return std::numbers::sqrt2 * sum;
}

double Component::sobolev_norm2(double alpha) const {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < coefficients.size(); ++k)
    sum += coefficients(k) * coefficients(k) * std::pow(kTwoPi * static_cast<double>(k + 1), 2.0 * alpha);
  return sum;
}

Vector Truth::component(int j, const PointSet& X) const {
  Vector out = Vector::Zero(X.rows());
  for (const auto& c : components) {
    if (c.coordinate != j) continue;
    require(c.coordinate < X.cols(), "points have too few coordinates for the truth");
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = c(X(i, c.coordinate));
  }
  return out;
}

Vector Truth::operator()(const PointSet& X) const {
  Vector out = Vector::Zero(X.rows());
  for (const auto& c : components) out += component(c.coordinate, X);
  return out;
}

PointSet sample_design(const SyntheticSpec& spec, int m, Rng& rng) {
  require(m >= 0, "sample size must be non-negative");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointSet X(m, spec.N);
  if (spec.design == DesignKind::uniform_box) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < spec.N; ++j) X(i, j) = unif(rng);
    return X;
  }
  const int q = spec.latent_dimension();
  const double c2 = std::cos(spec.angle) * std::cos(spec.angle);
  const double s2 = 1.0 - c2;
  Vector u(q);
  for (int i = 0; i < m; ++i) {
    for (int a = 0; a < q; ++a) u(a) = unif(rng);
    for (int j = 0; j < spec.N; ++j) X(i, j) = c2 * u(j % q) + s2 * u((j + 1) % q);
  }
  return X;
}

Dataset gen_instance(const SyntheticSpec& spec) {
  spec.validate();
  Truth truth;
  truth.alpha = spec.alpha;
  truth.logit = spec.logit;

  Rng pick(derive_seed(spec.seed, Stream::active));
  std::vector<int> coords(static_cast<std::size_t>(spec.N));
  std::iota(coords.begin(), coords.end(), 0);
  std::shuffle(coords.begin(), coords.end(), pick);
  truth.active_set.assign(coords.begin(), coords.begin() + spec.d);
  std::sort(truth.active_set.begin(), truth.active_set.end());

  Rng coef_rng(derive_seed(spec.seed, Stream::coefficients));
  std::bernoulli_distribution coin(0.5);
  for (int j : truth.active_set) {
    Component c;
    c.coordinate = j;
    c.coefficients.resize(spec.fourier_modes);
    for (int k = 1; k <= spec.fourier_modes; ++k)
      c.coefficients(k - 1) = (coin(coef_rng) ? 1.0 : -1.0) * std::pow(static_cast<double>(k), -spec.alpha - 0.51);
    c.coefficients /= std::sqrt(c.sobolev_norm2(spec.alpha));
    truth.components.push_back(std::move(c));
  }

  Dataset data;
  Rng design_rng(derive_seed(spec.seed, Stream::design));
  data.X = sample_design(spec, spec.n, design_rng);
  const Vector f = truth(data.X);
  data.Y.resize(spec.n);
  Rng noise_rng(derive_seed(spec.seed, Stream::noise));
  if (spec.logit) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < spec.n; ++i) data.Y(i) = unif(noise_rng) < logistic(f(i)) ? 1.0 : -1.0;
  } else {
    std::normal_distribution<double> normal;
    for (int i = 0; i < spec.n; ++i) data.Y(i) = f(i) + spec.noise_sigma * normal(noise_rng);
  }
  data.truth = std::move(truth);
  return data;
}

std::vector<double> population_spectrum(double alpha, int modes, DesignKind design) {
  require(alpha > 0.5, "alpha must exceed 1/2");
  require(modes >= 0, "modes must be non-negative");
  if (design != DesignKind::uniform_box)
    throw InputError("population spectrum is only available in closed form for the uniform design");
  std::vector<double> eig;
  double total = 0.0;
  for (int m = -modes; m <= modes; ++m) {
    const double c = std::pow(static_cast<double>(m) * m + 1.0, -alpha);
    eig.push_back(c);
    total += c;
  }
  for (double& e : eig) e /= total;
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

}  // namespace smkl
