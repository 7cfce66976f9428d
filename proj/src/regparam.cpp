#include "smkl/regparam.hpp"

#include "smkl/rng.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace smkl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative bump applied to a binding majorant slope so that the returned value
// is feasible after rounding.
constexpr double kFeasibilityBump = 1e-12;

std::vector<double> sorted_prefix(std::span<const double> eigenvalues, int n) {
  std::vector<double> lam(eigenvalues.begin(), eigenvalues.end());
  for (double v : lam) require(std::isfinite(v) && v >= 0.0, "eigenvalues must be finite and non-negative");
  std::sort(lam.begin(), lam.end(), std::greater<>());
  if (static_cast<int>(lam.size()) > n) lam.resize(static_cast<std::size_t>(n));
  return lam;
}

// Minimal eps with gamma <= eps*delta + eps^2 at one point: the positive root of
// eps^2 + delta eps - gamma, written without cancellation.
double majorant_root(double delta, double gamma) {
  if (gamma <= 0.0) return 0.0;
  return 2.0 * gamma / (delta + std::sqrt(delta * delta + 4.0 * gamma));
}

// (delta, gamma(delta)) at every breakpoint sqrt(lambda_k) in (0,1) and at delta = 1.
template <class Visit>
void visit_breakpoints(const std::vector<double>& lam, int n, Visit&& visit) {
  const std::size_t m = lam.size();
  std::vector<double> suffix(m + 1, 0.0);
  for (std::size_t k = m; k-- > 0;) suffix[k] = suffix[k + 1] + lam[k];
  const double inv_n = 1.0 / static_cast<double>(n);
  double at_one = 0.0;
  for (double v : lam) at_one += std::min(v, 1.0);
  visit(1.0, std::sqrt(at_one * inv_n));
  for (std::size_t k = 0; k < m; ++k) {
    const double l = lam[k];
    if (l <= 0.0 || l >= 1.0) continue;
    // sum_j min(lambda_j, lambda_k) = (k+1) lambda_k + sum_{j>k} lambda_j for a descending list
    const double g2 = (static_cast<double>(k + 1) * l + suffix[k + 1]) * inv_n;
    visit(std::sqrt(l), std::sqrt(g2));
  }
}

template <class F>
double bracket_root(F&& f, double lo, double hi, double flo, double fhi) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("root is not bracketed");
  boost::uintmax_t iterations = 300;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                   boost::math::tools::eps_tolerance<double>(50), iterations);
  return 0.5 * (r.first + r.second);
}

}  // namespace

double regularization_floor(double A, int N, int n) {
  require(A >= 1.0, "A must be at least 1");
  require(N >= 1, "N must be positive");
  require(n >= 1, "n must be positive");
  return std::sqrt(A * std::log(static_cast<double>(N)) / static_cast<double>(n));
}

double gamma_hat(std::span<const double> eigenvalues, int n, double delta) {
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(n >= 1, "n must be positive");
  const double d2 = delta * delta;
  const std::size_t m = std::min(eigenvalues.size(), static_cast<std::size_t>(n));
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) sum += std::min(std::max(eigenvalues[k], 0.0), d2);
  return std::sqrt(sum / static_cast<double>(n));
}

double gamma_hat(const GramSpectrum& s, double delta) {
  return gamma_hat(std::span<const double>(s.eigenvalues.data(), static_cast<std::size_t>(s.eigenvalues.size())),
                   s.n, delta);
}

bool majorant_feasible(std::span<const double> eigenvalues, int n, double eps) {
  require(n >= 1, "n must be positive");
  const auto lam = sorted_prefix(eigenvalues, n);
  bool ok = true;
  visit_breakpoints(lam, n, [&](double delta, double gamma) {
    if (gamma > eps * delta + eps * eps) ok = false;
  });
  return ok;
}

double eps_from_majorant(std::span<const double> eigenvalues, int n, double floor) {
  require(floor > 0.0 && std::isfinite(floor), "floor must be positive");
  require(n >= 1, "n must be positive");
  const auto lam = sorted_prefix(eigenvalues, n);
  double slope = 0.0;
  visit_breakpoints(lam, n, [&](double delta, double gamma) { slope = std::max(slope, majorant_root(delta, gamma)); });
  if (slope <= floor) return floor;
  return slope * (1.0 + kFeasibilityBump);
}

RegParams eps_hat_all(std::span<const GramSpectrum> spectra, double A, int N) {
  require(!spectra.empty(), "eps_hat_all needs at least one spectrum");
  require(N >= 2, "N must be at least 2 (pass an explicit override for smaller dictionaries)");
  RegParams reg;
  reg.A = A;
  reg.N = N;
  reg.n = spectra.front().n;
  for (const auto& s : spectra)
    if (s.n != reg.n) throw InputError("spectra were computed at different sample sizes");
  reg.floor = regularization_floor(A, N, reg.n);
  for (const auto& s : spectra) {
    const std::span<const double> eig(s.eigenvalues.data(), static_cast<std::size_t>(s.eigenvalues.size()));
    reg.eps_hat.push_back(eps_from_majorant(eig, s.n, reg.floor));
    int positive = 0;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(s.eigenvalues.size(), s.n); ++k)
      if (s.eigenvalues(k) > 0.0) ++positive;
    reg.n_eigs_used.push_back(positive);
  }
  return reg;
}

std::vector<double> eps_breve_all(const std::vector<std::vector<double>>& population, double A, int N, int n) {
  require(!population.empty(), "eps_breve_all needs at least one spectrum");
  require(N >= 2, "N must be at least 2 (pass an explicit override for smaller dictionaries)");
  const double floor = regularization_floor(A, N, n);
  std::vector<double> out;
  out.reserve(population.size());
  for (const auto& lam : population) out.push_back(eps_from_majorant(lam, n, floor));
  return out;
}

double rademacher_sup(const Vector& a, const Vector& s, double delta) {
  require(a.size() == s.size(), "coefficient and scale vectors differ in length");
  require(delta > 0.0, "delta must be positive");
  require(s.size() == 0 || s.minCoeff() >= 0.0, "scales must be non-negative");
  const double norm_a = a.norm();
  if (norm_a == 0.0) return 0.0;

  // Ellipsoid constraint inactive: v = a/|a|.
  if (s.cwiseProduct(a).norm() <= delta * norm_a) return norm_a;

  bool mass_on_null = false;
  double null_norm2 = 0.0;
  double inv_s_norm2 = 0.0;  // |S^{-1} a|^2 over s > 0
  double inv_s2_norm2 = 0.0;  // |S^{-2} a|^2 over s > 0
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (a(k) == 0.0) continue;
    if (s(k) == 0.0) {
      mass_on_null = true;
      null_norm2 += a(k) * a(k);
      continue;
    }
    const double r = a(k) / s(k);
    inv_s_norm2 += r * r;
    inv_s2_norm2 += (r / s(k)) * (r / s(k));
  }
  // Ball constraint inactive: v proportional to S^{-2} a on the ellipsoid boundary.
  if (!mass_on_null && delta * std::sqrt(inv_s2_norm2) <= std::sqrt(inv_s_norm2))
    return delta * std::sqrt(inv_s_norm2);

  // Both constraints active: v_k = a_k / (2 (mu + nu s_k^2)).
  auto ball_excess = [&](double mu, double nu) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (a(k) == 0.0) continue;
      const double den = mu + nu * s(k) * s(k);
      if (den <= 0.0) return kInf;
      const double v = a(k) / (2.0 * den);
      sum += v * v;
    }
    return sum - 1.0;
  };
  auto mu_of_nu = [&](double nu) {
    if (nu == 0.0) return 0.5 * norm_a;
    // flat directions keep mu away from zero
    const double lo = 0.5 * std::sqrt(null_norm2);
    const double f0 = ball_excess(lo, nu);
    if (f0 <= 0.0) return lo;
    const double hi = 0.5 * norm_a;
    auto f = [&](double mu) { return ball_excess(mu, nu); };
    return bracket_root(f, lo, hi, f0, f(hi));
  };
  auto ellipsoid_slack = [&](double nu) {
    const double mu = mu_of_nu(nu);
    double sum = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (a(k) == 0.0 || s(k) == 0.0) continue;
      const double v = a(k) / (2.0 * (mu + nu * s(k) * s(k)));
      sum += s(k) * s(k) * v * v;
    }
    return delta * delta - sum;
  };
  const double nu_hi = std::sqrt(inv_s_norm2) / (2.0 * delta);
  const double nu = bracket_root(ellipsoid_slack, 0.0, nu_hi, ellipsoid_slack(0.0), ellipsoid_slack(nu_hi));
  const double mu = mu_of_nu(nu);

  Vector v(a.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double den = mu + nu * s(k) * s(k);
    v(k) = (a(k) == 0.0 || den <= 0.0) ? 0.0 : a(k) / (2.0 * den);
  }
  // Rescale into the feasible set so the reported value is attained.
  const double excess = std::max({1.0, v.norm(), s.cwiseProduct(v).norm() / delta});
  return a.dot(v) / excess;
}

Vector rademacher_coefficients(const GramSpectrum& s, const Vector& signs) {
  require(signs.size() == s.n, "sign vector length must equal n");
  const Vector proj = s.eigenvectors.transpose() * signs;
  const Vector root = s.eigenvalues.head(proj.size()).cwiseSqrt();
  return root.cwiseProduct(proj) / std::sqrt(static_cast<double>(s.n));
}

namespace {

Vector rademacher_signs(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  Vector signs(n);
  for (int i = 0; i < n; ++i) signs(i) = coin(rng) ? 1.0 : -1.0;
  return signs;
}

McValue summarize(const std::vector<double>& draws) {
  McValue out;
  const double m = static_cast<double>(draws.size());
  for (double d : draws) out.mean += d;
  out.mean /= m;
  if (draws.size() > 1) {
    double ss = 0.0;
    for (double d : draws) ss += (d - out.mean) * (d - out.mean);
    out.std_error = std::sqrt(ss / (m - 1.0) / m);
  }
  return out;
}

}  // namespace

McValue localized_rademacher_mc(const GramSpectrum& s, double delta, int reps, std::uint64_t seed) {
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(reps >= 1, "reps must be positive");
  const Vector scales = s.eigenvalues.head(s.eigenvectors.cols()).cwiseSqrt();
  std::vector<double> draws;
  draws.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const Vector a = rademacher_coefficients(s, rademacher_signs(s.n, derive_seed(seed, static_cast<std::uint64_t>(r))));
    draws.push_back(rademacher_sup(a, scales, delta));
  }
  return summarize(draws);
}

McValue localized_rademacher_mc(const GramMatrix& g, double delta, int reps, std::uint64_t seed) {
  return localized_rademacher_mc(spectrum(g), delta, reps, seed);
}

ComplexityEstimate complexity_curve_mc(const GramSpectrum& s, std::span<const double> delta_grid, int reps,
                                       std::uint64_t seed) {
  require(reps >= 1, "reps must be positive");
  require(!delta_grid.empty(), "delta grid must be non-empty");
  for (double d : delta_grid) require(d > 0.0 && d <= 1.0, "delta grid values must lie in (0, 1]");
  const Vector scales = s.eigenvalues.head(s.eigenvectors.cols()).cwiseSqrt();
  std::vector<std::vector<double>> draws(delta_grid.size());
  for (int r = 0; r < reps; ++r) {
    const Vector a = rademacher_coefficients(s, rademacher_signs(s.n, derive_seed(seed, static_cast<std::uint64_t>(r))));
    for (std::size_t i = 0; i < delta_grid.size(); ++i) draws[i].push_back(rademacher_sup(a, scales, delta_grid[i]));
  }
  ComplexityEstimate est;
  est.delta_grid.assign(delta_grid.begin(), delta_grid.end());
  est.reps = reps;
  for (const auto& d : draws) {
    const McValue v = summarize(d);
    est.values.push_back(v.mean);
    est.std_errors.push_back(v.std_error);
  }
  return est;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  require(lo > 0.0 && hi >= lo && count >= 1, "invalid log grid");
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = hi;
    return grid;
  }
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  grid.back() = hi;
  return grid;
}

std::vector<double> eps_tilde_grid() { return log_grid(1e-4, 1.0, 64); }

double eps_from_curve(std::span<const double> delta_grid, std::span<const double> values, double floor) {
  require(delta_grid.size() == values.size(), "grid and values differ in length");
  double slope = floor;
  for (std::size_t i = 0; i < values.size(); ++i) slope = std::max(slope, majorant_root(delta_grid[i], values[i]));
  return slope;
}

double eps_tilde_mc(const GramSpectrum& s, double A, int N, int reps, std::uint64_t seed) {
  const double floor = regularization_floor(A, N, s.n);
  const auto grid = eps_tilde_grid();
  const auto curve = complexity_curve_mc(s, grid, reps, seed);
  return eps_from_curve(grid, curve.values, floor);
}

double eps_tilde_mc(const GramMatrix& g, double A, int N, int reps, std::uint64_t seed) {
  return eps_tilde_mc(spectrum(g), A, N, reps, seed);
}

double eps_check(const GramSpectrum& s, double A, int N, std::uint64_t seed) { return eps_tilde_mc(s, A, N, 1, seed); }

double SandwichReport::min_ratio() const {
  return ratio.empty() ? 0.0 : *std::min_element(ratio.begin(), ratio.end());
}

double SandwichReport::max_ratio() const {
  return ratio.empty() ? 0.0 : *std::max_element(ratio.begin(), ratio.end());
}

SandwichReport gamma_bounds_check(const GramSpectrum& s, const ComplexityEstimate& mc, double c1, double c2) {
  require(mc.delta_grid.size() == mc.values.size(), "complexity estimate grid and values differ in length");
  SandwichReport report;
  report.c1 = c1;
  report.c2 = c2;
  report.n = s.n;
  report.delta_grid = mc.delta_grid;
  const double inv_n = 1.0 / static_cast<double>(s.n);
  for (std::size_t i = 0; i < mc.delta_grid.size(); ++i) {
    const double g = gamma_hat(s, mc.delta_grid[i]);
    const double v = mc.values[i];
    report.gamma.push_back(g);
    report.mc.push_back(v);
    double r = 1.0;
    if (g > 0.0) r = v / g;
    else if (v > 0.0) r = kInf;
    report.ratio.push_back(r);
    const bool ok = (c1 * g - inv_n <= v) && (v <= c2 * g);
    report.ok.push_back(ok);
    report.pass = report.pass && ok;
  }
  return report;
}

void write_sandwich_csv(std::ostream& out, const SandwichReport& report, const std::string& label) {
  out << "label,delta,gamma_hat,mc,ratio,ok\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.delta_grid.size(); ++i)
    out << label << ',' << report.delta_grid[i] << ',' << report.gamma[i] << ',' << report.mc[i] << ','
        << report.ratio[i] << ',' << (report.ok[i] ? 1 : 0) << '\n';
}

}  // namespace smkl
