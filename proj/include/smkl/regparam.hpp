#pragma once

#include "smkl/common.hpp"
#include "smkl/kernels.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace smkl {

/// Data-driven regularisation parameters of the doubly penalised estimator.
struct RegParams {
  double A = 4.0;
  int N = 2;  // dictionary size (or the override N-bar used inside the logarithm)
  int n = 0;
  double floor = 0.0;  // sqrt(A log N / n)
  std::vector<double> eps_hat;
  std::optional<std::vector<double>> eps_breve;
  std::vector<int> n_eigs_used;  // strictly positive eigenvalues per kernel
  double tau = 1.0;
};

/// sqrt(A log N / n).
double regularization_floor(double A, int N, int n);

/// Localised complexity sqrt((1/n) sum_k min(lambda_k, delta^2)) for delta in (0,1].
/// Only the first n eigenvalues enter the sum.
double gamma_hat(std::span<const double> eigenvalues, int n, double delta);
double gamma_hat(const GramSpectrum& s, double delta);

/// True when gamma(delta) <= eps delta + eps^2 for every delta in (0,1].
///
/// gamma^2 is piecewise affine in delta^2 between the breakpoints sqrt(lambda_k);
/// on each piece gamma(delta) = sqrt((m delta^2 + S)/n) is convex in delta, so
/// gamma(delta) - eps delta attains its supremum at a breakpoint or at delta = 1.
bool majorant_feasible(std::span<const double> eigenvalues, int n, double eps);

/// Smallest eps >= floor with gamma(delta) <= eps delta + eps^2 on (0,1].
double eps_from_majorant(std::span<const double> eigenvalues, int n, double floor);

/// eps-hat for every kernel from its empirical spectrum. `N` enters only through
/// the floor; pass 2 together with A = 1 to make the floor negligible.
RegParams eps_hat_all(std::span<const GramSpectrum> spectra, double A, int N);

/// Same construction from known population eigenvalues (one list per kernel).
std::vector<double> eps_breve_all(const std::vector<std::vector<double>>& population, double A, int N,
                                  int n);

struct McValue {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Exact value of sup { a.v : |v| <= 1, |diag(s) v| <= delta }.
///
/// Solved through the dual min_{mu,nu >= 0} 1/4 sum a_k^2/(mu + nu s_k^2) + mu + nu delta^2:
/// for fixed nu the optimal mu is a monotone root, and the outer derivative in nu
/// is monotone as well, so both are bracketed 1-D solves.
double rademacher_sup(const Vector& a, const Vector& s, double delta);

/// Rademacher coefficients a = (1/n) diag(sqrt(n lambda)) U^T eps in the eigenbasis.
Vector rademacher_coefficients(const GramSpectrum& s, const Vector& signs);

/// Monte-Carlo estimate of E_eps sup{ |R_n h| : |h|_H <= 1, |h|_{L2(Pi_n)} <= delta }.
McValue localized_rademacher_mc(const GramSpectrum& s, double delta, int reps, std::uint64_t seed);
McValue localized_rademacher_mc(const GramMatrix& g, double delta, int reps, std::uint64_t seed);

/// Monte-Carlo complexity curve over a delta grid (common sign vectors across the grid).
struct ComplexityEstimate {
  std::vector<double> delta_grid;
  std::vector<double> values;
  std::vector<double> std_errors;
  int reps = 0;
};

ComplexityEstimate complexity_curve_mc(const GramSpectrum& s, std::span<const double> delta_grid, int reps,
                                       std::uint64_t seed);

/// `count` log-spaced points in [lo, hi].
std::vector<double> log_grid(double lo, double hi, int count);

/// Grid used for eps-tilde: 64 log-spaced points in [1e-4, 1].
std::vector<double> eps_tilde_grid();

/// Smallest eps >= floor whose majorant dominates the Monte-Carlo complexity curve.
double eps_tilde_mc(const GramSpectrum& s, double A, int N, int reps, std::uint64_t seed);
double eps_tilde_mc(const GramMatrix& g, double A, int N, int reps, std::uint64_t seed);

/// Single-draw variant (the non-averaged supremum).
double eps_check(const GramSpectrum& s, double A, int N, std::uint64_t seed);

/// Smallest eps >= floor with values[i] <= eps*delta[i] + eps^2 on the given grid.
double eps_from_curve(std::span<const double> delta_grid, std::span<const double> values, double floor);

struct SandwichReport {
  std::vector<double> delta_grid;
  std::vector<double> gamma;
  std::vector<double> mc;
  std::vector<double> ratio;  // mc / gamma (1 where both vanish)
  std::vector<bool> ok;
  double c1 = 0.05;
  double c2 = 4.0;
  int n = 0;
  bool pass = true;
  double min_ratio() const;
  double max_ratio() const;
};

/// Checks c1*gamma(delta) - 1/n <= mc(delta) <= c2*gamma(delta) on the grid.
SandwichReport gamma_bounds_check(const GramSpectrum& s, const ComplexityEstimate& mc, double c1 = 0.05,
                                  double c2 = 4.0);

void write_sandwich_csv(std::ostream& out, const SandwichReport& report, const std::string& label = "");

}  // namespace smkl
