#pragma once

#include "smkl/common.hpp"
#include "smkl/kernels.hpp"
#include "smkl/loss.hpp"
#include "smkl/regparam.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace smkl {

/// Per-kernel eigenbasis coordinates of the sample span.
///
/// A block function with coefficient vector v has values U diag(sqrt_d) v at the
/// training points, RKHS norm |v| and empirical L2 norm |diag(s) v|, where d are
/// the eigenvalues of the raw Gram matrix and s = sqrt(d / n).
struct BlockParametrization {
  struct Block {
    Matrix U;      // n x r retained eigenvectors
    Vector sqrt_d;  // sqrt of raw-Gram eigenvalues, length r
    Vector s;       // sqrt of normalised eigenvalues, length r
  };
  std::vector<Block> blocks;
  int n = 0;

  int size() const { return static_cast<int>(blocks.size()); }
  int rank(int j) const { return static_cast<int>(blocks.at(static_cast<std::size_t>(j)).s.size()); }
  int total_rank() const;
};

/// Keeps eigen-directions with lambda_k > rank_tol * lambda_1 for every kernel.
BlockParametrization parametrize(std::span<const GramSpectrum> spectra, double rank_tol = 1e-10);

struct FitConfig {
  double tau = 1.0;
  double A = 4.0;
  std::string loss = "quadratic";
  double response_bound = std::numeric_limits<double>::infinity();
  double tol_kkt = 1e-7;
  int max_iter = 5000;
  double rank_tol = 1e-10;
  std::optional<std::vector<double>> ball_radii;  // per-block RKHS-norm radii
  std::uint64_t seed = 0;
  std::optional<int> N_override;  // replaces N inside the regularisation floor
  int threads = 1;

  void validate() const;
};

struct AdditiveModelFit {
  std::vector<Vector> v;
  RegParams eps_used;
  std::vector<double> objective_trace;
  double kkt_residual = std::numeric_limits<double>::infinity();
  std::vector<int> active_set;
  PointSet X_train;
  BlockParametrization param;
  Vector fitted;
  std::string loss;
  bool converged = false;
  int iterations = 0;

  double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
  /// Kernel-section coefficients c_j = U_j diag(1/sqrt_d_j) v_j.
  std::vector<Vector> dual_coefficients() const;
  /// |f_j|_{L2(Pi_n)} for every block.
  std::vector<double> empirical_norms() const;
  /// |f_j|_{H_j} for every block.
  std::vector<double> rkhs_norms() const;
};

/// P_n(l o sum_j f_j) + sum_j [tau eps_j |diag(s_j) v_j| + tau^2 eps_j^2 |v_j|].
double objective_value(const BlockParametrization& param, const Vector& Y, const LossModel& loss,
                       std::span<const double> eps, double tau, const std::vector<Vector>& v);

/// Fitted values sum_j U_j diag(sqrt_d_j) v_j at the training points.
Vector fitted_values(const BlockParametrization& param, const std::vector<Vector>& v);

/// Accelerated proximal gradient (monotone FISTA with backtracking and adaptive
/// restart) on the eigenbasis parametrisation.
AdditiveModelFit fit(const BlockParametrization& param, const Vector& Y, const RegParams& reg, const FitConfig& cfg);

/// Builds Gram spectra for the dictionary at X and fits with the supplied parameters.
AdditiveModelFit fit(const PointSet& X, const Vector& Y, const KernelDictionary& dict, const RegParams& reg,
                     const FitConfig& cfg);

/// Computes spectra and eps-hat (A and N from the config) before fitting.
AdditiveModelFit fit(const PointSet& X, const Vector& Y, const KernelDictionary& dict, const FitConfig& cfg);

struct Prediction {
  Vector total;
  Matrix per_block;  // points x N
};

Prediction predict(const AdditiveModelFit& model, const KernelDictionary& dict, const PointSet& x_new);

/// Same from stored kernel-section coefficients c_j (one per block, length |X_train|).
Prediction predict(const KernelDictionary& dict, const PointSet& X_train, const std::vector<Vector>& coefficients,
                   const PointSet& x_new);

/// Largest per-block violation of the optimality conditions at `v`.
double kkt_residual(const BlockParametrization& param, const Vector& Y, const LossModel& loss,
                    std::span<const double> eps, double tau, const std::vector<Vector>& v,
                    const std::optional<std::vector<double>>& ball_radii = std::nullopt);

double kkt_residual(const AdditiveModelFit& model, const Vector& Y, const RegParams& reg, const FitConfig& cfg);

struct TauSelection {
  std::vector<double> grid;
  std::vector<double> validation_risk;
  double best_tau = 1.0;
};

/// Hold-out selection of tau; eps-hat is recomputed on the training part.
TauSelection select_tau(const PointSet& X, const Vector& Y, const KernelDictionary& dict, const FitConfig& cfg,
                        std::vector<double> grid = {0.25, 0.5, 1.0, 2.0, 4.0}, double holdout_fraction = 0.2);

}  // namespace smkl
