#pragma once

#include "smkl/common.hpp"
#include "smkl/io.hpp"
#include "smkl/solver.hpp"
#include "smkl/synthdata.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace smkl {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { rate_n, rate_d, eps_adapt, norm_compare, rademacher_sandwich };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::rate_n;
  std::vector<int> n_grid{128, 256, 512, 1024};
  std::vector<int> d_grid{2, 4};
  std::vector<double> delta_grid;  // rademacher_sandwich; empty -> 16 log-spaced points in [1e-3, 1]
  int replications = 10;
  SyntheticSpec base;
  FitConfig fit;
  // A = 1 with N-bar = 2 inside the logarithm, which makes the floor negligible
  bool deactivate_floor = false;
  int kernel_truncation = 64;  // Sobolev dictionary truncation
  int mc_n = 20000;            // fresh design points for population quantities
  int mc_reps = 200;           // Rademacher sign draws
  int norm_functions = 1000;   // random unit-norm functions for norm_compare
  int eps_tilde_kernels = 5;   // eps_adapt: kernels that also get the Monte-Carlo eps-tilde
  std::vector<std::string> kernel_types{"sobolev_fourier", "gaussian", "linear"};
  double gaussian_bandwidth = 0.2;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
  /// A and N entering the regularisation floor.
  double floor_A() const;
  int floor_N(int dictionary_size) const;
};

ExperimentPlan plan_from_json(const Json& j);
Json plan_to_json(const ExperimentPlan& plan);

/// One long-format result: configuration key ("n=128;d=3"), replication, metric, value.
struct ResultRow {
  std::string config;
  int replication = 0;
  std::string metric;
  double value = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Least squares of log(y) on log(x); all values must be positive.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::rate_n;
  std::vector<ResultRow> rows;
  Json summary;
};

ExperimentResult run_rate_n(const ExperimentPlan& plan);
ExperimentResult run_rate_d(const ExperimentPlan& plan);
ExperimentResult run_eps_adapt(const ExperimentPlan& plan);
ExperimentResult run_norm_compare(const ExperimentPlan& plan);
ExperimentResult run_rademacher_sandwich(const ExperimentPlan& plan);
ExperimentResult run_experiment(const ExperimentPlan& plan);

/// The synthetic instance used for grid point `n` and replication `rep` (common across the grid).
SyntheticSpec instance_spec(const ExperimentPlan& plan, int n, int d, int rep);
KernelDictionary experiment_dictionary(const ExperimentPlan& plan);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& in);

/// FNV-1a 64-bit hash of the plan's canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentPlan& plan);
Json run_manifest(const ExperimentPlan& plan);

/// Writes results.csv, summary.json and manifest.json into `dir` (created if missing).
void write_outputs(const std::string& dir, const ExperimentPlan& plan, const ExperimentResult& result);

}  // namespace smkl
