#pragma once

#include "smkl/common.hpp"
#include "smkl/geometry.hpp"
#include "smkl/kernels.hpp"
#include "smkl/solver.hpp"
#include "smkl/synthdata.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace smkl {

using Json = nlohmann::json;

/// Dataset CSV: header x_1..x_p[,y], one row per observation, values printed with %.17g.
void write_dataset_csv(std::ostream& out, const PointSet& X, const Vector* Y = nullptr);
/// Reads a dataset CSV; Y is left empty when there is no "y" column.
Dataset read_dataset_csv(std::istream& in);

Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& data);

/// Kernel JSON: {"id", "kind", "params": {...}, "coordinate_block": [0-based indices]}.
/// params: gaussian {bandwidth}; sobolev_fourier {alpha, truncation}; linear {};
/// projection {basis: "cosine" | "trigonometric", dim}; tabulated {table: [[...]]}.
Kernel kernel_from_json(const Json& j);
Json kernel_to_json(const Kernel& k);
/// Accepts a list of kernels or {"kernels": [...]}.
KernelDictionary dictionary_from_json(const Json& j);
Json dictionary_to_json(const KernelDictionary& dict);

FitConfig fit_config_from_json(const Json& j);
Json fit_config_to_json(const FitConfig& cfg);

SyntheticSpec synthetic_spec_from_json(const Json& j);
Json synthetic_spec_to_json(const SyntheticSpec& spec);

Json truth_to_json(const Truth& truth);
Truth truth_from_json(const Json& j);

Json reg_params_to_json(const RegParams& reg, const KernelDictionary& dict);

Json geometry_report_to_json(const GeometryReport& report);

/// Everything needed to predict: dictionary, training points, kernel-section coefficients.
struct StoredModel {
  KernelDictionary dict;
  PointSet X_train;
  std::vector<Vector> coefficients;
  std::vector<Vector> v;
  std::vector<int> active_set;
  double tau = 1.0;
  double kkt_residual = 0.0;
};

Json model_to_json(const AdditiveModelFit& model, const KernelDictionary& dict, const FitConfig& cfg);
StoredModel model_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

/// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double x);

}  // namespace smkl
