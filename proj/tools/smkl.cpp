// smkl command line tool.
#include "smkl/geometry.hpp"
#include "smkl/harness.hpp"
#include "smkl/io.hpp"
#include "smkl/regparam.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace smkl;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 1;
};

Json config_or_empty(const Globals& g) { return g.config.empty() ? Json::object() : read_json_file(g.config); }

std::ofstream open_out(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  std::ofstream out(fs::path(g.out) / name);
  if (!out) throw InputError("cannot write '" + (fs::path(g.out) / name).string() + "'");
  return out;
}

// kernels either from --kernels or from the "kernels" key of the config
KernelDictionary load_dictionary(const std::string& path, const Json& cfg) {
  if (!path.empty()) return dictionary_from_json(read_json_file(path));
  if (cfg.contains("kernels")) return dictionary_from_json(cfg["kernels"]);
  throw InputError("no kernel dictionary given (use --kernels or a \"kernels\" entry in --config)");
}

void say(const std::string& what, const fs::path& p) { std::cout << what << ": " << p.string() << '\n'; }

int run_synth(const Globals& g) {
  SyntheticSpec spec = synthetic_spec_from_json(config_or_empty(g));
  if (g.seed) spec.seed = *g.seed;
  const Dataset data = gen_instance(spec);
  {
    auto out = open_out(g, "dataset.csv");
    write_dataset_csv(out, data.X, &data.Y);
  }
  write_json_file((fs::path(g.out) / "truth.json").string(), truth_to_json(*data.truth));
  say("dataset", fs::path(g.out) / "dataset.csv");
  say("truth", fs::path(g.out) / "truth.json");
  return 0;
}

int run_gram(const Globals& g, const std::string& data_path, const std::string& kernels) {
  const Dataset data = load_dataset(data_path);
  const KernelDictionary dict = load_dictionary(kernels, config_or_empty(g));
  for (const auto& k : dict) {
    auto out = open_out(g, "gram_" + k.id() + ".csv");
    write_gram_csv(out, gram(k, data.X));
    say("gram", fs::path(g.out) / ("gram_" + k.id() + ".csv"));
  }
  return 0;
}

int run_epsilons(const Globals& g, const std::string& data_path, const std::string& kernels, double A,
                 std::optional<int> N_override) {
  const Json cfg = config_or_empty(g);
  const Dataset data = load_dataset(data_path);
  const KernelDictionary dict = load_dictionary(kernels, cfg);
  A = cfg.value("A", A);
  if (cfg.contains("N_override")) N_override = cfg["N_override"].get<int>();
  const auto spectra = dictionary_spectra(dict, data.X, g.threads);
  const RegParams reg = eps_hat_all(spectra, A, N_override.value_or(std::max(2, dict.size())));
  write_json_file((fs::path(g.out) / "epsilons.json").string(), reg_params_to_json(reg, dict));
  auto out = open_out(g, "gamma_hat.csv");
  out << "kernel_id,delta,gamma_hat\n";
  for (int j = 0; j < dict.size(); ++j)
    for (double delta : log_grid(1e-4, 1.0, 64))
      out << dict[j].id() << ',' << format_double(delta) << ','
          << format_double(gamma_hat(spectra[static_cast<std::size_t>(j)], delta)) << '\n';
  say("epsilons", fs::path(g.out) / "epsilons.json");
  say("gamma curve", fs::path(g.out) / "gamma_hat.csv");
  return 0;
}

int run_fit(const Globals& g, const std::string& data_path, const std::string& kernels) {
  const Json cfg_json = config_or_empty(g);
  const Dataset data = load_dataset(data_path);
  require(data.Y.size() == data.X.rows(), "fit needs a dataset with a y column");
  const KernelDictionary dict = load_dictionary(kernels, cfg_json);
  Json fit_json = cfg_json.contains("fit") ? cfg_json["fit"] : cfg_json;
  if (fit_json.is_object()) fit_json.erase("kernels");
  FitConfig cfg = fit_config_from_json(fit_json);
  if (g.seed) cfg.seed = *g.seed;
  cfg.threads = g.threads;
  const AdditiveModelFit model = fit(data.X, data.Y, dict, cfg);
  write_json_file((fs::path(g.out) / "model.json").string(), model_to_json(model, dict, cfg));
  auto out = open_out(g, "fitted.csv");
  out << "fitted\n";
  for (Eigen::Index i = 0; i < model.fitted.size(); ++i) out << format_double(model.fitted(i)) << '\n';
  std::cout << "active blocks: " << model.active_set.size() << " of " << dict.size()
            << ", kkt residual " << model.kkt_residual << (model.converged ? "" : " (NOT converged)") << '\n';
  say("model", fs::path(g.out) / "model.json");
  return model.converged ? 0 : 3;
}

int run_predict(const Globals& g, const std::string& model_path, const std::string& points) {
  const StoredModel m = model_from_json(read_json_file(model_path));
  const Dataset pts = load_dataset(points);
  const Prediction p = predict(m.dict, m.X_train, m.coefficients, pts.X);
  auto out = open_out(g, "predictions.csv");
  out << "prediction";
  for (const auto& k : m.dict) out << ",block_" << k.id();
  out << '\n';
  for (Eigen::Index i = 0; i < p.total.size(); ++i) {
    out << format_double(p.total(i));
    for (Eigen::Index j = 0; j < p.per_block.cols(); ++j) out << ',' << format_double(p.per_block(i, j));
    out << '\n';
  }
  say("predictions", fs::path(g.out) / "predictions.csv");
  return 0;
}

// config: {"kernels": [...], "data": path | "design": SyntheticSpec, "J": [...], "b": .., "d": .., "weights": [..]}
int run_geometry(const Globals& g, const std::string& data_path, const std::string& kernels) {
  const Json cfg = config_or_empty(g);
  const KernelDictionary dict = load_dictionary(kernels, cfg);
  PointSet X;
  if (!data_path.empty() || cfg.contains("data")) {
    X = load_dataset(data_path.empty() ? cfg["data"].get<std::string>() : data_path).X;
  } else {
    SyntheticSpec spec = synthetic_spec_from_json(cfg.value("design", Json::object()));
    if (g.seed) spec.seed = *g.seed;
    spec.N = std::max(spec.N, dict.input_dimension());
    Rng rng(derive_seed(spec.seed, 3));
    X = sample_design(spec, spec.n, rng);
  }
  const WhitenedBasis basis = basis_from_dictionary(dict, X, X, cfg.value("max_rank", 10));
  const auto J = cfg.value("J", std::vector<int>{0});
  std::optional<int> d;
  if (cfg.contains("d")) d = cfg["d"].get<int>();
  std::optional<std::vector<double>> weights;
  if (cfg.contains("weights")) weights = cfg["weights"].get<std::vector<double>>();
  AscentOptions opt;
  opt.seed = g.seed.value_or(cfg.value("seed", std::uint64_t{0}));
  const GeometryReport rep = geometry_report(basis, J, cfg.value("b", 1.0), d, weights, opt);
  write_json_file((fs::path(g.out) / "geometry.json").string(), geometry_report_to_json(rep));
  say("geometry", fs::path(g.out) / "geometry.json");
  return 0;
}

int run_experiment_cmd(const Globals& g, const std::string& kind) {
  Json cfg = config_or_empty(g);
  cfg["kind"] = kind;
  if (g.seed) cfg["seed"] = *g.seed;
  ExperimentPlan plan = plan_from_json(cfg);
  plan.threads = g.threads;
  const ExperimentResult res = run_experiment(plan);
  write_outputs(g.out, plan, res);
  std::cout << res.summary.dump(2) << '\n';
  say("results", fs::path(g.out) / "results.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse multiple kernel learning: synthetic data, regularisation, fitting, geometry, experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  std::string data, kernels, model, points, kind;
  double A = 4.0;
  std::optional<int> N_override;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (config: synthetic spec)");
  auto* gram_cmd = app.add_subcommand("gram", "Export Gram matrices of a kernel dictionary");
  gram_cmd->add_option("--data", data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  gram_cmd->add_option("--kernels", kernels, "Kernel dictionary JSON")->check(CLI::ExistingFile);
  auto* eps = app.add_subcommand("epsilons", "Data-driven regularisation parameters per kernel");
  eps->add_option("--data", data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  eps->add_option("--kernels", kernels, "Kernel dictionary JSON")->check(CLI::ExistingFile);
  eps->add_option("--A", A, "Confidence constant of the floor")->capture_default_str();
  eps->add_option("--N", N_override, "Dictionary size used inside the floor");
  auto* fit_cmd = app.add_subcommand("fit", "Fit the doubly penalised additive model (config: fit config)");
  fit_cmd->add_option("--data", data, "Dataset CSV with a y column")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--kernels", kernels, "Kernel dictionary JSON")->check(CLI::ExistingFile);
  auto* pred = app.add_subcommand("predict", "Evaluate a fitted model at new points");
  pred->add_option("--model", model, "Model JSON from fit")->required()->check(CLI::ExistingFile);
  pred->add_option("--points", points, "Points CSV (x_1..x_p)")->required()->check(CLI::ExistingFile);
  auto* geo = app.add_subcommand("geometry", "Geometry constants of a dictionary (config: kernels, J, b, d)");
  geo->add_option("--data", data, "Design CSV (otherwise sampled from the config's design)")->check(CLI::ExistingFile);
  geo->add_option("--kernels", kernels, "Kernel dictionary JSON")->check(CLI::ExistingFile);
  auto* exp = app.add_subcommand("experiment", "Run an experiment (config: experiment plan)");
  exp->add_option("kind", kind, "rate_n | rate_d | eps_adapt | norm_compare | rademacher_sandwich")
      ->required();
  for (auto* sub : {synth, gram_cmd, eps, fit_cmd, pred, geo, exp}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    fs::create_directories(g.out);
    if (*synth) return run_synth(g);
    if (*gram_cmd) return run_gram(g, data, kernels);
    if (*eps) return run_epsilons(g, data, kernels, A, N_override);
    if (*fit_cmd) return run_fit(g, data, kernels);
    if (*pred) return run_predict(g, model, points);
    if (*geo) return run_geometry(g, data, kernels);
    if (*exp) return run_experiment_cmd(g, kind);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
