#include "smkl/harness.hpp"
#include "smkl/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace smkl;

namespace {

ExperimentPlan tiny_plan(ExperimentKind kind) {
  ExperimentPlan p;
  p.kind = kind;
  p.base.N = 4;
  p.base.d = 2;
  p.base.n = 80;
  p.base.noise_sigma = 0.25;
  p.n_grid = {60, 120};
  p.d_grid = {1, 2};
  p.replications = 2;
  p.kernel_truncation = 12;
  p.mc_n = 500;
  p.mc_reps = 20;
  p.norm_functions = 50;
  p.eps_tilde_kernels = 2;
  p.fit.tau = 0.6;
  p.seed = 5;
  return p;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("log-log slope fit") {
    std::vector<double> x{1, 2, 4, 8}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
    const SlopeFit f = fit_loglog(x, y);
    CHECK(f.slope == doctest::Approx(-0.5));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)));
    CHECK(f.r_squared == doctest::Approx(1.0));
    CHECK(f.std_error < 1e-12);
    CHECK_THROWS_AS(fit_loglog({1, 2}, {1, -1}), InputError);
  }

  TEST_CASE("replication count halves the slope standard error roughly as 1/sqrt") {
    // synthetic noisy power law; SE(4R) / SE(R) ~ 1/2
    std::vector<double> x1, y1, x4, y4;
    Rng rng(1);
    std::normal_distribution<double> g(0.0, 0.1);
    for (int n : {128, 256, 512, 1024})
      for (int r = 0; r < 400; ++r) {
        const double y = std::pow(n, -0.66) * std::exp(g(rng));
        if (r < 100) {
          x1.push_back(n);
          y1.push_back(y);
        }
        x4.push_back(n);
        y4.push_back(y);
      }
    CHECK(fit_loglog(x4, y4).std_error / fit_loglog(x1, y1).std_error == doctest::Approx(0.5).epsilon(0.2));
  }

  TEST_CASE("every experiment kind runs with the documented row count") {
    struct Expect {
      ExperimentKind kind;
      std::size_t rows;
    };
    const std::vector<Expect> kinds{{ExperimentKind::rate_n, 2 * 2 * 8},
                                    {ExperimentKind::rate_d, 2 * 2 * 8},
                                    {ExperimentKind::eps_adapt, 2 * 2 * (4 * 3 + 2 * 2)},
                                    {ExperimentKind::norm_compare, 2 * 2 * 4},
                                    {ExperimentKind::rademacher_sandwich, 3 * 2 * 16 * 5}};
    for (const auto& e : kinds) {
      const ExperimentPlan plan = tiny_plan(e.kind);
      const ExperimentResult r = run_experiment(plan);
      CAPTURE(to_string(e.kind));
      CHECK(r.rows.size() == e.rows);
      CHECK(r.summary.at("kind") == to_string(e.kind));
    }
  }

  TEST_CASE("noiseless single-component target: risk decreases with n") {
    ExperimentPlan p = tiny_plan(ExperimentKind::rate_n);
    p.base.d = 1;
    p.base.noise_sigma = 0.0;
    p.n_grid = {50, 400};
    p.fit.tau = 0.3;
    const ExperimentResult r = run_rate_n(p);
    const auto& per_n = r.summary["per_n"];
    CHECK(per_n[1]["excess_risk"]["mean"].get<double>() < per_n[0]["excess_risk"]["mean"].get<double>());
  }

  TEST_CASE("d = 0 and sigma = 0: nothing to learn") {
    ExperimentPlan p = tiny_plan(ExperimentKind::rate_d);
    p.base.noise_sigma = 0.0;
    p.d_grid = {0};
    const ExperimentResult r = run_rate_d(p);
    CHECK(r.summary["per_d"][0]["excess_risk"]["mean"].get<double>() == 0.0);
  }

  TEST_CASE("identical kernels share the population eps") {
    ExperimentPlan p = tiny_plan(ExperimentKind::eps_adapt);
    p.base.N = 3;
    p.eps_tilde_kernels = 0;
    const ExperimentResult r = run_eps_adapt(p);
    // the Sobolev dictionary repeats one kernel on different coordinates of a uniform
    // design; the population side is shared, the empirical side differs per coordinate
    std::map<std::string, std::vector<double>> breve;
    for (const auto& row : r.rows)
      if (row.metric.rfind("eps_breve", 0) == 0) breve[row.config + std::to_string(row.replication)].push_back(row.value);
    for (const auto& [key, values] : breve)
      for (double v : values) CHECK(v == values.front());
  }

  TEST_CASE("results CSV and plan JSON round trip; runs are reproducible") {
    const ExperimentPlan plan = tiny_plan(ExperimentKind::rate_n);
    const ExperimentResult a = run_experiment(plan), b = run_experiment(plan);
    std::stringstream sa, sb;
    write_results_csv(sa, a.rows);
    write_results_csv(sb, b.rows);
    CHECK(sa.str() == sb.str());
    const auto back = read_results_csv(sa);
    REQUIRE(back.size() == a.rows.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].config == a.rows[i].config);
      CHECK(back[i].metric == a.rows[i].metric);
      CHECK(back[i].value == a.rows[i].value);
    }
    const ExperimentPlan again = plan_from_json(plan_to_json(plan));
    CHECK(plan_to_json(again) == plan_to_json(plan));
    CHECK(config_hash(again) == config_hash(plan));
    ExperimentPlan other = plan;
    other.seed = 6;
    CHECK(config_hash(other) != config_hash(plan));
  }

  TEST_CASE("outputs are written to disk") {
    const auto dir = std::filesystem::temp_directory_path() / "smkl_harness_test";
    std::filesystem::remove_all(dir);
    const ExperimentPlan plan = tiny_plan(ExperimentKind::norm_compare);
    write_outputs(dir.string(), plan, run_experiment(plan));
    for (const char* f : {"results.csv", "summary.json", "manifest.json"}) CHECK(std::filesystem::exists(dir / f));
    const Json manifest = read_json_file((dir / "manifest.json").string());
    CHECK(manifest["version"] == kVersion);
    CHECK(manifest["config_hash"] == config_hash(plan));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("invalid plans raise") {
    ExperimentPlan p = tiny_plan(ExperimentKind::rate_n);
    p.n_grid.clear();
    CHECK_THROWS_AS(p.validate(), InputError);
    ExperimentPlan q = tiny_plan(ExperimentKind::rate_d);
    q.replications = 0;
    CHECK_THROWS_AS(q.validate(), InputError);
    CHECK_THROWS_AS(experiment_kind_from_string("rate_x"), InputError);
  }
}

TEST_SUITE("io") {
  TEST_CASE("dataset CSV round trip is lossless") {
    SyntheticSpec spec;
    spec.N = 3;
    spec.n = 25;
    spec.seed = 2;
    const Dataset d = gen_instance(spec);
    std::stringstream ss;
    write_dataset_csv(ss, d.X, &d.Y);
    const Dataset back = read_dataset_csv(ss);
    CHECK((back.X - d.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.Y - d.Y).cwiseAbs().maxCoeff() == 0.0);
    std::stringstream bad("x_1,x_2\n0.1\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), InputError);
  }

  TEST_CASE("kernel, config and truth JSON round trips") {
    Matrix table(2, 2);
    table << 1.0, 0.5, 0.5, 1.0;
    const KernelDictionary dict({Kernel::gaussian("g", {0}, 0.3), Kernel::sobolev_fourier("s", {1}, 1.5, 20),
                                 Kernel::linear("l", {0, 1}), Kernel::projection("p", {1}, cosine_basis(3), "cosine"),
                                 Kernel::tabulated("t", 2, table)});
    const KernelDictionary back = dictionary_from_json(dictionary_to_json(dict));
    PointSet X(3, 3);
    X << 0.1, 0.2, 0, 0.5, 0.9, 1, 0.7, 0.3, 1;
    for (int j = 0; j < dict.size(); ++j) CHECK((gram(dict[j], X).entries - gram(back[j], X).entries).norm() == 0.0);
    CHECK_THROWS_AS(kernel_from_json(Json{{"id", "x"}, {"kind", "wavelet"}, {"coordinate_block", {0}}}), InputError);

    FitConfig cfg;
    cfg.tau = 0.7;
    cfg.N_override = 2;
    CHECK(fit_config_to_json(fit_config_from_json(fit_config_to_json(cfg))) == fit_config_to_json(cfg));
    SyntheticSpec spec;
    spec.design = DesignKind::dependent_rotation;
    spec.latent_dim = 3;
    CHECK(synthetic_spec_to_json(synthetic_spec_from_json(synthetic_spec_to_json(spec))) == synthetic_spec_to_json(spec));

    spec.seed = 4;
    const Dataset d = gen_instance(spec);
    const Truth t = truth_from_json(truth_to_json(*d.truth));
    CHECK((t(d.X) - (*d.truth)(d.X)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("model JSON predicts like the fitted model") {
    SyntheticSpec spec;
    spec.N = 3;
    spec.d = 1;
    spec.n = 60;
    spec.noise_sigma = 0.1;
    spec.seed = 8;
    const Dataset d = gen_instance(spec);
    const KernelDictionary dict = sobolev_additive_dictionary(3, 1.0, 10);
    FitConfig cfg;
    cfg.tau = 0.3;
    const AdditiveModelFit model = fit(d.X, d.Y, dict, cfg);
    const StoredModel stored = model_from_json(Json::parse(model_to_json(model, dict, cfg).dump()));
    const Prediction a = predict(model, dict, d.X), b = predict(stored.dict, stored.X_train, stored.coefficients, d.X);
    CHECK((a.total - b.total).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(stored.active_set == model.active_set);
  }
}
