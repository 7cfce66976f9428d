#include "smkl/harness.hpp"

#include "smkl/parallel.hpp"
#include "smkl/regparam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace smkl {

namespace {

// stream ids for derive_seed
enum : std::uint64_t { kInstanceStream = 11, kPopulationStream = 12, kMcStream = 13, kFunctionStream = 14 };

std::string key(std::initializer_list<std::pair<const char*, std::string>> parts) {
  std::string out;
  for (const auto& [name, value] : parts) {
    if (!out.empty()) out += ';';
    out += name;
    out += '=';
    out += value;
  }
  return out;
}

struct Stats {
  double mean = 0.0;
  double std_error = 0.0;
  int count = 0;
};

Stats stats(const std::vector<double>& x) {
  Stats s;
  s.count = static_cast<int>(x.size());
  if (x.empty()) return s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / (s.count - 1) / s.count);
  }
  return s;
}

Json stats_json(const Stats& s) { return {{"mean", s.mean}, {"std_error", s.std_error}, {"count", s.count}}; }

Json slope_json(const SlopeFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"std_error", f.std_error},
          {"r_squared", f.r_squared},
          {"points", f.points},
          {"ci_low", f.slope - 2.0 * f.std_error},
          {"ci_high", f.slope + 2.0 * f.std_error}};
}

// Values at `points` of the functions sum_i M(i,k) K(., X_i), one column per k.
Matrix section_values(const Kernel& k, const PointSet& X, const Matrix& M, const PointSet& points) {
  if (k.has_features()) return k.features(points) * (k.features(X).transpose() * M);
  return cross_gram(k, points, X) * M;
}

Kernel sandwich_kernel(const ExperimentPlan& plan, const std::string& type) {
  const int N = plan.base.N;
  switch (kernel_kind_from_string(type)) {
    case KernelKind::sobolev_fourier:
      return Kernel::sobolev_fourier("sobolev_fourier", {0}, plan.base.alpha, plan.kernel_truncation);
    case KernelKind::gaussian: return Kernel::gaussian("gaussian", {0}, plan.gaussian_bandwidth);
    case KernelKind::linear: {
      std::vector<int> block(static_cast<std::size_t>(std::min(N, 5)));
      std::iota(block.begin(), block.end(), 0);
      return Kernel::linear("linear", block);
    }
    case KernelKind::projection: return Kernel::projection("projection", {0}, trigonometric_basis(9), "trigonometric");
    case KernelKind::tabulated: break;
  }
  throw InputError("kernel type '" + type + "' is not available in the sandwich experiment");
}

FitConfig plan_fit_config(const ExperimentPlan& plan) {
  FitConfig cfg = plan.fit;
  cfg.A = plan.floor_A();
  if (plan.deactivate_floor) cfg.N_override = 2;
  cfg.threads = 1;
  return cfg;
}

// Shared body of the rate experiments: fit one instance and score it.
struct FitScore {
  double excess_risk = 0.0;
  bool converged = false;
  double kkt = 0.0;
  int iterations = 0;
  double precision = 0.0;
  double recall = 0.0;
  int active = 0;
  double off_support = 0.0;
};

FitScore fit_and_score(const ExperimentPlan& plan, const SyntheticSpec& spec, const KernelDictionary& dict,
                       std::uint64_t mc_seed) {
  const Dataset data = gen_instance(spec);
  FitConfig cfg = plan_fit_config(plan);
  if (spec.logit) cfg.loss = "logit";
  const AdditiveModelFit model = fit(data.X, data.Y, dict, cfg);
  const Truth& truth = *data.truth;
  const LossModel loss = LossModel::by_name(cfg.loss, cfg.response_bound);

  FitScore s;
  s.converged = model.converged;
  s.kkt = model.kkt_residual;
  s.iterations = model.iterations;
  s.active = static_cast<int>(model.active_set.size());
  const Predictor f_hat = [&](const PointSet& Z) { return Vector(predict(model, dict, Z).total); };
  const Predictor f_star = [&](const PointSet& Z) { return truth(Z); };
  const DesignSampler design = [&](int m, Rng& rng) { return sample_design(spec, m, rng); };
  s.excess_risk = excess_risk_mc(loss, f_hat, f_star, design, plan.mc_n, mc_seed).mean;

  int hits = 0;
  for (int j : model.active_set)
    if (std::binary_search(truth.active_set.begin(), truth.active_set.end(), j)) ++hits;
  // an empty selection has no false positives but finds nothing: precision 1 only when nothing is to be found
  s.precision = model.active_set.empty() ? (truth.active_set.empty() ? 1.0 : 0.0)
                                         : static_cast<double>(hits) / static_cast<double>(model.active_set.size());
  s.recall = truth.active_set.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(truth.active_set.size());
  const auto norms = model.empirical_norms();
  for (int j = 0; j < dict.size(); ++j)
    if (!std::binary_search(truth.active_set.begin(), truth.active_set.end(), j))
      s.off_support += norms[static_cast<std::size_t>(j)];
  return s;
}

void push_score(std::vector<ResultRow>& rows, const std::string& config, int rep, const FitScore& s) {
  rows.push_back({config, rep, "excess_risk", s.excess_risk});
  rows.push_back({config, rep, "converged", s.converged ? 1.0 : 0.0});
  rows.push_back({config, rep, "kkt_residual", s.kkt});
  rows.push_back({config, rep, "iterations", static_cast<double>(s.iterations)});
  rows.push_back({config, rep, "precision", s.precision});
  rows.push_back({config, rep, "recall", s.recall});
  rows.push_back({config, rep, "active_count", static_cast<double>(s.active)});
  rows.push_back({config, rep, "off_support_l2", s.off_support});
}

// Per grid value summary of fit scores; non-converged fits are excluded and counted.
Json score_summary(const std::vector<FitScore>& scores, std::vector<double>& risk_out) {
  std::vector<double> risk, prec, rec, off;
  int excluded = 0;
  for (const auto& s : scores) {
    if (!s.converged) {
      ++excluded;
      continue;
    }
    risk.push_back(s.excess_risk);
    prec.push_back(s.precision);
    rec.push_back(s.recall);
    off.push_back(s.off_support);
  }
  risk_out = risk;
  return {{"excess_risk", stats_json(stats(risk))}, {"precision", stats_json(stats(prec))},
          {"recall", stats_json(stats(rec))},       {"off_support_l2", stats_json(stats(off))},
          {"excluded_not_converged", excluded}};
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::rate_n: return "rate_n";
    case ExperimentKind::rate_d: return "rate_d";
    case ExperimentKind::eps_adapt: return "eps_adapt";
    case ExperimentKind::norm_compare: return "norm_compare";
    case ExperimentKind::rademacher_sandwich: return "rademacher_sandwich";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::rate_n, ExperimentKind::rate_d, ExperimentKind::eps_adapt, ExperimentKind::norm_compare,
                 ExperimentKind::rademacher_sandwich})
    if (to_string(k) == name) return k;
  throw InputError("unknown experiment kind '" + name + "'");
}

void ExperimentPlan::validate() const {
  require(replications >= 1, "replications must be at least 1");
  base.validate();
  fit.validate();
  require(kernel_truncation >= 1, "kernel_truncation must be positive");
  require(mc_n >= 2 && mc_reps >= 1 && norm_functions >= 1, "Monte-Carlo sizes must be positive");
  switch (kind) {
    case ExperimentKind::rate_n:
    case ExperimentKind::eps_adapt:
    case ExperimentKind::norm_compare:
      require(!n_grid.empty(), "n grid must be non-empty");
      for (int n : n_grid) require(n >= 4, "grid sample sizes must be at least 4");
      break;
    case ExperimentKind::rate_d:
      require(!d_grid.empty(), "d grid must be non-empty");
      for (int d : d_grid) require(d >= 0 && d <= base.N, "d grid values must lie in [0, N]");
      break;
    case ExperimentKind::rademacher_sandwich:
      require(!kernel_types.empty(), "kernel_types must be non-empty");
      for (double d : delta_grid) require(d > 0.0 && d <= 1.0, "delta grid values must lie in (0, 1]");
      break;
  }
}

double ExperimentPlan::floor_A() const { return deactivate_floor ? 1.0 : fit.A; }

int ExperimentPlan::floor_N(int dictionary_size) const {
  if (deactivate_floor) return 2;
  return fit.N_override.value_or(std::max(2, dictionary_size));
}

ExperimentPlan plan_from_json(const Json& j) {
  require(j.is_object(), "experiment plan must be an object");
  ExperimentPlan p;
  if (j.contains("kind")) p.kind = experiment_kind_from_string(j["kind"].get<std::string>());
  p.n_grid = j.value("n_grid", p.n_grid);
  p.d_grid = j.value("d_grid", p.d_grid);
  p.delta_grid = j.value("delta_grid", p.delta_grid);
  p.replications = j.value("replications", p.replications);
  if (j.contains("base")) p.base = synthetic_spec_from_json(j["base"]);
  if (j.contains("fit")) p.fit = fit_config_from_json(j["fit"]);
  p.deactivate_floor = j.value("deactivate_floor", p.deactivate_floor);
  p.kernel_truncation = j.value("kernel_truncation", p.kernel_truncation);
  p.mc_n = j.value("mc_n", p.mc_n);
  p.mc_reps = j.value("mc_reps", p.mc_reps);
  p.norm_functions = j.value("norm_functions", p.norm_functions);
  p.eps_tilde_kernels = j.value("eps_tilde_kernels", p.eps_tilde_kernels);
  p.kernel_types = j.value("kernel_types", p.kernel_types);
  p.gaussian_bandwidth = j.value("gaussian_bandwidth", p.gaussian_bandwidth);
  p.seed = j.value("seed", p.seed);
  p.threads = j.value("threads", p.threads);
  p.validate();
  return p;
}

Json plan_to_json(const ExperimentPlan& p) {
  return {{"kind", to_string(p.kind)},
          {"n_grid", p.n_grid},
          {"d_grid", p.d_grid},
          {"delta_grid", p.delta_grid},
          {"replications", p.replications},
          {"base", synthetic_spec_to_json(p.base)},
          {"fit", fit_config_to_json(p.fit)},
          {"deactivate_floor", p.deactivate_floor},
          {"kernel_truncation", p.kernel_truncation},
          {"mc_n", p.mc_n},
          {"mc_reps", p.mc_reps},
          {"norm_functions", p.norm_functions},
          {"eps_tilde_kernels", p.eps_tilde_kernels},
          {"kernel_types", p.kernel_types},
          {"gaussian_bandwidth", p.gaussian_bandwidth},
          {"seed", p.seed}};
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "slope fit: x and y differ in length");
  require(x.size() >= 2, "slope fit needs at least two points");
  const auto m = static_cast<double>(x.size());
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "slope fit needs positive values");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  require(sxx > 0.0, "slope fit needs at least two distinct x values");
  SlopeFit f;
  f.points = static_cast<int>(lx.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - f.intercept - f.slope * lx[i];
    rss += r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  f.std_error = f.points > 2 ? std::sqrt(rss / (f.points - 2) / sxx) : 0.0;
  return f;
}

KernelDictionary experiment_dictionary(const ExperimentPlan& plan) {
  return sobolev_additive_dictionary(plan.base.N, plan.base.alpha, plan.kernel_truncation);
}

SyntheticSpec instance_spec(const ExperimentPlan& plan, int n, int d, int rep) {
  SyntheticSpec spec = plan.base;
  spec.n = n;
  spec.d = d;
  // common random numbers across the grid: the same replication reuses its seed
  spec.seed = derive_seed(plan.seed, kInstanceStream, static_cast<std::uint64_t>(rep));
  return spec;
}

ExperimentResult run_rate_n(const ExperimentPlan& plan) {
  plan.validate();
  require(!plan.fit.loss.empty(), "loss must be named");
  const KernelDictionary dict = experiment_dictionary(plan);
  const int R = plan.replications;
  const std::size_t tasks = plan.n_grid.size() * static_cast<std::size_t>(R);
  std::vector<FitScore> scores(tasks);
  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const int g = static_cast<int>(t) / R;
    const int rep = static_cast<int>(t) % R;
    const SyntheticSpec spec = instance_spec(plan, plan.n_grid[static_cast<std::size_t>(g)], plan.base.d, rep);
    scores[t] = fit_and_score(plan, spec, dict, derive_seed(plan.seed, kMcStream, t));
  });

  ExperimentResult res;
  res.kind = ExperimentKind::rate_n;
  Json per_n = Json::array();
  std::vector<double> xs, ys, mean_n, mean_risk;
  std::vector<Stats> risk_stats;
  int excluded = 0;
  for (std::size_t g = 0; g < plan.n_grid.size(); ++g) {
    const int n = plan.n_grid[g];
    const std::string config = key({{"n", std::to_string(n)}, {"d", std::to_string(plan.base.d)}});
    std::vector<FitScore> slice(scores.begin() + static_cast<std::ptrdiff_t>(g * R),
                                scores.begin() + static_cast<std::ptrdiff_t>((g + 1) * R));
    for (int rep = 0; rep < R; ++rep) push_score(res.rows, config, rep, slice[static_cast<std::size_t>(rep)]);
    std::vector<double> risk;
    Json s = score_summary(slice, risk);
    excluded += s["excluded_not_converged"].get<int>();
    for (double r : risk) {
      if (r > 0.0) {
        xs.push_back(n);
        ys.push_back(r);
      }
    }
    const Stats st = stats(risk);
    risk_stats.push_back(st);
    if (st.count > 0 && st.mean > 0.0) {
      mean_n.push_back(n);
      mean_risk.push_back(st.mean);
    }
    s["n"] = n;
    per_n.push_back(s);
  }
  bool monotone = true;
  for (std::size_t g = 1; g < risk_stats.size(); ++g) {
    const double tol = 2.0 * std::hypot(risk_stats[g].std_error, risk_stats[g - 1].std_error);
    if (risk_stats[g].mean > risk_stats[g - 1].mean + tol) monotone = false;
  }
  res.summary = {{"kind", "rate_n"}, {"per_n", per_n}, {"excluded_not_converged", excluded},
                 {"monotone_decreasing_within_2se", monotone}};
  if (xs.size() >= 2 && std::set<double>(xs.begin(), xs.end()).size() >= 2)
    res.summary["slope_all_points"] = slope_json(fit_loglog(xs, ys));
  if (mean_n.size() >= 2) res.summary["slope_of_means"] = slope_json(fit_loglog(mean_n, mean_risk));
  return res;
}

ExperimentResult run_rate_d(const ExperimentPlan& plan) {
  plan.validate();
  const KernelDictionary dict = experiment_dictionary(plan);
  const int R = plan.replications;
  const std::size_t tasks = plan.d_grid.size() * static_cast<std::size_t>(R);
  std::vector<FitScore> scores(tasks);
  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const int g = static_cast<int>(t) / R;
    const int rep = static_cast<int>(t) % R;
    const SyntheticSpec spec = instance_spec(plan, plan.base.n, plan.d_grid[static_cast<std::size_t>(g)], rep);
    scores[t] = fit_and_score(plan, spec, dict, derive_seed(plan.seed, kMcStream, t));
  });

  ExperimentResult res;
  res.kind = ExperimentKind::rate_d;
  Json per_d = Json::array();
  std::map<int, Stats> by_d;
  int excluded = 0;
  for (std::size_t g = 0; g < plan.d_grid.size(); ++g) {
    const int d = plan.d_grid[g];
    const std::string config = key({{"n", std::to_string(plan.base.n)}, {"d", std::to_string(d)}});
    std::vector<FitScore> slice(scores.begin() + static_cast<std::ptrdiff_t>(g * R),
                                scores.begin() + static_cast<std::ptrdiff_t>((g + 1) * R));
    for (int rep = 0; rep < R; ++rep) push_score(res.rows, config, rep, slice[static_cast<std::size_t>(rep)]);
    std::vector<double> risk;
    Json s = score_summary(slice, risk);
    excluded += s["excluded_not_converged"].get<int>();
    by_d[d] = stats(risk);
    s["d"] = d;
    per_d.push_back(s);
  }
  Json ratios = Json::array();
  for (const auto& [d, st] : by_d) {
    auto it = by_d.find(2 * d);
    if (d > 0 && it != by_d.end() && st.mean > 0.0)
      ratios.push_back({{"d", d}, {"ratio_2d_over_d", it->second.mean / st.mean}});
  }
  bool nondecreasing = true;
  for (auto it = by_d.begin(); it != by_d.end(); ++it) {
    auto next = std::next(it);
    if (next == by_d.end()) break;
    const double tol = 2.0 * std::hypot(it->second.std_error, next->second.std_error);
    if (next->second.mean < it->second.mean - tol) nondecreasing = false;
  }
  res.summary = {{"kind", "rate_d"}, {"per_d", per_d}, {"risk_ratios", ratios},
                 {"nondecreasing_within_2se", nondecreasing}, {"excluded_not_converged", excluded}};
  return res;
}

ExperimentResult run_eps_adapt(const ExperimentPlan& plan) {
  plan.validate();
  require(plan.base.design == DesignKind::uniform_box, "eps_adapt needs the uniform design (population spectra)");
  const KernelDictionary dict = experiment_dictionary(plan);
  const int N = dict.size();
  const double A = plan.floor_A();
  const int Nbar = plan.floor_N(N);
  const int R = plan.replications;
  const int tilde = std::min(plan.eps_tilde_kernels, N);
  const std::vector<double> pop = population_spectrum(plan.base.alpha, plan.kernel_truncation);

  struct Out {
    std::vector<double> hat, breve, tilde;
  };
  const std::size_t tasks = plan.n_grid.size() * static_cast<std::size_t>(R);
  std::vector<Out> outs(tasks);
  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const int g = static_cast<int>(t) / R;
    const int rep = static_cast<int>(t) % R;
    const int n = plan.n_grid[static_cast<std::size_t>(g)];
    const SyntheticSpec spec = instance_spec(plan, n, plan.base.d, rep);
    Rng rng(derive_seed(spec.seed, kPopulationStream));
    const PointSet X = sample_design(spec, n, rng);
    const auto spectra = dictionary_spectra(dict, X);
    Out& o = outs[t];
    o.hat = eps_hat_all(spectra, A, Nbar).eps_hat;
    o.breve = eps_breve_all(std::vector<std::vector<double>>(static_cast<std::size_t>(N), pop), A, Nbar, n);
    for (int j = 0; j < tilde; ++j)
      o.tilde.push_back(eps_tilde_mc(spectra[static_cast<std::size_t>(j)], A, Nbar, plan.mc_reps,
                                     derive_seed(plan.seed, kMcStream, t * 1000 + static_cast<std::size_t>(j))));
  });

  ExperimentResult res;
  res.kind = ExperimentKind::eps_adapt;
  double min_ratio = std::numeric_limits<double>::infinity(), max_ratio = 0.0;
  double min_tilde = std::numeric_limits<double>::infinity(), max_tilde = 0.0;
  // mean ratio per (kernel, n) for the stability check
  std::vector<std::vector<double>> mean_ratio(static_cast<std::size_t>(N), std::vector<double>(plan.n_grid.size(), 0.0));
  for (std::size_t g = 0; g < plan.n_grid.size(); ++g) {
    const std::string config = key({{"n", std::to_string(plan.n_grid[g])}});
    for (int rep = 0; rep < R; ++rep) {
      const Out& o = outs[g * static_cast<std::size_t>(R) + static_cast<std::size_t>(rep)];
      for (int j = 0; j < N; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const std::string id = dict[j].id();
        const double ratio = o.hat[jj] / o.breve[jj];
        res.rows.push_back({config, rep, "eps_hat[" + id + "]", o.hat[jj]});
        res.rows.push_back({config, rep, "eps_breve[" + id + "]", o.breve[jj]});
        res.rows.push_back({config, rep, "ratio[" + id + "]", ratio});
        min_ratio = std::min(min_ratio, ratio);
        max_ratio = std::max(max_ratio, ratio);
        mean_ratio[jj][g] += ratio / R;
        if (j < tilde) {
          const double tr = o.tilde[jj] / o.hat[jj];
          res.rows.push_back({config, rep, "eps_tilde[" + id + "]", o.tilde[jj]});
          res.rows.push_back({config, rep, "tilde_over_hat[" + id + "]", tr});
          min_tilde = std::min(min_tilde, tr);
          max_tilde = std::max(max_tilde, tr);
        }
      }
    }
  }
  double stability = 1.0;
  for (const auto& per_kernel : mean_ratio) {
    const auto [lo, hi] = std::minmax_element(per_kernel.begin(), per_kernel.end());
    stability = std::max(stability, *hi / *lo);
  }
  res.summary = {{"kind", "eps_adapt"},
                 {"min_ratio", min_ratio},
                 {"max_ratio", max_ratio},
                 {"ratio_stability_across_n", stability},
                 {"floor_A", A},
                 {"floor_N", Nbar}};
  if (tilde > 0) {
    res.summary["min_tilde_over_hat"] = min_tilde;
    res.summary["max_tilde_over_hat"] = max_tilde;
    res.summary["tilde_kernels"] = tilde;
  }
  return res;
}

ExperimentResult run_norm_compare(const ExperimentPlan& plan) {
  plan.validate();
  const KernelDictionary dict = experiment_dictionary(plan);
  const Kernel& k = dict[0];
  const double A = plan.floor_A();
  const int Nbar = plan.floor_N(dict.size());
  const int R = plan.replications;

  struct Out {
    double c = 0.0, c_upper = 0.0, c_lower = 0.0, eps = 0.0;
  };
  const std::size_t tasks = plan.n_grid.size() * static_cast<std::size_t>(R);
  std::vector<Out> outs(tasks);
  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const int g = static_cast<int>(t) / R;
    const int rep = static_cast<int>(t) % R;
    const int n = plan.n_grid[static_cast<std::size_t>(g)];
    const SyntheticSpec spec = instance_spec(plan, n, plan.base.d, rep);
    Rng rng(derive_seed(spec.seed, kPopulationStream));
    const PointSet X = sample_design(spec, n, rng);
    const PointSet Z = sample_design(spec, plan.mc_n, rng);
    const GramSpectrum sp = kernel_spectrum(k, X);
    const std::vector<GramSpectrum> one{sp};
    const BlockParametrization param = parametrize(one, plan.fit.rank_tol);
    const auto& b = param.blocks.front();
    const double eps = eps_hat_all(one, A, Nbar).eps_hat.front();
    // population values of the unit-norm eigen-directions
    const Matrix P = section_values(k, X, b.U * b.sqrt_d.cwiseInverse().asDiagonal(), Z) /
                     std::sqrt(static_cast<double>(plan.mc_n));
    Rng frng(derive_seed(plan.seed, kFunctionStream, t));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> decay(0.0, 2.0);
    Out& o = outs[t];
    o.eps = eps;
    const Eigen::Index r = b.s.size();
    for (int f = 0; f < plan.norm_functions; ++f) {
      // random direction with a random spectral profile, unit RKHS norm
      const double q = decay(frng);
      Vector v(r);
      for (Eigen::Index i = 0; i < r; ++i) v(i) = normal(frng) * std::pow(static_cast<double>(i + 1), -q);
      v.normalize();
      const double emp = b.s.cwiseProduct(v).norm();
      const double popn = (P * v).norm();
      o.c_upper = std::max(o.c_upper, popn / (emp + eps));
      o.c_lower = std::max(o.c_lower, emp / (popn + eps));
    }
    o.c = std::max(o.c_upper, o.c_lower);
  });

  ExperimentResult res;
  res.kind = ExperimentKind::norm_compare;
  Json per_n = Json::array();
  std::vector<double> means;
  double worst = 0.0;
  for (std::size_t g = 0; g < plan.n_grid.size(); ++g) {
    const std::string config = key({{"n", std::to_string(plan.n_grid[g])}, {"kernel", k.id()}});
    std::vector<double> cs;
    for (int rep = 0; rep < R; ++rep) {
      const Out& o = outs[g * static_cast<std::size_t>(R) + static_cast<std::size_t>(rep)];
      res.rows.push_back({config, rep, "C", o.c});
      res.rows.push_back({config, rep, "C_population_side", o.c_upper});
      res.rows.push_back({config, rep, "C_empirical_side", o.c_lower});
      res.rows.push_back({config, rep, "eps", o.eps});
      cs.push_back(o.c);
      worst = std::max(worst, o.c);
    }
    const Stats st = stats(cs);
    means.push_back(st.mean);
    per_n.push_back({{"n", plan.n_grid[g]}, {"C", stats_json(st)}, {"C_max", *std::max_element(cs.begin(), cs.end())}});
  }
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  res.summary = {{"kind", "norm_compare"}, {"per_n", per_n}, {"C_max", worst}, {"C_stability_across_n", *hi / *lo},
                 {"functions_per_replication", plan.norm_functions}};
  return res;
}

ExperimentResult run_rademacher_sandwich(const ExperimentPlan& plan) {
  plan.validate();
  const std::vector<double> grid = plan.delta_grid.empty() ? log_grid(1e-3, 1.0, 16) : plan.delta_grid;
  const int R = plan.replications;
  const std::size_t K = plan.kernel_types.size();
  std::vector<Kernel> kernels;
  for (const auto& type : plan.kernel_types) kernels.push_back(sandwich_kernel(plan, type));

  const std::size_t tasks = K * static_cast<std::size_t>(R);
  std::vector<SandwichReport> reports(tasks);
  std::vector<ComplexityEstimate> curves(tasks);
  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const std::size_t kk = t / static_cast<std::size_t>(R);
    const int rep = static_cast<int>(t % static_cast<std::size_t>(R));
    const SyntheticSpec spec = instance_spec(plan, plan.base.n, plan.base.d, rep);
    Rng rng(derive_seed(spec.seed, kPopulationStream));
    const PointSet X = sample_design(spec, plan.base.n, rng);
    const GramSpectrum sp = kernel_spectrum(kernels[kk], X);
    curves[t] = complexity_curve_mc(sp, grid, plan.mc_reps, derive_seed(plan.seed, kMcStream, t));
    reports[t] = gamma_bounds_check(sp, curves[t]);
  });

  ExperimentResult res;
  res.kind = ExperimentKind::rademacher_sandwich;
  Json per_kernel = Json::array();
  double lo_all = std::numeric_limits<double>::infinity(), hi_all = 0.0;
  bool pass = true;
  for (std::size_t kk = 0; kk < K; ++kk) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    bool kpass = true;
    for (int rep = 0; rep < R; ++rep) {
      const std::size_t t = kk * static_cast<std::size_t>(R) + static_cast<std::size_t>(rep);
      const SandwichReport& rep_report = reports[t];
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::string config = key({{"kernel", plan.kernel_types[kk]}, {"delta", format_double(grid[i])}});
        res.rows.push_back({config, rep, "gamma_hat", rep_report.gamma[i]});
        res.rows.push_back({config, rep, "mc", rep_report.mc[i]});
        res.rows.push_back({config, rep, "mc_std_error", curves[t].std_errors[i]});
        res.rows.push_back({config, rep, "ratio", rep_report.ratio[i]});
        res.rows.push_back({config, rep, "ok", rep_report.ok[i] ? 1.0 : 0.0});
      }
      lo = std::min(lo, rep_report.min_ratio());
      hi = std::max(hi, rep_report.max_ratio());
      kpass = kpass && rep_report.pass;
    }
    per_kernel.push_back({{"kernel", plan.kernel_types[kk]}, {"min_ratio", lo}, {"max_ratio", hi}, {"pass", kpass}});
    lo_all = std::min(lo_all, lo);
    hi_all = std::max(hi_all, hi);
    pass = pass && kpass;
  }
  res.summary = {{"kind", "rademacher_sandwich"}, {"per_kernel", per_kernel}, {"min_ratio", lo_all},
                 {"max_ratio", hi_all},           {"pass", pass},             {"grid_points", grid.size()},
                 {"mc_reps", plan.mc_reps}};
  return res;
}

ExperimentResult run_experiment(const ExperimentPlan& plan) {
  switch (plan.kind) {
    case ExperimentKind::rate_n: return run_rate_n(plan);
    case ExperimentKind::rate_d: return run_rate_d(plan);
    case ExperimentKind::eps_adapt: return run_eps_adapt(plan);
    case ExperimentKind::norm_compare: return run_norm_compare(plan);
    case ExperimentKind::rademacher_sandwich: return run_rademacher_sandwich(plan);
  }
  throw InputError("unknown experiment kind");
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "config,replication,metric,value\n";
  for (const auto& r : rows) {
    require(r.config.find(',') == std::string::npos && r.metric.find(',') == std::string::npos,
            "result keys must not contain commas");
    out << r.config << ',' << r.replication << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("config,replication,metric,value", 0) != 0)
    throw InputError("results CSV must start with the header config,replication,metric,value");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream cells(line);
    ResultRow r;
    std::string rep, value;
    if (!std::getline(cells, r.config, ',') || !std::getline(cells, rep, ',') || !std::getline(cells, r.metric, ',') ||
        !std::getline(cells, value))
      throw InputError("malformed results row: " + line);
    r.replication = std::stoi(rep);
    r.value = std::strtod(value.c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string config_hash(const ExperimentPlan& plan) {
  const std::string text = plan_to_json(plan).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json run_manifest(const ExperimentPlan& plan) {
  Json seeds = Json::array();
  for (int rep = 0; rep < plan.replications; ++rep)
    seeds.push_back(derive_seed(plan.seed, kInstanceStream, static_cast<std::uint64_t>(rep)));
  return {{"tool", "smkl"},
          {"version", kVersion},
          {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__},
          {"experiment", to_string(plan.kind)},
          {"seed", plan.seed},
          {"replication_seeds", seeds},
          {"config_hash", config_hash(plan)},
          {"plan", plan_to_json(plan)}};
}

void write_outputs(const std::string& dir, const ExperimentPlan& plan, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(std::filesystem::path(dir) / "results.csv");
    if (!out) throw InputError("cannot write results into '" + dir + "'");
    write_results_csv(out, result.rows);
  }
  write_json_file((std::filesystem::path(dir) / "summary.json").string(), result.summary);
  write_json_file((std::filesystem::path(dir) / "manifest.json").string(), run_manifest(plan));
}

}  // namespace smkl
