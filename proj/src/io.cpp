#include "smkl/io.hpp"

#include "smkl/geometry.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace smkl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("CSV row " + std::to_string(row) + ": cannot parse '" + s + "' as a number");
  }
}

Json vector_to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Matrix matrix_from_json(const Json& j, Eigen::Index cols_if_empty = 0) {
  require(j.is_array(), "matrix must be a list of rows");
  if (j.empty()) return Matrix(0, cols_if_empty);
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(static_cast<Eigen::Index>(j[i].size()) == cols, "matrix rows differ in length");
    m.row(static_cast<Eigen::Index>(i)) = vector_from_json(j[i]).transpose();
  }
  return m;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_dataset_csv(std::ostream& out, const PointSet& X, const Vector* Y) {
  if (Y) require(Y->size() == X.rows(), "X and Y differ in length");
  for (Eigen::Index j = 0; j < X.cols(); ++j) out << (j ? "," : "") << "x_" << (j + 1);
  if (Y) out << (X.cols() ? "," : "") << "y";
  out << '\n';
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << (j ? "," : "") << format_double(X(i, j));
    if (Y) out << (X.cols() ? "," : "") << format_double((*Y)(i));
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset CSV is empty");
  const auto header = split_csv_line(line);
  int y_col = -1;
  std::vector<int> x_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "y") {
      y_col = static_cast<int>(c);
    } else if (header[c].rfind("x_", 0) == 0) {
      const int idx = std::stoi(header[c].substr(2));
      require(idx == static_cast<int>(x_cols.size()) + 1, "dataset columns must be x_1..x_p in order");
      x_cols.push_back(static_cast<int>(c));
    } else {
      throw InputError("unexpected dataset column '" + header[c] + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), "CSV row " + std::to_string(row) + " has the wrong number of fields");
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_double(c, row));
    rows.push_back(std::move(r));
  }
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(x_cols.size()));
  if (y_col >= 0) d.Y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][static_cast<std::size_t>(x_cols[j])];
    if (y_col >= 0) d.Y(static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(y_col)];
  }
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_dataset_csv(out, data.X, data.Y.size() ? &data.Y : nullptr);
}

Kernel kernel_from_json(const Json& j) {
  require(j.is_object(), "kernel entry must be an object");
  const std::string id = j.at("id").get<std::string>();
  const KernelKind kind = kernel_kind_from_string(j.at("kind").get<std::string>());
  const Json params = j.value("params", Json::object());
  const std::vector<int> block = j.value("coordinate_block", std::vector<int>{});
  switch (kind) {
    case KernelKind::gaussian: return Kernel::gaussian(id, block, params.at("bandwidth").get<double>());
    case KernelKind::sobolev_fourier:
      return Kernel::sobolev_fourier(id, block, params.at("alpha").get<double>(), params.value("truncation", 200));
    case KernelKind::linear: return Kernel::linear(id, block);
    case KernelKind::projection: {
      const std::string basis = params.value("basis", std::string("cosine"));
      const int dim = params.at("dim").get<int>();
      if (basis == "cosine") return Kernel::projection(id, block, cosine_basis(dim), "cosine");
      if (basis == "trigonometric") return Kernel::projection(id, block, trigonometric_basis(dim), "trigonometric");
      throw InputError("unknown projection basis '" + basis + "'");
    }
    case KernelKind::tabulated:
      require(block.size() == 1, "tabulated kernels use a single index coordinate");
      return Kernel::tabulated(id, block.front(), matrix_from_json(params.at("table")));
  }
  throw InputError("unsupported kernel kind");
}

Json kernel_to_json(const Kernel& k) {
  Json j{{"id", k.id()}, {"kind", to_string(k.kind())}, {"coordinate_block", k.block()}};
  Json params = Json::object();
  switch (k.kind()) {
    case KernelKind::gaussian: params["bandwidth"] = k.bandwidth(); break;
    case KernelKind::sobolev_fourier:
      params["alpha"] = k.alpha();
      params["truncation"] = k.truncation();
      break;
    case KernelKind::linear: break;
    case KernelKind::projection:
      if (k.basis_name() != "cosine" && k.basis_name() != "trigonometric")
        throw InputError("projection kernel '" + k.id() + "' uses a custom basis and cannot be serialised");
      params["basis"] = k.basis_name();
      params["dim"] = k.basis_size();
      break;
    case KernelKind::tabulated: params["table"] = matrix_to_json(k.table()); break;
  }
  j["params"] = params;
  return j;
}

KernelDictionary dictionary_from_json(const Json& j) {
  const Json& list = j.is_object() ? j.at("kernels") : j;
  require(list.is_array(), "kernel config must be a list of kernels");
  std::vector<Kernel> kernels;
  for (const auto& k : list) kernels.push_back(kernel_from_json(k));
  return KernelDictionary(std::move(kernels));
}

Json dictionary_to_json(const KernelDictionary& dict) {
  Json list = Json::array();
  for (const auto& k : dict) list.push_back(kernel_to_json(k));
  return list;
}

FitConfig fit_config_from_json(const Json& j) {
  FitConfig c;
  if (j.is_null()) return c;
  require(j.is_object(), "fit config must be an object");
  c.tau = j.value("tau", c.tau);
  c.A = j.value("A", c.A);
  c.loss = j.value("loss", c.loss);
  if (j.contains("response_bound") && !j["response_bound"].is_null()) c.response_bound = j["response_bound"].get<double>();
  c.tol_kkt = j.value("tol_kkt", c.tol_kkt);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.rank_tol = j.value("rank_tol", c.rank_tol);
  if (j.contains("ball_radii") && !j["ball_radii"].is_null()) c.ball_radii = j["ball_radii"].get<std::vector<double>>();
  c.seed = j.value("seed", c.seed);
  if (j.contains("N_override") && !j["N_override"].is_null()) c.N_override = j["N_override"].get<int>();
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

Json fit_config_to_json(const FitConfig& c) {
  Json j{{"tau", c.tau},         {"A", c.A},       {"loss", c.loss},   {"tol_kkt", c.tol_kkt},
         {"max_iter", c.max_iter}, {"rank_tol", c.rank_tol}, {"seed", c.seed}, {"threads", c.threads}};
  j["response_bound"] = std::isfinite(c.response_bound) ? Json(c.response_bound) : Json(nullptr);
  j["ball_radii"] = c.ball_radii ? Json(*c.ball_radii) : Json(nullptr);
  j["N_override"] = c.N_override ? Json(*c.N_override) : Json(nullptr);
  return j;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  SyntheticSpec s;
  if (j.is_null()) return s;
  require(j.is_object(), "synthetic spec must be an object");
  s.N = j.value("N", s.N);
  s.d = j.value("d", s.d);
  s.alpha = j.value("alpha", s.alpha);
  s.n = j.value("n", s.n);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.logit = j.value("logit", s.logit);
  if (j.contains("design")) s.design = design_kind_from_string(j["design"].get<std::string>());
  s.angle = j.value("angle", s.angle);
  if (j.contains("latent_dim") && !j["latent_dim"].is_null()) s.latent_dim = j["latent_dim"].get<int>();
  s.seed = j.value("seed", s.seed);
  s.fourier_modes = j.value("fourier_modes", s.fourier_modes);
  s.validate();
  return s;
}

Json synthetic_spec_to_json(const SyntheticSpec& s) {
  Json j{{"N", s.N},         {"d", s.d},         {"alpha", s.alpha}, {"n", s.n},
         {"noise_sigma", s.noise_sigma}, {"logit", s.logit}, {"design", to_string(s.design)},
         {"angle", s.angle}, {"seed", s.seed},   {"fourier_modes", s.fourier_modes}};
  j["latent_dim"] = s.latent_dim ? Json(*s.latent_dim) : Json(nullptr);
  return j;
}

Json truth_to_json(const Truth& t) {
  Json comps = Json::array();
  for (const auto& c : t.components)
    comps.push_back({{"coordinate", c.coordinate}, {"coefficients", vector_to_json(c.coefficients)},
                     {"sobolev_norm2", c.sobolev_norm2(t.alpha)}});
  return {{"active_set", t.active_set}, {"alpha", t.alpha}, {"logit", t.logit}, {"components", comps}};
}

Truth truth_from_json(const Json& j) {
  Truth t;
  t.active_set = j.at("active_set").get<std::vector<int>>();
  t.alpha = j.value("alpha", 1.0);
  t.logit = j.value("logit", false);
  for (const auto& c : j.at("components")) {
    Component comp;
    comp.coordinate = c.at("coordinate").get<int>();
    comp.coefficients = vector_from_json(c.at("coefficients"));
    t.components.push_back(std::move(comp));
  }
  return t;
}

Json reg_params_to_json(const RegParams& reg, const KernelDictionary& dict) {
  require(static_cast<int>(reg.eps_hat.size()) == dict.size(), "regularisation parameters do not match the dictionary");
  Json kernels = Json::object();
  for (int j = 0; j < dict.size(); ++j) {
    Json entry{{"eps_hat", reg.eps_hat[static_cast<std::size_t>(j)]},
               {"floor", reg.floor},
               {"n_eigs_used", reg.n_eigs_used.empty() ? 0 : reg.n_eigs_used[static_cast<std::size_t>(j)]}};
    if (reg.eps_breve) entry["eps_breve"] = (*reg.eps_breve)[static_cast<std::size_t>(j)];
    kernels[dict[j].id()] = entry;
  }
  return kernels;
}

Json geometry_report_to_json(const GeometryReport& r) {
  auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  Json j{{"J", r.J},
         {"kappa", r.kappa},
         {"kappa_method", r.kappa_exact ? "exact" : "heuristic"},
         {"rho", r.rho},
         {"beta_2_infty_upper", num(r.beta_2_infty_upper)},
         {"beta_2_infty_upper_infinite", !std::isfinite(r.beta_2_infty_upper)},
         {"b", r.b},
         {"beta_2_b_lower", num(r.beta_2_b_lower)},
         {"beta_2_b_direction", "lower"},
         {"span_restricted", r.span_restricted},
         {"evaluation_points", r.m}};
  if (r.d) {
    j["d"] = *r.d;
    j["delta_d"] = *r.delta_d;
    j["delta_d_method"] = r.delta_d_exhaustive ? "exact" : "sampled_lower_bound";
  }
  if (r.beta_b) {
    j["beta_b"] = num(*r.beta_b);
    j["beta_b_direction"] = "lower";
  }
  return j;
}

Json model_to_json(const AdditiveModelFit& model, const KernelDictionary& dict, const FitConfig& cfg) {
  Json blocks = Json::array();
  const auto coef = model.dual_coefficients();
  for (int j = 0; j < dict.size(); ++j)
    blocks.push_back({{"id", dict[j].id()},
                      {"v", vector_to_json(model.v[static_cast<std::size_t>(j)])},
                      {"coefficients", vector_to_json(coef[static_cast<std::size_t>(j)])},
                      {"eps_hat", model.eps_used.eps_hat[static_cast<std::size_t>(j)]}});
  Json eps{{"A", model.eps_used.A}, {"N", model.eps_used.N}, {"floor", model.eps_used.floor},
           {"eps_hat", model.eps_used.eps_hat}};
  return {{"blocks", blocks},
          {"eps_used", eps},
          {"tau", model.eps_used.tau},
          {"active_set", model.active_set},
          {"kkt_residual", model.kkt_residual},
          {"converged", model.converged},
          {"iterations", model.iterations},
          {"objective", model.objective()},
          {"loss", model.loss},
          {"fit_config", fit_config_to_json(cfg)},
          {"dictionary", dictionary_to_json(dict)},
          {"X_train", matrix_to_json(model.X_train)}};
}

StoredModel model_from_json(const Json& j) {
  StoredModel m;
  m.dict = dictionary_from_json(j.at("dictionary"));
  m.X_train = matrix_from_json(j.at("X_train"), m.dict.input_dimension());
  const auto& blocks = j.at("blocks");
  require(static_cast<int>(blocks.size()) == m.dict.size(), "model blocks do not match its dictionary");
  for (const auto& b : blocks) {
    m.v.push_back(vector_from_json(b.at("v")));
    m.coefficients.push_back(vector_from_json(b.at("coefficients")));
    require(m.coefficients.back().size() == m.X_train.rows(), "stored coefficients do not match X_train");
  }
  m.active_set = j.at("active_set").get<std::vector<int>>();
  m.tau = j.value("tau", 1.0);
  m.kkt_residual = j.value("kkt_residual", 0.0);
  return m;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError("invalid JSON in '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace smkl
