#include "smkl/solver.hpp"

#include "smkl/parallel.hpp"
#include "smkl/prox.hpp"

#include <limits>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace smkl {

int BlockParametrization::total_rank() const {
  int r = 0;
  for (const auto& b : blocks) r += static_cast<int>(b.s.size());
  return r;
}

BlockParametrization parametrize(std::span<const GramSpectrum> spectra, double rank_tol) {
  require(!spectra.empty(), "parametrize needs at least one spectrum");
  require(rank_tol >= 0.0, "rank_tol must be non-negative");
  BlockParametrization p;
  p.n = spectra.front().n;
  const double n = static_cast<double>(p.n);
  for (const auto& sp : spectra) {
    if (sp.n != p.n) throw InputError("spectra were computed at different sample sizes");
    const double top = sp.eigenvalues.size() ? sp.eigenvalues(0) : 0.0;
    Eigen::Index r = 0;
    if (top > 0.0)
      while (r < sp.eigenvalues.size() && sp.eigenvalues(r) > rank_tol * top) ++r;
    BlockParametrization::Block b;
    b.U = sp.eigenvectors.leftCols(r);
    b.s = sp.eigenvalues.head(r).cwiseSqrt();
    b.sqrt_d = b.s * std::sqrt(n);
    p.blocks.push_back(std::move(b));
  }
  return p;
}

void FitConfig::validate() const {
  require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  require(tol_kkt > 0.0, "tol_kkt must be positive");
  require(max_iter >= 1, "max_iter must be positive");
  require(A >= 1.0, "A must be at least 1");
  require(loss == "quadratic" || loss == "logit", "unknown loss '" + loss + "'");
  if (ball_radii)
    for (double r : *ball_radii) require(r > 0.0, "ball radii must be positive");
}

std::vector<Vector> AdditiveModelFit::dual_coefficients() const {
  std::vector<Vector> c;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const auto& b = param.blocks[j];
    c.push_back(b.U * v[j].cwiseQuotient(b.sqrt_d));
  }
  return c;
}

std::vector<double> AdditiveModelFit::empirical_norms() const {
  std::vector<double> out;
  for (std::size_t j = 0; j < v.size(); ++j) out.push_back(param.blocks[j].s.cwiseProduct(v[j]).norm());
  return out;
}

std::vector<double> AdditiveModelFit::rkhs_norms() const {
  std::vector<double> out;
  for (const auto& vj : v) out.push_back(vj.norm());
  return out;
}

namespace {

// Concatenated view of the problem: x stacks the block vectors, B = [U_j diag(sqrt_d_j)].
struct Problem {
  const BlockParametrization& param;
  const Vector& Y;
  const LossModel& loss;
  std::vector<double> alpha;  // tau eps_j
  std::vector<double> beta;   // tau^2 eps_j^2
  std::optional<std::vector<double>> radii;
  Matrix B;
  std::vector<Eigen::Index> offset;
  double inv_n;

  Problem(const BlockParametrization& p, const Vector& y, const LossModel& l, std::span<const double> eps, double tau,
          std::optional<std::vector<double>> ball_radii)
      : param(p), Y(y), loss(l), radii(std::move(ball_radii)), inv_n(1.0 / p.n) {
    require(static_cast<int>(eps.size()) == p.size(), "one eps per block required");
    require(y.size() == p.n, "response length must equal n");
    if (radii) require(static_cast<int>(radii->size()) == p.size(), "one ball radius per block required");
    for (double e : eps) {
      require(e >= 0.0 && std::isfinite(e), "eps must be finite and non-negative");
      alpha.push_back(tau * e);
      beta.push_back(tau * tau * e * e);
    }
    Eigen::Index total = 0;
    for (const auto& b : p.blocks) {
      offset.push_back(total);
      total += b.s.size();
    }
    offset.push_back(total);
    B.resize(p.n, total);
    for (std::size_t j = 0; j < p.blocks.size(); ++j) {
      const auto& b = p.blocks[j];
      B.middleCols(offset[j], b.s.size()) = b.U * b.sqrt_d.asDiagonal();
    }
  }

  int blocks() const { return param.size(); }
  Eigen::Index dim() const { return offset.back(); }
  auto seg(Vector& x, std::size_t j) const { return x.segment(offset[j], offset[j + 1] - offset[j]); }
  auto seg(const Vector& x, std::size_t j) const { return x.segment(offset[j], offset[j + 1] - offset[j]); }

  double smooth(const Vector& F) const {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < F.size(); ++i) sum += loss.value(Y(i), F(i));
    return sum * inv_n;
  }

  Vector gradient(const Vector& F) const {
    Vector d(F.size());
    for (Eigen::Index i = 0; i < F.size(); ++i) d(i) = loss.d1(Y(i), F(i));
    return inv_n * (B.transpose() * d);
  }

  double penalty(const Vector& x) const {
    double sum = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      const auto xj = seg(x, j);
      const auto& s = param.blocks[j].s;
      sum += alpha[j] * s.cwiseProduct(xj).norm() + beta[j] * xj.norm();
    }
    return sum;
  }

  Vector prox_step(const Vector& y, const Vector& g, double L) const {
    Vector z(dim());
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      const Vector target = seg(y, j) - seg(g, j) / L;
      Vector vj = block_prox(target, alpha[j] / L, beta[j] / L, param.blocks[j].s);
      if (radii) {
        const double r = vj.norm();
        if (r > (*radii)[j]) vj *= (*radii)[j] / r;
      }
      seg(z, j) = vj;
    }
    return z;
  }

  double kkt(const Vector& x, const Vector& g) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      const Vector xj = seg(x, j);
      const Vector gj = seg(g, j);
      const Vector& s = param.blocks[j].s;
      double res;
      const double r = xj.norm();
      if (r == 0.0) {
        res = std::max(0.0, ellipsoid_distance(-gj, alpha[j] * s) - beta[j]);
      } else {
        const Vector sx = s.cwiseProduct(xj);
        const double rho = sx.norm();
        Vector st = gj + (beta[j] / r) * xj;
        if (rho > 0.0) {
          st += (alpha[j] / rho) * s.cwiseProduct(sx);
          if (radii && r >= (*radii)[j] * (1.0 - 1e-12)) {
            // normal cone of the ball: add lambda x/|x| with lambda >= 0
            const Vector unit = xj / r;
            const double lambda = std::max(0.0, -st.dot(unit));
            st += lambda * unit;
          }
          res = st.norm();
        } else {
          res = ellipsoid_distance(-st, alpha[j] * s);
        }
      }
      worst = std::max(worst, res);
    }
    return worst;
  }

  std::vector<Vector> split(const Vector& x) const {
    std::vector<Vector> out;
    for (std::size_t j = 0; j < alpha.size(); ++j) out.emplace_back(seg(x, j));
    return out;
  }

  Vector join(const std::vector<Vector>& v) const {
    require(static_cast<int>(v.size()) == blocks(), "one coefficient vector per block required");
    Vector x(dim());
    for (std::size_t j = 0; j < v.size(); ++j) {
      require(v[j].size() == offset[j + 1] - offset[j], "coefficient vector has the wrong rank");
      seg(x, j) = v[j];
    }
    return x;
  }

  // Largest eigenvalue of B^T B by power iteration.
  double spectral_norm2() const {
    if (dim() == 0) return 0.0;
    Vector x = Vector::Ones(dim()).normalized();
    double est = 0.0;
    for (int it = 0; it < 50; ++it) {
      Vector y = B.transpose() * (B * x);
      const double nrm = y.norm();
      if (nrm == 0.0) return 0.0;
      const double prev = est;
      est = nrm;
      x = y / nrm;
      if (std::abs(est - prev) <= 1e-6 * est) break;
    }
    return est;
  }
};

}  // namespace

double objective_value(const BlockParametrization& param, const Vector& Y, const LossModel& loss,
                       std::span<const double> eps, double tau, const std::vector<Vector>& v) {
  const Problem prob(param, Y, loss, eps, tau, std::nullopt);
  const Vector x = prob.join(v);
  return prob.smooth(prob.B * x) + prob.penalty(x);
}

Vector fitted_values(const BlockParametrization& param, const std::vector<Vector>& v) {
  require(static_cast<int>(v.size()) == param.size(), "one coefficient vector per block required");
  Vector F = Vector::Zero(param.n);
  for (std::size_t j = 0; j < v.size(); ++j) {
    const auto& b = param.blocks[j];
    if (v[j].size()) F += b.U * b.sqrt_d.cwiseProduct(v[j]);
  }
  return F;
}

double kkt_residual(const BlockParametrization& param, const Vector& Y, const LossModel& loss,
                    std::span<const double> eps, double tau, const std::vector<Vector>& v,
                    const std::optional<std::vector<double>>& ball_radii) {
  const Problem prob(param, Y, loss, eps, tau, ball_radii);
  const Vector x = prob.join(v);
  return prob.kkt(x, prob.gradient(prob.B * x));
}

AdditiveModelFit fit(const BlockParametrization& param, const Vector& Y, const RegParams& reg, const FitConfig& cfg) {
  cfg.validate();
  require(reg.n == param.n, "regularisation parameters were computed for a different n");
  require(static_cast<int>(reg.eps_hat.size()) == param.size(), "one eps-hat per block required");
  const LossModel loss = LossModel::by_name(cfg.loss, cfg.response_bound);
  if (loss.kind() == LossKind::logit)
    for (Eigen::Index i = 0; i < Y.size(); ++i)
      require(Y(i) == 1.0 || Y(i) == -1.0, "logit loss expects responses in {-1, +1}");

  const Problem prob(param, Y, loss, reg.eps_hat, cfg.tau, cfg.ball_radii);
  const Eigen::Index dim = prob.dim();

  AdditiveModelFit out;
  out.eps_used = reg;
  out.eps_used.tau = cfg.tau;
  out.param = param;
  out.loss = cfg.loss;

  Vector x = Vector::Zero(dim);
  Vector Fx = Vector::Zero(param.n);
  double obj_x = prob.smooth(Fx);
  out.objective_trace.push_back(obj_x);

  double L = std::max(loss.curvature_bound() * prob.spectral_norm2() * prob.inv_n * 1.01, 1e-12);
  Vector y = x;
  Vector Fy = Fx;
  double t = 1.0;
  bool converged = false;
  int iter = 0;
  Vector z, Fz;

  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    const Vector gy = prob.gradient(Fy);
    const double fy = prob.smooth(Fy);
    double fz = 0.0;
    for (int bt = 0;; ++bt) {
      z = prob.prox_step(y, gy, L);
      Fz = prob.B * z;
      fz = prob.smooth(Fz);
      const Vector d = z - y;
      if (fz <= fy + gy.dot(d) + 0.5 * L * d.squaredNorm() + 1e-13 * std::abs(fy)) break;
      if (bt > 60) throw NumericalError("fit: backtracking line search failed");
      L *= 2.0;
    }
    const double obj_z = fz + prob.penalty(z);
    if (!std::isfinite(obj_z)) {
      std::ostringstream msg;
      msg << "fit: non-finite objective at iteration " << iter << " (last finite objective " << obj_x << ")";
      throw NumericalError(msg.str());
    }

    const double mapping_norm = L * (z - y).norm();
    if (mapping_norm <= cfg.tol_kkt) {
      const double res = prob.kkt(z, prob.gradient(Fz));
      if (res <= cfg.tol_kkt && obj_z <= obj_x + 1e-12 * std::abs(obj_x)) {
        x = z;
        Fx = Fz;
        obj_x = std::min(obj_x, obj_z);
        out.objective_trace.push_back(obj_x);
        converged = true;
        break;
      }
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // ties within roundoff count as descent; otherwise small steps stall below ~sqrt(eps)
    const bool improved = obj_z <= obj_x + 8.0 * std::numeric_limits<double>::epsilon() * std::abs(obj_x);
    // restart momentum when the step does not descend or turns against the last move
    const bool restart = !improved || (y - z).dot(z - x) > 0.0;
    Vector x_prev = x;
    Vector Fx_prev = Fx;
    if (improved) {
      x = z;
      Fx = Fz;
      obj_x = obj_z;
    }
    if (restart) {
      t = 1.0;
      y = x;
      Fy = Fx;
    } else {
      const double c1 = t / t_next;
      const double c2 = (t - 1.0) / t_next;
      y = x + c1 * (z - x) + c2 * (x - x_prev);
      Fy = Fx + c1 * (Fz - Fx) + c2 * (Fx - Fx_prev);
      t = t_next;
    }
    out.objective_trace.push_back(obj_x);
  }

  out.iterations = std::min(iter, cfg.max_iter);
  out.converged = converged;
  out.v = prob.split(x);
  out.fitted = Fx;
  out.kkt_residual = prob.kkt(x, prob.gradient(Fx));
  for (int j = 0; j < param.size(); ++j)
    if (out.v[static_cast<std::size_t>(j)].squaredNorm() > 0.0) out.active_set.push_back(j);
  return out;
}

AdditiveModelFit fit(const PointSet& X, const Vector& Y, const KernelDictionary& dict, const RegParams& reg,
                     const FitConfig& cfg) {
  require(X.rows() == Y.size(), "X and Y differ in length");
  const auto spectra = dictionary_spectra(dict, X, cfg.threads);
  auto model = fit(parametrize(spectra, cfg.rank_tol), Y, reg, cfg);
  model.X_train = X;
  return model;
}

AdditiveModelFit fit(const PointSet& X, const Vector& Y, const KernelDictionary& dict, const FitConfig& cfg) {
  require(X.rows() == Y.size(), "X and Y differ in length");
  const auto spectra = dictionary_spectra(dict, X, cfg.threads);
  const int N = cfg.N_override.value_or(dict.size());
  const RegParams reg = eps_hat_all(spectra, cfg.A, N);
  auto model = fit(parametrize(spectra, cfg.rank_tol), Y, reg, cfg);
  model.X_train = X;
  return model;
}

Prediction predict(const KernelDictionary& dict, const PointSet& X_train, const std::vector<Vector>& coefficients,
                   const PointSet& x_new) {
  require(dict.size() == static_cast<int>(coefficients.size()), "dictionary does not match the coefficients");
  Prediction p;
  p.per_block = Matrix::Zero(x_new.rows(), dict.size());
  for (int j = 0; j < dict.size(); ++j) {
    const Vector& c = coefficients[static_cast<std::size_t>(j)];
    require(c.size() == X_train.rows(), "coefficient vector length must equal the number of training points");
    if (c.squaredNorm() == 0.0) continue;
    p.per_block.col(j) = kernel_expansion(dict[j], X_train, c, x_new);
  }
  p.total = p.per_block.rowwise().sum();
  return p;
}

Prediction predict(const AdditiveModelFit& model, const KernelDictionary& dict, const PointSet& x_new) {
  require(dict.size() == static_cast<int>(model.v.size()), "dictionary does not match the model");
  require(model.X_train.rows() == model.param.n, "model does not retain its training points");
  return predict(dict, model.X_train, model.dual_coefficients(), x_new);
}

double kkt_residual(const AdditiveModelFit& model, const Vector& Y, const RegParams& reg, const FitConfig& cfg) {
  const LossModel loss = LossModel::by_name(cfg.loss, cfg.response_bound);
  return kkt_residual(model.param, Y, loss, reg.eps_hat, cfg.tau, model.v, cfg.ball_radii);
}

TauSelection select_tau(const PointSet& X, const Vector& Y, const KernelDictionary& dict, const FitConfig& cfg,
                        std::vector<double> grid, double holdout_fraction) {
  require(!grid.empty(), "tau grid must be non-empty");
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0, "holdout fraction must lie in (0, 1)");
  const Eigen::Index n = X.rows();
  const Eigen::Index n_val = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::round(holdout_fraction * n)));
  require(n - n_val >= 2, "not enough observations for a hold-out split");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(cfg.seed, 0x7a0));
  std::shuffle(idx.begin(), idx.end(), rng);
  auto take = [&](Eigen::Index from, Eigen::Index count, PointSet& Xs, Vector& Ys) {
    Xs.resize(count, X.cols());
    Ys.resize(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      Xs.row(i) = X.row(idx[static_cast<std::size_t>(from + i)]);
      Ys(i) = Y(idx[static_cast<std::size_t>(from + i)]);
    }
  };
  PointSet X_fit, X_val;
  Vector Y_fit, Y_val;
  take(0, n - n_val, X_fit, Y_fit);
  take(n - n_val, n_val, X_val, Y_val);

  const auto spectra = dictionary_spectra(dict, X_fit, cfg.threads);
  const RegParams reg = eps_hat_all(spectra, cfg.A, cfg.N_override.value_or(dict.size()));
  const BlockParametrization param = parametrize(spectra, cfg.rank_tol);
  const LossModel loss = LossModel::by_name(cfg.loss, cfg.response_bound);

  TauSelection sel;
  sel.grid = grid;
  double best = std::numeric_limits<double>::infinity();
  for (double tau : grid) {
    FitConfig c = cfg;
    c.tau = tau;
    auto model = fit(param, Y_fit, reg, c);
    model.X_train = X_fit;
    const double risk = empirical_risk(loss, Y_val, predict(model, dict, X_val).total);
    sel.validation_risk.push_back(risk);
    if (risk < best) {
      best = risk;
      sel.best_tau = tau;
    }
  }
  return sel;
}

}  // namespace smkl
