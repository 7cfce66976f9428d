#include "smkl/geometry.hpp"

#include "smkl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace smkl {

namespace {

void check_indices(const WhitenedBasis& basis, const std::vector<int>& idx, const char* what) {
  std::vector<int> sorted = idx;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InputError(std::string(what) + " contains repeated block indices");
  for (int j : idx)
    if (j < 0 || j >= basis.size()) throw InputError(std::string(what) + " refers to a block outside the basis");
}

std::vector<int> complement(const WhitenedBasis& basis, const std::vector<int>& J) {
  std::vector<int> out;
  for (int j = 0; j < basis.size(); ++j)
    if (std::find(J.begin(), J.end(), j) == J.end()) out.push_back(j);
  return out;
}

Matrix stacked(const WhitenedBasis& basis, const std::vector<int>& blocks) {
  Eigen::Index cols = 0;
  for (int j : blocks) cols += basis.rank(j);
  Matrix W(basis.m, cols);
  Eigen::Index at = 0;
  for (int j : blocks) {
    W.middleCols(at, basis.rank(j)) = basis.blocks[static_cast<std::size_t>(j)];
    at += basis.rank(j);
  }
  return W;
}

// Orthonormal basis (w.r.t. the evaluation average) of the span of the listed blocks.
Matrix orthonormal_span(const WhitenedBasis& basis, const std::vector<int>& blocks) {
  const Matrix W = stacked(basis, blocks) / std::sqrt(static_cast<double>(basis.m));
  Eigen::BDCSVD<Matrix> svd(W, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > 1e-10 * sv(0)) ++r;
  return svd.matrixU().leftCols(r);
}

double min_eigenvalue(const Matrix& G) {
  if (G.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Ratio maximisation over the cone sum_{out} w_j |x_j| <= b sum_{in} w_j |x_j| in whitened
// coordinates, where |h_j| = |x_j| and |sum h_j|^2 = x^T G x.
class ConeAscent {
 public:
  enum class Numerator { root_sum_squares, weighted_sum };

  ConeAscent(const WhitenedBasis& basis, const std::vector<int>& J, std::vector<double> weights, Numerator kind)
      : weights_(std::move(weights)), kind_(kind) {
    std::vector<int> all(static_cast<std::size_t>(basis.size()));
    std::iota(all.begin(), all.end(), 0);
    G_ = joint_gram(basis, all);
    in_.assign(all.size(), false);
    for (int j : J) in_[static_cast<std::size_t>(j)] = true;
    Eigen::Index at = 0;
    for (int j = 0; j < basis.size(); ++j) {
      offset_.push_back(at);
      at += basis.rank(j);
    }
    offset_.push_back(at);
  }

  Eigen::Index dim() const { return G_.rows(); }
  int blocks() const { return static_cast<int>(in_.size()); }
  bool in(int j) const { return in_[static_cast<std::size_t>(j)]; }
  Eigen::Index begin(int j) const { return offset_[static_cast<std::size_t>(j)]; }
  Eigen::Index width(int j) const { return offset_[static_cast<std::size_t>(j) + 1] - begin(j); }
  const Matrix& gram() const { return G_; }

  double numerator(const Vector& x) const {
    double acc = 0.0;
    for (int j = 0; j < blocks(); ++j) {
      if (!in(j)) continue;
      const double nrm = x.segment(begin(j), width(j)).norm();
      acc += kind_ == Numerator::root_sum_squares ? nrm * nrm : weights_[static_cast<std::size_t>(j)] * nrm;
    }
    return kind_ == Numerator::root_sum_squares ? std::sqrt(acc) : acc;
  }

  double ratio(const Vector& x) const {
    const double num = numerator(x);
    if (num <= 0.0) return 0.0;
    const double q = x.dot(G_ * x);
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    return num / std::sqrt(q);
  }

  // Shrinks the off-J part radially until the cone constraint holds; false if J carries no mass.
  bool retract(Vector& x, double b) const {
    double inside = 0.0, outside = 0.0;
    for (int j = 0; j < blocks(); ++j) {
      const double w = weights_[static_cast<std::size_t>(j)] * x.segment(begin(j), width(j)).norm();
      (in(j) ? inside : outside) += w;
    }
    if (inside <= 0.0) return false;
    if (outside > b * inside) {
      const double shrink = outside > 0.0 ? b * inside / outside : 0.0;
      for (int j = 0; j < blocks(); ++j)
        if (!in(j)) x.segment(begin(j), width(j)) *= shrink;
    }
    const double nrm = x.norm();
    if (nrm == 0.0) return false;
    x /= nrm;
    return true;
  }

  Vector log_gradient(const Vector& x) const {
    Vector g = Vector::Zero(dim());
    const double num = numerator(x);
    for (int j = 0; j < blocks(); ++j) {
      if (!in(j)) continue;
      const auto xj = x.segment(begin(j), width(j));
      if (kind_ == Numerator::root_sum_squares) {
        g.segment(begin(j), width(j)) = xj / (num * num);
      } else {
        const double nrm = xj.norm();
        if (nrm > 0.0) g.segment(begin(j), width(j)) = (weights_[static_cast<std::size_t>(j)] / (num * nrm)) * xj;
      }
    }
    const Vector Gx = G_ * x;
    g -= Gx / x.dot(Gx);
    return g;
  }

  // Projected ascent from x (already feasible); returns the best feasible point visited.
  std::pair<double, Vector> climb(Vector x, double b, int iterations) const {
    double best = ratio(x);
    Vector best_x = x;
    for (int it = 1; it <= iterations; ++it) {
      const Vector g = log_gradient(x);
      const double gn = g.norm();
      if (!std::isfinite(gn) || gn < 1e-14) break;
      Vector cand = x + (1.0 / std::sqrt(static_cast<double>(it))) * (g / gn);
      if (!retract(cand, b)) break;
      x = cand;
      const double r = ratio(x);
      if (r > best) {
        best = r;
        best_x = x;
      }
    }
    return {best, best_x};
  }

 private:
  Matrix G_;
  std::vector<double> weights_;
  std::vector<bool> in_;
  std::vector<Eigen::Index> offset_;
  Numerator kind_;
};

// Maximiser of |x_J|^2 / x^T G x with the off-J part unconstrained (Schur complement).
Vector unconstrained_start(const ConeAscent& cone) {
  std::vector<Eigen::Index> in_idx, out_idx;
  for (int j = 0; j < cone.blocks(); ++j)
    for (Eigen::Index k = 0; k < cone.width(j); ++k) (cone.in(j) ? in_idx : out_idx).push_back(cone.begin(j) + k);
  const Matrix& G = cone.gram();
  auto sub = [&](const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
    Matrix M(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
    for (std::size_t a = 0; a < r.size(); ++a)
      for (std::size_t b = 0; b < c.size(); ++b) M(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = G(r[a], c[b]);
    return M;
  };
  const Matrix Gjj = sub(in_idx, in_idx);
  Vector x = Vector::Zero(cone.dim());
  Vector xin;
  Vector xout;
  if (out_idx.empty()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Gjj);
    xin = es.eigenvectors().col(0);
  } else {
    const Matrix Gjo = sub(in_idx, out_idx);
    const Matrix Goo = sub(out_idx, out_idx);
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Goo);
    const Matrix coupling = cod.solve(Gjo.transpose());
    Matrix schur = Gjj - Gjo * coupling;
    schur = 0.5 * (schur + schur.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(schur);
    xin = es.eigenvectors().col(0);
    xout = -coupling * xin;
  }
  for (std::size_t a = 0; a < in_idx.size(); ++a) x(in_idx[a]) = xin(static_cast<Eigen::Index>(a));
  for (std::size_t a = 0; a < out_idx.size(); ++a) x(out_idx[a]) = xout(static_cast<Eigen::Index>(a));
  return x;
}

// Minimiser of x^T G x over unit x supported on J (the b = 0 cone).
Vector subspace_start(const ConeAscent& cone) {
  std::vector<Eigen::Index> idx;
  for (int j = 0; j < cone.blocks(); ++j)
    if (cone.in(j))
      for (Eigen::Index k = 0; k < cone.width(j); ++k) idx.push_back(cone.begin(j) + k);
  Matrix Gjj(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b)
      Gjj(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cone.gram()(idx[a], idx[b]);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Gjj);
  Vector x = Vector::Zero(cone.dim());
  for (std::size_t a = 0; a < idx.size(); ++a) x(idx[a]) = es.eigenvectors()(static_cast<Eigen::Index>(a), 0);
  return x;
}

std::pair<double, Vector> run_ascent(const ConeAscent& cone, double b, const AscentOptions& opt,
                                     std::vector<Vector> starts) {
  for (int r = 0; r < opt.restarts; ++r) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(r)));
    std::normal_distribution<double> normal;
    Vector x(cone.dim());
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = normal(rng);
    starts.push_back(std::move(x));
  }
  double best = 0.0;
  Vector best_x;
  for (auto& x : starts) {
    if (!cone.retract(x, b)) continue;
    auto [value, at] = cone.climb(x, b, opt.iterations);
    if (value > best || best_x.size() == 0) {
      best = value;
      best_x = std::move(at);
    }
  }
  return {best, best_x};
}

void check_J(const WhitenedBasis& basis, const std::vector<int>& J) {
  require(!J.empty(), "index set J must be non-empty");
  check_indices(basis, J, "J");
}

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

double isometry_defect(const Matrix& G) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
  const double lo = std::max(0.0, es.eigenvalues()(0));
  const double hi = std::max(0.0, es.eigenvalues()(G.rows() - 1));
  return std::max({0.0, 1.0 - std::sqrt(lo), std::sqrt(hi) - 1.0});
}

}  // namespace

bool WhitenedBasis::one_dimensional() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const Matrix& b) { return b.cols() == 1; });
}

WhitenedBasis whiten_blocks(const std::vector<Matrix>& values, double tol) {
  require(!values.empty(), "whitening needs at least one block");
  WhitenedBasis out;
  out.m = static_cast<int>(values.front().rows());
  require(out.m >= 1, "whitening needs at least one evaluation point");
  for (std::size_t j = 0; j < values.size(); ++j) {
    const Matrix& V = values[j];
    require(V.rows() == out.m, "all blocks must be evaluated on the same sample");
    require(V.cols() >= 1, "blocks must have at least one function");
    const Matrix C = V.transpose() * V / static_cast<double>(out.m);
    Eigen::SelfAdjointEigenSolver<Matrix> es(C);
    const double top = es.eigenvalues().maxCoeff();
    const double bottom = es.eigenvalues().minCoeff();
    if (!(top > 0.0) || bottom <= tol * top) {
      std::ostringstream msg;
      msg << "whitening failed for block " << j << ": within-block Gram is rank deficient (eigenvalue ratio "
          << (top > 0.0 ? bottom / top : 0.0) << ")";
      throw DataError(msg.str());
    }
    out.blocks.push_back(V * es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal());
  }
  return out;
}

WhitenedBasis basis_from_dictionary(const KernelDictionary& dict, const PointSet& span_points,
                                    const PointSet& eval_points, int max_rank) {
  require(max_rank >= 1, "max_rank must be positive");
  require(dict.size() >= 1, "dictionary is empty");
  std::vector<Matrix> values;
  bool restricted = false;
  for (const Kernel& k : dict) {
    if (k.has_features() && k.feature_dimension() <= max_rank) {
      values.push_back(k.features(eval_points));
      continue;
    }
    restricted = true;
    const GramSpectrum sp = kernel_spectrum(k, span_points);
    Eigen::Index r = 0;
    const double top = sp.eigenvalues.size() ? sp.eigenvalues(0) : 0.0;
    while (r < std::min<Eigen::Index>(max_rank, sp.eigenvectors.cols()) && sp.eigenvalues(r) > 1e-10 * top) ++r;
    if (r == 0) throw DataError("kernel '" + k.id() + "' has a zero Gram matrix on the span sample");
    // unit-RKHS-norm functions sum_i U_ik K(., X_i) / sqrt(n lambda_k)
    const Vector inv = (sp.eigenvalues.head(r) * static_cast<double>(sp.n)).cwiseSqrt().cwiseInverse();
    values.push_back(cross_gram(k, eval_points, span_points) * sp.eigenvectors.leftCols(r) * inv.asDiagonal());
  }
  WhitenedBasis out = whiten_blocks(values);
  out.span_restricted = restricted;
  return out;
}

Matrix joint_gram(const WhitenedBasis& basis, const std::vector<int>& blocks) {
  check_indices(basis, blocks, "block list");
  const Matrix W = stacked(basis, blocks);
  Matrix G = W.transpose() * W / static_cast<double>(basis.m);
  return 0.5 * (G + G.transpose());
}

double canonical_cosine(const WhitenedBasis& basis, const std::vector<int>& I, const std::vector<int>& J) {
  check_indices(basis, I, "I");
  check_indices(basis, J, "J");
  for (int i : I) require(std::find(J.begin(), J.end(), i) == J.end(), "I and J must be disjoint");
  if (I.empty() || J.empty()) return 0.0;
  const Matrix Qi = orthonormal_span(basis, I);
  const Matrix Qj = orthonormal_span(basis, J);
  Eigen::JacobiSVD<Matrix> svd(Qi.transpose() * Qj);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

KappaValue kappa(const WhitenedBasis& basis, const std::vector<int>& J) {
  check_J(basis, J);
  return {std::clamp(min_eigenvalue(joint_gram(basis, J)), 0.0, 1.0), true};
}

double beta_2_infty_upper(const WhitenedBasis& basis, const std::vector<int>& J) {
  const double k = kappa(basis, J).value;
  const auto rest = complement(basis, J);
  const double rho = rest.empty() ? 0.0 : canonical_cosine(basis, J, rest);
  const double denom = k * (1.0 - rho * rho);
  if (!(denom > 1e-14)) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(denom);
}

double beta_2_b_lower(const WhitenedBasis& basis, const std::vector<int>& J, double b, const AscentOptions& opt) {
  check_J(basis, J);
  require(b >= 0.0, "b must be non-negative");
  require(opt.restarts >= 0 && opt.iterations >= 0, "ascent options must be non-negative");
  const ConeAscent cone(basis, J, std::vector<double>(static_cast<std::size_t>(basis.size()), 1.0),
                        ConeAscent::Numerator::root_sum_squares);
  return run_ascent(cone, b, opt, {subspace_start(cone), unconstrained_start(cone)}).first;
}

std::vector<double> beta_2_b_lower_path(const WhitenedBasis& basis, const std::vector<int>& J,
                                        const std::vector<double>& b_grid, const AscentOptions& opt) {
  check_J(basis, J);
  require(!b_grid.empty(), "b grid must be non-empty");
  for (std::size_t i = 0; i < b_grid.size(); ++i) {
    require(b_grid[i] >= 0.0, "b must be non-negative");
    if (i) require(b_grid[i] >= b_grid[i - 1], "b grid must be ascending");
  }
  const ConeAscent cone(basis, J, std::vector<double>(static_cast<std::size_t>(basis.size()), 1.0),
                        ConeAscent::Numerator::root_sum_squares);
  std::vector<double> out;
  Vector carry;
  double carry_value = 0.0;
  for (std::size_t i = 0; i < b_grid.size(); ++i) {
    AscentOptions o = opt;
    o.seed = derive_seed(opt.seed, i);
    std::vector<Vector> starts{subspace_start(cone), unconstrained_start(cone)};
    if (carry.size()) starts.push_back(carry);
    auto [value, at] = run_ascent(cone, b_grid[i], o, std::move(starts));
    // the previous optimum lies in this (larger) cone
    if (value < carry_value) {
      value = carry_value;
      at = carry;
    }
    out.push_back(value);
    carry = at;
    carry_value = value;
  }
  return out;
}

IsometryValue restricted_isometry(const WhitenedBasis& basis, int d) {
  const int N = basis.size();
  require(d >= 1 && d <= N, "d must lie in [1, N]");
  const double count = binomial(N, d);
  if (count > kMaxSubsets) {
    std::ostringstream msg;
    msg << "C(" << N << ", " << d << ") = " << count << " subsets exceeds the enumeration limit " << kMaxSubsets
        << "; use restricted_isometry_sampled for a lower bound";
    throw InputError(msg.str());
  }
  IsometryValue out;
  std::vector<int> subset(static_cast<std::size_t>(d));
  std::iota(subset.begin(), subset.end(), 0);
  for (;;) {
    out.value = std::max(out.value, isometry_defect(joint_gram(basis, subset)));
    ++out.subsets;
    int i = d - 1;
    while (i >= 0 && subset[static_cast<std::size_t>(i)] == N - d + i) --i;
    if (i < 0) break;
    ++subset[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < d; ++k) subset[static_cast<std::size_t>(k)] = subset[static_cast<std::size_t>(k) - 1] + 1;
  }
  return out;
}

IsometryValue restricted_isometry_sampled(const WhitenedBasis& basis, int d, int samples, std::uint64_t seed) {
  const int N = basis.size();
  require(d >= 1 && d <= N, "d must lie in [1, N]");
  require(samples >= 1, "samples must be positive");
  IsometryValue out;
  out.exhaustive = false;
  Rng rng(seed);
  std::vector<int> all(static_cast<std::size_t>(N));
  std::iota(all.begin(), all.end(), 0);
  for (int s = 0; s < samples; ++s) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> subset(all.begin(), all.begin() + d);
    std::sort(subset.begin(), subset.end());
    out.value = std::max(out.value, isometry_defect(joint_gram(basis, subset)));
    ++out.subsets;
  }
  return out;
}

double beta_b_weighted(const WhitenedBasis& basis, const std::vector<int>& J, double b, const std::vector<double>& weights,
                       const AscentOptions& opt) {
  check_J(basis, J);
  require(b >= 0.0, "b must be non-negative");
  require(static_cast<int>(weights.size()) == basis.size(), "one weight per block required");
  for (double w : weights) require(w > 0.0 && std::isfinite(w), "weights must be positive");
  const ConeAscent cone(basis, J, weights, ConeAscent::Numerator::weighted_sum);
  // a single J-block alone attains its own weight
  std::vector<Vector> starts{subspace_start(cone), unconstrained_start(cone)};
  for (int j : J) {
    Vector x = Vector::Zero(cone.dim());
    x(cone.begin(j)) = 1.0;
    starts.push_back(std::move(x));
  }
  return run_ascent(cone, b, opt, std::move(starts)).first;
}

GeometryReport geometry_report(const WhitenedBasis& basis, const std::vector<int>& J, double b, std::optional<int> d,
                               const std::optional<std::vector<double>>& weights, const AscentOptions& opt) {
  GeometryReport r;
  r.J = J;
  r.b = b;
  r.m = basis.m;
  r.span_restricted = basis.span_restricted;
  const KappaValue k = kappa(basis, J);
  r.kappa = k.value;
  r.kappa_exact = k.exact;
  const auto rest = complement(basis, J);
  r.rho = rest.empty() ? 0.0 : canonical_cosine(basis, J, rest);
  r.beta_2_infty_upper = beta_2_infty_upper(basis, J);
  r.beta_2_b_lower = beta_2_b_lower(basis, J, b, opt);
  if (d) {
    r.d = d;
    if (binomial(basis.size(), *d) <= kMaxSubsets) {
      const auto iso = restricted_isometry(basis, *d);
      r.delta_d = iso.value;
    } else {
      const auto iso = restricted_isometry_sampled(basis, *d, 10000, derive_seed(opt.seed, 0xde17a));
      r.delta_d = iso.value;
      r.delta_d_exhaustive = false;
    }
  }
  if (weights) r.beta_b = beta_b_weighted(basis, J, b, *weights, opt);
  return r;
}

}  // namespace smkl
