#include "smkl/kernels.hpp"

#include "smkl/parallel.hpp"
#include "smkl/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace smkl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kProbePoints = 1000;
constexpr double kMaxLatticeSize = 2e6;

void validate_block(const std::vector<int>& block) {
  require(!block.empty(), "kernel coordinate block must be non-empty");
  std::set<int> seen;
  for (int c : block) {
    require(c >= 0, "coordinate indices must be non-negative");
    require(seen.insert(c).second, "duplicate coordinate in kernel block");
  }
}

// Points on which the normalisation of non-analytic kernels is estimated.
PointSet probe_grid(int dim) {
  PointSet grid(kProbePoints, dim);
  if (dim == 1) {
    for (int i = 0; i < kProbePoints; ++i) grid(i, 0) = static_cast<double>(i) / (kProbePoints - 1);
    return grid;
  }
  Rng rng(0x5eed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < kProbePoints; ++i)
    for (int c = 0; c < dim; ++c) grid(i, c) = unif(rng);
  // corners carry the sup for the common bases
  grid.row(0).setZero();
  grid.row(1).setOnes();
  return grid;
}

}  // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::sobolev_fourier: return "sobolev_fourier";
    case KernelKind::linear: return "linear";
    case KernelKind::projection: return "projection";
    case KernelKind::tabulated: return "tabulated";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "gaussian") return KernelKind::gaussian;
  if (name == "sobolev_fourier") return KernelKind::sobolev_fourier;
  if (name == "linear") return KernelKind::linear;
  if (name == "projection") return KernelKind::projection;
  if (name == "tabulated") return KernelKind::tabulated;
  throw InputError("unknown kernel kind '" + name + "'");
}

std::vector<BasisFunction> cosine_basis(int dim) {
  require(dim >= 1, "basis dimension must be positive");
  std::vector<BasisFunction> basis;
  for (int k = 1; k <= dim; ++k)
    basis.emplace_back([k](const Vector& x) { return std::sqrt(2.0) * std::cos(kTwoPi * k * x(0)); });
  return basis;
}

std::vector<BasisFunction> trigonometric_basis(int dim) {
  require(dim >= 1, "basis dimension must be positive");
  std::vector<BasisFunction> basis;
  basis.emplace_back([](const Vector&) { return 1.0; });
  for (int k = 1; static_cast<int>(basis.size()) < dim; ++k) {
    basis.emplace_back([k](const Vector& x) { return std::sqrt(2.0) * std::cos(kTwoPi * k * x(0)); });
    if (static_cast<int>(basis.size()) < dim)
      basis.emplace_back([k](const Vector& x) { return std::sqrt(2.0) * std::sin(kTwoPi * k * x(0)); });
  }
  return basis;
}

Kernel Kernel::gaussian(std::string id, std::vector<int> block, double bandwidth) {
  validate_block(block);
  require(bandwidth > 0.0 && std::isfinite(bandwidth), "gaussian bandwidth must be positive");
  Kernel k;
  k.id_ = std::move(id);
  k.kind_ = KernelKind::gaussian;
  k.block_ = std::move(block);
  k.bandwidth_ = bandwidth;
  return k;
}

Kernel Kernel::sobolev_fourier(std::string id, std::vector<int> block, double alpha, int truncation) {
  validate_block(block);
  require(alpha > 0.5, "sobolev_fourier requires alpha > 1/2");
  require(truncation >= 1, "sobolev_fourier truncation must be positive");
  const int p = static_cast<int>(block.size());
  const double side = 2.0 * truncation + 1.0;
  require(std::pow(side, p) <= kMaxLatticeSize,
          "sobolev_fourier lattice too large; reduce truncation for multi-coordinate blocks");

  Kernel k;
  k.id_ = std::move(id);
  k.kind_ = KernelKind::sobolev_fourier;
  k.block_ = std::move(block);
  k.alpha_ = alpha;
  k.truncation_ = truncation;

  // Enumerate m = 0 and the lexicographically positive half of the lattice.
  std::vector<std::vector<int>> half;
  std::vector<double> weight;
  std::vector<int> m(static_cast<std::size_t>(p), -truncation);
  for (;;) {
    int first_nonzero = 0;
    for (int v : m) {
      if (v != 0) {
        first_nonzero = v;
        break;
      }
    }
    double norm2 = 0.0;
    for (int v : m) norm2 += static_cast<double>(v) * v;
    const double c = std::pow(norm2 + 1.0, -alpha);
    if (first_nonzero == 0) {
      half.insert(half.begin(), m);
      weight.insert(weight.begin(), c);
    } else if (first_nonzero > 0) {
      half.push_back(m);
      weight.push_back(2.0 * c);
    }
    int pos = p - 1;
    while (pos >= 0 && m[static_cast<std::size_t>(pos)] == truncation) {
      m[static_cast<std::size_t>(pos)] = -truncation;
      --pos;
    }
    if (pos < 0) break;
    ++m[static_cast<std::size_t>(pos)];
  }
  k.lattice_.resize(static_cast<Eigen::Index>(half.size()), p);
  k.lattice_weight_.resize(static_cast<Eigen::Index>(half.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < half.size(); ++i) {
    for (int c = 0; c < p; ++c) k.lattice_(static_cast<Eigen::Index>(i), c) = half[i][static_cast<std::size_t>(c)];
    k.lattice_weight_(static_cast<Eigen::Index>(i)) = weight[i];
    total += weight[i];
  }
  k.scale_ = 1.0 / total;
  return k;
}

Kernel Kernel::linear(std::string id, std::vector<int> block) {
  validate_block(block);
  Kernel k;
  k.id_ = std::move(id);
  k.kind_ = KernelKind::linear;
  k.scale_ = 1.0 / static_cast<double>(block.size());
  k.block_ = std::move(block);
  return k;
}

Kernel Kernel::projection(std::string id, std::vector<int> block, std::vector<BasisFunction> basis,
                          std::string basis_name) {
  validate_block(block);
  require(!basis.empty(), "projection kernel needs at least one basis function");
  Kernel k;
  k.id_ = std::move(id);
  k.kind_ = KernelKind::projection;
  k.block_ = std::move(block);
  k.basis_ = std::move(basis);
  k.basis_name_ = std::move(basis_name);
  const PointSet grid = probe_grid(static_cast<int>(k.block_.size()));
  double sup = 0.0;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    const Vector x = grid.row(i).transpose();
    double diag = 0.0;
    for (const auto& phi : k.basis_) {
      const double v = phi(x);
      diag += v * v;
    }
    sup = std::max(sup, diag);
  }
  require(sup > 0.0, "projection basis vanishes on the probe grid");
  k.scale_ = 1.0 / sup;
  return k;
}

Kernel Kernel::tabulated(std::string id, int index_coordinate, Matrix table) {
  require(index_coordinate >= 0, "index coordinate must be non-negative");
  require(table.rows() == table.cols() && table.rows() > 0, "tabulated kernel needs a square table");
  require((table - table.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, table.cwiseAbs().maxCoeff()),
          "tabulated kernel table must be symmetric");
  const double sup = table.diagonal().maxCoeff();
  require(sup > 0.0, "tabulated kernel table must have a positive diagonal entry");
  Kernel k;
  k.id_ = std::move(id);
  k.kind_ = KernelKind::tabulated;
  k.block_ = {index_coordinate};
  k.table_ = std::move(table);
  k.scale_ = 1.0 / sup;
  return k;
}

void Kernel::check_point(const Vector& x) const {
  for (int c : block_) {
    if (c >= x.size())
      throw InputError("kernel '" + id_ + "' uses coordinate " + std::to_string(c) +
                       " but the point has dimension " + std::to_string(x.size()));
  }
}

Vector Kernel::restrict(const Vector& x) const {
  Vector out(static_cast<Eigen::Index>(block_.size()));
  for (std::size_t c = 0; c < block_.size(); ++c) out(static_cast<Eigen::Index>(c)) = x(block_[c]);
  return out;
}

double Kernel::operator()(const Vector& x, const Vector& y) const {
  if (x.size() != y.size()) throw InputError("kernel arguments have different dimensions");
  check_point(x);
  const Vector xb = restrict(x);
  const Vector yb = restrict(y);
  switch (kind_) {
    case KernelKind::gaussian:
      return std::exp(-(xb - yb).squaredNorm() / (2.0 * bandwidth_ * bandwidth_));
    case KernelKind::linear:
      return scale_ * xb.dot(yb);
    case KernelKind::sobolev_fourier: {
      const Vector diff = xb - yb;
      double sum = 0.0;
      for (Eigen::Index i = 0; i < lattice_.rows(); ++i)
        sum += lattice_weight_(i) * std::cos(kTwoPi * lattice_.row(i).cast<double>().dot(diff));
      return scale_ * sum;
    }
    case KernelKind::projection: {
      double sum = 0.0;
      for (const auto& phi : basis_) sum += phi(xb) * phi(yb);
      return scale_ * sum;
    }
    case KernelKind::tabulated: {
      const double xi = std::round(xb(0));
      const double yi = std::round(yb(0));
      if (xi < 0 || yi < 0 || xi >= table_.rows() || yi >= table_.rows())
        throw InputError("tabulated kernel index out of range");
      return scale_ * table_(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(yi));
    }
  }
  return 0.0;
}

bool Kernel::has_features() const {
  return kind_ == KernelKind::sobolev_fourier || kind_ == KernelKind::linear ||
         kind_ == KernelKind::projection;
}

int Kernel::feature_dimension() const {
  switch (kind_) {
    case KernelKind::sobolev_fourier: return static_cast<int>(2 * lattice_.rows() - 1);
    case KernelKind::linear: return static_cast<int>(block_.size());
    case KernelKind::projection: return static_cast<int>(basis_.size());
    default: return 0;
  }
}

Matrix Kernel::features(const PointSet& X) const {
  if (!has_features()) throw InputError("kernel '" + id_ + "' has no finite feature map");
  const Eigen::Index n = X.rows();
  if (n > 0) check_point(X.row(0).transpose());
  Matrix phi(n, feature_dimension());
  switch (kind_) {
    case KernelKind::linear: {
      const double root = std::sqrt(scale_);
      for (std::size_t c = 0; c < block_.size(); ++c)
        phi.col(static_cast<Eigen::Index>(c)) = root * X.col(block_[c]);
      break;
    }
    case KernelKind::projection: {
      const double root = std::sqrt(scale_);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vector xb = restrict(X.row(i).transpose());
        for (std::size_t k = 0; k < basis_.size(); ++k)
          phi(i, static_cast<Eigen::Index>(k)) = root * basis_[k](xb);
      }
      break;
    }
    case KernelKind::sobolev_fourier: {
      const Eigen::Index half = lattice_.rows();
      Vector root(half);
      for (Eigen::Index m = 0; m < half; ++m) root(m) = std::sqrt(scale_ * lattice_weight_(m));
      if (block_.size() == 1) {
        // lattice rows are 0, 1, ..., T; rotate (cos, sin) by the base angle
        for (Eigen::Index i = 0; i < n; ++i) {
          const double theta = kTwoPi * X(i, block_[0]);
          const double c1 = std::cos(theta);
          const double s1 = std::sin(theta);
          double c = 1.0;
          double s = 0.0;
          phi(i, 0) = root(0);
          for (Eigen::Index m = 1; m < half; ++m) {
            const double cn = c * c1 - s * s1;
            const double sn = s * c1 + c * s1;
            c = cn;
            s = sn;
            if (m % 32 == 0) {  // re-anchor to bound the recurrence drift
              c = std::cos(theta * static_cast<double>(m));
              s = std::sin(theta * static_cast<double>(m));
            }
            phi(i, 2 * m - 1) = root(m) * c;
            phi(i, 2 * m) = root(m) * s;
          }
        }
      } else {
        for (Eigen::Index i = 0; i < n; ++i) {
          const Vector xb = restrict(X.row(i).transpose());
          phi(i, 0) = root(0);
          for (Eigen::Index m = 1; m < half; ++m) {
            const double arg = kTwoPi * lattice_.row(m).cast<double>().dot(xb);
            phi(i, 2 * m - 1) = root(m) * std::cos(arg);
            phi(i, 2 * m) = root(m) * std::sin(arg);
          }
        }
      }
      break;
    }
    default:
      break;
  }
  return phi;
}

KernelDictionary::KernelDictionary(std::vector<Kernel> kernels) : kernels_(std::move(kernels)) {
  require(!kernels_.empty(), "kernel dictionary must contain at least one kernel");
  std::set<std::string> ids;
  for (const auto& k : kernels_)
    require(ids.insert(k.id()).second, "duplicate kernel id '" + k.id() + "'");
}

int KernelDictionary::input_dimension() const {
  int p = 0;
  for (const auto& k : kernels_)
    for (int c : k.block()) p = std::max(p, c + 1);
  return p;
}

KernelDictionary sobolev_additive_dictionary(int p, double alpha, int truncation) {
  require(p >= 1, "dictionary needs at least one coordinate");
  std::vector<Kernel> kernels;
  kernels.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j)
    kernels.push_back(Kernel::sobolev_fourier("x" + std::to_string(j + 1), {j}, alpha, truncation));
  return KernelDictionary(std::move(kernels));
}

double eval_kernel(const Kernel& k, const Vector& x, const Vector& y) { return k(x, y); }

GramMatrix gram(const Kernel& k, const PointSet& X) {
  const Eigen::Index n = X.rows();
  require(n >= 1, "gram requires at least one point");
  GramMatrix g;
  if (k.has_features()) {
    const Matrix phi = k.features(X);
    g.entries = Matrix::Zero(n, n);
    g.entries.selfadjointView<Eigen::Lower>().rankUpdate(phi);
    g.entries.triangularView<Eigen::StrictlyUpper>() = g.entries.transpose();
    return g;
  }
  g.entries.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = X.row(i).transpose();
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = k(xi, X.row(j).transpose());
      g.entries(i, j) = v;
      g.entries(j, i) = v;
    }
  }
  return g;
}

Matrix cross_gram(const Kernel& k, const PointSet& A, const PointSet& B) {
  if (k.has_features()) return k.features(A) * k.features(B).transpose();
  Matrix out(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const Vector a = A.row(i).transpose();
    for (Eigen::Index j = 0; j < B.rows(); ++j) out(i, j) = k(a, B.row(j).transpose());
  }
  return out;
}

Vector kernel_expansion(const Kernel& k, const PointSet& X, const Vector& coef, const PointSet& points) {
  require(coef.size() == X.rows(), "expansion coefficients must match the number of centres");
  if (k.has_features()) {
    const Vector w = k.features(X).transpose() * coef;
    return k.features(points) * w;
  }
  return cross_gram(k, points, X) * coef;
}

GramSpectrum spectrum(const GramMatrix& g) {
  const Eigen::Index n = g.entries.rows();
  require(n >= 1 && g.entries.cols() == n, "spectrum requires a square non-empty matrix");
  const double asym = (g.entries - g.entries.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-10 * std::max(1.0, g.entries.cwiseAbs().maxCoeff()),
          "spectrum requires a symmetric Gram matrix");

  const Matrix normalized = g.entries / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(normalized);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "symmetric eigensolver did not converge (n=" << n
        << ", max |entry|=" << normalized.cwiseAbs().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }
  GramSpectrum s;
  s.n = static_cast<int>(n);
  s.eigenvalues = solver.eigenvalues().reverse();
  s.eigenvectors = solver.eigenvectors().rowwise().reverse();
  const double top = std::max(s.eigenvalues(0), 0.0);
  const double bottom = s.eigenvalues(n - 1);
  if (bottom < 0.0) {
    const double threshold = kEigenClipTolerance * std::max(top, 1e-12);
    if (-bottom > threshold) {
      std::ostringstream msg;
      msg << "Gram matrix is not positive semidefinite: eigenvalue " << bottom
          << " exceeds the clip threshold " << threshold;
      throw DataError(msg.str());
    }
    s.clipped = -bottom;
    s.eigenvalues = s.eigenvalues.cwiseMax(0.0);
  }
  return s;
}

GramSpectrum spectrum_from_features(const Matrix& phi) {
  const Eigen::Index n = phi.rows();
  require(n >= 1, "spectrum requires at least one point");
  const double root_n = std::sqrt(static_cast<double>(n));
  Eigen::BDCSVD<Matrix> svd(phi / root_n, Eigen::ComputeThinU);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD of the feature matrix did not converge");
  GramSpectrum s;
  s.n = static_cast<int>(n);
  const Eigen::Index r = svd.singularValues().size();
  s.eigenvalues = Vector::Zero(n);
  s.eigenvalues.head(r) = svd.singularValues().array().square().matrix();
  s.eigenvectors = svd.matrixU();
  return s;
}

GramSpectrum kernel_spectrum(const Kernel& k, const PointSet& X) {
  if (k.has_features() && k.feature_dimension() < X.rows()) return spectrum_from_features(k.features(X));
  return spectrum(gram(k, X));
}

std::vector<GramSpectrum> dictionary_spectra(const KernelDictionary& dict, const PointSet& X, int threads) {
  std::vector<GramSpectrum> out(static_cast<std::size_t>(dict.size()));
  parallel_for(out.size(), threads, [&](std::size_t j) { out[j] = kernel_spectrum(dict[static_cast<int>(j)], X); });
  return out;
}

double sobolev_tail_bound(double alpha, int truncation) {
  require(alpha > 0.5, "tail bound requires alpha > 1/2");
  const long last = static_cast<long>(truncation) + 100000;
  double sum = 0.0;
  for (long m = last; m > truncation; --m) sum += std::pow(static_cast<double>(m) * m + 1.0, -alpha);
  // sum_{m > last} m^(-2 alpha) <= int_last^inf x^(-2 alpha) dx
  sum += std::pow(static_cast<double>(last), 1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0);
  return 2.0 * sum;
}

double sobolev_series_total(double alpha, int truncation) {
  double sum = 0.0;
  for (int m = truncation; m >= 1; --m) sum += 2.0 * std::pow(static_cast<double>(m) * m + 1.0, -alpha);
  return sum + 1.0;
}

void write_gram_csv(std::ostream& out, const GramMatrix& g) {
  const Eigen::Index n = g.entries.rows();
  out << "n=" << n << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j) out << ',';
      out << g.entries(i, j);
    }
    out << '\n';
  }
}

GramMatrix read_gram_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("n=", 0) != 0) throw InputError("gram CSV must start with 'n=<n>'");
  const int n = std::stoi(line.substr(2));
  require(n >= 1, "gram CSV declares a non-positive size");
  GramMatrix g;
  g.entries.resize(n, n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw InputError("gram CSV truncated");
    std::stringstream row(line);
    std::string cell;
    for (int j = 0; j < n; ++j) {
      if (!std::getline(row, cell, ',')) throw InputError("gram CSV row too short");
      g.entries(i, j) = std::stod(cell);
    }
  }
  return g;
}

}  // namespace smkl
