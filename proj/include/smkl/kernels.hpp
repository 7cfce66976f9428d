#pragma once

#include "smkl/common.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace smkl {

enum class KernelKind { gaussian, sobolev_fourier, linear, projection, tabulated };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// A basis function of a projection kernel; receives the coordinates of the
/// kernel's block (not the full point).
using BasisFunction = std::function<double(const Vector&)>;

/// Orthonormal (w.r.t. the uniform law on [0,1]) cosine basis sqrt(2)cos(2 pi k x), k = 1..dim.
std::vector<BasisFunction> cosine_basis(int dim);

/// Constant plus sqrt(2)cos / sqrt(2)sin pairs; `dim` functions in total.
std::vector<BasisFunction> trigonometric_basis(int dim);

/// A reproducing kernel on [0,1]^p acting on a subset of coordinates.
///
/// Every kernel is rescaled at construction so that sup_x K(x,x) <= 1:
///  - gaussian: K(x,x) = 1 already;
///  - linear: c<x_B,y_B> with c = 1/|B|;
///  - sobolev_fourier: truncated torus series divided by its value at x = y;
///  - projection, tabulated: divided by the largest diagonal value found on a
///    1,000-point probe grid (resp. the table diagonal).
class Kernel {
 public:
  static Kernel gaussian(std::string id, std::vector<int> block, double bandwidth);
  /// Periodic Sobolev kernel sum_m (|m|^2+1)^(-alpha) cos(2 pi m.(x-y)) over the
  /// lattice |m|_inf <= truncation.
  static Kernel sobolev_fourier(std::string id, std::vector<int> block, double alpha,
                                int truncation = 200);
  static Kernel linear(std::string id, std::vector<int> block);
  static Kernel projection(std::string id, std::vector<int> block,
                           std::vector<BasisFunction> basis, std::string basis_name = "custom");
  /// Kernel on a finite index set; the point coordinate `block[0]` holds the row index.
  static Kernel tabulated(std::string id, int index_coordinate, Matrix table);

  const std::string& id() const { return id_; }
  KernelKind kind() const { return kind_; }
  const std::vector<int>& block() const { return block_; }
  /// Normalisation constant applied to the raw kernel.
  double scale() const { return scale_; }

  double bandwidth() const { return bandwidth_; }
  double alpha() const { return alpha_; }
  int truncation() const { return truncation_; }
  const std::string& basis_name() const { return basis_name_; }
  int basis_size() const { return static_cast<int>(basis_.size()); }
  /// Raw (unscaled) table of a tabulated kernel.
  const Matrix& table() const { return table_; }

  double operator()(const Vector& x, const Vector& y) const;

  /// True when K(x,y) = phi(x).phi(y) for a finite feature map.
  bool has_features() const;
  /// Feature matrix (rows = points) with K = Phi Phi^T; throws for kinds without one.
  Matrix features(const PointSet& X) const;
  int feature_dimension() const;

 private:
  Kernel() = default;
  void check_point(const Vector& x) const;
  Vector restrict(const Vector& x) const;

  std::string id_;
  KernelKind kind_ = KernelKind::gaussian;
  std::vector<int> block_;
  double scale_ = 1.0;
  double bandwidth_ = 0.0;
  double alpha_ = 0.0;
  int truncation_ = 0;
  std::string basis_name_;
  std::vector<BasisFunction> basis_;
  Matrix table_;
  // Half lattice for sobolev_fourier: rows are frequency vectors m with weights.
  Eigen::MatrixXi lattice_;
  Vector lattice_weight_;
};

/// Ordered list of kernels with unique ids.
class KernelDictionary {
 public:
  KernelDictionary() = default;
  explicit KernelDictionary(std::vector<Kernel> kernels);

  int size() const { return static_cast<int>(kernels_.size()); }
  const Kernel& operator[](int j) const { return kernels_.at(static_cast<std::size_t>(j)); }
  const std::vector<Kernel>& kernels() const { return kernels_; }
  auto begin() const { return kernels_.begin(); }
  auto end() const { return kernels_.end(); }
  /// Largest coordinate index referenced by any kernel, plus one.
  int input_dimension() const;

 private:
  std::vector<Kernel> kernels_;
};

/// One Sobolev kernel per coordinate 0..p-1; the standard additive dictionary.
KernelDictionary sobolev_additive_dictionary(int p, double alpha, int truncation);

double eval_kernel(const Kernel& k, const Vector& x, const Vector& y);

/// Raw (unnormalised by n) Gram matrix G[l][k] = K(X_l, X_k).
struct GramMatrix {
  Matrix entries;
  int n() const { return static_cast<int>(entries.rows()); }
};

GramMatrix gram(const Kernel& k, const PointSet& X);

/// Cross matrix C[a][b] = K(A_a, B_b).
Matrix cross_gram(const Kernel& k, const PointSet& A, const PointSet& B);

/// Evaluates x -> sum_i coef_i K(x, X_i) at the rows of `points`.
Vector kernel_expansion(const Kernel& k, const PointSet& X, const Vector& coef,
                        const PointSet& points);

/// Eigendecomposition of the normalised Gram matrix G/n.
struct GramSpectrum {
  Vector eigenvalues;   // descending, clipped at zero
  Matrix eigenvectors;  // columns match the leading `eigenvalues`; may be thin (see spectrum_from_features)
  int n = 0;
  double clipped = 0.0;  // magnitude of the most negative eigenvalue removed
};

/// Relative threshold below which negative eigenvalues are treated as round-off.
inline constexpr double kEigenClipTolerance = 1e-8;

GramSpectrum spectrum(const GramMatrix& g);

/// Spectrum of Phi Phi^T / n from a feature matrix (rows = points) via a thin SVD.
/// Only min(n, features) eigenvectors are stored; the remaining eigenvalues are zero.
GramSpectrum spectrum_from_features(const Matrix& phi);

/// Uses the feature map when it is smaller than the sample, the full Gram matrix otherwise.
GramSpectrum kernel_spectrum(const Kernel& k, const PointSet& X);

/// Spectra for every kernel of the dictionary at the same design.
std::vector<GramSpectrum> dictionary_spectra(const KernelDictionary& dict, const PointSet& X,
                                             int threads = 1);

/// Analytic tail sum_{|m| > T} (m^2+1)^(-alpha) of the one-dimensional Sobolev series.
double sobolev_tail_bound(double alpha, int truncation);

/// Unnormalised one-dimensional Sobolev series value sum_{|m|<=T} (m^2+1)^(-alpha).
double sobolev_series_total(double alpha, int truncation);

void write_gram_csv(std::ostream& out, const GramMatrix& g);
GramMatrix read_gram_csv(std::istream& in);

}  // namespace smkl
