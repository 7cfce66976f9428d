#pragma once

#include "smkl/common.hpp"
#include "smkl/kernels.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace smkl {

/// Per-block function values on an evaluation sample of size m, whitened so that
/// (1/m) W_j^T W_j = I. L2 inner products are averages over the sample.
struct WhitenedBasis {
  std::vector<Matrix> blocks;  // m x r_j each
  int m = 0;
  bool span_restricted = false;  // blocks are sample spans of infinite-dimensional spaces

  int size() const { return static_cast<int>(blocks.size()); }
  int rank(int j) const { return static_cast<int>(blocks.at(static_cast<std::size_t>(j)).cols()); }
  bool one_dimensional() const;
};

/// Whitens raw block values (rows = evaluation points). A block whose within-block
/// Gram has relative eigenvalue below `tol` cannot be whitened and raises DataError.
WhitenedBasis whiten_blocks(const std::vector<Matrix>& values, double tol = 1e-10);

/// Block bases from a dictionary: kernels with a small feature map use it directly,
/// the others are restricted to the leading `max_rank` directions of span{K(., X_i)}.
/// Values are taken at the rows of `eval_points`.
WhitenedBasis basis_from_dictionary(const KernelDictionary& dict, const PointSet& span_points,
                                    const PointSet& eval_points, int max_rank = 10);

/// Joint Gram (1/m) W^T W of the listed blocks, blocks stacked in the order given.
Matrix joint_gram(const WhitenedBasis& basis, const std::vector<int>& blocks);

/// Largest canonical correlation between span(I-blocks) and span(J-blocks).
double canonical_cosine(const WhitenedBasis& basis, const std::vector<int>& I, const std::vector<int>& J);

struct KappaValue {
  double value = 0.0;
  bool exact = true;  // exact on the (possibly span-restricted) block spaces
};

/// inf over unit h_j in the blocks and unit c of |sum_j c_j h_j|^2: the smallest
/// eigenvalue of the joint whitened Gram.
KappaValue kappa(const WhitenedBasis& basis, const std::vector<int>& J);

/// 1 / sqrt(kappa(J) (1 - rho^2)) with rho = canonical_cosine(J, complement); +inf when degenerate.
double beta_2_infty_upper(const WhitenedBasis& basis, const std::vector<int>& J);

struct AscentOptions {
  int restarts = 20;
  int iterations = 500;
  std::uint64_t seed = 0;
};

/// Lower bound on beta_{2,b}(J): the best ratio (sum_{j in J} |h_j|^2)^{1/2} / |sum_j h_j|
/// found by projected ascent over the cone sum_{j not in J} |h_j| <= b sum_{j in J} |h_j|.
/// Every evaluated point is feasible, so the value is attained.
double beta_2_b_lower(const WhitenedBasis& basis, const std::vector<int>& J, double b, const AscentOptions& opt = {});

/// Lower bounds along an ascending b grid, each run seeded with the previous optimum;
/// the cones are nested, so the returned values are nondecreasing.
std::vector<double> beta_2_b_lower_path(const WhitenedBasis& basis, const std::vector<int>& J,
                                        const std::vector<double>& b_grid, const AscentOptions& opt = {});

struct IsometryValue {
  double value = 0.0;
  bool exhaustive = true;  // false: sampled subsets, value is a lower bound
  long long subsets = 0;
};

/// Largest subset count enumerated by restricted_isometry.
inline constexpr double kMaxSubsets = 1e6;

/// delta_d = max over |J| = d of max(1 - sqrt(lmin(G_J)), sqrt(lmax(G_J)) - 1).
/// Throws InputError when C(N, d) exceeds kMaxSubsets.
IsometryValue restricted_isometry(const WhitenedBasis& basis, int d);

/// Same maximum over `samples` random d-subsets; a lower bound on delta_d.
IsometryValue restricted_isometry_sampled(const WhitenedBasis& basis, int d, int samples, std::uint64_t seed);

/// Lower bound on the weighted constant beta_b(J): sup of sum_{j in J} w_j |h_j| / |sum_j h_j|
/// over the cone sum_{j not in J} w_j |h_j| <= b sum_{j in J} w_j |h_j|. Never below max_{j in J} w_j.
double beta_b_weighted(const WhitenedBasis& basis, const std::vector<int>& J, double b, const std::vector<double>& weights,
                       const AscentOptions& opt = {});

struct GeometryReport {
  std::vector<int> J;
  double kappa = 0.0;
  bool kappa_exact = true;
  double rho = 0.0;
  double beta_2_infty_upper = std::numeric_limits<double>::infinity();
  double b = 1.0;
  double beta_2_b_lower = 0.0;
  std::optional<int> d;
  std::optional<double> delta_d;
  bool delta_d_exhaustive = true;
  std::optional<double> beta_b;
  bool span_restricted = false;
  int m = 0;
};

GeometryReport geometry_report(const WhitenedBasis& basis, const std::vector<int>& J, double b,
                               std::optional<int> d = std::nullopt,
                               const std::optional<std::vector<double>>& weights = std::nullopt,
                               const AscentOptions& opt = {});

}  // namespace smkl
