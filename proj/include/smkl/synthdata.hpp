#pragma once

#include "smkl/common.hpp"
#include "smkl/loss.hpp"
#include "smkl/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace smkl {

enum class DesignKind { uniform_box, dependent_rotation };

std::string to_string(DesignKind kind);
DesignKind design_kind_from_string(const std::string& name);

/// Sparse additive model on [0,1]^N: coordinate j feeds component j, and d of them are active.
struct SyntheticSpec {
  int N = 10;
  int d = 3;
  double alpha = 1.0;
  int n = 200;
  double noise_sigma = 0.5;
  bool logit = false;
  DesignKind design = DesignKind::uniform_box;
  // dependent_rotation: coordinate j = cos^2(angle) u_{j mod q} + sin^2(angle) u_{(j+1) mod q},
  // with q = latent_dim (defaults to ceil(N/2)) independent uniforms.
  double angle = 0.5235987755982988;
  std::optional<int> latent_dim;
  std::uint64_t seed = 0;
  int fourier_modes = 50;

  void validate() const;
  int latent_dimension() const;
};

/// f_j(x) = sum_k a_k sqrt(2) cos(2 pi k x_coordinate), k = 1..a.size().
struct Component {
  int coordinate = 0;
  Vector coefficients;

  double operator()(double t) const;
  /// sum_k a_k^2 (2 pi k)^(2 alpha).
  double sobolev_norm2(double alpha) const;
};

struct Truth {
  std::vector<int> active_set;  // sorted
  std::vector<Component> components;
  double alpha = 1.0;
  bool logit = false;

  /// f*(x) at the rows of X.
  Vector operator()(const PointSet& X) const;
  /// Values of the component on coordinate j (zero for inactive j).
  Vector component(int j, const PointSet& X) const;
};

struct Dataset {
  PointSet X;
  Vector Y;
  std::optional<Truth> truth;
};

/// Draws the active set, the component coefficients, the design and the responses.
/// Independent random streams are derived from spec.seed, so equal seeds give identical data.
Dataset gen_instance(const SyntheticSpec& spec);

/// Fresh design points from the spec's distribution.
PointSet sample_design(const SyntheticSpec& spec, int m, Rng& rng);

/// Eigenvalues of the normalised one-coordinate Sobolev kernel (truncation `modes`)
/// under the uniform law: c_m / Z for |m| <= modes, descending.
std::vector<double> population_spectrum(double alpha, int modes, DesignKind design = DesignKind::uniform_box);

}  // namespace smkl
