#include "oracles.hpp"
#include "smkl/prox.hpp"
#include "smkl/rng.hpp"

#include <doctest.h>

#include <random>

using namespace smkl;

namespace {

struct Instance {
  Vector z, s;
  double alpha, beta;
};

Instance random_instance(Rng& rng, int dim) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  Instance in;
  in.z = Vector(dim);
  in.s = Vector(dim);
  for (int k = 0; k < dim; ++k) {
    in.z(k) = g(rng);
    in.s(k) = u(rng) < 0.15 ? 0.0 : std::exp(-3.0 * u(rng));
  }
  in.alpha = std::exp(2.0 * u(rng) - 1.5);
  in.beta = u(rng) < 0.1 ? 0.0 : std::exp(2.0 * u(rng) - 2.0);
  return in;
}

}  // namespace

TEST_SUITE("prox") {
  TEST_CASE("closed forms") {
    Vector z(4), s(4);
    z << 0.3, -1.2, 2.0, 0.5;
    s << 0.2, 0.9, 0.1, 0.6;
    CHECK((block_prox(z, 0.0, 0.0, s) - z).norm() == 0.0);
    const double beta = 0.8;
    const Vector soft = std::max(0.0, 1.0 - beta / z.norm()) * z;
    CHECK((block_prox(z, 0.0, beta, s) - soft).norm() < 1e-14);
    const Vector ones = Vector::Ones(4);
    const Vector both = std::max(0.0, 1.0 - (0.5 + beta) / z.norm()) * z;
    CHECK((block_prox(z, 0.5, beta, ones) - both).norm() < 1e-12);
    CHECK(block_prox(z, 10.0, 10.0, s).norm() == 0.0);
  }

  TEST_CASE("random dimension-5 instances match the dual FISTA oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 60; ++trial) {
      const Instance in = random_instance(rng, 5);
      const Vector v = block_prox(in.z, in.alpha, in.beta, in.s);
      const auto ref = oracle::prox_dual_fista(in.z, in.alpha, in.beta, in.s);
      CAPTURE(trial);
      CHECK(ref.gap < 1e-9);
      CHECK(prox_objective(v, in.z, in.alpha, in.beta, in.s) <= ref.primal + 1e-9);
      CHECK(prox_objective(v, in.z, in.alpha, in.beta, in.s) >= ref.primal - ref.gap - 1e-12);
    }
  }

  TEST_CASE("ellipsoid projection and distance") {
    Vector a(3), z(3);
    a << 2.0, 1.0, 0.0;
    z << 3.0, 0.5, 0.7;
    const Vector p = ellipsoid_projection(z, a);
    CHECK(p(2) == 0.0);
    CHECK(std::pow(p(0) / 2.0, 2) + std::pow(p(1) / 1.0, 2) == doctest::Approx(1.0));
    CHECK(ellipsoid_distance(z, a) == doctest::Approx((z - p).norm()));
    // the projection is the nearest point among many feasible samples
    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
      Vector w(3);
      for (int k = 0; k < 3; ++k) w(k) = u(rng);
      if (w.norm() > 1.0) w /= w.norm();
      CHECK((z - a.cwiseProduct(w)).norm() >= (z - p).norm() - 1e-12);
    }
    Vector inside(3);
    inside << 0.5, 0.2, 0.0;
    CHECK((ellipsoid_projection(inside, a) - inside).norm() == 0.0);
  }

  TEST_CASE("property: subgradient residual and nonexpansiveness") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      const int dim = 1 + trial % 20;
      const Instance in = random_instance(rng, dim);
      const Vector v = block_prox(in.z, in.alpha, in.beta, in.s);
      CHECK(prox_residual(v, in.z, in.alpha, in.beta, in.s) <= 1e-9 * (1.0 + in.z.norm()));
      Instance other = random_instance(rng, dim);
      const Vector w = block_prox(other.z, in.alpha, in.beta, in.s);
      CHECK((v - w).norm() <= (in.z - other.z).norm() + 1e-12);
    }
  }

  TEST_CASE("invalid inputs raise") {
    Vector z(2), s(3);
    z << 1, 2;
    s << 1, 1, 1;
    CHECK_THROWS_AS(block_prox(z, 1.0, 1.0, s), InputError);
    CHECK_THROWS_AS(block_prox(z, -1.0, 1.0, Vector::Ones(2)), InputError);
  }
}
