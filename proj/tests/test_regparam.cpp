#include "oracles.hpp"
#include "smkl/kernels.hpp"
#include "smkl/regparam.hpp"
#include "smkl/rng.hpp"
#include "smkl/synthdata.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace smkl;

namespace {

GramSpectrum spectrum_of(const std::vector<double>& eig) {
  GramSpectrum s;
  s.n = static_cast<int>(eig.size());
  s.eigenvalues = Eigen::Map<const Vector>(eig.data(), static_cast<Eigen::Index>(eig.size()));
  s.eigenvectors = Matrix::Identity(s.n, s.n);
  return s;
}

std::vector<double> power_law(int n, double exponent, double top = 1.0) {
  std::vector<double> e;
  for (int k = 1; k <= n; ++k) e.push_back(top * std::pow(k, -exponent));
  return e;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_SUITE("regparam") {
  TEST_CASE("complexity function examples") {
    CHECK(gamma_hat(std::vector<double>{1, 0, 0, 0}, 4, 0.5) == doctest::Approx(0.25));
    CHECK(gamma_hat(std::vector<double>{0, 0, 0}, 3, 0.7) == 0.0);
    const auto eig = power_law(100, 2.0);
    CHECK(gamma_hat(eig, 100, 0.3) == doctest::Approx(oracle::gamma_direct(eig, 100, 0.3)).epsilon(1e-13));
  }

  TEST_CASE("majorant slope examples") {
    CHECK(eps_from_majorant(std::vector<double>(10, 0.0), 10, 0.05) == 0.05);
    const double eps = eps_from_majorant(std::vector<double>{1, 1, 1, 1}, 100, 0.01);
    CHECK(eps == doctest::Approx((-1.0 + std::sqrt(1.8)) / 2.0).epsilon(1e-12));
    CHECK(eps == doctest::Approx(0.17082).epsilon(1e-4));
    CHECK(eps == doctest::Approx(oracle::grid_eps({1, 1, 1, 1}, 100, 0.01)).epsilon(1e-6));
  }

  TEST_CASE("majorant slope agrees with the dense-grid oracle") {
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    for (int n : {16, 64, 256, 1024}) {
      const auto eig = power_law(n, u(rng), u(rng) / 3.0);
      const double floor = 1e-3;
      const double mine = eps_from_majorant(eig, n, floor);
      // grid infeasibility between points can only make the oracle smaller
      const double grid = oracle::grid_eps(eig, n, floor);
      CHECK(grid <= mine * (1 + 1e-9));
      CHECK(grid >= mine * (1 - 2e-4));
    }
  }

  TEST_CASE("power-law spectrum gives the expected exponent") {
    // lambda_k = k^-2 ~ beta = 1: eps^2 ~ n^(-2/3), eps ~ n^(-1/3)
    std::vector<double> ns, eps;
    for (int n : {256, 512, 1024, 2048, 4096}) {
      ns.push_back(n);
      eps.push_back(eps_from_majorant(power_law(n, 2.0), n, 1e-6));
    }
    CHECK(slope(ns, eps) == doctest::Approx(-1.0 / 3.0).epsilon(0.08));
    const double oracle1024 = oracle::grid_eps(power_law(1024, 2.0), 1024, 0.01);
    CHECK(eps_from_majorant(power_law(1024, 2.0), 1024, 0.01) == doctest::Approx(oracle1024).epsilon(2e-4));
  }

  TEST_CASE("eps-hat: identical kernels and rank ordering") {
    const std::vector<GramSpectrum> same(3, spectrum_of(power_law(50, 2.0)));
    const RegParams r = eps_hat_all(same, 4.0, 3);
    CHECK(r.eps_hat[0] == r.eps_hat[1]);
    CHECK(r.eps_hat[1] == r.eps_hat[2]);

    std::vector<double> rank1(64, 0.0), rank16(64, 0.0);
    rank1[0] = 1.0;
    for (int k = 0; k < 16; ++k) rank16[static_cast<std::size_t>(k)] = 1.0 / 16.0 * 4.0;
    const RegParams r2 = eps_hat_all(std::vector<GramSpectrum>{spectrum_of(rank1), spectrum_of(rank16)}, 1.0, 2);
    CHECK(r2.eps_hat[1] > r2.eps_hat[0]);
    CHECK(r2.floor == doctest::Approx(std::sqrt(std::log(2.0) / 64.0)));
  }

  TEST_CASE("population path: zero spectrum, projection closed form, consistency with eps-hat") {
    CHECK(eps_breve_all({std::vector<double>(5, 0.0)}, 4.0, 10, 100)[0] ==
          doctest::Approx(regularization_floor(4.0, 10, 100)));
    const double closed = (-1.0 + std::sqrt(1.8)) / 2.0;
    CHECK(eps_breve_all({{1, 1, 1, 1}}, 1.0, 2, 100)[0] == doctest::Approx(std::max(closed, std::sqrt(std::log(2.0) / 100))));
    const auto eig = power_law(200, 2.0, 0.5);
    const RegParams hat = eps_hat_all(std::vector<GramSpectrum>{spectrum_of(eig)}, 4.0, 5);
    CHECK(eps_breve_all({eig}, 4.0, 5, 200)[0] == doctest::Approx(hat.eps_hat[0]).epsilon(1e-14));
  }

  TEST_CASE("population eps scales like n^(-1/3) for lambda_k = k^-2") {
    std::vector<double> ns, eps;
    const auto pop = power_law(20000, 2.0);
    for (int n : {500, 1000, 2000, 4000, 8000}) {
      ns.push_back(n);
      eps.push_back(eps_breve_all({pop}, 1.0, 2, n)[0]);
    }
    CHECK(slope(ns, eps) == doctest::Approx(-1.0 / 3.0).epsilon(0.08));
  }

  TEST_CASE("rademacher supremum: closed forms and mesh oracle") {
    Vector a(1), s(1);
    a << -0.7;
    s << 1.0;
    CHECK(rademacher_sup(a, s, 1.5) == doctest::Approx(0.7));
    Vector a3(3), s3(3);
    a3 << 0.3, -0.2, 0.5;
    s3 << 0.9, 0.4, 0.1;
    CHECK(rademacher_sup(a3, s3, 1e-9) < 1e-8);

    Rng rng(8);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      Vector a6(6), s6(6);
      for (int k = 0; k < 6; ++k) {
        a6(k) = z(rng);
        s6(k) = u(rng);
      }
      if (trial % 5 == 0) s6(5) = 0.0;  // flat direction
      const double delta = std::exp(-3.0 * u(rng));
      const double mine = rademacher_sup(a6, s6, delta);
      const double lower = oracle::rademacher_sup_mesh(a6, s6, delta);
      const double upper = oracle::rademacher_sup_dual_bound(a6, s6, delta);
      CAPTURE(trial);
      CHECK(mine >= lower - 1e-6);
      CHECK(mine <= upper + 1e-6);
      CHECK(mine == doctest::Approx(lower).epsilon(1e-6));
    }
  }

  TEST_CASE("Monte-Carlo estimators: zero spectrum, sign-vector scaling and projection sandwich") {
    const GramSpectrum zero = spectrum_of(std::vector<double>(20, 0.0));
    CHECK(eps_tilde_mc(zero, 4.0, 10, 50, 1) == doctest::Approx(regularization_floor(4.0, 10, 20)));

    // projection kernel of rank 5: eps-tilde within [0.2, 5] of eps-hat
    Rng rng(2);
    std::uniform_real_distribution<double> unif;
    PointSet X(400, 1);
    for (int i = 0; i < 400; ++i) X(i, 0) = unif(rng);
    const GramSpectrum sp = spectrum(gram(Kernel::projection("p", {0}, cosine_basis(5), "cosine"), X));
    const double hat = eps_hat_all(std::vector<GramSpectrum>{sp}, 1.0, 2).eps_hat[0];
    const double tilde = eps_tilde_mc(sp, 1.0, 2, 200, 3);
    CHECK(tilde / hat >= 0.2);
    CHECK(tilde / hat <= 5.0);

    const McValue small = localized_rademacher_mc(sp, 0.3, 100, 5);
    const McValue large = localized_rademacher_mc(sp, 0.3, 1600, 5);
    CHECK(large.std_error / small.std_error == doctest::Approx(0.25).epsilon(0.3));
  }

  TEST_CASE("sandwich check: zero spectrum passes, identity within constants, CSV written") {
    const auto grid = log_grid(1e-3, 1.0, 16);
    const GramSpectrum zero = spectrum_of(std::vector<double>(10, 0.0));
    const SandwichReport z = gamma_bounds_check(zero, complexity_curve_mc(zero, grid, 20, 1));
    CHECK(z.pass);
    const GramSpectrum id = spectrum_of(std::vector<double>(50, 1.0));
    const SandwichReport r = gamma_bounds_check(id, complexity_curve_mc(id, grid, 200, 2));
    CHECK(r.pass);
    CHECK(r.min_ratio() >= 0.05);
    CHECK(r.max_ratio() <= 4.0);
    std::ostringstream out;
    write_sandwich_csv(out, r, "identity");
    const std::string csv = out.str();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
  }

  TEST_CASE("property: complexity monotone, ratio decreasing, feasibility and minimality") {
    Rng rng(21);
    std::uniform_real_distribution<double> u(0.3, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 20 + 37 * trial;
      auto eig = power_law(n, u(rng), u(rng) / 3.0);
      double prev = 0.0, prev_ratio = std::numeric_limits<double>::infinity();
      for (int i = 1; i <= 1000; ++i) {
        const double d = i / 1000.0;
        const double g = gamma_hat(eig, n, d);
        CHECK(g >= prev - 1e-15);
        CHECK(g / d <= prev_ratio * (1 + 1e-12));
        prev = g;
        prev_ratio = g / d;
      }
      const double floor = trial % 2 ? 1e-3 : 0.2;
      const double eps = eps_from_majorant(eig, n, floor);
      for (double d : oracle::dense_delta_grid(10000)) CHECK(gamma_hat(eig, n, d) <= eps * d + eps * eps + 1e-15);
      if (eps > floor) CHECK_FALSE(majorant_feasible(eig, n, eps * (1 - 1e-6)));
      // more spectral mass never lowers eps
      for (double& e : eig) e = std::min(1.0, e * 1.5);
      CHECK(eps_from_majorant(eig, n, floor) >= eps);
    }
  }

  TEST_CASE("invalid inputs raise") {
    CHECK_THROWS_AS(regularization_floor(0.5, 10, 100), InputError);
    CHECK_THROWS_AS(gamma_hat(std::vector<double>{1.0}, 1, 0.0), InputError);
    CHECK_THROWS_AS(log_grid(1.0, 0.5, 4), InputError);
  }
}
