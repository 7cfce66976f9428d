#include "oracles.hpp"
#include "smkl/solver.hpp"
#include "smkl/synthdata.hpp"

#include <doctest.h>

#include <random>

using namespace smkl;

namespace {

PointSet uniform_points(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u;
  PointSet X(n, p);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  return X;
}

// Linear kernels on disjoint coordinate blocks of the given sizes.
KernelDictionary linear_blocks(const std::vector<int>& sizes) {
  std::vector<Kernel> ks;
  int start = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    std::vector<int> block;
    for (int c = 0; c < sizes[j]; ++c) block.push_back(start + c);
    start += sizes[j];
    ks.push_back(Kernel::linear("lin" + std::to_string(j), block));
  }
  return KernelDictionary(ks);
}

oracle::GroupProblem group_problem(const PointSet& X, const Vector& Y, const KernelDictionary& dict,
                                   const std::vector<double>& eps, double tau) {
  oracle::GroupProblem P;
  P.Y = Y;
  for (int j = 0; j < dict.size(); ++j) {
    const auto& block = dict[j].block();
    Matrix Xj(X.rows(), static_cast<Eigen::Index>(block.size()));
    for (std::size_t c = 0; c < block.size(); ++c) Xj.col(static_cast<Eigen::Index>(c)) = X.col(block[c]);
    P.X.push_back(Xj);
    const double e = eps[static_cast<std::size_t>(j)];
    P.a.push_back(tau * e);
    P.b.push_back(tau * tau * e * e);
    P.c.push_back(1.0 / static_cast<double>(block.size()));
  }
  return P;
}

Vector linear_response(const PointSet& X, std::uint64_t seed, double noise) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Vector Y(X.rows());
  for (int i = 0; i < X.rows(); ++i) Y(i) = 1.5 * X(i, 0) - 2.0 * X(i, 1) + 0.7 * X(i, 2) + noise * g(rng);
  return Y;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("parametrisation: identity, rank one and quadratic forms") {
    GramSpectrum s;
    s.n = 4;
    s.eigenvalues = Vector::Ones(4);
    s.eigenvectors = Matrix::Identity(4, 4);
    const auto p = parametrize(std::vector<GramSpectrum>{s});
    CHECK(p.rank(0) == 4);
    CHECK((p.blocks[0].s - Vector::Ones(4)).norm() < 1e-14);
    Vector u = Vector::Ones(5);
    const auto p1 = parametrize(std::vector<GramSpectrum>{spectrum(GramMatrix{u * u.transpose()})});
    CHECK(p1.rank(0) == 1);

    // c^T G c equals the squared RKHS norm |v|^2, and values match G c
    const Kernel k = Kernel::gaussian("g", {0}, 0.3);
    const PointSet X = uniform_points(15, 1, 3);
    const GramMatrix G = gram(k, X);
    const auto pg = parametrize(std::vector<GramSpectrum>{spectrum(G)});
    const auto& b = pg.blocks[0];
    Vector v = Vector::LinSpaced(b.s.size(), 1.0, -1.0);
    const Vector c = b.U * b.sqrt_d.cwiseInverse().asDiagonal() * v;
    CHECK(c.dot(G.entries * c) == doctest::Approx(v.squaredNorm()).epsilon(1e-6));
    CHECK((G.entries * c - b.U * b.sqrt_d.asDiagonal() * v).norm() < 1e-8 * (1 + v.norm()));
    CHECK(std::sqrt((G.entries * c).squaredNorm() / 15.0) == doctest::Approx(b.s.cwiseProduct(v).norm()).epsilon(1e-8));
  }

  TEST_CASE("zero response and huge tau give the zero model") {
    const KernelDictionary dict = sobolev_additive_dictionary(3, 1.0, 16);
    const PointSet X = uniform_points(60, 3, 4);
    FitConfig cfg;
    const auto zero = fit(X, Vector::Zero(60), dict, cfg);
    CHECK(zero.active_set.empty());
    CHECK(zero.kkt_residual == 0.0);
    cfg.tau = 1e6;
    const auto big = fit(X, linear_response(X, 1, 0.1), dict, cfg);
    CHECK(big.active_set.empty());
  }

  TEST_CASE("linear dictionary matches the block-coordinate-descent reference") {
    for (int trial = 0; trial < 4; ++trial) {
      const KernelDictionary dict = linear_blocks({1, 2, 1, 3});
      const PointSet X = uniform_points(80, 7, 10 + trial);
      const Vector Y = linear_response(X, 20 + trial, 0.3);
      FitConfig cfg;
      cfg.tau = 0.3 + 0.2 * trial;
      cfg.tol_kkt = 1e-9;
      cfg.max_iter = 20000;
      const auto model = fit(X, Y, dict, cfg);
      REQUIRE(model.converged);
      const auto P = group_problem(X, Y, dict, model.eps_used.eps_hat, cfg.tau);
      const double ref = oracle::group_objective(P, oracle::group_bcd(P));
      CAPTURE(trial);
      CHECK(model.objective() == doctest::Approx(ref).epsilon(1e-6));
    }
  }

  TEST_CASE("predictions: zero model, training points and a rank-one block") {
    const KernelDictionary dict = sobolev_additive_dictionary(2, 1.0, 12);
    const PointSet X = uniform_points(50, 2, 6);
    Vector Y = (6.0 * X.col(0)).array().sin().matrix();
    FitConfig cfg;
    cfg.tau = 0.3;
    const auto model = fit(X, Y, dict, cfg);
    CHECK((predict(model, dict, X).total - model.fitted).cwiseAbs().maxCoeff() < 1e-8);

    std::vector<Vector> zeros(2, Vector::Zero(50));
    CHECK(predict(dict, X, zeros, uniform_points(7, 2, 1)).total.cwiseAbs().maxCoeff() == 0.0);

    // rank one: the fitted block is a multiple of its single basis function
    const KernelDictionary one({Kernel::projection("p", {0}, cosine_basis(1), "cosine"),
                                Kernel::linear("l", {1})});
    const auto m1 = fit(X, Y, one, cfg);
    const PointSet Z = uniform_points(20, 2, 2);
    const Prediction p = predict(m1, one, Z);
    const Vector phi = (2.0 * std::numbers::pi * Z.col(0)).array().cos() * std::sqrt(2.0);
    const double t = p.per_block.col(0).dot(phi) / phi.squaredNorm();
    CHECK((p.per_block.col(0) - t * phi).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("kkt residual at an oracle minimiser of a tiny instance") {
    const KernelDictionary dict = linear_blocks({1, 1});
    const PointSet X = uniform_points(5, 2, 12);
    const Vector Y = X.col(0) * 2.0 - X.col(1);
    const auto spectra = dictionary_spectra(dict, X);
    const auto param = parametrize(spectra);
    const RegParams reg = eps_hat_all(spectra, 1.0, 2);
    const double tau = 0.2;
    const auto P = group_problem(X, Y, dict, reg.eps_hat, tau);
    const auto w = oracle::group_bcd(P);
    std::vector<Vector> v;
    for (int j = 0; j < 2; ++j) {
      const auto& b = param.blocks[static_cast<std::size_t>(j)];
      const Vector values = P.X[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)];
      v.push_back(b.sqrt_d.cwiseInverse().asDiagonal() * (b.U.transpose() * values));
    }
    const LossModel q = LossModel::quadratic();
    CHECK(kkt_residual(param, Y, q, reg.eps_hat, tau, v) <= 1e-6);
    CHECK(kkt_residual(param, Vector::Zero(5), q, reg.eps_hat, tau,
                       {Vector::Zero(param.rank(0)), Vector::Zero(param.rank(1))}) == 0.0);
    // perturbing the solution increases the residual
    std::vector<Vector> bumped = v;
    bumped[0](0) += 0.05;
    CHECK(kkt_residual(param, Y, q, reg.eps_hat, tau, bumped) > kkt_residual(param, Y, q, reg.eps_hat, tau, v));
  }

  TEST_CASE("property: convex objective, monotone trace, penalty re-factorisation") {
    const KernelDictionary dict = sobolev_additive_dictionary(4, 1.0, 10);
    const PointSet X = uniform_points(70, 4, 30);
    const Vector Y = (5.0 * X.col(1)).array().cos().matrix() + 0.2 * X.col(2);
    const auto spectra = dictionary_spectra(dict, X);
    const auto param = parametrize(spectra);
    RegParams reg = eps_hat_all(spectra, 4.0, 4);
    const LossModel q = LossModel::quadratic();

    Rng rng(31);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    auto random_v = [&]() {
      std::vector<Vector> v;
      for (int j = 0; j < param.size(); ++j) {
        Vector x(param.rank(j));
        for (int k = 0; k < x.size(); ++k) x(k) = g(rng);
        v.push_back(x);
      }
      return v;
    };
    for (int trial = 0; trial < 50; ++trial) {
      const auto a = random_v(), b = random_v();
      const double lam = u(rng);
      std::vector<Vector> mix;
      for (std::size_t j = 0; j < a.size(); ++j) mix.push_back(lam * a[j] + (1 - lam) * b[j]);
      CHECK(objective_value(param, Y, q, reg.eps_hat, 0.7, mix) <=
            lam * objective_value(param, Y, q, reg.eps_hat, 0.7, a) +
                (1 - lam) * objective_value(param, Y, q, reg.eps_hat, 0.7, b) + 1e-10);
    }

    FitConfig cfg;
    cfg.tau = 0.5;
    cfg.tol_kkt = 1e-9;
    const auto base = fit(param, Y, reg, cfg);
    for (std::size_t i = 1; i < base.objective_trace.size(); ++i)
      CHECK(base.objective_trace[i] <= base.objective_trace[i - 1] + 1e-14 * std::abs(base.objective_trace[i - 1]));

    RegParams scaled = reg;
    for (double& e : scaled.eps_hat) e *= 2.0;
    FitConfig cfg2 = cfg;
    cfg2.tau = cfg.tau / 2.0;
    const auto other = fit(param, Y, scaled, cfg2);
    CHECK(other.objective() == doctest::Approx(base.objective()).epsilon(1e-9));
    for (int j = 0; j < param.size(); ++j)
      CHECK((other.v[static_cast<std::size_t>(j)] - base.v[static_cast<std::size_t>(j)]).norm() < 1e-5);
  }

  TEST_CASE("property: fitted mass concentrates on the true support") {
    for (int rep = 0; rep < 3; ++rep) {
      SyntheticSpec spec;
      spec.N = 6;
      spec.d = 2;
      spec.n = 800;
      spec.noise_sigma = 0.25;
      spec.seed = 500 + static_cast<std::uint64_t>(rep);
      const Dataset data = gen_instance(spec);
      const KernelDictionary dict = sobolev_additive_dictionary(6, 1.0, 16);
      FitConfig cfg;
      cfg.tau = 0.6;
      const auto model = fit(data.X, data.Y, dict, cfg);
      const auto norms = model.empirical_norms();
      double on = 0.0, off = 0.0;
      for (int j = 0; j < 6; ++j)
        (std::binary_search(data.truth->active_set.begin(), data.truth->active_set.end(), j) ? on : off) +=
            norms[static_cast<std::size_t>(j)];
      CAPTURE(rep);
      CHECK(on > 0.0);
      CHECK(off <= 0.5 * on);
    }
  }

  TEST_CASE("radial ball constraint and tau selection") {
    const KernelDictionary dict = sobolev_additive_dictionary(2, 1.0, 12);
    const PointSet X = uniform_points(80, 2, 41);
    const Vector Y = 3.0 * (6.0 * X.col(0)).array().sin().matrix();
    FitConfig cfg;
    cfg.tau = 0.2;
    cfg.ball_radii = std::vector<double>{0.5, 0.5};
    const auto model = fit(X, Y, dict, cfg);
    for (double r : model.rkhs_norms()) CHECK(r <= 0.5 + 1e-12);

    FitConfig c2;
    const TauSelection sel = select_tau(X, Y, dict, c2);
    CHECK(sel.validation_risk.size() == 5);
    CHECK(std::find(sel.grid.begin(), sel.grid.end(), sel.best_tau) != sel.grid.end());
  }

  TEST_CASE("invalid configuration raises") {
    FitConfig cfg;
    cfg.tau = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    FitConfig c2;
    c2.loss = "hinge";
    CHECK_THROWS_AS(c2.validate(), InputError);
    const KernelDictionary dict = sobolev_additive_dictionary(2, 1.0, 8);
    CHECK_THROWS_AS(fit(uniform_points(10, 2, 1), Vector::Zero(9), dict, FitConfig{}), InputError);
  }
}
