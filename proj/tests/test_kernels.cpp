#include "oracles.hpp"
#include "smkl/kernels.hpp"
#include "smkl/rng.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace smkl;

namespace {

PointSet uniform_points(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u;
  PointSet X(n, p);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < p; ++c) X(i, c) = u(rng);
  return X;
}

std::vector<Kernel> every_kind() {
  Matrix table(4, 4);
  table << 2, 1, 0, 0, 1, 2, 1, 0, 0, 1, 2, 1, 0, 0, 1, 2;
  return {Kernel::gaussian("g", {0, 1}, 0.3), Kernel::sobolev_fourier("s", {1}, 1.0, 40),
          Kernel::linear("l", {0, 2}), Kernel::projection("p", {2}, cosine_basis(5), "cosine"),
          Kernel::tabulated("t", 3, table)};
}

PointSet points_for_all(int n, std::uint64_t seed) {
  PointSet X = uniform_points(n, 4, seed);
  for (int i = 0; i < n; ++i) X(i, 3) = i % 4;  // index coordinate of the tabulated kernel
  return X;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("linear kernel on one coordinate") {
    const Kernel k = Kernel::linear("l", {0});
    Vector x(1), y(1);
    x << 0.5;
    y << 0.5;
    CHECK(k(x, y) == doctest::Approx(0.25).epsilon(1e-15));
  }

  TEST_CASE("symmetry and diagonal bound for every kind") {
    const PointSet X = points_for_all(100, 7);
    for (const auto& k : every_kind()) {
      CAPTURE(k.id());
      for (int i = 0; i + 1 < X.rows(); i += 2) {
        const Vector a = X.row(i).transpose(), b = X.row(i + 1).transpose();
        CHECK(std::abs(k(a, b) - k(b, a)) <= 1e-12);
      }
      double worst = 0.0;
      for (int i = 0; i < X.rows(); ++i) worst = std::max(worst, k(X.row(i).transpose(), X.row(i).transpose()));
      CHECK(worst <= 1.0 + 1e-12);
    }
  }

  TEST_CASE("sobolev kernel matches direct series summation") {
    const Kernel k = Kernel::sobolev_fourier("s", {0}, 1.0, 50);
    const double Z = oracle::sobolev_series(1.0, 50, 0.0);
    Vector x(1), y(1);
    for (double a : {0.0, 0.13, 0.5, 0.77}) {
      for (double b : {0.0, 0.31, 0.9}) {
        x << a;
        y << b;
        CHECK(k(x, y) == doctest::Approx(oracle::sobolev_series(1.0, 50, a - b) / Z).epsilon(1e-12));
      }
    }
    x << 0.42;
    CHECK(k(x, x) == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("sobolev truncation change is bounded by the analytic tail") {
    const int T = 10;
    const Kernel a = Kernel::sobolev_fourier("a", {0}, 1.0, T), b = Kernel::sobolev_fourier("b", {0}, 1.0, 2 * T);
    const PointSet X = uniform_points(30, 1, 3);
    const Matrix Ga = gram(a, X).entries / a.scale(), Gb = gram(b, X).entries / b.scale();
    CHECK((Ga - Gb).cwiseAbs().maxCoeff() <= sobolev_tail_bound(1.0, T) + 1e-12);
    // the tail bound itself against a long direct sum
    double tail = 0.0;
    for (int m = T + 1; m <= 200000; ++m) tail += 2.0 / (double(m) * m + 1.0);
    CHECK(sobolev_tail_bound(1.0, T) >= tail - 1e-12);
    CHECK(sobolev_tail_bound(1.0, T) <= tail + 2.0 / 199000.0);
  }

  TEST_CASE("gram of a single unit point and a gaussian triple") {
    const Kernel g = Kernel::gaussian("g", {0}, 0.5);
    PointSet one(1, 1);
    one << 0.3;
    CHECK(gram(g, one).entries(0, 0) == doctest::Approx(1.0));
    PointSet X(3, 1);
    X << 0.1, 0.4, 0.95;
    const Matrix G = gram(g, X).entries;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(G(i, j) == doctest::Approx(std::exp(-std::pow(X(i, 0) - X(j, 0), 2) / (2 * 0.25))).epsilon(1e-14));
  }

  TEST_CASE("projection kernel gram has rank at most its dimension") {
    const Kernel k = Kernel::projection("p", {0}, cosine_basis(4), "cosine");
    const PointSet X = uniform_points(200, 1, 5);
    const GramSpectrum s = spectrum(gram(k, X));
    int nonzero = 0;
    for (int i = 0; i < s.eigenvalues.size(); ++i) nonzero += s.eigenvalues(i) > 1e-8;
    CHECK(nonzero == 4);
  }

  TEST_CASE("spectrum of identity and rank-one grams") {
    GramMatrix g{4.0 * Matrix::Identity(4, 4)};
    GramSpectrum s = spectrum(g);
    for (int i = 0; i < 4; ++i) CHECK(s.eigenvalues(i) == doctest::Approx(4.0 / 4.0));
    Vector u = Vector::Ones(5);
    g.entries = u * u.transpose();
    s = spectrum(g);
    CHECK(s.eigenvalues(0) == doctest::Approx(1.0));
    for (int i = 1; i < 5; ++i) CHECK(std::abs(s.eigenvalues(i)) < 1e-12);
  }

  TEST_CASE("random PSD spectrum reconstructs the normalised gram") {
    Rng rng(11);
    std::normal_distribution<double> z;
    Matrix B(12, 7);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
    const GramMatrix g{B * B.transpose()};
    const GramSpectrum s = spectrum(g);
    const Matrix rec = s.eigenvectors * s.eigenvalues.head(s.eigenvectors.cols()).asDiagonal() * s.eigenvectors.transpose();
    CHECK((rec - g.entries / 12.0).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("feature spectrum agrees with the full eigendecomposition") {
    const PointSet X = uniform_points(80, 3, 9);
    for (const Kernel& k : {Kernel::sobolev_fourier("s", {0}, 1.0, 8), Kernel::linear("l", {0, 1, 2})}) {
      const GramSpectrum thin = spectrum_from_features(k.features(X));
      const GramSpectrum full = spectrum(gram(k, X));
      REQUIRE(thin.eigenvalues.size() == full.eigenvalues.size());
      CHECK((thin.eigenvalues - full.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::Index r = thin.eigenvectors.cols();
      const Matrix rec = thin.eigenvectors * thin.eigenvalues.head(r).asDiagonal() * thin.eigenvectors.transpose();
      CHECK((rec - gram(k, X).entries / 80.0).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("property: eigenvalues are nonnegative and sum to the trace") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const PointSet X = points_for_all(60, seed);
      for (const auto& k : every_kind()) {
        const GramMatrix g = gram(k, X);
        const GramSpectrum s = spectrum(g);
        CHECK(s.eigenvalues.minCoeff() >= 0.0);
        CHECK(s.eigenvalues.sum() == doctest::Approx(g.entries.trace() / 60.0).epsilon(1e-8));
      }
    }
  }

  TEST_CASE("property: projection spectrum has min(m, n) nonzero eigenvalues") {
    for (int n : {3, 10, 50}) {
      const Kernel k = Kernel::projection("p", {0}, trigonometric_basis(7), "trigonometric");
      const GramSpectrum s = spectrum(gram(k, uniform_points(n, 1, 100 + n)));
      int nonzero = 0;
      for (int i = 0; i < s.eigenvalues.size(); ++i) nonzero += s.eigenvalues(i) > 1e-8;
      CHECK(nonzero == std::min(7, n));
    }
  }

  TEST_CASE("gram CSV round trip") {
    const GramMatrix g = gram(Kernel::gaussian("g", {0}, 0.2), uniform_points(6, 1, 2));
    std::stringstream ss;
    write_gram_csv(ss, g);
    CHECK(ss.str().rfind("n=6", 0) == 0);
    const GramMatrix back = read_gram_csv(ss);
    CHECK((back.entries - g.entries).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("invalid inputs raise") {
    CHECK_THROWS_AS(Kernel::gaussian("g", {0}, 0.0), InputError);
    CHECK_THROWS_AS(Kernel::sobolev_fourier("s", {0}, 0.4, 10), InputError);
    CHECK_THROWS_AS(KernelDictionary({Kernel::linear("a", {0}), Kernel::linear("a", {1})}), InputError);
    Matrix not_psd(2, 2);
    not_psd << 1, 2, 2, 1;
    CHECK_THROWS(spectrum(GramMatrix{not_psd}));
  }
}
