#include <doctest.h>

#include <cmath>
#include <random>

#include "ldpnn/errors.hpp"
#include "ldpnn/mgf.hpp"
#include "ldpnn/nngp.hpp"

using namespace ldpnn;

TEST_CASE("input kernel") {
  CHECK(input_kernel(InputSet::scalars({3.0}))(0, 0) == 9.0);
  CHECK(input_kernel(InputSet::scalars({0.0}))(0, 0) == 0.0);
  const std::vector<double> xs{-3, -2, -1, 0, 1, 2};
  const KernelMatrix k = input_kernel(InputSet::scalars(xs));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(k(i, j) == xs[i] * xs[j]);

  InputSet two;
  two.points = {Eigen::Vector2d(1, 2), Eigen::Vector2d(3, -1)};
  CHECK(input_kernel(two)(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("layer map examples") {
  const Matrix c = Matrix::Constant(1, 1, 2.5);
  CHECK(nngp_layer_map(KernelMatrix(c), ActivationKind::linear(1.0), 0.0)(0, 0) == 2.5);
  for (double v : {1.0, 9.0, 10.0})
    CHECK(nngp_layer_map(KernelMatrix(Matrix::Constant(1, 1, v)), ActivationKind::relu(), 0.0)(0, 0) == v / 2);
  CHECK(nngp_layer_map(KernelMatrix::zero(1), ActivationKind::tanh(), 0.0)(0, 0) == 0.0);
}

TEST_CASE("kernel chains") {
  const auto lin = nngp_kernels(InputSet::scalars({1.7}), NetworkSpec::uniform(2, ActivationKind::linear(1.0), 0.0));
  REQUIRE(lin.size() == 2);
  CHECK(lin[0](0, 0) == doctest::Approx(1.7 * 1.7));
  CHECK(lin[1](0, 0) == doctest::Approx(1.7 * 1.7));

  // Independent oracle: E[relu(g)^2] = c/2 for c = 10.
  const auto relu = nngp_kernels(InputSet::scalars({3.0}), NetworkSpec::uniform(2, ActivationKind::relu(), 1.0));
  CHECK(relu[1](0, 0) == doctest::Approx(5.0).epsilon(1e-14));

  const auto deep = nngp_kernels(InputSet::scalars({1.0}), NetworkSpec::uniform(3, ActivationKind::linear(2.0), 0.0));
  CHECK(deep[2](0, 0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("linear chain scales by powers of a") {
  const InputSet x = InputSet::scalars({-1.0, 0.5, 2.0});
  const auto chain = nngp_kernels(x, NetworkSpec::uniform(5, ActivationKind::linear(1.3), 0.0));
  for (int l = 0; l < 5; ++l) {
    const Matrix expect = std::pow(1.3, l) * chain[0].matrix();
    CHECK((chain[l].matrix() - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("relu closed form agrees with the quadrature path") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  for (int t = 0; t < 20; ++t) {
    Matrix a(2, 2);
    a << n(rng), n(rng), n(rng), n(rng);
    const Matrix cov = a * a.transpose();
    const KernelMatrix closed = nngp_layer_map(KernelMatrix(cov), ActivationKind::relu(), 0.0);
    const ConditionalMgf quad(cov, ActivationKind::relu());
    CHECK((closed.matrix() - quad.mean()).cwiseAbs().maxCoeff() <= 1e-6 * closed.matrix().cwiseAbs().maxCoeff());
  }
}

TEST_CASE("relu diagonal halves the pre-activation variance") {
  const InputSet x = InputSet::scalars({-3, -2, -1, 0, 1, 2, 3});
  const auto chain = nngp_kernels(x, NetworkSpec::uniform(4, ActivationKind::relu(), 1.0));
  for (int l = 1; l < 4; ++l)
    for (int i = 0; i < x.size(); ++i)
      CHECK(std::abs(chain[l](i, i) - 0.5 * (chain[l - 1](i, i) + 1.0)) <= 1e-10);
}

TEST_CASE("tanh moments match frozen oracle values") {
  // Frozen from an adaptive scipy integration: E[tanh(g)^2], g ~ N(0, 10).
  const auto k1 = nngp_layer_map(KernelMatrix(Matrix::Constant(1, 1, 9.0)), ActivationKind::tanh(), 1.0);
  CHECK(k1(0, 0) == doctest::Approx(0.7572662769213184).epsilon(1e-9));
  // Cross moment with pre-activation covariance [[10, 7], [7, 5]].
  const auto k2 = nngp_kernels(InputSet::scalars({3.0, 2.0}), NetworkSpec::uniform(2, ActivationKind::tanh(), 1.0));
  CHECK(k2[1](0, 1) == doctest::Approx(0.6960609690268996).epsilon(1e-8));
}

TEST_CASE("psd repair") {
  Matrix a(2, 2);
  a << 1.0, 1.0 + 1e-10, 1.0 + 1e-10, 1.0;
  CHECK(psd_repair(a).min_eigenvalue() >= 0.0);
  a << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(psd_repair(a), QuadratureUnstable);
}
