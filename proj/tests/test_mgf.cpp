#include <doctest.h>

#include <cmath>
#include <random>

#include "ldpnn/errors.hpp"
#include "ldpnn/mgf.hpp"

using namespace ldpnn;

namespace {

Matrix sym_random(std::mt19937_64& rng, int m, double scale) {
  std::normal_distribution<double> n;
  Matrix a(m, m);
  for (int i = 0; i < m * m; ++i) a.data()[i] = n(rng);
  return scale * 0.5 * (a + a.transpose());
}

Matrix bias_covariance(const std::vector<double>& xs, double bias) {
  const int m = static_cast<int>(xs.size());
  Matrix c(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) c(i, j) = xs[i] * xs[j] + bias;
  return c;
}

/// Random tilt scaled so that 2 * lambda_max(S^T Lambda S) stays below one half.
Matrix inside_tilt(std::mt19937_64& rng, const Matrix& cov, double frac) {
  const Matrix l = sym_random(rng, static_cast<int>(cov.rows()), 1.0);
  const Matrix s = low_rank_factor(cov);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.transpose() * l.cwiseAbs() * s);
  return l * (frac / (2.0 * es.eigenvalues().cwiseAbs().maxCoeff()));
}

double fd_rel_error(const ConditionalMgf& f, const Matrix& lambda) {
  const int m = f.size();
  const Matrix g = f.evaluate(lambda, true).tilted_mean;
  Matrix fd(m, m);
  const double h = 1e-5;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) {
      Matrix e = Matrix::Zero(m, m);
      e(i, j) += 1.0;
      e(j, i) += 1.0;
      const double d = (f.evaluate(lambda + h * e, false).log_mgf - f.evaluate(lambda - h * e, false).log_mgf) / (2 * h);
      fd(i, j) = fd(j, i) = i == j ? d / 2.0 : d / 2.0;
    }
  return (g - fd).norm() / fd.norm();
}

}  // namespace

TEST_CASE("zero tilt gives zero") {
  std::mt19937_64 rng(31);
  for (auto act : {ActivationKind::relu(), ActivationKind::tanh(), ActivationKind::linear(1.7)}) {
    const Matrix c = bias_covariance({-1.0, 0.5, 2.0}, 1.0);
    CHECK(*cond_log_mgf(TiltMatrix(Matrix::Zero(3, 3)), KernelMatrix(c), act) == 0.0);
    CHECK(*cond_log_mgf(TiltMatrix(Matrix::Zero(1, 1)), KernelMatrix::identity(1), act) == 0.0);
  }
}

TEST_CASE("linear single input closed form") {
  for (double a : {1.0, 2.0}) {
    for (double lam = -3.0; lam < 0.5 / a - 1e-3; lam += 0.0173) {
      const auto v = cond_log_mgf(TiltMatrix(Matrix::Constant(1, 1, lam)), KernelMatrix::identity(1),
                                  ActivationKind::linear(a));
      REQUIRE(v.has_value());
      CHECK(std::abs(*v + 0.5 * std::log(1.0 - 2.0 * lam * a)) < 1e-9);
    }
  }
  CHECK_FALSE(cond_log_mgf(TiltMatrix(Matrix::Constant(1, 1, 0.6)), KernelMatrix::identity(1), ActivationKind::linear())
                  .has_value());
  CHECK_FALSE(cond_log_mgf(TiltMatrix(Matrix::Constant(1, 1, 0.5)), KernelMatrix::identity(1), ActivationKind::linear())
                  .has_value());
  CHECK_THROWS_AS(grad_cond_log_mgf(TiltMatrix(Matrix::Constant(1, 1, 0.6)), KernelMatrix::identity(1),
                                    ActivationKind::linear()),
                  Diverged);
}

TEST_CASE("tilted mean examples") {
  const Matrix c = bias_covariance({1.0, -2.0}, 0.0) + Matrix::Identity(2, 2);
  const Matrix g0 = grad_cond_log_mgf(TiltMatrix(Matrix::Zero(2, 2)), KernelMatrix(c), ActivationKind::linear(1.5));
  CHECK((g0 - 1.5 * c).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix r0 = grad_cond_log_mgf(TiltMatrix(Matrix::Zero(1, 1)), KernelMatrix::identity(1), ActivationKind::relu());
  CHECK(r0(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  for (double lam : {-1.0, 0.1, 0.3}) {
    const Matrix g = grad_cond_log_mgf(TiltMatrix(Matrix::Constant(1, 1, lam)), KernelMatrix::identity(1),
                                       ActivationKind::linear());
    CHECK(g(0, 0) == doctest::Approx(1.0 / (1.0 - 2.0 * lam)).epsilon(1e-12));
  }
}

TEST_CASE("frozen oracle values") {
  // Independent scipy integrations (single input, pre-activation variance 10).
  const KernelMatrix c10(Matrix::Constant(1, 1, 10.0));
  CHECK(*cond_log_mgf(TiltMatrix(Matrix::Constant(1, 1, 0.03)), c10, ActivationKind::relu()) ==
        doctest::Approx(0.2550835279915412).epsilon(1e-12));
  CHECK(*cond_log_mgf(TiltMatrix(Matrix::Constant(1, 1, 0.7)), c10, ActivationKind::tanh()) ==
        doctest::Approx(0.5538759066031574).epsilon(1e-9));

  // Three inputs (1, -0.5, 2) with unit bias: rank-two covariance.
  Matrix lam(3, 3);
  lam << 0.02, -0.01, 0.005, -0.01, 0.03, 0.0, 0.005, 0.0, -0.01;
  const KernelMatrix c3(bias_covariance({1.0, -0.5, 2.0}, 1.0));
  CHECK(*cond_log_mgf(TiltMatrix(lam), c3, ActivationKind::relu()) == doctest::Approx(0.02201987540914534).epsilon(1e-12));
  const Matrix t = grad_cond_log_mgf(TiltMatrix(lam), c3, ActivationKind::relu());
  CHECK(t(0, 2) == doctest::Approx(1.5652243059337954).epsilon(1e-9));
}

TEST_CASE("log mgf is midpoint convex") {
  std::mt19937_64 rng(32);
  const Matrix c = bias_covariance({-3, -2, -1, 0, 1, 2, 3}, 1.0);
  for (auto act : {ActivationKind::relu(), ActivationKind::tanh(), ActivationKind::linear(1.0)}) {
    const ConditionalMgf f(c, act);
    for (int t = 0; t < 10; ++t) {
      const Matrix a = inside_tilt(rng, c, 0.4), b = inside_tilt(rng, c, 0.4);
      const double fa = f.evaluate(a, false).log_mgf, fb = f.evaluate(b, false).log_mgf;
      const double fm = f.evaluate(0.5 * (a + b), false).log_mgf;
      CHECK(fm <= 0.5 * (fa + fb) + 1e-8);
    }
  }
}

TEST_CASE("tilted mean matches finite differences") {
  std::mt19937_64 rng(33);
  const std::vector<Matrix> covs{bias_covariance({-1.0, 0.5, 2.0}, 1.0), bias_covariance({3.0}, 1.0),
                                 bias_covariance({-3, -2, -1, 0, 1, 2, 5}, 1.0),
                                 bias_covariance({1.0, 2.0, 0.3}, 0.0) + 0.5 * Matrix::Identity(3, 3)};
  for (auto act : {ActivationKind::relu(), ActivationKind::tanh(), ActivationKind::linear(0.7)}) {
    for (const Matrix& c : covs) {
      if (act.kind == Activation::tanh && c.rows() == 3 && c(0, 0) > 1.4) continue;
      const ConditionalMgf f(c, act);
      for (int t = 0; t < 5; ++t) {
        const Matrix l = act.kind == Activation::tanh ? sym_random(rng, f.size(), 0.5) : inside_tilt(rng, c, 0.3);
        CHECK(fd_rel_error(f, l) < 1e-4);
      }
    }
  }
}

TEST_CASE("increment spans") {
  const Matrix c = bias_covariance({-3, -2, -1, 0, 1, 2, 3}, 1.0);
  CHECK(ConditionalMgf(c, ActivationKind::relu()).increment_span().dim() == 22);
  CHECK(ConditionalMgf(c, ActivationKind::tanh()).increment_span().is_full());
  CHECK(ConditionalMgf(c, ActivationKind::linear()).increment_span().dim() == 3);
  CHECK(ConditionalMgf(Matrix::Constant(1, 1, 2.0), ActivationKind::relu()).increment_span().is_full());
}

TEST_CASE("divergence on the boundary of the domain") {
  const Matrix c = bias_covariance({1.0, 2.0}, 1.0);
  const ConditionalMgf f(c, ActivationKind::relu());
  CHECK(f.evaluate(Matrix::Identity(2, 2), false).diverged);
  CHECK_FALSE(f.evaluate(-Matrix::Identity(2, 2), false).diverged);
  CHECK_FALSE(f.evaluate(Matrix::Identity(2, 2) * 0.05, false).diverged);
}

TEST_CASE("tilted covariance matches finite differences of the tilted mean") {
  struct Case {
    Matrix cov;
    ActivationKind act;
  };
  Matrix c1(2, 2), c2(3, 3), c3(3, 3);
  c1 << 2.0, 1.0, 1.0, 0.5;
  c2 << 2.0, 0.3, 1.0, 0.3, 1.0, -0.2, 1.0, -0.2, 1.5;
  c3 << 10.0, 7.0, 4.0, 7.0, 5.0, 3.0, 4.0, 3.0, 2.0;
  QuadratureSpec q;
  q.mc_fallback_samples = 100000;
  const std::vector<Case> cases{{c1, ActivationKind::relu()},
                                {c3, ActivationKind::relu()},
                                {c2, ActivationKind::relu()},
                                {c1, ActivationKind::tanh()},
                                {c3, ActivationKind::linear(2.0)}};
  for (const Case& c : cases) {
    const ConditionalMgf f(c.cov, c.act, q);
    const int m = f.size();
    const int n = svec_size(m);
    Vector l(n);
    for (int k = 0; k < n; ++k) l(k) = 0.004 * std::sin(1.0 + k);
    const MgfValue v = f.evaluate(smat(l, m), true, true);
    REQUIRE(!v.diverged);
    const double h = 1e-5;
    for (int k = 0; k < n; ++k) {
      Vector a = l, b = l;
      a(k) += h;
      b(k) -= h;
      const Vector col = (svec(f.evaluate(smat(a, m), true).tilted_mean) - svec(f.evaluate(smat(b, m), true).tilted_mean)) / (2 * h);
      CHECK((v.hessian.col(k) - col).norm() <= 1e-5 * std::max(1.0, col.norm()));
    }
  }
}
