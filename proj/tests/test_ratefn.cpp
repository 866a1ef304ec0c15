#include "doctest.h"

#include <cmath>

#include "ldpnn/errors.hpp"
#include "ldpnn/ratefn.hpp"

using namespace ldpnn;

namespace {

NetworkSpec relu_net(int depth) {
  NetworkSpec s = NetworkSpec::uniform(depth, ActivationKind::relu());
  s.bias_variance = 1.0;
  s.output_bias_variance = 0.0;
  return s;
}

NetworkSpec linear_net(int depth) {
  NetworkSpec s = NetworkSpec::uniform(depth, ActivationKind::linear(1.0));
  s.bias_variance = 0.0;
  s.output_bias_variance = 0.0;
  return s;
}

KernelMatrix k1(double v) { return KernelMatrix(Matrix::Constant(1, 1, v)); }

}  // namespace

TEST_CASE("linear layer cost matches the scalar closed form") {
  const RateEvaluation r = layer_cost(k1(2.0), k1(1.0), ActivationKind::linear(1.0), OptimizerSettings{});
  CHECK(r.value == doctest::Approx(0.1534264097200273).epsilon(1e-8));
  CHECK(r.lambda(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("layer cost vanishes at the nngp image and is positive elsewhere") {
  const InputSet x = InputSet::scalars({-1.0, 0.5, 2.0});
  const KernelMatrix base = input_kernel(x);
  for (const ActivationKind& act : {ActivationKind::relu(), ActivationKind::tanh()}) {
    const KernelMatrix img = nngp_layer_map(base, act, 1.0);
    const RateEvaluation at = layer_cost(img, base, act, OptimizerSettings{}, 1.0);
    CHECK(std::abs(at.value) < 1e-8);
    const KernelMatrix off(1.3 * img.matrix());
    const RateEvaluation away = layer_cost(off, base, act, OptimizerSettings{}, 1.0);
    CHECK(away.value > 1e-3);
  }
}

TEST_CASE("relu layer cost is infinite off the increment span") {
  const InputSet x = InputSet::scalars({-1.0, 1.0});
  const KernelMatrix base = input_kernel(x);
  Matrix t(2, 2);
  t << 1.0, 0.5, 0.5, 1.0;
  const RateEvaluation r = layer_cost(KernelMatrix(t), base, ActivationKind::relu(), OptimizerSettings{}, 0.0);
  CHECK(is_infinite(r.value));
}

TEST_CASE("two layer linear kernel rate is additive along the nested chain") {
  const InputSet x = InputSet::scalars({1.0});
  const RateEvaluation r = kernel_rate(k1(4.0), 2, x, linear_net(3), OptimizerSettings{});
  CHECK(r.value == doctest::Approx(0.3068528194400546).epsilon(1e-6));
  CHECK(r.layer_kernels.front().matrix()(0, 0) == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("shallow linear output rate") {
  const InputSet x = InputSet::scalars({1.0});
  const RateEvaluation r = prior_marginal_rate(1.0, 0, x, linear_net(2), OptimizerSettings{});
  CHECK(r.value == doctest::Approx(0.37742807622009317).epsilon(1e-6));
}

TEST_CASE("relu prior marginal rate at x = 3") {
  const InputSet x = InputSet::scalars({3.0});
  const double ys[] = {0.5, 1.0, 2.0, 4.0};
  const double expected[] = {0.023659757462784918, 0.08428486435949825, 0.26445264706874105, 0.7251383328820915};
  for (int i = 0; i < 4; ++i) {
    const RateEvaluation r = prior_marginal_rate(ys[i], 0, x, relu_net(2), OptimizerSettings{});
    CHECK(r.value == doctest::Approx(expected[i]).epsilon(1e-6));
  }
  const RateEvaluation zero = prior_marginal_rate(0.0, 0, x, relu_net(2), OptimizerSettings{});
  CHECK(std::abs(zero.value) < 1e-8);
}

TEST_CASE("marginal and full prior rates agree under contraction") {
  const InputSet x = InputSet::scalars({-1.0, 2.0});
  const NetworkSpec spec = relu_net(3);
  const RateEvaluation marg = prior_marginal_rate(1.5, 1, x, spec, OptimizerSettings{});
  REQUIRE(marg.h.size() == 2);
  const RateEvaluation full = prior_output_rate(marg.h, x, spec, OptimizerSettings{});
  CHECK(full.value == doctest::Approx(marg.value).epsilon(1e-4));
  Vector other = marg.h;
  other(0) += 0.3;
  CHECK(prior_output_rate(other, x, spec, OptimizerSettings{}).value > marg.value - 1e-7);
}

TEST_CASE("fixed kernel map prediction equals the gp mean") {
  const Dataset d = Dataset::scalar({-1.0, 0.0, 1.0}, {0.3, -0.2, 1.1}, {0.5});
  const KernelMatrix k = nngp_kernels(d.x, relu_net(2)).back();
  const Matrix& m = k.matrix();
  const int t = d.index_of(0.5);
  Matrix kdd(3, 3);
  Vector kt(3);
  for (int i = 0; i < 3; ++i) {
    kt(i) = m(t, d.x.train_indices[i]);
    for (int j = 0; j < 3; ++j) kdd(i, j) = m(d.x.train_indices[i], d.x.train_indices[j]);
  }
  const double gp = kt.dot((kdd + Matrix::Identity(3, 3)).ldlt().solve(d.y_train));
  CHECK(map_predict_fixed_kernel(t, d, k) == doctest::Approx(gp).epsilon(1e-9));
}

TEST_CASE("zero targets give a zero map prediction") {
  const Dataset d = Dataset::heaviside6({0.5}).zero_targets();
  const MapPrediction p = map_predict(d.index_of(0.5), d, relu_net(2), OptimizerSettings{});
  CHECK(std::abs(p.y_star) < 1e-6);
  CHECK(std::abs(p.objective) < 1e-8);
}

TEST_CASE("invalid configurations are rejected") {
  const InputSet x = InputSet::scalars({1.0});
  CHECK_THROWS_AS(kernel_rate(k1(1.0), 3, x, relu_net(3), OptimizerSettings{}), InvalidArgument);
  CHECK_THROWS_AS(prior_marginal_rate(1.0, 2, x, relu_net(3), OptimizerSettings{}), InvalidArgument);
  OptimizerSettings bad;
  bad.grad_tol = -1.0;
  CHECK_THROWS_AS(prior_marginal_rate(1.0, 0, x, relu_net(3), bad), InvalidArgument);
}
