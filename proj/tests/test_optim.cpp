#include "doctest.h"

#include "ldpnn/errors.hpp"
#include "ldpnn/optim.hpp"

using namespace ldpnn;

namespace {

double rosenbrock(const Vector& x, Vector* g) {
  const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
  if (g) {
    g->resize(2);
    (*g)(0) = -2.0 * a - 400.0 * x(0) * b;
    (*g)(1) = 200.0 * b;
  }
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("lbfgs minimizes the rosenbrock function") {
  LbfgsOptions o;
  o.max_iter = 500;
  o.grad_tol = 1e-10;
  const OptimResult r = lbfgs(rosenbrock, Vector::Constant(2, -1.2), o);
  CHECK(r.converged);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("adam decreases a quadratic") {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  AdamOptions o;
  o.steps = 2000;
  o.lr = 0.05;
  const OptimResult r = adam(f, Vector::Constant(3, 2.0), o);
  CHECK(r.value < 1e-4);
}

TEST_CASE("infinite values are treated as a wall") {
  const Objective f = [](const Vector& x, Vector* g) {
    if (x(0) <= 0.0) return kInfinite;
    if (g) {
      g->resize(1);
      (*g)(0) = 1.0 - 1.0 / x(0);
    }
    return x(0) - std::log(x(0));
  };
  LbfgsOptions o;
  o.grad_tol = 1e-10;
  const OptimResult r = lbfgs(f, Vector::Constant(1, 5.0), o);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-8));
  AdamOptions ao;
  ao.steps = 3000;
  ao.lr = 0.5;
  const OptimResult a = adam(f, Vector::Constant(1, 0.05), ao);
  CHECK(std::isfinite(a.value));
  CHECK(a.x(0) > 0.0);
}
