#pragma once

#include <functional>

#include "ldpnn/kernelcore.hpp"

namespace ldpnn {

/// Returns f(x) and fills *grad when non-null; kInfinite marks points outside the domain.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct OptimResult {
  Vector x;
  double value = 0.0;
  Vector grad;
  int iterations = 0;
  int evaluations = 0;
  int rejected = 0;
  bool converged = false;
};

struct AdamOptions {
  int steps = 1000;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_tol = 0.0;  ///< early exit when ||g|| <= grad_tol
  int max_halvings = 30;
};

/// Adam with step halving on rejected (INFINITE) trial points; returns the best point seen.
OptimResult adam(const Objective& f, const Vector& x0, const AdamOptions& opt);

struct LbfgsOptions {
  int max_iter = 200;
  int history = 10;
  double grad_tol = 1e-8;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 50;
};

/// Limited-memory BFGS with a bracketing weak-Wolfe line search that treats INFINITE as failure.
OptimResult lbfgs(const Objective& f, const Vector& x0, const LbfgsOptions& opt);

}  // namespace ldpnn
