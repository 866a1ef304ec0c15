#pragma once

#include <cstdint>

#include "ldpnn/kernelcore.hpp"

namespace ldpnn {

struct QuadratureSpec {
  int nodes_per_dim = 64;
  long mc_fallback_samples = 200000;
  std::uint64_t mc_seed = 0x5eed5eedULL;
  bool allow_mc_fallback = true;
  /// Relative per-panel tolerance of the adaptive angular integrator.
  double angular_tol = 1e-11;

  void validate() const;
};

struct Rule1D {
  Vector x;
  Vector w;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
Rule1D gauss_legendre(int n);
/// Gauss-Hermite rule for the standard normal density (weights sum to 1).
Rule1D gauss_hermite(int n);

/// Nodes z (r x N) and weights (sum 1) approximating E[f(z)], z ~ N(0, I_r).
struct GaussianRule {
  Matrix z;
  Vector w;
};

/// Rule for smooth integrands: radially folded Legendre on [0, 10] (r = 1), polar trapezoid x Legendre
/// (r = 2), tensor Hermite (r = 3), seeded Monte Carlo above that.
GaussianRule gaussian_rule(int r, const QuadratureSpec& quad);

/// Factor S (m x r) with S S^T = cov restricted to eigenvalues above rank_tol * lambda_max.
Matrix low_rank_factor(const Matrix& cov, double rank_tol = 1e-10);

}  // namespace ldpnn
