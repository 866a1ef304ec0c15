#pragma once

#include "ldpnn/dataset.hpp"
#include "ldpnn/kernelcore.hpp"

namespace ldpnn {

struct GpMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Posterior mean and variance at input index with unit observation noise.
GpMoments gp_posterior_mean_var(const KernelMatrix& kappa, const Dataset& data, int index);

/// 0.5 y^2 / kappa(t, t); INFINITE when the variance vanishes and y != 0.
double gp_prior_rate(double y, const KernelMatrix& kappa, int index);

/// (y - m)^2 / (2 sigma^2) at the test index. Throws DegenerateVariance when sigma^2 <= 1e-12.
double gp_posterior_rate(double y, const KernelMatrix& kappa, const Dataset& data, int index);

}  // namespace ldpnn
