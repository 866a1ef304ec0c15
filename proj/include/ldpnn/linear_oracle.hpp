#pragma once

namespace ldpnn {

/// Linear activation sigma(x) = sqrt(a) x on a single input; L counts hidden layers.
struct LinearConfig {
  double a = 1.0;
  double kappa0 = 1.0;
  int L = 1;

  void validate() const;
};

double layer_cost_linear(double kappa, double kappa0, double a);
double kernel_rate_linear(double kappa, const LinearConfig& cfg);
/// Requires cfg.L == 1.
double output_rate_linear_shallow(double y, const LinearConfig& cfg);
double kappa_star_residual(double kappa, double y, const LinearConfig& cfg);
/// Root of kappa_star_residual by bracketed bisection and a Newton polish.
double kappa_star(double y, const LinearConfig& cfg);
/// Prior output rate for L hidden layers: min over kappa of kernel_rate_linear + y^2 / (2 kappa).
double output_rate_linear(double y, const LinearConfig& cfg);
double tail_exponent_linear(int L);

}  // namespace ldpnn
