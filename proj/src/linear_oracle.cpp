#include "ldpnn/linear_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ldpnn/errors.hpp"

namespace ldpnn {

void LinearConfig::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("a must be positive");
  if (!(kappa0 > 0.0) || !std::isfinite(kappa0)) throw InvalidArgument("kappa0 must be positive");
  if (L < 1) throw InvalidArgument("L must be at least 1");
}

double layer_cost_linear(double kappa, double kappa0, double a) {
  if (!(kappa > 0.0)) throw NonPositiveKernel("kappa must be positive");
  if (!(kappa0 > 0.0) || !(a > 0.0)) throw InvalidArgument("kappa0 and a must be positive");
  const double r = kappa / (a * kappa0);
  return 0.5 * (r - std::log(r) - 1.0);
}

double kernel_rate_linear(double kappa, const LinearConfig& cfg) {
  cfg.validate();
  if (!(kappa > 0.0)) throw NonPositiveKernel("kappa must be positive");
  if (cfg.L == 1) return layer_cost_linear(kappa, cfg.kappa0, cfg.a);
  const double r = std::pow(kappa / (std::pow(cfg.a, cfg.L) * cfg.kappa0), 1.0 / cfg.L);
  return 0.5 * cfg.L * (r - std::log(r) - 1.0);
}

double output_rate_linear_shallow(double y, const LinearConfig& cfg) {
  cfg.validate();
  if (cfg.L != 1) throw InvalidArgument("the shallow output rate needs L = 1");
  if (!std::isfinite(y)) throw NonFiniteInput("y is not finite");
  const double c = cfg.a * cfg.kappa0;
  const double s = std::sqrt(1.0 + 4.0 * y * y / c);
  // kappa* = c (1 + s) / 2
  const double k = 0.5 * c * (1.0 + s);
  return 0.5 * (0.5 * (1.0 + s) - std::log(0.5 * (1.0 + s)) - 1.0) + y * y / (2.0 * k);
}

double kappa_star_residual(double kappa, double y, const LinearConfig& cfg) {
  cfg.validate();
  const double base = std::pow(cfg.a, cfg.L) * cfg.kappa0;
  return std::pow(kappa, (cfg.L + 1.0) / cfg.L) / std::pow(base, 1.0 / cfg.L) - kappa - y * y;
}

double kappa_star(double y, const LinearConfig& cfg) {
  cfg.validate();
  const double base = std::pow(cfg.a, cfg.L) * cfg.kappa0;
  if (y == 0.0) return base;
  double lo = 1e-8, hi = std::max(10.0 * base, 10.0 * y * y);
  while (kappa_star_residual(hi, y, cfg) < 0.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kappa_star_residual(mid, y, cfg) < 0.0 ? lo : hi) = mid;
  }
  double k = 0.5 * (lo + hi);
  for (int i = 0; i < 5; ++i) {
    const double p = (cfg.L + 1.0) / cfg.L;
    const double d = p * std::pow(k, p - 1.0) / std::pow(base, 1.0 / cfg.L) - 1.0;
    if (d <= 0.0) break;
    const double next = k - kappa_star_residual(k, y, cfg) / d;
    if (!(next > lo && next < hi)) break;
    k = next;
  }
  return k;
}

double output_rate_linear(double y, const LinearConfig& cfg) {
  if (y == 0.0) return 0.0;
  const double k = kappa_star(y, cfg);
  return kernel_rate_linear(k, cfg) + y * y / (2.0 * k);
}

double tail_exponent_linear(int L) {
  if (L < 1) throw InvalidArgument("L must be at least 1");
  return 2.0 / (L + 1.0);
}

}  // namespace ldpnn
