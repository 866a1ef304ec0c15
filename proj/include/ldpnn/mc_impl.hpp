#pragma once

#include <cmath>
#include <random>
#include <sstream>

#include "ldpnn/errors.hpp"

namespace ldpnn {

template <class Rng>
MalaRun mala_steps(const LogDensity& target, const Vector& x0, double step_size, int n_steps, Rng& rng,
                   const std::function<void(int, const Vector&, bool, double)>& observe) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  MalaRun run;
  run.state = x0;
  Vector g(x0.size()), gp(x0.size());
  double lp = target(run.state, &g);
  const double sd = std::sqrt(step_size);
  auto check = [](const Vector& grad, double v, int step) {
    if (!grad.allFinite() || std::isnan(v)) {
      std::ostringstream os;
      os << "non-finite log density gradient at step " << step;
      throw NonFiniteGradient(os.str());
    }
  };
  check(g, lp, 0);
  Vector noise(x0.size());
  for (int s = 0; s < n_steps; ++s) {
    for (int i = 0; i < noise.size(); ++i) noise(i) = normal(rng);
    const Vector mean_fwd = run.state + 0.5 * step_size * g;
    const Vector prop = mean_fwd + sd * noise;
    const double lpp = target(prop, &gp);
    bool accept = false;
    if (std::isfinite(lpp) && gp.allFinite()) {
      const Vector mean_bwd = prop + 0.5 * step_size * gp;
      const double log_q_fwd = -(prop - mean_fwd).squaredNorm() / (2.0 * step_size);
      const double log_q_bwd = -(run.state - mean_bwd).squaredNorm() / (2.0 * step_size);
      const double log_ratio = lpp - lp + log_q_bwd - log_q_fwd;
      accept = std::log(uniform(rng)) < log_ratio;
    }
    ++run.proposals;
    if (accept) {
      run.state = prop;
      lp = lpp;
      g = gp;
      ++run.accepted;
      check(g, lp, s + 1);
    }
    if (observe) observe(s, run.state, accept, lp);
  }
  return run;
}

template <class Rng>
double tune_step_size(const LogDensity& target, Vector& x, double initial, int warmup_steps, double target_acceptance,
                      Rng& rng) {
  constexpr int kRounds = 10;
  const int per_round = std::max(1, warmup_steps / kRounds);
  double eps = initial, lo = 0.0, hi = 0.0;
  for (int r = 0; r < kRounds; ++r) {
    const MalaRun run = mala_steps(target, x, eps, per_round, rng);
    x = run.state;
    if (run.acceptance() > target_acceptance) lo = eps;
    else hi = eps;
    if (hi == 0.0) eps *= 4.0;
    else if (lo == 0.0) eps *= 0.25;
    else eps = std::sqrt(lo * hi);
  }
  return eps;
}

}  // namespace ldpnn
