#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ldpnn/dataset.hpp"
#include "ldpnn/mlp.hpp"

namespace ldpnn {

enum class Execution { serial, parallel };

/// Deterministic per-worker seed from (seed, worker index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t worker);

struct SamplerConfig {
  int width = 128;
  long long n_samples = 1000000;
  std::uint64_t seed = 0;
  int batch = 10000;

  void validate() const;
};

/// Samples of H_n(x) = h_theta(x) / sqrt(n) for LeCun-initialized networks of the given width.
std::vector<double> sample_prior_outputs(const SamplerConfig& cfg, const NetworkSpec& spec, const Vector& x_test,
                                         Execution exec = Execution::parallel);

/// Streaming tail counts: count[k] = #{H >= y_k} for y_k > 0 and #{H <= y_k} for y_k < 0.
struct TailCounts {
  long long total = 0;
  std::vector<double> y;
  std::vector<long long> count;
  double sum = 0.0;     ///< sum of sqrt(n) * H
  double sum_sq = 0.0;  ///< sum of n * H^2
};

TailCounts prior_tail_counts(const SamplerConfig& cfg, const NetworkSpec& spec, const Vector& x_test,
                             const std::vector<double>& ys, Execution exec = Execution::parallel);

/// -(1/n) log(count / total); empty when count is zero.
std::optional<double> tail_rate_from_count(long long count, long long total, int width);
std::optional<double> tail_rate_estimate(const std::vector<double>& samples, int width, double y);

/// log density and its gradient.
using LogDensity = std::function<double(const Vector& x, Vector* grad)>;

struct ChainTrace {
  std::vector<int> step;
  std::vector<double> output;
  std::vector<std::uint8_t> accepted;
  std::vector<double> log_density;
};

struct MalaRun {
  Vector state;
  int accepted = 0;
  int proposals = 0;
  double acceptance() const { return proposals ? static_cast<double>(accepted) / proposals : 0.0; }
};

/// Runs n_steps MALA transitions from x0; observe(step, x, accepted, log_density) is called after each one.
/// Throws NonFiniteGradient on a non-finite log density gradient at the current state.
template <class Rng>
MalaRun mala_steps(const LogDensity& target, const Vector& x0, double step_size, int n_steps, Rng& rng,
                   const std::function<void(int, const Vector&, bool, double)>& observe = {});

/// Step size giving acceptance near the target, by bisection in log scale over warmup_steps transitions.
/// The chain state is advanced through the warmup.
template <class Rng>
double tune_step_size(const LogDensity& target, Vector& x, double initial, int warmup_steps, double target_acceptance,
                      Rng& rng);

struct MalaConfig {
  int width = 128;
  double step_size = 0.0;  ///< 0 selects the tuned step size
  int n_chains = 10;
  int burn_in = -1;  ///< negative selects 20% of n_steps
  int n_steps = 50000;
  bool tempered = true;       ///< likelihood exponent n (true) or 1
  bool scaled_output = true;  ///< output scaling 1/sqrt(n) (true) or 1
  std::uint64_t seed = 0;
  int warmup_steps = 2000;
  double target_acceptance = 0.7;

  int effective_burn_in() const { return burn_in >= 0 ? burn_in : n_steps / 5; }
  void validate() const;
};

struct ChainDiagnostics {
  std::vector<double> acceptance;  ///< per chain
  double acceptance_rate = 0.0;
  std::vector<double> step_sizes;
  std::vector<ChainTrace> traces;
  double mean = 0.0;
  double std = 0.0;
};

/// MALA over whitened network parameters targeting exp(-|xi|^2 / 2 - beta * loss(scaled outputs)).
ChainDiagnostics mala_posterior_samples(const MalaConfig& cfg, const Dataset& data, const NetworkSpec& spec,
                                        int test_index, Execution exec = Execution::parallel);

}  // namespace ldpnn

#include "ldpnn/mc_impl.hpp"
