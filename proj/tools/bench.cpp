// Serial reference paths against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "ldpnn/config.hpp"
#include "ldpnn/experiments.hpp"
#include "ldpnn/mc.hpp"
#include "ldpnn/ratefn.hpp"
#include "ldpnn/sweep.hpp"

namespace {

using ldpnn::Execution;

Execution mode(const benchmark::State& s) { return s.range(0) ? Execution::parallel : Execution::serial; }

void label(benchmark::State& s) { s.SetLabel(s.range(0) ? "parallel" : "serial"); }

void BM_PriorRateSweep(benchmark::State& state) {
  const auto spec = ldpnn::NetworkSpec::uniform(2, ldpnn::ActivationKind::relu());
  const auto x = ldpnn::InputSet::scalars({3.0});
  const std::vector<double> ys = ldpnn::Grid{-1.0, 4.0, 64}.points();
  const ldpnn::OptimizerSettings opt;
  for (auto _ : state) {
    auto r = ldpnn::chunked_sweep<ldpnn::RateEvaluation>(
        ys, 8, mode(state), [&](double y, const ldpnn::RateEvaluation* prev) {
          return ldpnn::prior_marginal_rate(y, 0, x, spec, opt, {}, prev ? &prev->warm : nullptr);
        });
    benchmark::DoNotOptimize(r);
  }
  label(state);
}

void BM_PosteriorRateSweep(benchmark::State& state) {
  const auto spec = ldpnn::NetworkSpec::uniform(2, ldpnn::ActivationKind::relu());
  const auto data = ldpnn::Dataset::heaviside6({3.0});
  ldpnn::PosteriorRate pr(data, spec, {});
  pr.constant();
  const std::vector<double> ys = ldpnn::Grid{0.0, 2.0, 32}.points();
  for (auto _ : state) {
    auto r = ldpnn::chunked_sweep<ldpnn::RateEvaluation>(
        ys, 8, mode(state), [&](double y, const ldpnn::RateEvaluation* prev) {
          return pr.marginal_unnormalized(y, data.index_of(3.0), prev ? &prev->warm : nullptr);
        });
    benchmark::DoNotOptimize(r);
  }
  label(state);
}

void BM_PriorTailCounts(benchmark::State& state) {
  const auto spec = ldpnn::NetworkSpec::uniform(2, ldpnn::ActivationKind::relu());
  ldpnn::SamplerConfig cfg;
  cfg.width = 64;
  cfg.n_samples = 200000;
  const ldpnn::Vector x = ldpnn::Vector::Constant(1, 3.0);
  for (auto _ : state) {
    auto r = ldpnn::prior_tail_counts(cfg, spec, x, {0.5, 1.0, 1.5}, mode(state));
    benchmark::DoNotOptimize(r);
  }
  label(state);
}

void BM_MalaChains(benchmark::State& state) {
  const auto spec = ldpnn::NetworkSpec::uniform(2, ldpnn::ActivationKind::relu());
  const auto data = ldpnn::Dataset::heaviside6({5.0});
  ldpnn::MalaConfig cfg;
  cfg.width = 64;
  cfg.n_chains = 4;
  cfg.n_steps = 2000;
  cfg.warmup_steps = 500;
  for (auto _ : state) {
    auto r = ldpnn::mala_posterior_samples(cfg, data, spec, data.index_of(5.0), mode(state));
    benchmark::DoNotOptimize(r);
  }
  label(state);
}

}  // namespace

BENCHMARK(BM_PriorRateSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PosteriorRateSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PriorTailCounts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MalaChains)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
