#include "ldpnn/mc.hpp"

#include <omp.h>

#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <string>

#include "ldpnn/errors.hpp"

namespace ldpnn {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t worker) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (worker + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SamplerConfig::validate() const {
  if (width < 1) throw InvalidArgument("width must be at least 1");
  if (n_samples < 1) throw InvalidArgument("n_samples must be at least 1");
  if (batch < 1) throw InvalidArgument("batch must be at least 1");
}

namespace {

/// Runs body(batch_index, begin, end) over all batches and rethrows the first failure.
template <class Body>
void for_batches(long long total, long long batch, Execution exec, Body body) {
  const long long n_batches = (total + batch - 1) / batch;
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (long long b = 0; b < n_batches; ++b) {
    try {
      body(b, b * batch, std::min(total, (b + 1) * batch));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

/// One prior draw of h_theta(x_test) with all weights and biases drawn fresh.
class PriorDraw {
 public:
  PriorDraw(const NetworkSpec& spec, int width) : net_(spec, width), xi_(net_.num_params()) {}
  template <class Rng>
  double operator()(const Vector& x, Rng& rng) {
    for (int i = 0; i < xi_.size(); ++i) xi_(i) = normal_(rng);
    return net_.forward_point(xi_, x);
  }

 private:
  Mlp net_;
  Vector xi_;
  std::normal_distribution<double> normal_;
};

}  // namespace

std::vector<double> sample_prior_outputs(const SamplerConfig& cfg, const NetworkSpec& spec, const Vector& x_test,
                                         Execution exec) {
  cfg.validate();
  spec.validate();
  if (x_test.size() != spec.d_in) throw InvalidArgument("test input has the wrong dimension");
  std::vector<double> out(static_cast<std::size_t>(cfg.n_samples));
  const double inv = 1.0 / std::sqrt(static_cast<double>(cfg.width));
  for_batches(cfg.n_samples, cfg.batch, exec, [&](long long b, long long begin, long long end) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
    PriorDraw draw(spec, cfg.width);
    for (long long i = begin; i < end; ++i) out[static_cast<std::size_t>(i)] = inv * draw(x_test, rng);
  });
  return out;
}

TailCounts prior_tail_counts(const SamplerConfig& cfg, const NetworkSpec& spec, const Vector& x_test,
                             const std::vector<double>& ys, Execution exec) {
  cfg.validate();
  spec.validate();
  if (x_test.size() != spec.d_in) throw InvalidArgument("test input has the wrong dimension");
  const long long n_batches = (cfg.n_samples + cfg.batch - 1) / cfg.batch;
  const std::size_t ny = ys.size();
  std::vector<long long> counts(static_cast<std::size_t>(n_batches) * ny, 0);
  std::vector<double> sums(static_cast<std::size_t>(n_batches)), sums_sq(static_cast<std::size_t>(n_batches));
  const double inv = 1.0 / std::sqrt(static_cast<double>(cfg.width));
  for_batches(cfg.n_samples, cfg.batch, exec, [&](long long b, long long begin, long long end) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(b)));
    PriorDraw draw(spec, cfg.width);
    long long* c = counts.data() + b * static_cast<long long>(ny);
    double s = 0.0, s2 = 0.0;
    for (long long i = begin; i < end; ++i) {
      const double f = draw(x_test, rng);
      const double h = inv * f;
      s += f;
      s2 += f * f;
      for (std::size_t k = 0; k < ny; ++k) {
        if (ys[k] > 0.0 ? h >= ys[k] : h <= ys[k]) ++c[k];
      }
    }
    sums[static_cast<std::size_t>(b)] = s;
    sums_sq[static_cast<std::size_t>(b)] = s2;
  });
  TailCounts out;
  out.total = cfg.n_samples;
  out.y = ys;
  out.count.assign(ny, 0);
  for (long long b = 0; b < n_batches; ++b) {
    for (std::size_t k = 0; k < ny; ++k) out.count[k] += counts[static_cast<std::size_t>(b) * ny + k];
    out.sum += sums[static_cast<std::size_t>(b)];
    out.sum_sq += sums_sq[static_cast<std::size_t>(b)];
  }
  return out;
}

std::optional<double> tail_rate_from_count(long long count, long long total, int width) {
  if (total < 1 || width < 1) throw InvalidArgument("total and width must be positive");
  if (count <= 0) return std::nullopt;
  return -std::log(static_cast<double>(count) / static_cast<double>(total)) / width;
}

std::optional<double> tail_rate_estimate(const std::vector<double>& samples, int width, double y) {
  if (y == 0.0 || !std::isfinite(y)) throw InvalidArgument("y must be finite and nonzero");
  if (samples.empty()) throw InvalidArgument("no samples");
  long long count = 0;
  for (double h : samples) count += y > 0.0 ? h >= y : h <= y;
  return tail_rate_from_count(count, static_cast<long long>(samples.size()), width);
}

void MalaConfig::validate() const {
  if (width < 1) throw InvalidArgument("width must be at least 1");
  if (step_size < 0.0 || !std::isfinite(step_size)) throw InvalidArgument("step_size must be nonnegative");
  if (n_chains < 1) throw InvalidArgument("n_chains must be at least 1");
  if (n_steps < 1 || effective_burn_in() >= n_steps) throw InvalidArgument("n_steps must exceed burn_in");
  if (warmup_steps < 0) throw InvalidArgument("warmup_steps must be nonnegative");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw InvalidArgument("target_acceptance in (0, 1)");
}

ChainDiagnostics mala_posterior_samples(const MalaConfig& cfg, const Dataset& data, const NetworkSpec& spec,
                                        int test_index, Execution exec) {
  cfg.validate();
  data.validate();
  if (test_index < 0 || test_index >= data.x.size()) throw InvalidArgument("test index is not in the input set");
  const Mlp net(spec, cfg.width);
  const double n = cfg.width;
  const double scale = cfg.scaled_output ? 1.0 / std::sqrt(n) : 1.0;
  const double beta = cfg.tempered ? n : 1.0;
  const LogDensity target = [&](const Vector& xi, Vector* grad) {
    const double loss = net.loss_and_grad(xi, data.x, data.x.train_indices, data.y_train, scale, grad);
    if (grad) *grad = -xi - beta * *grad;
    return -0.5 * xi.squaredNorm() - beta * loss;
  };
  const Vector& x_test = data.x.points[test_index];
  const int burn = cfg.effective_burn_in();

  ChainDiagnostics out;
  out.acceptance.assign(cfg.n_chains, 0.0);
  out.step_sizes.assign(cfg.n_chains, 0.0);
  out.traces.assign(cfg.n_chains, ChainTrace());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (int c = 0; c < cfg.n_chains; ++c) {
    try {
      std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
      std::normal_distribution<double> normal;
      Vector xi(net.num_params());
      for (int i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
      double eps = cfg.step_size;
      if (eps == 0.0) eps = tune_step_size(target, xi, 1e-2 / beta, cfg.warmup_steps, cfg.target_acceptance, rng);
      ChainTrace& tr = out.traces[c];
      tr.step.reserve(cfg.n_steps - burn);
      tr.output.reserve(cfg.n_steps - burn);
      tr.accepted.reserve(cfg.n_steps - burn);
      tr.log_density.reserve(cfg.n_steps - burn);
      int acc = 0;
      try {
        mala_steps(target, xi, eps, cfg.n_steps, rng, [&](int s, const Vector& x, bool a, double lp) {
          if (s < burn) return;
          acc += a;
          tr.step.push_back(s);
          tr.output.push_back(scale * net.forward_point(x, x_test));
          tr.accepted.push_back(a);
          tr.log_density.push_back(lp);
        });
      } catch (const NonFiniteGradient& e) {
        std::ostringstream os;
        const std::string msg = e.what();
        os << "chain " << c << ", " << msg.substr(msg.find(": ") + 2);
        throw NonFiniteGradient(os.str());
      }
      out.acceptance[c] = static_cast<double>(acc) / (cfg.n_steps - burn);
      out.step_sizes[c] = eps;
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  double s = 0.0, s2 = 0.0, a = 0.0;
  long long cnt = 0;
  for (int c = 0; c < cfg.n_chains; ++c) {
    for (double v : out.traces[c].output) {
      s += v;
      s2 += v * v;
    }
    cnt += static_cast<long long>(out.traces[c].output.size());
    a += out.acceptance[c];
  }
  out.mean = s / cnt;
  out.std = std::sqrt(std::max(s2 / cnt - out.mean * out.mean, 0.0));
  out.acceptance_rate = a / cfg.n_chains;
  return out;
}

}  // namespace ldpnn
