// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ldpnn/errors.hpp"
#include "ldpnn/experiments.hpp"
#include "ldpnn/gpbaseline.hpp"
#include "ldpnn/mgf.hpp"
#include "ldpnn/ratefn.hpp"

using namespace ldpnn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!v.pass) ++failures;
  std::printf("[%s] criterion %2d  %-34s %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

ExperimentConfig preset(const std::string& name) { return load_config(std::string(LDPNN_CONFIG_DIR) + "/" + name); }

double max_of(const Table& t, const std::string& col, const std::string& filter_col = "",
              const std::string& filter_val = "") {
  const auto v = t.numbers(col);
  std::vector<std::string> f;
  if (!filter_col.empty()) f = t.texts(filter_col);
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!filter_col.empty() && f[i] != filter_val) continue;
    m = std::max(m, v[i] ? std::abs(*v[i]) : kInfinite);
  }
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// min over h (optionally with h[fixed] = y) of 0.5 sum_D (h_i - y_i)^2 + 0.5 h^T kappa^{-1} h, by plain gradient
/// descent with step 1 / L.
double brute_force_quadratic(const Matrix& kinv, const Dataset& d, int fixed, double y) {
  const int m = kinv.rows();
  Matrix hess = kinv;
  for (int i : d.x.train_indices) hess(i, i) += 1.0;
  const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(hess).eigenvalues().maxCoeff();
  Vector h = Vector::Zero(m);
  if (fixed >= 0) h(fixed) = y;
  const Vector yd = d.embedded_targets();
  for (int it = 0; it < 200000; ++it) {
    Vector g = kinv * h;
    for (int i : d.x.train_indices) g(i) += h(i) - yd(i);
    if (fixed >= 0) g(fixed) = 0.0;
    if (g.norm() < 1e-14) break;
    h -= g / lip;
  }
  return d.loss(h) + 0.5 * h.dot(kinv * h);
}

}  // namespace

int main() {
  std::printf("ldpnn acceptance (%s)\n", kVersionString);

  // Shared sweeps.
  ExperimentOutput oracle_out;
  double oracle_secs = 0.0;

  report(1, "linear oracle equivalence", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    oracle_out = run_oracle(preset("oracle.json"), {Execution::serial});
    oracle_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double lc = max_of(oracle_out.table("oracle_layer_cost.csv"), "abs_error");
    const double orate = max_of(oracle_out.table("oracle_output_rate.csv"), "abs_error");
    const double kr = max_of(oracle_out.table("oracle_kernel_rate.csv"), "abs_error", "L", "2");
    const int n_lc = static_cast<int>(oracle_out.table("oracle_layer_cost.csv").rows.size());
    const int n_or = static_cast<int>(oracle_out.table("oracle_output_rate.csv").rows.size());
    const bool ok = lc < 1e-4 && orate < 1e-3 && kr < 1e-3 && n_lc == 20 && n_or == 31 && oracle_secs < 300.0;
    return Verdict{ok, fmt("layer cost %d pts err %.2e; output rate %d pts err %.2e; kernel rate L=2 err %.2e; "
                           "serial run %.1fs",
                           n_lc, lc, n_or, orate, kr, oracle_secs)};
  });

  report(2, "deep linear tail exponent", [&] {
    const auto y = oracle_out.table("oracle_deep_tail.csv").numbers("y");
    const auto v = oracle_out.table("oracle_deep_tail.csv").numbers("optimizer");
    std::vector<double> ys, vs;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!v[i]) return Verdict{false, "missing optimizer value"};
      ys.push_back(*y[i]);
      vs.push_back(*v[i]);
    }
    const double slope = loglog_slope(ys, vs);
    return Verdict{std::abs(slope - 2.0 / 3.0) <= 0.1,
                   fmt("slope %.4f on y in [1e2, 1e4] (%zu pts), target 2/3 +- 0.1", slope, ys.size())};
  });

  report(3, "fixed-kernel GP equivalence", [&] {
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    double map_err = 0.0, rate_err = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
      const int n_train = 1 + inst % 4;
      std::vector<double> xs, ys;
      while (static_cast<int>(xs.size()) < n_train) {
        const double x = std::round(ud(rng) * 100.0) / 100.0;
        if (std::find(xs.begin(), xs.end(), x) != xs.end()) continue;
        xs.push_back(x);
        ys.push_back(nd(rng));
      }
      double xt = 0.0;
      do xt = std::round(ud(rng) * 100.0) / 100.0 + 0.005;
      while (std::find(xs.begin(), xs.end(), xt) != xs.end());
      const Dataset d = Dataset::scalar(xs, ys, {xt});
      const int m = d.x.size(), t = d.index_of(xt);
      Matrix b(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) b(i, j) = nd(rng);
      const KernelMatrix kappa(b * b.transpose() / m + 0.5 * Matrix::Identity(m, m));
      const GpMoments gp = gp_posterior_mean_var(kappa, d, t);
      map_err = std::max(map_err, std::abs(map_predict_fixed_kernel(t, d, kappa) - gp.mean));
      const Matrix kinv = kappa.matrix().inverse();
      const double base = brute_force_quadratic(kinv, d, -1, 0.0);
      for (double y : {gp.mean - 1.5, gp.mean + 0.3, gp.mean + 2.0}) {
        const double brute = brute_force_quadratic(kinv, d, t, y) - base;
        rate_err = std::max(rate_err, std::abs(gp_posterior_rate(y, kappa, d, t) - brute));
      }
    }
    return Verdict{map_err < 1e-6 && rate_err < 1e-8,
                   fmt("20 instances: map vs GP mean %.2e (tol 1e-6), rate vs brute force %.2e (tol 1e-8)", map_err,
                       rate_err)};
  });

  ExperimentConfig c01a = preset("exp01a.json");
  c01a.activations = {ActivationKind::relu()};
  report(4, "normalization and tangency", [&] {
    const ExperimentOutput prior = run_exp01a(c01a);
    const ExperimentOutput pair = run_exp02(c01a, 'a');
    const Table& t = prior.table("prior_rate.csv");
    const auto y = t.numbers("y"), r = t.numbers("rate"), gap = t.numbers("kernel_gap");
    std::size_t best = 0, zero = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!r[i]) return Verdict{false, "missing rate"};
      if (*r[i] < *r[best]) best = i;
      if (std::abs(*y[i]) < 1e-12) zero = i;
    }
    const auto& p = pair.table("prior_vs_nngp.csv");
    const auto py = p.numbers("y"), ldp = p.numbers("ldp_rate"), nngp = p.numbers("nngp_rate");
    double worst = 0.0;
    for (std::size_t i = 0; i < py.size(); ++i) {
      if (std::abs(*py[i]) > 0.25 + 1e-12) continue;
      if (*nngp[i] == 0.0) {
        worst = std::max(worst, std::abs(*ldp[i]) > 1e-12 ? kInfinite : 0.0);
        continue;
      }
      worst = std::max(worst, std::abs(*ldp[i] - *nngp[i]) / *nngp[i]);
    }
    const bool ok = prior.exit_code == kExitOk && *r[best] <= 1e-3 && best == zero && *gap[zero] < 0.02 &&
                    worst < 0.05;
    return Verdict{ok, fmt("grid min %.2e at y=%.2f; gap(0)=%.2e; max rel LDP/NNGP diff on |y|<=0.25: %.3f", *r[best],
                           *y[best], *gap[zero], worst)};
  });

  report(5, "kernel separation", [&] {
    const ExperimentOutput o = run_exp02(preset("exp02b.json"), 'b');
    const auto gap = o.table("posterior_vs_nngp.csv").numbers("kernel_gap");
    double gmin = kInfinite;
    for (const auto& g : gap) gmin = std::min(gmin, g ? *g : -kInfinite);
    const ExperimentOutput z = run_exp02(preset("exp02b_zero_targets.json"), 'b');
    const double zgap = z.documents.at("diagnostics.json").at("map").at("kernel_gap").get<double>();
    return Verdict{o.exit_code == kExitOk && gmin > 0.01 && zgap < 0.02,
                   fmt("Heaviside: min gap %.4f over %zu pts (> 0.01); zero targets: gap at minimizer %.2e (< 0.02)",
                       gmin, gap.size(), zgap)};
  });

  report(6, "change-of-measure identity", [&] {
    const ExperimentOutput o = run_exp01b(preset("exp01b_relu.json"));
    const double worst = max_of(o.table("posterior_rate.csv"), "change_of_measure_residual");
    return Verdict{o.exit_code == kExitOk && worst < 2e-3,
                   fmt("max |residual| %.2e over %zu pts (tol 2e-3)", worst,
                       o.table("posterior_rate.csv").rows.size())};
  });

  report(7, "min-min exchange", [&] {
    const ExperimentConfig c = preset("exp02b.json");
    const Dataset d = c.dataset.build({c.x_test});
    const RateEvaluation kr = minimize_kernel_posterior_objective(d, c.network, c.optimizer, c.quadrature);
    PosteriorRate pr(d, c.network, c.optimizer, c.quadrature);
    const double hmin = pr.constant();
    const double diff = std::abs(kr.value - hmin);
    return Verdict{kr.converged && diff < 2e-3,
                   fmt("min over kappa %.10f, min over h %.10f, |diff| %.2e (tol 2e-3)", kr.value, hmin, diff)};
  });

  report(8, "cond_log_mgf gradient", [&] {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    std::string detail;
    bool ok = true;
    for (const auto& act : {ActivationKind::relu(), ActivationKind::tanh(), ActivationKind::linear(1.0)}) {
      double worst = 0.0;
      int n = 0;
      while (n < 20) {
        const int m = 1 + n % 3;
        Matrix b(m, m);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) b(i, j) = nd(rng);
        const KernelMatrix kappa(b * b.transpose() + 0.2 * Matrix::Identity(m, m));
        Matrix l(m, m);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j <= i; ++j) l(i, j) = l(j, i) = 0.05 * nd(rng);
        const auto f0 = cond_log_mgf(TiltMatrix(l), kappa, act);
        if (!f0) continue;
        const Matrix g = grad_cond_log_mgf(TiltMatrix(l), kappa, act);
        double num = 0.0, den = 0.0;
        bool finite = true;
        for (int i = 0; i < m && finite; ++i)
          for (int j = 0; j <= i; ++j) {
            Matrix e = Matrix::Zero(m, m);
            e(i, j) = e(j, i) = 1.0;
            const double h = 1e-5;
            const auto fp = cond_log_mgf(TiltMatrix(l + h * e), kappa, act);
            const auto fm = cond_log_mgf(TiltMatrix(l - h * e), kappa, act);
            if (!fp || !fm) {
              finite = false;
              break;
            }
            const double fd = (*fp - *fm) / (2.0 * h);
            const double an = (g.array() * e.array()).sum();
            num += (fd - an) * (fd - an);
            den += fd * fd;
          }
        if (!finite) continue;
        worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
        ++n;
      }
      ok = ok && worst < 1e-4;
      detail += fmt("%s %.1e; ", act.name().c_str(), worst);
    }
    return Verdict{ok, "max rel err over 20 pts: " + detail + "(tol 1e-4)"};
  });

  report(9, "prior tail scaling (desk scale)", [&] {
    ExperimentConfig c = preset("exp03a.json");
    c.sampler.widths = {32, 64, 128};
    c.sampler.n_samples = 1000000;
    const ExperimentOutput o = run_exp03(c, 'a');
    const auto& dev = o.documents.at("diagnostics.json").at("deviation_by_width");
    const auto& grid = o.documents.at("diagnostics.json").at("common_grid");
    std::vector<double> d;
    for (const auto& e : dev) {
      if (e.at("mean_abs_deviation").is_null()) return Verdict{false, "no common grid points"};
      d.push_back(e.at("mean_abs_deviation").get<double>());
    }
    bool ok = o.exit_code == kExitOk && d.size() == 3 && grid.size() >= 3;
    for (std::size_t i = 1; ok && i < d.size(); ++i) ok = d[i] <= d[i - 1];
    return Verdict{ok, fmt("mean |emp - I| over %zu common pts: n=32 %.4f, n=64 %.4f, n=128 %.4f", grid.size(),
                           d.size() > 0 ? d[0] : NAN, d.size() > 1 ? d[1] : NAN, d.size() > 2 ? d[2] : NAN)};
  });

  report(10, "posterior MALA moments", [&] {
    const ExperimentOutput o = run_exp03(preset("exp03b.json"), 'b');
    if (o.exit_code != kExitOk) return Verdict{false, "sampler failure"};
    const auto& r = o.documents.at("mala_summary.json").at("regimes");
    auto get = [&](const char* g, const char* k) { return r.at(g).at(k).get<double>(); };
    const double tm = get("tempered", "mean"), ts = get("tempered", "std"), ta = get("tempered", "acceptance_rate");
    const double sm = get("standard", "mean"), ss = get("standard", "std"), sa = get("standard", "acceptance_rate");
    const bool ok = tm >= 1.886 && tm <= 1.986 && ts >= 0.14 && ts <= 0.24 && sm >= 1.68 && sm <= 2.08 &&
                    ss >= 1.7 && ss <= 2.3 && ta >= 0.5 && ta <= 0.9 && sa >= 0.5 && sa <= 0.9;
    return Verdict{ok, fmt("tempered mean %.4f std %.4f acc %.3f; standard mean %.4f std %.4f acc %.3f", tm, ts, ta,
                           sm, ss, sa)};
  });

  report(11, "determinism", [&] {
    const fs::path root = fs::temp_directory_path() / "ldpnn_acceptance_determinism";
    fs::remove_all(root);
    std::vector<ExperimentConfig> cfgs;
    ExperimentConfig a = preset("exp01a.json");
    a.grid.count = 21;
    cfgs.push_back(a);
    ExperimentConfig b = preset("exp02b.json");
    b.grid.count = 21;
    cfgs.push_back(b);
    ExperimentConfig c = preset("exp02c.json");
    c.x_grid.count = 9;
    cfgs.push_back(c);
    cfgs.push_back(preset("exp03a_smoke.json"));
    cfgs.push_back(preset("exp03b_smoke.json"));
    cfgs.push_back(preset("oracle.json"));
    int files = 0, mismatches = 0;
    for (auto& cfg : cfgs) {
      std::vector<std::string> first;
      for (int run = 0; run < 2; ++run) {
        cfg.output_dir = (root / cfg.experiment / std::to_string(run)).string();
        const auto written = write_output(run_experiment(cfg), cfg);
        if (run == 0) first = written;
      }
      for (const auto& p : first) {
        ++files;
        const fs::path other = root / cfg.experiment / "1" / fs::path(p).filename();
        if (slurp(p) != slurp(other)) ++mismatches;
      }
    }
    fs::remove_all(root);
    return Verdict{files > 0 && mismatches == 0,
                   fmt("%zu experiments run twice, %d files compared, %d differ", cfgs.size(), files, mismatches)};
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
