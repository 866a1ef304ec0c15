#include "ldpnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ldpnn/errors.hpp"
#include "ldpnn/gpbaseline.hpp"
#include "ldpnn/linear_oracle.hpp"
#include "ldpnn/ratefn.hpp"
#include "ldpnn/sweep.hpp"

namespace ldpnn {

using json = nlohmann::json;

std::string Cell::format() const {
  switch (kind) {
    case Kind::absent:
      return "";
    case Kind::text:
      return text;
    case Kind::number:
      break;
  }
  if (std::isnan(number)) return "nan";
  if (std::isinf(number)) return number > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", number);
  return buf;
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw InvalidArgument("row width does not match the header of " + file);
  rows.push_back(std::move(row));
}

int Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw InvalidArgument("no column '" + name + "' in " + file);
}

std::vector<std::optional<double>> Table::numbers(const std::string& name) const {
  const int c = column_index(name);
  std::vector<std::optional<double>> out;
  for (const auto& r : rows)
    out.push_back(r[c].kind == Cell::Kind::number ? std::optional<double>(r[c].number) : std::nullopt);
  return out;
}

std::vector<std::string> Table::texts(const std::string& name) const {
  const int c = column_index(name);
  std::vector<std::string> out;
  for (const auto& r : rows) out.push_back(r[c].format());
  return out;
}

std::string Table::csv() const {
  std::string s;
  for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
  s += '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i].format();
    s += '\n';
  }
  return s;
}

const Table& ExperimentOutput::table(const std::string& file) const {
  for (const auto& t : tables)
    if (t.file == file) return t;
  throw InvalidArgument("no table " + file);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& v) {
  if (x.size() != v.size() || x.size() < 2) throw InvalidArgument("slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(v[i] > 0.0)) throw InvalidArgument("slope fit needs positive values");
    const double lx = std::log(x[i]), ly = std::log(v[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = std::pow(10.0, lo + (hi - lo) * i / (n - 1));
  return out;
}

std::vector<double> linspace(double lo, double hi, int n) { return Grid{lo, hi, n}.points(); }

NetworkSpec with_activation(NetworkSpec s, const ActivationKind& a) {
  s.activations = {a};
  return s;
}

KernelMatrix nngp_output_kernel(const InputSet& x, const NetworkSpec& spec, const QuadratureSpec& quad) {
  return KernelMatrix(output_covariance(nngp_kernels(x, spec, quad).back().matrix(), spec));
}

json base_document(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir = "";
  json j;
  j["experiment"] = cfg.experiment;
  j["version"] = kVersionString;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["config"] = json::parse(config_json(c));
  j["config"].erase("output_dir");
  return j;
}

std::string format_point(const char* name, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.6g", name, v);
  return buf;
}

/// Records a failure line for a grid point and returns whether the point converged.
bool check_point(const SweepPoint<RateEvaluation>& p, const std::string& where, std::vector<std::string>& failures) {
  if (!p.error.empty()) {
    failures.push_back(where + ": " + p.error);
    return false;
  }
  if (!p.result.converged) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": not converged (outer grad %.3g, inner grad %.3g)", p.result.outer_grad_norm_final,
                  p.result.inner_grad_norm_final);
    failures.push_back(where + buf);
    return false;
  }
  return true;
}

Cell value_or_absent(const SweepPoint<RateEvaluation>& p) {
  return p.error.empty() ? Cell(p.result.value) : Cell();
}

Cell field_or_absent(const SweepPoint<RateEvaluation>& p, double RateEvaluation::*f) {
  return p.error.empty() ? Cell(p.result.*f) : Cell();
}

void finish(ExperimentOutput& out, json& diag) {
  diag["failures"] = out.failures;
  diag["n_failures"] = out.failures.size();
  if (!out.failures.empty() && out.exit_code == kExitOk) out.exit_code = kExitNonConvergence;
}

void require_scalar_inputs(const ExperimentConfig& cfg) {
  if (cfg.network.d_in != 1) throw ConfigError("experiments use scalar inputs; network.d_in must be 1");
}

struct PriorSweep {
  std::vector<SweepPoint<RateEvaluation>> points;
};

PriorSweep prior_sweep(const std::vector<double>& ys, double x_test, const NetworkSpec& spec,
                       const ExperimentConfig& cfg, Execution exec) {
  const InputSet x = InputSet::scalars({x_test});
  return {chunked_sweep<RateEvaluation>(ys, cfg.chunk_size, exec, [&](double y, const RateEvaluation* prev) {
    return prior_marginal_rate(y, 0, x, spec, cfg.optimizer, cfg.quadrature, prev ? &prev->warm : nullptr);
  })};
}

std::vector<SweepPoint<RateEvaluation>> posterior_sweep(const std::vector<double>& ys, PosteriorRate& pr, int index,
                                                        const ExperimentConfig& cfg, Execution exec) {
  const double c = pr.constant();
  auto pts = chunked_sweep<RateEvaluation>(ys, cfg.chunk_size, exec, [&](double y, const RateEvaluation* prev) {
    return pr.marginal_unnormalized(y, index, prev ? &prev->warm : nullptr);
  });
  for (auto& p : pts)
    if (p.error.empty()) p.result.value -= c;
  return pts;
}

json map_document(const MapPrediction& m) {
  return {{"y_map", m.y_star},
          {"objective", m.objective},
          {"kernel_gap", m.diagnostics.kernel_gap_vs_nngp},
          {"min_kernel_diag", m.diagnostics.min_kernel_diag},
          {"outer_grad_norm", m.diagnostics.outer_grad_norm_final},
          {"converged", m.diagnostics.converged}};
}

}  // namespace

ExperimentOutput run_exp01a(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_scalar_inputs(cfg);
  ExperimentOutput out;
  Table t{"prior_rate.csv",
          {"activation", "y", "rate", "inner_grad_norm", "outer_grad_norm", "min_kernel_diag", "kernel_gap", "converged"},
          {}};
  json diag = base_document(cfg);
  json points = json::array();
  const std::vector<double> ys = cfg.grid.points();
  for (const auto& act : cfg.activations) {
    const PriorSweep s = prior_sweep(ys, cfg.x_test, with_activation(cfg.network, act), cfg, opt.exec);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const auto& p = s.points[i];
      const bool ok = check_point(p, act.name() + " " + format_point("y", ys[i]), out.failures);
      t.add({act.name(), ys[i], value_or_absent(p), field_or_absent(p, &RateEvaluation::inner_grad_norm_final),
             field_or_absent(p, &RateEvaluation::outer_grad_norm_final),
             field_or_absent(p, &RateEvaluation::min_kernel_diag),
             field_or_absent(p, &RateEvaluation::kernel_gap_vs_nngp), ok});
      points.push_back({{"activation", act.name()},
                        {"y", ys[i]},
                        {"converged", ok},
                        {"outer_iterations", p.result.outer_iterations},
                        {"error", p.error}});
    }
  }
  diag["points"] = points;
  finish(out, diag);
  out.tables.push_back(std::move(t));
  out.documents["diagnostics.json"] = diag;
  return out;
}

ExperimentOutput run_exp01b(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_scalar_inputs(cfg);
  ExperimentOutput out;
  const Dataset data = cfg.dataset.build({cfg.x_test});
  const int index = data.index_of(cfg.x_test);
  PosteriorRate pr(data, cfg.network, cfg.optimizer, cfg.quadrature);
  const double constant = pr.constant();
  const std::vector<double> ys = cfg.grid.points();
  const PriorSweep prior = prior_sweep(ys, cfg.x_test, cfg.network, cfg, opt.exec);
  const auto post = posterior_sweep(ys, pr, index, cfg, opt.exec);

  // Joint prior rate at each posterior optimizer, solved independently of the posterior problem.
  std::vector<double> idx(ys.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<double>(i);
  const auto joint = chunked_sweep<RateEvaluation>(idx, 1, opt.exec, [&](double k, const RateEvaluation*) {
    const auto& p = post[static_cast<std::size_t>(k)];
    if (!p.error.empty() || p.result.h.size() == 0) throw Diverged("no posterior optimizer");
    return prior_output_rate(p.result.h, data.x, cfg.network, cfg.optimizer, cfg.quadrature);
  });

  Table t{"posterior_rate.csv",
          {"y", "prior_rate", "posterior_rate", "loss_at_optimum", "joint_prior_rate_at_optimum",
           "change_of_measure_residual", "prior_kernel_gap", "posterior_kernel_gap", "outer_grad_norm", "converged"},
          {}};
  for (std::size_t i = 0; i < ys.size(); ++i) {
    bool ok = check_point(prior.points[i], "prior " + format_point("y", ys[i]), out.failures);
    ok = check_point(post[i], "posterior " + format_point("y", ys[i]), out.failures) && ok;
    ok = check_point(joint[i], "joint prior " + format_point("y", ys[i]), out.failures) && ok;
    Cell loss, jr, resid;
    if (post[i].error.empty() && joint[i].error.empty()) {
      const double l = data.loss(post[i].result.h);
      loss = l;
      jr = joint[i].result.value;
      resid = post[i].result.value - (l + joint[i].result.value - constant);
    }
    t.add({ys[i], value_or_absent(prior.points[i]), value_or_absent(post[i]), loss, jr, resid,
           field_or_absent(prior.points[i], &RateEvaluation::kernel_gap_vs_nngp),
           field_or_absent(post[i], &RateEvaluation::kernel_gap_vs_nngp),
           field_or_absent(post[i], &RateEvaluation::outer_grad_norm_final), ok});
  }
  json diag = base_document(cfg);
  diag["posterior_constant"] = constant;
  diag["map"] = map_document(pr.map());
  finish(out, diag);
  out.tables.push_back(std::move(t));
  out.documents["diagnostics.json"] = diag;
  return out;
}

ExperimentOutput run_exp01c(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_scalar_inputs(cfg);
  ExperimentOutput out;
  const std::vector<double> xs = cfg.x_grid.points();
  struct Row {
    MapPrediction map;
    GpMoments gp;
  };
  const auto pts = chunked_sweep<Row>(xs, 1, opt.exec, [&](double x, const Row*) {
    const Dataset data = cfg.dataset.build({x});
    const int index = data.index_of(x);
    Row r;
    r.map = map_predict(index, data, cfg.network, cfg.optimizer, cfg.quadrature);
    r.gp = gp_posterior_mean_var(nngp_output_kernel(data.x, cfg.network, cfg.quadrature), data, index);
    return r;
  });
  Table t{"map_prediction.csv", {"x_test", "y_map", "kernel_gap", "objective", "outer_grad_norm", "converged"}, {}};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto& p = pts[i];
    const std::string where = format_point("x_test", xs[i]);
    if (!p.error.empty()) {
      out.failures.push_back(where + ": " + p.error);
      t.add({xs[i], Cell(), Cell(), Cell(), Cell(), false});
      continue;
    }
    const auto& d = p.result.map.diagnostics;
    if (!d.converged) out.failures.push_back(where + ": not converged");
    t.add({xs[i], p.result.map.y_star, d.kernel_gap_vs_nngp, p.result.map.objective, d.outer_grad_norm_final,
           d.converged});
  }
  json diag = base_document(cfg);
  finish(out, diag);
  out.tables.push_back(std::move(t));
  out.documents["diagnostics.json"] = diag;
  return out;
}

ExperimentOutput run_exp02(const ExperimentConfig& cfg, char variant, const RunOptions& opt) {
  require_scalar_inputs(cfg);
  ExperimentOutput out;
  json diag = base_document(cfg);
  if (variant == 'a') {
    Table t{"prior_vs_nngp.csv", {"activation", "y", "ldp_rate", "nngp_rate", "kernel_gap", "converged"}, {}};
    const std::vector<double> ys = cfg.grid.points();
    const InputSet x = InputSet::scalars({cfg.x_test});
    json refs = json::object();
    for (const auto& act : cfg.activations) {
      const NetworkSpec spec = with_activation(cfg.network, act);
      const KernelMatrix k0 = nngp_output_kernel(x, spec, cfg.quadrature);
      refs[act.name()] = k0(0, 0);
      const PriorSweep s = prior_sweep(ys, cfg.x_test, spec, cfg, opt.exec);
      for (std::size_t i = 0; i < ys.size(); ++i) {
        const bool ok = check_point(s.points[i], act.name() + " " + format_point("y", ys[i]), out.failures);
        t.add({act.name(), ys[i], value_or_absent(s.points[i]), gp_prior_rate(ys[i], k0, 0),
               field_or_absent(s.points[i], &RateEvaluation::kernel_gap_vs_nngp), ok});
      }
    }
    diag["nngp_output_variance"] = refs;
    out.tables.push_back(std::move(t));
  } else if (variant == 'b') {
    const Dataset data = cfg.dataset.build({cfg.x_test});
    const int index = data.index_of(cfg.x_test);
    const KernelMatrix k0 = nngp_output_kernel(data.x, cfg.network, cfg.quadrature);
    PosteriorRate pr(data, cfg.network, cfg.optimizer, cfg.quadrature);
    const std::vector<double> ys = cfg.grid.points();
    const auto post = posterior_sweep(ys, pr, index, cfg, opt.exec);
    Table t{"posterior_vs_nngp.csv", {"y", "ldp_rate", "nngp_rate", "kernel_gap", "converged"}, {}};
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const bool ok = check_point(post[i], format_point("y", ys[i]), out.failures);
      t.add({ys[i], value_or_absent(post[i]), gp_posterior_rate(ys[i], k0, data, index),
             field_or_absent(post[i], &RateEvaluation::kernel_gap_vs_nngp), ok});
    }
    const GpMoments gp = gp_posterior_mean_var(k0, data, index);
    diag["map"] = map_document(pr.map());
    diag["posterior_constant"] = pr.constant();
    diag["nngp_mean"] = gp.mean;
    diag["nngp_std"] = std::sqrt(gp.variance);
    out.tables.push_back(std::move(t));
  } else if (variant == 'c') {
    const std::vector<double> xs = cfg.x_grid.points();
    struct Row {
      MapPrediction map;
      GpMoments gp;
    };
    const auto pts = chunked_sweep<Row>(xs, 1, opt.exec, [&](double x, const Row*) {
      const Dataset data = cfg.dataset.build({x});
      const int index = data.index_of(x);
      return Row{map_predict(index, data, cfg.network, cfg.optimizer, cfg.quadrature),
                 gp_posterior_mean_var(nngp_output_kernel(data.x, cfg.network, cfg.quadrature), data, index)};
    });
    Table t{"map_vs_nngp.csv", {"x_test", "ldp_map", "nngp_mean", "nngp_std", "kernel_gap", "converged"}, {}};
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& p = pts[i];
      const std::string where = format_point("x_test", xs[i]);
      if (!p.error.empty()) {
        out.failures.push_back(where + ": " + p.error);
        t.add({xs[i], Cell(), Cell(), Cell(), Cell(), false});
        continue;
      }
      const auto& d = p.result.map.diagnostics;
      if (!d.converged) out.failures.push_back(where + ": not converged");
      t.add({xs[i], p.result.map.y_star, p.result.gp.mean, std::sqrt(p.result.gp.variance), d.kernel_gap_vs_nngp,
             d.converged});
    }
    out.tables.push_back(std::move(t));
  } else {
    throw ConfigError(std::string("unknown experiment variant 02") + variant);
  }
  finish(out, diag);
  out.documents["diagnostics.json"] = diag;
  return out;
}

namespace {

ExperimentOutput run_exp03a(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentOutput out;
  const std::vector<double> ys = cfg.grid.points();
  const PriorSweep ldp = prior_sweep(ys, cfg.x_test, cfg.network, cfg, opt.exec);
  const Vector xt = Vector::Constant(1, cfg.x_test);
  Table t{"tail_rates.csv", {"width", "y", "empirical_rate", "ldp_rate", "count", "total"}, {}};
  json diag = base_document(cfg);
  std::vector<std::vector<std::optional<double>>> emp;
  for (std::size_t i = 0; i < ys.size(); ++i) check_point(ldp.points[i], format_point("y", ys[i]), out.failures);
  for (int w : cfg.sampler.widths) {
    SamplerConfig sc;
    sc.width = w;
    sc.n_samples = cfg.sampler.n_samples;
    sc.batch = cfg.sampler.batch;
    sc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(w));
    TailCounts tc;
    try {
      tc = prior_tail_counts(sc, cfg.network, xt, ys, opt.exec);
    } catch (const Error& e) {
      out.failures.push_back("sampler width " + std::to_string(w) + ": " + e.what());
      out.exit_code = kExitSampler;
      continue;
    }
    std::vector<std::optional<double>> row;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const auto e = tail_rate_from_count(tc.count[i], tc.total, w);
      row.push_back(e);
      t.add({w, ys[i], Cell(e), value_or_absent(ldp.points[i]), tc.count[i], tc.total});
    }
    emp.push_back(row);
  }
  // Mean absolute deviation per width over the grid points every width resolves.
  json summary = json::array();
  if (out.exit_code == kExitOk) {
    std::vector<double> common;
    std::vector<int> common_idx;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      bool all = ys[i] > 0.0 && ldp.points[i].error.empty();
      for (const auto& r : emp) all = all && r[i].has_value();
      if (all) {
        common.push_back(ys[i]);
        common_idx.push_back(static_cast<int>(i));
      }
    }
    for (std::size_t k = 0; k < emp.size(); ++k) {
      double s = 0.0;
      for (int i : common_idx) s += std::abs(*emp[k][i] - ldp.points[i].result.value);
      summary.push_back({{"width", cfg.sampler.widths[k]},
                         {"mean_abs_deviation", common_idx.empty() ? json(nullptr) : json(s / common_idx.size())}});
    }
    diag["common_grid"] = common;
  }
  diag["deviation_by_width"] = summary;
  finish(out, diag);
  out.tables.push_back(std::move(t));
  out.documents["diagnostics.json"] = diag;
  return out;
}

ExperimentOutput run_exp03b(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentOutput out;
  const Dataset data = cfg.dataset.build({cfg.x_test});
  const int index = data.index_of(cfg.x_test);
  json summary = base_document(cfg);
  const MapPrediction map = map_predict(index, data, cfg.network, cfg.optimizer, cfg.quadrature);
  const GpMoments gp =
      gp_posterior_mean_var(nngp_output_kernel(data.x, cfg.network, cfg.quadrature), data, index);
  summary["ldp_map"] = map.y_star;
  summary["nngp_mean"] = gp.mean;
  summary["nngp_std"] = std::sqrt(gp.variance);
  json regimes = json::object();
  for (std::size_t g = 0; g < cfg.mala.regimes.size(); ++g) {
    const std::string& name = cfg.mala.regimes[g];
    MalaConfig mc = cfg.mala.base;
    mc.tempered = mc.scaled_output = name == "tempered";
    mc.seed = derive_seed(cfg.seed, g);
    ChainDiagnostics d;
    try {
      d = mala_posterior_samples(mc, data, cfg.network, index, opt.exec);
    } catch (const Error& e) {
      out.failures.push_back(name + ": " + e.what());
      out.exit_code = kExitSampler;
      continue;
    }
    double lo = kInfinite, hi = -kInfinite;
    for (std::size_t c = 0; c < d.traces.size(); ++c) {
      const ChainTrace& tr = d.traces[c];
      Table t{"trace_" + name + "_chain" + std::to_string(c) + ".csv",
              {"step", "output_sample", "accepted", "log_density"},
              {}};
      for (std::size_t k = 0; k < tr.output.size(); ++k) {
        lo = std::min(lo, tr.output[k]);
        hi = std::max(hi, tr.output[k]);
        if (k % cfg.mala.trace_stride) continue;
        t.add({tr.step[k], tr.output[k], static_cast<int>(tr.accepted[k]), tr.log_density[k]});
      }
      out.tables.push_back(std::move(t));
    }
    const int bins = cfg.mala.histogram_bins;
    if (!(hi > lo)) hi = lo + 1.0;
    std::vector<long long> counts(bins, 0);
    for (const auto& tr : d.traces)
      for (double v : tr.output) counts[std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins))]++;
    Table h{"histogram_" + name + ".csv", {"bin_center", "count"}, {}};
    for (int b = 0; b < bins; ++b) h.add({lo + (hi - lo) * (b + 0.5) / bins, counts[b]});
    out.tables.push_back(std::move(h));
    regimes[name] = {{"mean", d.mean},
                     {"std", d.std},
                     {"acceptance_rate", d.acceptance_rate},
                     {"acceptance_per_chain", d.acceptance},
                     {"step_sizes", d.step_sizes},
                     {"width", mc.width},
                     {"n_chains", mc.n_chains},
                     {"n_steps", mc.n_steps},
                     {"burn_in", mc.effective_burn_in()},
                     {"warmup_steps", mc.warmup_steps},
                     {"target_acceptance", mc.target_acceptance},
                     {"likelihood_exponent", mc.tempered ? static_cast<double>(mc.width) : 1.0},
                     {"output_scaling", mc.scaled_output ? "1/sqrt(n)" : "1"}};
  }
  summary["regimes"] = regimes;
  finish(out, summary);
  out.documents["mala_summary.json"] = summary;
  return out;
}

}  // namespace

ExperimentOutput run_exp03(const ExperimentConfig& cfg, char variant, const RunOptions& opt) {
  require_scalar_inputs(cfg);
  if (variant == 'a') return run_exp03a(cfg, opt);
  if (variant == 'b') return run_exp03b(cfg, opt);
  throw ConfigError(std::string("unknown experiment variant 03") + variant);
}

ExperimentOutput run_rate(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_scalar_inputs(cfg);
  ExperimentOutput out;
  const std::vector<double> ys = cfg.grid.points();
  const PriorSweep prior = prior_sweep(ys, cfg.x_test, cfg.network, cfg, opt.exec);
  const bool with_data = !cfg.dataset.empty();
  std::vector<SweepPoint<RateEvaluation>> post;
  json diag = base_document(cfg);
  if (with_data) {
    const Dataset data = cfg.dataset.build({cfg.x_test});
    PosteriorRate pr(data, cfg.network, cfg.optimizer, cfg.quadrature);
    post = posterior_sweep(ys, pr, data.index_of(cfg.x_test), cfg, opt.exec);
    diag["map"] = map_document(pr.map());
  }
  Table t{"rate.csv",
          {"y", "prior_rate", "posterior_rate", "prior_kernel_gap", "posterior_kernel_gap", "min_kernel_diag",
           "converged"},
          {}};
  for (std::size_t i = 0; i < ys.size(); ++i) {
    bool ok = check_point(prior.points[i], "prior " + format_point("y", ys[i]), out.failures);
    Cell pv, pg;
    if (with_data) {
      ok = check_point(post[i], "posterior " + format_point("y", ys[i]), out.failures) && ok;
      pv = value_or_absent(post[i]);
      pg = field_or_absent(post[i], &RateEvaluation::kernel_gap_vs_nngp);
    }
    t.add({ys[i], value_or_absent(prior.points[i]), pv,
           field_or_absent(prior.points[i], &RateEvaluation::kernel_gap_vs_nngp), pg,
           field_or_absent(prior.points[i], &RateEvaluation::min_kernel_diag), ok});
  }
  finish(out, diag);
  out.tables.push_back(std::move(t));
  out.documents["diagnostics.json"] = diag;
  return out;
}

ExperimentOutput run_oracle(const ExperimentConfig& cfg, const RunOptions& opt) {
  const ActivationKind act = cfg.network.activations.front();
  if (act.kind != Activation::linear || cfg.network.activations.size() != 1)
    throw ConfigError("the oracle experiment needs network.activation = \"linear\"");
  if (cfg.network.bias_variance != 0.0 || cfg.network.output_bias_variance != 0.0)
    throw ConfigError("the oracle experiment needs zero bias variances");
  if (!(cfg.oracle.kappa0 > 0.0)) throw ConfigError("oracle.kappa0 must be positive");
  ExperimentOutput out;
  const OracleConfig& oc = cfg.oracle;
  const double a = act.a, k0 = oc.kappa0;
  const InputSet x = InputSet::scalars({std::sqrt(k0)});
  const OptimizerSettings& os = cfg.optimizer;
  auto spec = [&](int depth) { return NetworkSpec::uniform(depth, act, 0.0); };
  json summary = base_document(cfg);
  json checks = json::array();
  auto record = [&](const std::string& name, double err, double tol, bool solved) {
    const bool pass = solved && err <= tol;
    checks.push_back({{"check", name}, {"max_abs_error", err}, {"tolerance", tol}, {"pass", pass}});
    if (!pass) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s: error %.3g exceeds tolerance %.3g", name.c_str(), err, tol);
      out.failures.push_back(solved ? buf : name + ": solver failure");
    }
  };

  {
    Table t{"oracle_layer_cost.csv", {"kappa", "optimizer", "oracle", "abs_error"}, {}};
    const std::vector<double> ks = logspace(std::log10(0.05), std::log10(20.0), 20);
    const KernelMatrix base(Matrix::Constant(1, 1, k0));
    auto pts = chunked_sweep<RateEvaluation>(ks, 1, opt.exec, [&](double k, const RateEvaluation*) {
      return layer_cost(KernelMatrix(Matrix::Constant(1, 1, a * k0 * k)), base, act, os, 0.0, cfg.quadrature);
    });
    double worst = 0.0;
    bool solved = true;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double kappa = a * k0 * ks[i];
      const double ref = layer_cost_linear(kappa, k0, a);
      solved = solved && pts[i].error.empty();
      const double err = pts[i].error.empty() ? std::abs(pts[i].result.value - ref) : kInfinite;
      worst = std::max(worst, err);
      t.add({kappa, value_or_absent(pts[i]), ref, err});
    }
    record("layer_cost", worst, oc.layer_cost_tol, solved);
    out.tables.push_back(std::move(t));
  }
  {
    Table t{"oracle_kernel_rate.csv", {"L", "kappa", "optimizer", "oracle", "abs_error"}, {}};
    const std::vector<double> ks = logspace(-1.0, 1.0, 10);
    for (int L = 1; L <= 3; ++L) {
      const LinearConfig lc{a, k0, L};
      const NetworkSpec s = spec(L + 1);
      const double mean = std::pow(a, L) * k0;
      auto pts = chunked_sweep<RateEvaluation>(ks, 1, opt.exec, [&](double k, const RateEvaluation*) {
        return kernel_rate(KernelMatrix(Matrix::Constant(1, 1, mean * k)), L, x, s, os, cfg.quadrature);
      });
      double worst = 0.0;
      bool solved = true;
      for (std::size_t i = 0; i < ks.size(); ++i) {
        const double ref = kernel_rate_linear(mean * ks[i], lc);
        solved = solved && pts[i].error.empty();
        const double err = pts[i].error.empty() ? std::abs(pts[i].result.value - ref) : kInfinite;
        worst = std::max(worst, err);
        t.add({L, mean * ks[i], value_or_absent(pts[i]), ref, err});
      }
      record("kernel_rate_L" + std::to_string(L), worst, oc.kernel_rate_tol, solved);
    }
    out.tables.push_back(std::move(t));
  }
  {
    Table t{"oracle_output_rate.csv", {"y", "optimizer", "oracle", "abs_error"}, {}};
    const std::vector<double> ys = linspace(-3.0, 3.0, 31);
    const LinearConfig lc{a, k0, 1};
    const PriorSweep s = prior_sweep(ys, std::sqrt(k0), spec(2), cfg, opt.exec);
    double worst = 0.0;
    bool solved = true;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double ref = output_rate_linear_shallow(ys[i], lc);
      solved = solved && s.points[i].error.empty();
      const double err = s.points[i].error.empty() ? std::abs(s.points[i].result.value - ref) : kInfinite;
      worst = std::max(worst, err);
      t.add({ys[i], value_or_absent(s.points[i]), ref, err});
    }
    record("shallow_output_rate", worst, oc.output_rate_tol, solved);
    out.tables.push_back(std::move(t));
  }
  const std::vector<double> tail_ys = logspace(2.0, 4.0, 21);
  {
    Table t{"oracle_kappa_star.csv", {"L", "y", "optimizer_kappa", "oracle_kappa"}, {}};
    json slopes = json::array();
    for (int L = 1; L <= 2; ++L) {
      const LinearConfig lc{a, k0, L};
      const PriorSweep s = prior_sweep(tail_ys, std::sqrt(k0), spec(L + 1), cfg, opt.exec);
      std::vector<double> kopt, kref;
      bool solved = true;
      for (std::size_t i = 0; i < tail_ys.size(); ++i) {
        const auto& p = s.points[i];
        const bool ok = p.error.empty() && p.result.argmin_kernel.has_value();
        solved = solved && ok;
        const double ko = ok ? (*p.result.argmin_kernel)(0, 0) : 0.0;
        kopt.push_back(ko);
        kref.push_back(kappa_star(tail_ys[i], lc));
        t.add({L, tail_ys[i], ok ? Cell(ko) : Cell(), kref.back()});
      }
      const double so = solved ? loglog_slope(tail_ys, kopt) : kInfinite;
      const double sr = loglog_slope(tail_ys, kref);
      slopes.push_back({{"L", L}, {"optimizer_slope", so}, {"oracle_slope", sr}});
      record("kappa_star_slope_L" + std::to_string(L), std::abs(so - sr), oc.slope_tol, solved);
    }
    summary["kappa_star_slopes"] = slopes;
    out.tables.push_back(std::move(t));
  }
  {
    Table t{"oracle_deep_tail.csv", {"y", "optimizer", "oracle"}, {}};
    const LinearConfig lc{a, k0, 2};
    const PriorSweep s = prior_sweep(tail_ys, std::sqrt(k0), spec(3), cfg, opt.exec);
    std::vector<double> v;
    bool solved = true;
    for (std::size_t i = 0; i < tail_ys.size(); ++i) {
      solved = solved && s.points[i].error.empty();
      v.push_back(s.points[i].error.empty() ? s.points[i].result.value : 0.0);
      t.add({tail_ys[i], value_or_absent(s.points[i]), output_rate_linear(tail_ys[i], lc)});
    }
    const double slope = solved ? loglog_slope(tail_ys, v) : kInfinite;
    summary["deep_tail_slope"] = slope;
    summary["deep_tail_expected"] = tail_exponent_linear(2);
    record("deep_tail_slope_L2", std::abs(slope - tail_exponent_linear(2)), oc.slope_tol, solved);
    out.tables.push_back(std::move(t));
  }
  summary["checks"] = checks;
  finish(out, summary);
  out.documents["oracle_summary.json"] = summary;
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  const std::string& e = cfg.experiment;
  if (e == "01a") return run_exp01a(cfg, opt);
  if (e == "01b") return run_exp01b(cfg, opt);
  if (e == "01c") return run_exp01c(cfg, opt);
  if (e == "02a" || e == "02b" || e == "02c") return run_exp02(cfg, e[2], opt);
  if (e == "03a" || e == "03b") return run_exp03(cfg, e[2], opt);
  if (e == "rate") return run_rate(cfg, opt);
  if (e == "oracle") return run_oracle(cfg, opt);
  throw ConfigError("unknown experiment '" + e + "'");
}

std::vector<std::string> write_output(const ExperimentOutput& out, const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output_dir '" + cfg.output_dir + "': " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const fs::path& p, const std::string& body) {
    std::ofstream f(p, std::ios::binary);
    f << body;
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    written.push_back(p.string());
  };
  const std::string hash = config_hash(cfg);
  for (const auto& t : out.tables) {
    const fs::path p = fs::path(cfg.output_dir) / t.file;
    put(p, t.csv());
    const json meta = {{"file", t.file},       {"columns", t.columns},  {"rows", t.rows.size()},
                       {"config_hash", hash},  {"seed", cfg.seed},      {"version", kVersionString},
                       {"experiment", cfg.experiment}};
    put(fs::path(p.string() + ".meta.json"), meta.dump(2) + "\n");
  }
  for (const auto& [name, doc] : out.documents) put(fs::path(cfg.output_dir) / name, doc.dump(2) + "\n");
  return written;
}

}  // namespace ldpnn
