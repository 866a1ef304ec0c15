#include "ldpnn/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ldpnn/errors.hpp"

namespace ldpnn {

using json = nlohmann::json;

std::vector<double> Grid::points() const {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = i == count - 1 ? max : min + (max - min) * i / (count - 1);
  return out;
}

void Grid::validate(const std::string& name) const {
  if (count < 2) throw ConfigError(name + ".count must be at least 2");
  if (!std::isfinite(min) || !std::isfinite(max) || !(min < max))
    throw ConfigError(name + " needs finite min < max");
}

Dataset DatasetConfig::build(const std::vector<double>& test_x) const {
  Dataset d = preset.empty() ? Dataset::scalar(train_x, train_y, test_x) : Dataset::named(preset, test_x);
  return zero_targets ? d.zero_targets() : d;
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + label() + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError("unknown key '" + key(it.key()) + "'");
  }

  bool has(const char* k) const { return j_.contains(k); }
  const json& at(const char* k) const { return j_.at(k); }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  template <class T>
  void get(const char* k, T& out) const {
    if (!j_.contains(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("key '" + key(k) + "' has the wrong type");
    }
  }

  void get_number(const char* k, double& out) const {
    if (!j_.contains(k)) return;
    if (!j_.at(k).is_number()) throw ConfigError("key '" + key(k) + "' must be a number");
    out = j_.at(k).get<double>();
  }

  template <class I>
  void get_int(const char* k, I& out) const {
    if (!j_.contains(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) throw ConfigError("key '" + key(k) + "' must be an integer");
    out = v.get<I>();
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  const json& j_;
  std::string path_;
};

ActivationKind activation_from(const json& v, double a, const std::string& where) {
  if (!v.is_string()) throw ConfigError("key '" + where + "' must be an activation name");
  try {
    return ActivationKind::parse(v.get<std::string>(), a);
  } catch (const Error& e) {
    throw ConfigError("key '" + where + "': " + e.what());
  }
}

Grid read_grid(const json& j, const std::string& path, Grid g) {
  Reader r(j, path);
  r.allow({"min", "max", "count"});
  r.get_number("min", g.min);
  r.get_number("max", g.max);
  r.get_int("count", g.count);
  return g;
}

NetworkSpec read_network(const json& j) {
  Reader r(j, "network");
  r.allow({"depth", "activation", "linear_a", "d_in", "bias_variance", "output_bias_variance"});
  NetworkSpec s;
  r.get_int("depth", s.depth);
  r.get_int("d_in", s.d_in);
  r.get_number("bias_variance", s.bias_variance);
  r.get_number("output_bias_variance", s.output_bias_variance);
  double a = 1.0;
  r.get_number("linear_a", a);
  s.activations = {ActivationKind::relu()};
  if (r.has("activation")) {
    const json& act = r.at("activation");
    s.activations.clear();
    if (act.is_array()) {
      for (std::size_t i = 0; i < act.size(); ++i)
        s.activations.push_back(activation_from(act[i], a, "network.activation[" + std::to_string(i) + "]"));
    } else {
      s.activations.push_back(activation_from(act, a, "network.activation"));
    }
  }
  return s;
}

DatasetConfig read_dataset(const json& j) {
  DatasetConfig d;
  if (j.is_string()) {
    d.preset = j.get<std::string>();
    if (d.preset != "heaviside6" && d.preset != "empty") throw ConfigError("unknown dataset preset '" + d.preset + "'");
    return d;
  }
  Reader r(j, "dataset");
  r.allow({"preset", "train_x", "train_y", "zero_targets"});
  d.preset.clear();
  r.get("preset", d.preset);
  r.get("train_x", d.train_x);
  r.get("train_y", d.train_y);
  r.get("zero_targets", d.zero_targets);
  if (!d.preset.empty() && (!d.train_x.empty() || !d.train_y.empty()))
    throw ConfigError("dataset.preset cannot be combined with inline data");
  if (!d.preset.empty() && d.preset != "heaviside6" && d.preset != "empty")
    throw ConfigError("unknown dataset preset '" + d.preset + "'");
  if (d.train_x.size() != d.train_y.size()) throw ConfigError("dataset.train_x and dataset.train_y differ in length");
  return d;
}

OptimizerSettings read_optimizer(const json& j) {
  Reader r(j, "optimizer");
  r.allow({"inner_adam_steps", "inner_adam_lr", "inner_lbfgs_tol", "inner_lbfgs_max_iter", "outer_adam_steps",
           "outer_adam_lr", "grad_tol", "seed", "lbfgs_history", "outer_lbfgs_max_iter"});
  OptimizerSettings o;
  r.get_int("inner_adam_steps", o.inner_adam_steps);
  r.get_number("inner_adam_lr", o.inner_adam_lr);
  r.get_number("inner_lbfgs_tol", o.inner_lbfgs_tol);
  r.get_int("inner_lbfgs_max_iter", o.inner_lbfgs_max_iter);
  r.get_int("outer_adam_steps", o.outer_adam_steps);
  r.get_number("outer_adam_lr", o.outer_adam_lr);
  r.get_number("grad_tol", o.grad_tol);
  r.get_int("seed", o.seed);
  r.get_int("lbfgs_history", o.lbfgs_history);
  r.get_int("outer_lbfgs_max_iter", o.outer_lbfgs_max_iter);
  return o;
}

QuadratureSpec read_quadrature(const json& j) {
  Reader r(j, "quadrature");
  r.allow({"nodes_per_dim", "mc_fallback_samples", "mc_seed", "allow_mc_fallback", "angular_tol"});
  QuadratureSpec q;
  r.get_int("nodes_per_dim", q.nodes_per_dim);
  r.get_int("mc_fallback_samples", q.mc_fallback_samples);
  r.get_int("mc_seed", q.mc_seed);
  r.get("allow_mc_fallback", q.allow_mc_fallback);
  r.get_number("angular_tol", q.angular_tol);
  return q;
}

SweepSamplerConfig read_sampler(const json& j) {
  Reader r(j, "sampler");
  r.allow({"widths", "n_samples", "batch"});
  SweepSamplerConfig s;
  r.get("widths", s.widths);
  r.get_int("n_samples", s.n_samples);
  r.get_int("batch", s.batch);
  return s;
}

MalaSweepConfig read_mala(const json& j) {
  Reader r(j, "mala");
  r.allow({"width", "step_size", "n_chains", "burn_in", "n_steps", "warmup_steps", "target_acceptance", "regimes",
           "histogram_bins", "trace_stride"});
  MalaSweepConfig m;
  r.get_int("width", m.base.width);
  r.get_number("step_size", m.base.step_size);
  r.get_int("n_chains", m.base.n_chains);
  r.get_int("burn_in", m.base.burn_in);
  r.get_int("n_steps", m.base.n_steps);
  r.get_int("warmup_steps", m.base.warmup_steps);
  r.get_number("target_acceptance", m.base.target_acceptance);
  r.get("regimes", m.regimes);
  r.get_int("histogram_bins", m.histogram_bins);
  r.get_int("trace_stride", m.trace_stride);
  return m;
}

OracleConfig read_oracle(const json& j) {
  Reader r(j, "oracle");
  r.allow({"kappa0", "layer_cost_tol", "kernel_rate_tol", "output_rate_tol", "slope_tol"});
  OracleConfig o;
  r.get_number("kappa0", o.kappa0);
  r.get_number("layer_cost_tol", o.layer_cost_tol);
  r.get_number("kernel_rate_tol", o.kernel_rate_tol);
  r.get_number("output_rate_tol", o.output_rate_tol);
  r.get_number("slope_tol", o.slope_tol);
  return o;
}

json activation_json(const ActivationKind& a) { return a.name(); }

}  // namespace

void ExperimentConfig::validate() const {
  bool known = false;
  for (const auto& n : experiment_names()) known = known || n == experiment;
  if (!known) throw ConfigError("unknown experiment '" + experiment + "'");
  try {
    network.validate();
    optimizer.validate();
    quadrature.validate();
    for (const auto& a : activations) a.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  grid.validate("grid");
  x_grid.validate("x_grid");
  if (!std::isfinite(x_test)) throw ConfigError("x_test must be finite");
  if (chunk_size < 1) throw ConfigError("chunk_size must be positive");
  if (sampler.widths.empty()) throw ConfigError("sampler.widths must not be empty");
  for (int w : sampler.widths)
    if (w < 1) throw ConfigError("sampler.widths entries must be positive");
  if (sampler.n_samples < 1 || sampler.batch < 1) throw ConfigError("sampler.n_samples and sampler.batch must be positive");
  if (mala.histogram_bins < 1) throw ConfigError("mala.histogram_bins must be positive");
  if (mala.trace_stride < 1) throw ConfigError("mala.trace_stride must be positive");
  for (const auto& g : mala.regimes)
    if (g != "tempered" && g != "standard") throw ConfigError("unknown mala regime '" + g + "'");
  try {
    mala.base.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  Reader r(j, "");
  r.allow({"experiment", "network", "activations", "dataset", "grid", "x_grid", "x_test", "optimizer", "quadrature",
           "sampler", "mala", "oracle", "chunk_size", "output_dir", "seed"});
  ExperimentConfig c;
  r.get("experiment", c.experiment);
  if (r.has("network")) c.network = read_network(r.at("network"));
  if (r.has("activations")) {
    const json& a = r.at("activations");
    if (!a.is_array()) throw ConfigError("key 'activations' must be an array");
    const double la = c.network.activations.front().a;
    for (std::size_t i = 0; i < a.size(); ++i)
      c.activations.push_back(activation_from(a[i], la, "activations[" + std::to_string(i) + "]"));
  }
  if (r.has("dataset")) c.dataset = read_dataset(r.at("dataset"));
  if (r.has("grid")) c.grid = read_grid(r.at("grid"), "grid", c.grid);
  if (r.has("x_grid")) c.x_grid = read_grid(r.at("x_grid"), "x_grid", c.x_grid);
  r.get_number("x_test", c.x_test);
  if (r.has("optimizer")) c.optimizer = read_optimizer(r.at("optimizer"));
  if (r.has("quadrature")) c.quadrature = read_quadrature(r.at("quadrature"));
  if (r.has("sampler")) c.sampler = read_sampler(r.at("sampler"));
  if (r.has("mala")) c.mala = read_mala(r.at("mala"));
  if (r.has("oracle")) c.oracle = read_oracle(r.at("oracle"));
  r.get_int("chunk_size", c.chunk_size);
  r.get("output_dir", c.output_dir);
  r.get_int("seed", c.seed);
  if (c.activations.empty()) c.activations = {c.network.activations.front()};
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  json acts = json::array();
  for (const auto& a : c.network.activations) acts.push_back(activation_json(a));
  j["network"] = {{"depth", c.network.depth},
                  {"activation", acts},
                  {"linear_a", c.network.activations.front().a},
                  {"d_in", c.network.d_in},
                  {"bias_variance", c.network.bias_variance},
                  {"output_bias_variance", c.network.output_bias_variance}};
  json sweep = json::array();
  for (const auto& a : c.activations) sweep.push_back(activation_json(a));
  j["activations"] = sweep;
  if (c.dataset.preset.empty())
    j["dataset"] = {{"train_x", c.dataset.train_x}, {"train_y", c.dataset.train_y}, {"zero_targets", c.dataset.zero_targets}};
  else
    j["dataset"] = {{"preset", c.dataset.preset}, {"zero_targets", c.dataset.zero_targets}};
  j["grid"] = {{"min", c.grid.min}, {"max", c.grid.max}, {"count", c.grid.count}};
  j["x_grid"] = {{"min", c.x_grid.min}, {"max", c.x_grid.max}, {"count", c.x_grid.count}};
  j["x_test"] = c.x_test;
  const auto& o = c.optimizer;
  j["optimizer"] = {{"inner_adam_steps", o.inner_adam_steps},   {"inner_adam_lr", o.inner_adam_lr},
                    {"inner_lbfgs_tol", o.inner_lbfgs_tol},     {"inner_lbfgs_max_iter", o.inner_lbfgs_max_iter},
                    {"outer_adam_steps", o.outer_adam_steps},   {"outer_adam_lr", o.outer_adam_lr},
                    {"grad_tol", o.grad_tol},                   {"seed", o.seed},
                    {"lbfgs_history", o.lbfgs_history},         {"outer_lbfgs_max_iter", o.outer_lbfgs_max_iter}};
  const auto& q = c.quadrature;
  j["quadrature"] = {{"nodes_per_dim", q.nodes_per_dim},
                     {"mc_fallback_samples", q.mc_fallback_samples},
                     {"mc_seed", q.mc_seed},
                     {"allow_mc_fallback", q.allow_mc_fallback},
                     {"angular_tol", q.angular_tol}};
  j["sampler"] = {{"widths", c.sampler.widths}, {"n_samples", c.sampler.n_samples}, {"batch", c.sampler.batch}};
  const auto& m = c.mala.base;
  j["mala"] = {{"width", m.width},
               {"step_size", m.step_size},
               {"n_chains", m.n_chains},
               {"burn_in", m.burn_in},
               {"n_steps", m.n_steps},
               {"warmup_steps", m.warmup_steps},
               {"target_acceptance", m.target_acceptance},
               {"regimes", c.mala.regimes},
               {"histogram_bins", c.mala.histogram_bins},
               {"trace_stride", c.mala.trace_stride}};
  j["oracle"] = {{"kappa0", c.oracle.kappa0},
                 {"layer_cost_tol", c.oracle.layer_cost_tol},
                 {"kernel_rate_tol", c.oracle.kernel_rate_tol},
                 {"output_rate_tol", c.oracle.output_rate_tol},
                 {"slope_tol", c.oracle.slope_tol}};
  j["chunk_size"] = c.chunk_size;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir = "";
  const std::string s = config_json(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ldpnn
