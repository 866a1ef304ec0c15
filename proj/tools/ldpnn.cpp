#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "ldpnn/config.hpp"
#include "ldpnn/errors.hpp"
#include "ldpnn/experiments.hpp"

namespace {

int parse_threads(const std::string& s) {
  try {
    std::size_t pos = 0;
    const int n = std::stoi(s, &pos);
    if (pos == s.size() && n > 0) return n;
  } catch (const std::exception&) {
  }
  throw ldpnn::ConfigError("thread count must be a positive integer, got '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-deviation rate functions for shallow and deep networks"};
  std::string experiment, config_path, out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool serial = false;
  std::string joined;
  for (const auto& n : ldpnn::experiment_names()) joined += (joined.empty() ? "" : ", ") + n;
  app.add_option("experiment", experiment, "One of: " + joined)->required();
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--threads", threads, "Worker threads (falls back to LDPNN_THREADS)")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Overrides the configured seed");
  app.add_option("--out", out_dir, "Overrides the configured output directory");
  app.add_flag("--serial", serial, "Use the serial reference path");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ldpnn::kExitConfig;
  }

  ldpnn::ExperimentConfig cfg;
  try {
    if (threads == 0) {
      if (const char* env = std::getenv("LDPNN_THREADS")) threads = parse_threads(env);
    }
    if (threads > 0) omp_set_num_threads(threads);
    cfg = ldpnn::load_config(config_path);
    if (cfg.experiment.empty()) cfg.experiment = experiment;
    if (cfg.experiment != experiment)
      throw ldpnn::ConfigError("config is for experiment '" + cfg.experiment + "', not '" + experiment + "'");
    if (*seed_opt) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.validate();
  } catch (const ldpnn::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ldpnn::kExitConfig;
  }

  ldpnn::RunOptions opt;
  opt.exec = serial ? ldpnn::Execution::serial : ldpnn::Execution::parallel;
  ldpnn::ExperimentOutput out;
  try {
    out = ldpnn::run_experiment(cfg, opt);
  } catch (const ldpnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ldpnn::kExitConfig;
  } catch (const ldpnn::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return ldpnn::kExitNonConvergence;
  }
  try {
    for (const auto& p : ldpnn::write_output(out, cfg)) std::cout << p << "\n";
  } catch (const ldpnn::Error& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return ldpnn::kExitConfig;
  }
  if (!out.failures.empty()) {
    std::cerr << out.failures.size() << " failing point(s):\n";
    for (const auto& f : out.failures) std::cerr << "  " << f << "\n";
  }
  return out.exit_code;
}
