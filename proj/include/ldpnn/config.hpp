#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldpnn/dataset.hpp"
#include "ldpnn/mc.hpp"
#include "ldpnn/nngp.hpp"
#include "ldpnn/quadrature.hpp"
#include "ldpnn/ratefn.hpp"

namespace ldpnn {

struct Grid {
  double min = 0.0;
  double max = 1.0;
  int count = 101;

  std::vector<double> points() const;
  void validate(const std::string& name) const;
};

struct DatasetConfig {
  std::string preset = "heaviside6";  ///< empty when inline
  std::vector<double> train_x;
  std::vector<double> train_y;
  bool zero_targets = false;

  Dataset build(const std::vector<double>& test_x) const;
  bool empty() const { return preset == "empty" || (preset.empty() && train_x.empty()); }
};

struct SweepSamplerConfig {
  std::vector<int> widths{32, 64, 128, 256};
  long long n_samples = 1000000;
  int batch = 10000;
};

struct MalaSweepConfig {
  MalaConfig base;
  std::vector<std::string> regimes{"tempered", "standard"};
  int histogram_bins = 60;
  int trace_stride = 1;  ///< keep every k-th post burn-in sample in the trace files
};

struct OracleConfig {
  double kappa0 = 1.0;  ///< input kernel of the single oracle input
  double layer_cost_tol = 1e-4;
  double kernel_rate_tol = 1e-3;
  double output_rate_tol = 1e-3;
  double slope_tol = 0.1;
};

struct ExperimentConfig {
  std::string experiment;
  NetworkSpec network;
  std::vector<ActivationKind> activations;  ///< 01a/02a sweep; defaults to the network activation
  DatasetConfig dataset;
  Grid grid{-1.0, 4.0, 101};
  Grid x_grid{-4.0, 4.0, 81};
  double x_test = 3.0;
  OptimizerSettings optimizer;
  QuadratureSpec quadrature;
  SweepSamplerConfig sampler;
  MalaSweepConfig mala;
  OracleConfig oracle;
  int chunk_size = 8;  ///< grid points per warm-started chunk
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  void validate() const;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"01a", "01b", "01c", "02a", "02b", "02c", "03a", "03b", "rate", "oracle"};
  return names;
}

/// Strict parser: unknown keys and wrong types raise ConfigError naming the key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON dump of the effective configuration.
std::string config_json(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ldpnn
