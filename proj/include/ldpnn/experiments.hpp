#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldpnn/config.hpp"
#include "ldpnn/mc.hpp"

namespace ldpnn {

inline constexpr const char* kVersionString = "ldpnn 0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNonConvergence = 3, kExitSampler = 4 };

/// CSV cell: a number, a label, or ABSENT (written as an empty field).
struct Cell {
  enum class Kind { number, text, absent } kind = Kind::absent;
  double number = 0.0;
  std::string text;

  Cell() = default;
  Cell(double v) : kind(Kind::number), number(v) {}
  Cell(int v) : kind(Kind::number), number(v) {}
  Cell(long long v) : kind(Kind::number), number(static_cast<double>(v)) {}
  Cell(bool v) : kind(Kind::number), number(v ? 1.0 : 0.0) {}
  Cell(std::string s) : kind(Kind::text), text(std::move(s)) {}
  Cell(const char* s) : kind(Kind::text), text(s) {}
  Cell(std::optional<double> v) : kind(v ? Kind::number : Kind::absent), number(v.value_or(0.0)) {}

  std::string format() const;
};

struct Table {
  std::string file;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  int column_index(const std::string& name) const;
  std::vector<std::optional<double>> numbers(const std::string& name) const;
  std::vector<std::string> texts(const std::string& name) const;
  std::string csv() const;
};

struct ExperimentOutput {
  std::vector<Table> tables;
  std::map<std::string, nlohmann::json> documents;  ///< file name -> JSON body
  std::vector<std::string> failures;                ///< per-point non-convergence reports
  int exit_code = kExitOk;

  const Table& table(const std::string& file) const;
};

struct RunOptions {
  Execution exec = Execution::parallel;
};

ExperimentOutput run_exp01a(const ExperimentConfig& cfg, const RunOptions& opt = {});
ExperimentOutput run_exp01b(const ExperimentConfig& cfg, const RunOptions& opt = {});
ExperimentOutput run_exp01c(const ExperimentConfig& cfg, const RunOptions& opt = {});
ExperimentOutput run_exp02(const ExperimentConfig& cfg, char variant, const RunOptions& opt = {});
ExperimentOutput run_exp03(const ExperimentConfig& cfg, char variant, const RunOptions& opt = {});
ExperimentOutput run_rate(const ExperimentConfig& cfg, const RunOptions& opt = {});
ExperimentOutput run_oracle(const ExperimentConfig& cfg, const RunOptions& opt = {});

/// Dispatches on cfg.experiment.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});

/// Writes every table (plus a .meta.json sidecar) and document into cfg.output_dir.
/// Returns the written paths.
std::vector<std::string> write_output(const ExperimentOutput& out, const ExperimentConfig& cfg);

/// Least-squares slope of log(v) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& v);

}  // namespace ldpnn
