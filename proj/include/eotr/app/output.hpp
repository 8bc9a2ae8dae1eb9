#pragma once

#include "eotr/app/config.hpp"
#include "eotr/app/pipeline.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace eotr::app {

inline const std::vector<std::string> kResultColumns{"epsilon",   "v_eps",      "v0",       "gap",
                                                     "entropy",   "iterations", "residual", "converged"};

/// Shortest round-trip decimal form; identical doubles print identically.
std::string format_number(double value);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

/// Writes results.csv, metrics.csv, manifest.toml and, when present,
/// fit.csv, audit.csv and the pipeline's extra tables into `dir`.
void write_run(const std::filesystem::path& dir, const ExperimentConfig& config, const RunResult& result);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Index of a column; throws naming the column and file when absent.
  std::size_t column(const std::string& name, const std::string& file) const;
  std::vector<double> numbers(const std::string& name, const std::string& file) const;
};

/// Throws std::runtime_error naming the file when it is missing or empty.
CsvTable read_csv(const std::filesystem::path& path);

std::map<std::string, double> read_metrics(const std::filesystem::path& path);

struct AssertionOutcome {
  Assertion assertion;
  std::optional<double> value;
  double margin = 0;  ///< >= 0 on pass
  bool passed = false;
};

std::vector<AssertionOutcome> evaluate_assertions(const std::vector<Assertion>& assertions,
                                                  const std::map<std::string, double>& metrics);

void print_outcomes(std::ostream& os, const std::vector<AssertionOutcome>& outcomes);

}  // namespace eotr::app
