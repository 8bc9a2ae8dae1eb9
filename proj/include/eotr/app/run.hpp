#pragma once

#include "eotr/app/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace eotr::app {

enum ExitCode : int { kOk = 0, kConfigFailure = 1, kNonConvergence = 2, kAssertionFailure = 3 };

struct RunOptions {
  bool assert_mode = false;
  int jobs = 1;
  std::optional<std::filesystem::path> out;
};

/// --out, then $EOTR_OUT, then the config's output_dir.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const RunOptions& options);

/// Loads, runs and persists one experiment; returns the process exit code.
int run_config(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& out,
               std::ostream& err);

}  // namespace eotr::app
