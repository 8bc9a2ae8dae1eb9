#pragma once

#include "eotr/app/config.hpp"
#include "eotr/rates.hpp"

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace eotr::app {

/// Extra CSV written next to results.csv as `<name>.csv`.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct AuditRow {
  std::string check;
  double value = 0;
  double bound = 0;
  bool passed = false;
};

struct RunResult {
  std::vector<SweepRow<double>> rows;
  std::optional<RateFit<double>> fit;
  std::vector<AuditRow> audit;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<Table> tables;
  bool all_converged = true;

  std::optional<double> metric(const std::string& name) const;
};

/// Every metric name a pipeline can emit.
const std::set<std::string>& known_metrics();

/// Executes the configured pipeline. `jobs` bounds the number of worker
/// threads used for independent solves.
RunResult run_pipeline(const ExperimentConfig& config, int jobs = 1);

/// Lowest epsilon a ladder may reach on the instance, (floor_cells h)^rho;
/// zero when neither marginal has a mesh width.
double discreteness_floor(const ExperimentConfig& config);

/// Entropic value of a 2x2 problem by golden-section search over the single
/// free entry of the coupling.
double golden_section_2x2(const Matrix& C, const Vector& a, const Vector& b, double eps);

}  // namespace eotr::app
