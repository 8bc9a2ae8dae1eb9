#pragma once

#include "eotr/costs.hpp"
#include "eotr/measures.hpp"
#include "eotr/types.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eotr::app {

enum class Pipeline { Sweep, Fit, Debiased, GapAudit, Dim, BlocksAudit, Stability, Derivative, Oracle, Alexandrov };

std::string to_string(Pipeline p);

/// Config problem with the position of the offending node (line 0 when the
/// problem is not tied to a node).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::uint32_t line = 0, std::uint32_t column = 0);
  std::uint32_t line() const { return line_; }
  std::uint32_t column() const { return column_; }

 private:
  std::uint32_t line_;
  std::uint32_t column_;
};

/// One marginal: a density on a box discretized on a grid, a segment, or a
/// single atom.
struct MarginalSpec {
  std::string kind;  ///< uniform | affine-ramp | truncated-bump | segment | dirac
  Vector lower, upper;
  double offset = 1.0;
  Vector slope;
  double sigma = 0.0;
  Vector from, to;  ///< segment endpoints
  Vector at;        ///< dirac location
  long n = 0;       ///< cells per axis, or atoms on a segment
};

struct CostSpec {
  std::string kind = "quadratic";  ///< quadratic | abs | p-norm | bilinear | polynomial
  double p = 2.0;
  Matrix coefficients;
};

struct EpsilonSpec {
  double min = 0;
  double max = 0;
  int count = 8;
  std::string spacing = "log";  ///< log | linear
  std::uint32_t line = 0;
};

struct SolverSpec {
  double tol = 1e-10;
  long max_iter = 200000;
  std::optional<double> eps_scaling;
};

struct WindowSpec {
  /// Discreteness floor (floor_cells * h)^rho, rho = 2 for C^2 costs, 1 otherwise.
  double floor_cells = 10.0;
  std::optional<double> fit_min;
  std::optional<double> fit_max;
  bool force = false;
};

/// Pipeline-specific knobs; each pipeline reads the ones it needs.
struct Options {
  std::int64_t trials = 10000;
  double radius = 0.1;
  std::int64_t samples = 1000;
  double h = 1e-3;
  std::vector<double> eps_points{0.2, 0.5, 1.0};
  int instances = 5;
  int size = 6;
  double taylor_eps = 1e-4;
  std::string function = "abs";
  long grid = 10000;
  double interval_lo = -1.0;
  double interval_hi = 1.0;
  std::optional<double> r_min;
  double r_max = 0.1;
  int r_count = 8;
  double delta_min = 0;
  double delta_max = 0;
  int delta_count = 12;
  std::string reference;  ///< "abs-uniform": also report the closed-form lower bound
};

struct Assertion {
  std::string metric;
  std::string comparator;  ///< within | at_most | at_least | equals
  double lo = 0;
  double hi = 0;
  double tolerance = 0;
  std::uint32_t line = 0;

  std::string describe() const;
};

struct ExperimentConfig {
  std::string name;
  Pipeline pipeline = Pipeline::Sweep;
  std::optional<MarginalSpec> minus;
  std::optional<MarginalSpec> plus;
  CostSpec cost;
  std::optional<EpsilonSpec> epsilon;
  SolverSpec solver;
  WindowSpec window;
  Options options;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::vector<Assertion> assertions;
  std::string source_path;
  std::string source_text;
};

ExperimentConfig parse_config_string(const std::string& text, const std::string& source_path = "<string>");
ExperimentConfig load_config(const std::string& path);

DiscreteMeasure<double> build_measure(const MarginalSpec& spec);
CostModel<double> build_cost(const CostSpec& spec, Eigen::Index dim);
std::vector<double> build_ladder(const EpsilonSpec& spec);

}  // namespace eotr::app
