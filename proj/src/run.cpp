#include "eotr/app/run.hpp"

#include "eotr/app/output.hpp"
#include "eotr/app/pipeline.hpp"
#include "eotr/types.hpp"

#include <cstdlib>

namespace eotr::app {

std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const RunOptions& options) {
  if (options.out) return *options.out;
  if (const char* env = std::getenv("EOTR_OUT"); env && *env) return env;
  return config.output_dir;
}

int run_config(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& out,
               std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path.string());
  } catch (const ConfigError& e) {
    err << config_path.string();
    if (e.line() > 0) err << ':' << e.line() << ':' << e.column();
    err << ": error: " << e.what() << '\n';
    return kConfigFailure;
  }

  RunResult result;
  try {
    result = run_pipeline(config, options.jobs);
  } catch (const ConfigError& e) {
    err << config_path.string();
    if (e.line() > 0) err << ':' << e.line() << ':' << e.column();
    err << ": error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const ConvergenceError& e) {
    err << config.name << ": solver did not converge: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const std::invalid_argument& e) {
    err << config_path.string() << ": error: " << e.what() << '\n';
    return kConfigFailure;
  }

  const auto dir = resolve_output_dir(config, options);
  write_run(dir, config, result);
  out << config.name << " (" << to_string(config.pipeline) << "): wrote " << dir.string() << '\n';
  for (const auto& [name, value] : result.metrics) out << "  " << name << " = " << format_number(value) << '\n';

  int code = kOk;
  if (!result.all_converged) {
    err << config.name << ": some solves did not reach tolerance; rows are flagged converged = 0\n";
    code = kNonConvergence;
  }
  if (options.assert_mode) {
    const auto outcomes = evaluate_assertions(config.assertions, read_metrics(dir / "metrics.csv"));
    print_outcomes(out, outcomes);
    bool passed = true;
    for (const auto& o : outcomes) passed = passed && o.passed;
    if (!passed && code == kOk) code = kAssertionFailure;
  }
  return code;
}

}  // namespace eotr::app
