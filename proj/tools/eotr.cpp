#include "eotr/app/plot.hpp"
#include "eotr/app/run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Entropic optimal transport rate experiments"};
  app.require_subcommand(1);

  std::string config_path;
  eotr::app::RunOptions options;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "TOML experiment config")->required();
  run->add_flag("--assert", options.assert_mode, "Check the config's [[assert]] entries");
  run->add_option("--jobs,-j", options.jobs, "Worker threads for independent solves")->check(CLI::PositiveNumber);
  run->add_option("--out,-o", out_dir, "Output directory (overrides EOTR_OUT and output_dir)");

  std::string csv_path, kind, svg_path;
  auto* plot = app.add_subcommand("plot", "Render a run table as SVG");
  plot->add_option("csv", csv_path, "results.csv, profile.csv or laplace.csv")->required();
  plot->add_option("--kind", kind, "rate-curve | entropy-profile | laplace-slope")
      ->required()
      ->check(CLI::IsMember({"rate-curve", "entropy-profile", "laplace-slope"}));
  plot->add_option("--out,-o", svg_path, "SVG file (default: <kind>.svg next to the CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*run) {
    if (!out_dir.empty()) options.out = out_dir;
    try {
      return eotr::app::run_config(config_path, options, std::cout, std::cerr);
    } catch (const std::exception& e) {
      std::cerr << "eotr: " << e.what() << '\n';
      return 1;
    }
  }
  try {
    std::optional<std::filesystem::path> target;
    if (!svg_path.empty()) target = svg_path;
    std::cout << eotr::app::emit_plot(csv_path, eotr::app::parse_plot_kind(kind), target).string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "eotr plot: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
