#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace eotr::app {

enum class PlotKind { RateCurve, EntropyProfile, LaplaceSlope };

/// rate-curve | entropy-profile | laplace-slope
PlotKind parse_plot_kind(const std::string& name);
std::string to_string(PlotKind kind);

/// Renders an SVG 1.1 chart of a run table. rate-curve reads results.csv
/// (and overlays fit.csv from the same directory when present),
/// entropy-profile reads profile.csv, laplace-slope reads laplace.csv.
/// Without `out` the file lands next to the CSV as `<kind>.svg`.
std::filesystem::path emit_plot(const std::filesystem::path& csv, PlotKind kind,
                                const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace eotr::app
