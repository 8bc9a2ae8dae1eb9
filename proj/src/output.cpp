#include "eotr/app/output.hpp"

#define TOML_HEADER_ONLY 1
#include <toml.hpp>

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#ifndef EOTR_VERSION
#define EOTR_VERSION "0.0.0"
#endif

namespace eotr::app {

namespace fs = std::filesystem;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_csv(const fs::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_number(row[k]);
    out << '\n';
  }
}

namespace {

void write_audit(const fs::path& path, const std::vector<AuditRow>& audit) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "check,value,bound,passed\n";
  for (const auto& row : audit)
    out << row.check << ',' << format_number(row.value) << ',' << format_number(row.bound) << ','
        << (row.passed ? 1 : 0) << '\n';
}

void write_metrics(const fs::path& path, const std::vector<std::pair<std::string, double>>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "metric,value\n";
  for (const auto& [name, value] : metrics) out << name << ',' << format_number(value) << '\n';
}

void write_manifest(const fs::path& path, const ExperimentConfig& cfg, const RunResult& result) {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  std::ostringstream tomlpp;
  tomlpp << TOML_LIB_MAJOR << '.' << TOML_LIB_MINOR << '.' << TOML_LIB_PATCH;

  toml::table manifest{
      {"run",
       toml::table{{"name", cfg.name},
                   {"pipeline", to_string(cfg.pipeline)},
                   {"seed", static_cast<std::int64_t>(cfg.seed)},
                   {"config_path", cfg.source_path},
                   {"all_converged", result.all_converged}}},
      {"versions",
       toml::table{{"eotr", EOTR_VERSION}, {"eigen", eigen.str()}, {"tomlplusplus", tomlpp.str()},
                   {"compiler", __VERSION__}, {"cxx_standard", static_cast<std::int64_t>(__cplusplus)}}},
      {"config", toml::table{{"source", cfg.source_text}}},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_run(const fs::path& dir, const ExperimentConfig& cfg, const RunResult& result) {
  fs::create_directories(dir);
  std::vector<std::vector<double>> rows;
  for (const auto& r : result.rows)
    rows.push_back({r.epsilon, r.v_eps, r.v0, r.gap, r.entropy, static_cast<double>(r.iterations), r.residual,
                    r.converged ? 1.0 : 0.0});
  write_csv(dir / "results.csv", kResultColumns, rows);
  if (result.fit) {
    const auto& f = *result.fit;
    write_csv(dir / "fit.csv", {"a", "b", "r_squared", "window_lo", "window_hi", "residual_max", "rows_used"},
              {{f.a, f.b, f.r_squared, f.window_lo, f.window_hi, f.residual_max, double(f.rows_used)}});
  }
  if (!result.audit.empty()) write_audit(dir / "audit.csv", result.audit);
  for (const auto& t : result.tables) write_csv(dir / (t.name + ".csv"), t.columns, t.rows);
  write_metrics(dir / "metrics.csv", result.metrics);
  write_manifest(dir / "manifest.toml", cfg, result);
}

std::size_t CsvTable::column(const std::string& name, const std::string& file) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return k;
  throw std::runtime_error(file + ": missing column '" + name + "'");
}

std::vector<double> CsvTable::numbers(const std::string& name, const std::string& file) const {
  const std::size_t k = column(name, file);
  std::vector<double> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (k >= rows[r].size()) throw std::runtime_error(file + ": row " + std::to_string(r + 2) + " is short");
    try {
      out.push_back(std::stod(rows[r][k]));
    } catch (const std::exception&) {
      throw std::runtime_error(file + ": row " + std::to_string(r + 2) + " column '" + name +
                               "' is not a number: '" + rows[r][k] + "'");
    }
  }
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open file");
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.columns.empty())
      t.columns = split(line);
    else
      t.rows.push_back(split(line));
  }
  if (t.columns.empty()) throw std::runtime_error(path.string() + ": file is empty");
  return t;
}

std::map<std::string, double> read_metrics(const fs::path& path) {
  const auto t = read_csv(path);
  const auto file = path.string();
  const auto name = t.column("metric", file), value = t.column("value", file);
  std::map<std::string, double> out;
  for (const auto& row : t.rows) out[row.at(name)] = std::stod(row.at(value));
  return out;
}

std::vector<AssertionOutcome> evaluate_assertions(const std::vector<Assertion>& assertions,
                                                  const std::map<std::string, double>& metrics) {
  std::vector<AssertionOutcome> out;
  for (const auto& a : assertions) {
    AssertionOutcome o{a, std::nullopt, -std::numeric_limits<double>::infinity(), false};
    if (const auto it = metrics.find(a.metric); it != metrics.end()) {
      const double v = it->second;
      o.value = v;
      if (a.comparator == "within")
        o.margin = std::min(v - a.lo, a.hi - v);
      else if (a.comparator == "at_most")
        o.margin = a.hi - v;
      else if (a.comparator == "at_least")
        o.margin = v - a.lo;
      else
        o.margin = a.tolerance - std::abs(v - a.lo);
      o.passed = std::isfinite(v) && o.margin >= 0;
    }
    out.push_back(o);
  }
  return out;
}

void print_outcomes(std::ostream& os, const std::vector<AssertionOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    os << (o.passed ? "PASS " : "FAIL ") << o.assertion.describe();
    if (o.value)
      os << "  value=" << format_number(*o.value) << "  margin=" << format_number(o.margin);
    else
      os << "  (metric not produced by this pipeline)";
    os << '\n';
  }
}

}  // namespace eotr::app
