#include "eotr/app/config.hpp"
#include "eotr/app/pipeline.hpp"
#include "eotr/regression.hpp"

#define TOML_HEADER_ONLY 1
#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace eotr::app {

namespace {

const std::vector<std::pair<Pipeline, std::string>> kPipelines = {
    {Pipeline::Sweep, "sweep"},           {Pipeline::Fit, "fit"},
    {Pipeline::Debiased, "debiased"},     {Pipeline::GapAudit, "gap-audit"},
    {Pipeline::Dim, "dim"},               {Pipeline::BlocksAudit, "blocks-audit"},
    {Pipeline::Stability, "stability"},   {Pipeline::Derivative, "derivative"},
    {Pipeline::Oracle, "oracle"},         {Pipeline::Alexandrov, "alexandrov"},
};

[[noreturn]] void fail(const toml::node& node, const std::string& message) {
  const auto& pos = node.source().begin;
  throw ConfigError(message, pos.line, pos.column);
}

void check_keys(const toml::table& table, std::initializer_list<const char*> allowed, const std::string& where) {
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (auto&& [key, value] : table) {
    if (known.count(std::string(key.str())) == 0) {
      const auto& pos = key.source().begin;
      throw ConfigError("unknown key '" + std::string(key.str()) + "' in " + where, pos.line, pos.column);
    }
  }
}

const toml::table& as_table(const toml::node& node, const std::string& what) {
  if (const auto* t = node.as_table()) return *t;
  fail(node, what + " must be a table");
}

double number(const toml::node& node, const std::string& what) {
  if (const auto v = node.value<double>()) {
    if (!std::isfinite(*v)) fail(node, what + " must be finite");
    return *v;
  }
  fail(node, what + " must be a number");
}

long integer(const toml::node& node, const std::string& what) {
  if (const auto* v = node.as_integer()) return static_cast<long>(v->get());
  fail(node, what + " must be an integer");
}

std::string text(const toml::node& node, const std::string& what) {
  if (const auto* v = node.as_string()) return v->get();
  fail(node, what + " must be a string");
}

bool boolean(const toml::node& node, const std::string& what) {
  if (const auto* v = node.as_boolean()) return v->get();
  fail(node, what + " must be true or false");
}

std::vector<double> numbers(const toml::node& node, const std::string& what) {
  const auto* arr = node.as_array();
  if (!arr) fail(node, what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& item : *arr) out.push_back(number(item, what));
  return out;
}

Vector vector_of(const toml::node& node, const std::string& what) {
  const auto v = numbers(node, what);
  if (v.empty()) fail(node, what + " must not be empty");
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename Fn>
void with(const toml::table& table, const char* key, Fn&& fn) {
  if (const auto* node = table.get(key)) fn(*node);
}

const toml::node& required(const toml::table& table, const char* key, const std::string& where) {
  if (const auto* node = table.get(key)) return *node;
  const auto& pos = table.source().begin;
  throw ConfigError("missing key '" + std::string(key) + "' in " + where, pos.line, pos.column);
}

MarginalSpec parse_marginal(const toml::table& t, const std::string& where) {
  check_keys(t, {"kind", "lower", "upper", "offset", "slope", "sigma", "from", "to", "at", "n"}, where);
  MarginalSpec m;
  const auto& kind_node = required(t, "kind", where);
  m.kind = text(kind_node, where + ".kind");
  if (m.kind == "uniform" || m.kind == "affine-ramp" || m.kind == "truncated-bump") {
    m.lower = vector_of(required(t, "lower", where), where + ".lower");
    m.upper = vector_of(required(t, "upper", where), where + ".upper");
    if (m.lower.size() != m.upper.size()) fail(t, where + ": lower and upper have different lengths");
    m.n = integer(required(t, "n", where), where + ".n");
    if (m.n < 2) fail(*t.get("n"), where + ".n must be at least 2");
    with(t, "offset", [&](const toml::node& n) { m.offset = number(n, where + ".offset"); });
    with(t, "slope", [&](const toml::node& n) { m.slope = vector_of(n, where + ".slope"); });
    with(t, "sigma", [&](const toml::node& n) { m.sigma = number(n, where + ".sigma"); });
    if (m.kind == "affine-ramp" && m.slope.size() == 0) m.slope = Vector::Zero(m.lower.size());
    if (m.kind == "truncated-bump" && !t.get("sigma")) fail(t, where + ": truncated-bump needs sigma");
  } else if (m.kind == "segment") {
    m.from = vector_of(required(t, "from", where), where + ".from");
    m.to = vector_of(required(t, "to", where), where + ".to");
    m.n = integer(required(t, "n", where), where + ".n");
    if (m.n < 1) fail(*t.get("n"), where + ".n must be positive");
  } else if (m.kind == "dirac") {
    m.at = vector_of(required(t, "at", where), where + ".at");
  } else {
    fail(kind_node, "unknown marginal kind '" + m.kind + "' (uniform, affine-ramp, truncated-bump, segment, dirac)");
  }
  // Construct once so density errors surface with the config position.
  try {
    build_measure(m);
  } catch (const std::invalid_argument& e) {
    fail(t, where + ": " + e.what());
  }
  return m;
}

CostSpec parse_cost(const toml::table& t) {
  check_keys(t, {"kind", "p", "coefficients"}, "[cost]");
  CostSpec c;
  const auto& kind_node = required(t, "kind", "[cost]");
  c.kind = text(kind_node, "cost.kind");
  static const std::set<std::string> kinds{"quadratic", "abs", "p-norm", "bilinear", "polynomial"};
  if (kinds.count(c.kind) == 0)
    fail(kind_node, "unknown cost kind '" + c.kind + "' (quadratic, abs, p-norm, bilinear, polynomial)");
  with(t, "p", [&](const toml::node& n) {
    c.p = number(n, "cost.p");
    if (c.p < 1) fail(n, "cost.p must be at least 1");
  });
  if (c.kind == "polynomial") {
    const auto& node = required(t, "coefficients", "[cost]");
    const auto* rows = node.as_array();
    if (!rows || rows->empty()) fail(node, "cost.coefficients must be a non-empty array of rows");
    std::vector<std::vector<double>> table;
    for (const auto& row : *rows) table.push_back(numbers(row, "cost.coefficients row"));
    const std::size_t width = table.front().size();
    for (const auto& row : table)
      if (row.size() != width || width == 0) fail(node, "cost.coefficients rows must have equal nonzero length");
    c.coefficients.resize(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(width));
    for (std::size_t k = 0; k < table.size(); ++k)
      for (std::size_t l = 0; l < width; ++l) c.coefficients(k, l) = table[k][l];
  }
  return c;
}

EpsilonSpec parse_epsilon(const toml::table& t) {
  check_keys(t, {"min", "max", "count", "spacing"}, "[epsilon]");
  EpsilonSpec e;
  e.line = t.source().begin.line;
  e.min = number(required(t, "min", "[epsilon]"), "epsilon.min");
  e.max = number(required(t, "max", "[epsilon]"), "epsilon.max");
  with(t, "count", [&](const toml::node& n) { e.count = static_cast<int>(integer(n, "epsilon.count")); });
  with(t, "spacing", [&](const toml::node& n) {
    e.spacing = text(n, "epsilon.spacing");
    if (e.spacing != "log" && e.spacing != "linear") fail(n, "epsilon.spacing must be 'log' or 'linear'");
  });
  if (!(e.min > 0) || !(e.max > e.min)) fail(t, "[epsilon] needs 0 < min < max");
  if (e.count < 2) fail(t, "[epsilon] count must be at least 2");
  return e;
}

SolverSpec parse_solver(const toml::table& t) {
  check_keys(t, {"tol", "max_iter", "eps_scaling"}, "[solver]");
  SolverSpec s;
  with(t, "tol", [&](const toml::node& n) {
    s.tol = number(n, "solver.tol");
    if (!(s.tol > 0)) fail(n, "solver.tol must be positive");
  });
  with(t, "max_iter", [&](const toml::node& n) {
    s.max_iter = integer(n, "solver.max_iter");
    if (s.max_iter < 1) fail(n, "solver.max_iter must be positive");
  });
  with(t, "eps_scaling", [&](const toml::node& n) {
    s.eps_scaling = number(n, "solver.eps_scaling");
    if (!(*s.eps_scaling > 0 && *s.eps_scaling < 1)) fail(n, "solver.eps_scaling must lie in (0, 1)");
  });
  return s;
}

WindowSpec parse_window(const toml::table& t) {
  check_keys(t, {"floor_cells", "fit_min", "fit_max", "force"}, "[window]");
  WindowSpec w;
  with(t, "floor_cells", [&](const toml::node& n) {
    w.floor_cells = number(n, "window.floor_cells");
    if (w.floor_cells < 0) fail(n, "window.floor_cells must be nonnegative");
  });
  with(t, "fit_min", [&](const toml::node& n) { w.fit_min = number(n, "window.fit_min"); });
  with(t, "fit_max", [&](const toml::node& n) { w.fit_max = number(n, "window.fit_max"); });
  with(t, "force", [&](const toml::node& n) { w.force = boolean(n, "window.force"); });
  return w;
}

Options parse_options(const toml::table& t) {
  check_keys(t,
             {"trials", "radius", "samples", "h", "eps_points", "instances", "size", "taylor_eps", "function", "grid",
              "interval", "r_min", "r_max", "r_count", "delta_min", "delta_max", "delta_count", "reference"},
             "[options]");
  Options o;
  with(t, "trials", [&](const toml::node& n) { o.trials = integer(n, "options.trials"); });
  with(t, "radius", [&](const toml::node& n) { o.radius = number(n, "options.radius"); });
  with(t, "samples", [&](const toml::node& n) { o.samples = integer(n, "options.samples"); });
  with(t, "h", [&](const toml::node& n) { o.h = number(n, "options.h"); });
  with(t, "eps_points", [&](const toml::node& n) { o.eps_points = numbers(n, "options.eps_points"); });
  with(t, "instances", [&](const toml::node& n) { o.instances = static_cast<int>(integer(n, "options.instances")); });
  with(t, "size", [&](const toml::node& n) { o.size = static_cast<int>(integer(n, "options.size")); });
  with(t, "taylor_eps", [&](const toml::node& n) { o.taylor_eps = number(n, "options.taylor_eps"); });
  with(t, "function", [&](const toml::node& n) {
    o.function = text(n, "options.function");
    if (o.function != "abs" && o.function != "half-square" && o.function != "affine")
      fail(n, "options.function must be 'abs', 'half-square' or 'affine'");
  });
  with(t, "grid", [&](const toml::node& n) { o.grid = integer(n, "options.grid"); });
  with(t, "interval", [&](const toml::node& n) {
    const auto v = numbers(n, "options.interval");
    if (v.size() != 2 || !(v[0] < v[1])) fail(n, "options.interval must be [lo, hi] with lo < hi");
    o.interval_lo = v[0];
    o.interval_hi = v[1];
  });
  with(t, "r_min", [&](const toml::node& n) { o.r_min = number(n, "options.r_min"); });
  with(t, "r_max", [&](const toml::node& n) { o.r_max = number(n, "options.r_max"); });
  with(t, "r_count", [&](const toml::node& n) { o.r_count = static_cast<int>(integer(n, "options.r_count")); });
  with(t, "delta_min", [&](const toml::node& n) { o.delta_min = number(n, "options.delta_min"); });
  with(t, "delta_max", [&](const toml::node& n) { o.delta_max = number(n, "options.delta_max"); });
  with(t, "delta_count", [&](const toml::node& n) {
    o.delta_count = static_cast<int>(integer(n, "options.delta_count"));
  });
  with(t, "reference", [&](const toml::node& n) {
    o.reference = text(n, "options.reference");
    if (o.reference != "abs-uniform") fail(n, "options.reference must be 'abs-uniform'");
  });
  return o;
}

Assertion parse_assertion(const toml::table& t) {
  check_keys(t, {"metric", "within", "at_most", "at_least", "equals", "tolerance"}, "[[assert]]");
  Assertion a;
  a.line = t.source().begin.line;
  const auto& metric_node = required(t, "metric", "[[assert]]");
  a.metric = text(metric_node, "assert.metric");
  if (known_metrics().count(a.metric) == 0) fail(metric_node, "unknown metric '" + a.metric + "'");
  int comparators = 0;
  with(t, "within", [&](const toml::node& n) {
    const auto v = numbers(n, "assert.within");
    if (v.size() != 2 || v[0] > v[1]) fail(n, "assert.within must be [lo, hi] with lo <= hi");
    a.comparator = "within";
    a.lo = v[0];
    a.hi = v[1];
    ++comparators;
  });
  with(t, "at_most", [&](const toml::node& n) {
    a.comparator = "at_most";
    a.hi = number(n, "assert.at_most");
    ++comparators;
  });
  with(t, "at_least", [&](const toml::node& n) {
    a.comparator = "at_least";
    a.lo = number(n, "assert.at_least");
    ++comparators;
  });
  with(t, "equals", [&](const toml::node& n) {
    a.comparator = "equals";
    a.lo = a.hi = number(n, "assert.equals");
    ++comparators;
  });
  with(t, "tolerance", [&](const toml::node& n) { a.tolerance = number(n, "assert.tolerance"); });
  if (comparators != 1) fail(t, "[[assert]] needs exactly one of within, at_most, at_least, equals");
  return a;
}

void require_fields(const ExperimentConfig& c, const toml::table& root) {
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("pipeline '" + to_string(c.pipeline) + "' needs " + what, root.source().begin.line, 1);
  };
  switch (c.pipeline) {
    case Pipeline::Sweep:
    case Pipeline::Fit:
    case Pipeline::Debiased:
    case Pipeline::GapAudit:
    case Pipeline::BlocksAudit:
    case Pipeline::Stability:
      need(c.minus && c.plus, "[marginals.minus] and [marginals.plus]");
      need(c.epsilon.has_value(), "an [epsilon] table");
      break;
    case Pipeline::Dim:
      need(c.minus.has_value(), "[marginals.minus]");
      need(c.options.delta_min > 0 && c.options.delta_max > c.options.delta_min,
           "options.delta_min and options.delta_max with 0 < delta_min < delta_max");
      break;
    case Pipeline::Derivative:
    case Pipeline::Oracle:
    case Pipeline::Alexandrov: break;
  }
}

}  // namespace

std::string to_string(Pipeline p) {
  for (const auto& [value, name] : kPipelines)
    if (value == p) return name;
  return "?";
}

ConfigError::ConfigError(const std::string& message, std::uint32_t line, std::uint32_t column)
    : std::runtime_error(message), line_(line), column_(column) {}

std::string Assertion::describe() const {
  std::ostringstream s;
  s << metric << ' ';
  if (comparator == "within")
    s << "within [" << lo << ", " << hi << "]";
  else if (comparator == "at_most")
    s << "<= " << hi;
  else if (comparator == "at_least")
    s << ">= " << lo;
  else
    s << "== " << lo << " (tolerance " << tolerance << ")";
  return s.str();
}

ExperimentConfig parse_config_string(const std::string& source, const std::string& source_path) {
  toml::table root;
  try {
    root = toml::parse(source, source_path);
  } catch (const toml::parse_error& err) {
    const auto& pos = err.source().begin;
    throw ConfigError(std::string(err.description()), pos.line, pos.column);
  }
  check_keys(root,
             {"name", "pipeline", "seed", "output_dir", "marginals", "cost", "epsilon", "solver", "window", "options",
              "assert"},
             "the top level");

  ExperimentConfig c;
  c.source_path = source_path;
  c.source_text = source;
  const auto& name_node = required(root, "name", "the top level");
  c.name = text(name_node, "name");
  if (c.name.empty()) fail(name_node, "name must not be empty");

  const auto& pipe_node = required(root, "pipeline", "the top level");
  const std::string pipe = text(pipe_node, "pipeline");
  bool found = false;
  for (const auto& [value, label] : kPipelines)
    if (label == pipe) {
      c.pipeline = value;
      found = true;
    }
  if (!found) {
    std::string all;
    for (const auto& [value, label] : kPipelines) all += (all.empty() ? "" : ", ") + label;
    fail(pipe_node, "unknown pipeline '" + pipe + "' (" + all + ")");
  }

  with(root, "seed", [&](const toml::node& n) {
    const long s = integer(n, "seed");
    if (s < 0) fail(n, "seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  });
  c.output_dir = "out/" + c.name;
  with(root, "output_dir", [&](const toml::node& n) { c.output_dir = text(n, "output_dir"); });

  with(root, "marginals", [&](const toml::node& n) {
    const auto& t = as_table(n, "[marginals]");
    check_keys(t, {"minus", "plus"}, "[marginals]");
    with(t, "minus", [&](const toml::node& m) {
      c.minus = parse_marginal(as_table(m, "[marginals.minus]"), "marginals.minus");
    });
    with(t, "plus", [&](const toml::node& m) {
      c.plus = parse_marginal(as_table(m, "[marginals.plus]"), "marginals.plus");
    });
  });
  with(root, "cost", [&](const toml::node& n) { c.cost = parse_cost(as_table(n, "[cost]")); });
  with(root, "epsilon", [&](const toml::node& n) { c.epsilon = parse_epsilon(as_table(n, "[epsilon]")); });
  with(root, "solver", [&](const toml::node& n) { c.solver = parse_solver(as_table(n, "[solver]")); });
  with(root, "window", [&](const toml::node& n) { c.window = parse_window(as_table(n, "[window]")); });
  with(root, "options", [&](const toml::node& n) { c.options = parse_options(as_table(n, "[options]")); });
  with(root, "assert", [&](const toml::node& n) {
    const auto* arr = n.as_array();
    if (!arr) fail(n, "assert must be an array of tables ([[assert]])");
    for (const auto& item : *arr) c.assertions.push_back(parse_assertion(as_table(item, "[[assert]]")));
  });

  if (c.minus && c.plus) {
    const auto dim = build_measure(*c.minus).dim();
    if (build_measure(*c.plus).dim() != dim)
      throw ConfigError("marginals.minus and marginals.plus live in different dimensions",
                        root.source().begin.line, 1);
  }
  if (c.minus) {
    try {
      build_cost(c.cost, build_measure(*c.minus).dim());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("cost: ") + e.what());
    }
  }
  require_fields(c, root);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_string(buffer.str(), path);
}

DiscreteMeasure<double> build_measure(const MarginalSpec& m) {
  if (m.kind == "segment") return segment_measure<double>(m.from, m.to, m.n);
  if (m.kind == "dirac") return dirac<double>(m.at);
  const Box<double> box{m.lower, m.upper};
  if (m.kind == "uniform") return grid_measure(DensitySpec<double>::uniform(box), m.n);
  if (m.kind == "affine-ramp") return grid_measure(DensitySpec<double>::affine_ramp(box, m.offset, m.slope), m.n);
  if (m.kind == "truncated-bump") return grid_measure(DensitySpec<double>::truncated_bump(box, m.sigma), m.n);
  throw std::invalid_argument("unknown marginal kind '" + m.kind + "'");
}

CostModel<double> build_cost(const CostSpec& spec, Eigen::Index dim) {
  if (spec.kind == "quadratic") return CostModel<double>::quadratic(dim);
  if (spec.kind == "abs") return CostModel<double>::abs(dim);
  if (spec.kind == "bilinear") return CostModel<double>::bilinear(dim);
  if (spec.kind == "p-norm") return CostModel<double>::p_norm_power(dim, spec.p);
  if (spec.kind == "polynomial") return CostModel<double>::polynomial(dim, spec.coefficients);
  throw std::invalid_argument("unknown cost kind '" + spec.kind + "'");
}

std::vector<double> build_ladder(const EpsilonSpec& spec) {
  if (spec.spacing == "log") return log_ladder(spec.min, spec.max, spec.count);
  std::vector<double> out(static_cast<std::size_t>(spec.count));
  for (int k = 0; k < spec.count; ++k) out[k] = spec.min + (spec.max - spec.min) * k / (spec.count - 1);
  return out;
}

}  // namespace eotr::app
