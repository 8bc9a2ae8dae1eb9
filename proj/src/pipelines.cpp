#include "eotr/app/pipeline.hpp"

#include "eotr/eotr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>

namespace eotr::app {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tolerances of the audit rows; the matching assertions live in the configs.
constexpr double kMarginalTol = 1e-12;
constexpr double kEntropyTol = 1e-12;
constexpr double kCostTol = 1e-9;
constexpr double kEntropicTol = 1e-8;
constexpr double kShapeTol = 1e-8;
constexpr double kLowerBoundTol = 1e-6;
constexpr double kDerivativeTol = 1e-4;
constexpr double kTaylorTol = 0.02;
constexpr double kStabilityRatio = 1.5;

/// Runs fn(0), ..., fn(n - 1) on up to `jobs` threads. The first exception
/// thrown by any task is rethrown after all workers have joined.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct Instance {
  DiscreteMeasure<double> minus;
  DiscreteMeasure<double> plus;
  CostModel<double> cost;
  Matrix C;
};

Instance make_instance(const ExperimentConfig& cfg) {
  auto minus = build_measure(*cfg.minus);
  auto plus = build_measure(*cfg.plus);
  auto cost = build_cost(cfg.cost, minus.dim());
  Matrix C = cost_matrix(cost, minus, plus);
  return {std::move(minus), std::move(plus), std::move(cost), std::move(C)};
}

std::optional<double> mesh_width(const ExperimentConfig& cfg) {
  std::optional<double> h;
  for (const auto* spec : {&cfg.minus, &cfg.plus}) {
    if (!*spec) continue;
    if (const auto w = build_measure(**spec).cell_width()) h = h ? std::min(*h, *w) : *w;
  }
  return h;
}

double rho(const ExperimentConfig& cfg) {
  const Eigen::Index dim = cfg.minus ? build_measure(*cfg.minus).dim() : 1;
  return build_cost(cfg.cost, dim).is_c2() ? 2.0 : 1.0;
}

std::vector<double> checked_ladder(const ExperimentConfig& cfg) {
  auto ladder = build_ladder(*cfg.epsilon);
  const double floor = discreteness_floor(cfg);
  if (!cfg.window.force && ladder.front() < floor * (1 - 1e-12))
    throw ConfigError("epsilon.min = " + std::to_string(ladder.front()) + " lies below the discreteness floor " +
                          std::to_string(floor) + " (set window.force = true to run anyway)",
                      cfg.epsilon->line, 1);
  std::sort(ladder.begin(), ladder.end(), std::greater<double>());
  return ladder;
}

SinkhornConfig<double> solver_config(const ExperimentConfig& cfg) {
  SinkhornConfig<double> s;
  s.tol = cfg.solver.tol;
  s.max_iter = cfg.solver.max_iter;
  s.eps_scaling = cfg.solver.eps_scaling;
  return s;
}

struct Reference {
  double v0 = 0;
  Coupling<double> plan;
  std::optional<DualPair<double>> duals;
};

Reference reference_solution(const Instance& in, bool need_duals) {
  if (!need_duals && in.minus.dim() == 1 && in.cost.is_convex_difference()) {
    auto m = monotone_1d(in.minus, in.plus, in.cost);
    return {m.value, std::move(m.plan), std::nullopt};
  }
  auto s = solve_exact(in.C, in.minus.weights(), in.plus.weights());
  return {s.value, std::move(s.plan), std::move(s.duals)};
}

void add_metric(RunResult& out, const std::string& name, double value) {
  if (known_metrics().count(name) == 0) throw std::logic_error("unregistered metric " + name);
  out.metrics.emplace_back(name, value);
}

void add_audit(RunResult& out, std::string check, double value, double bound, bool passed) {
  out.audit.push_back({std::move(check), value, bound, passed});
}

std::string at_eps(const std::string& check, double eps) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s@eps=%.6g", check.c_str(), eps);
  return buf;
}

/// Convergence and shape of a sweep; `shape_rows` defaults to the reported rows.
void report_sweep(RunResult& out, const std::vector<SweepRow<double>>* shape_rows = nullptr) {
  bool converged = true;
  double min_gap = kInf;
  for (const auto& r : out.rows) {
    converged = converged && r.converged;
    min_gap = std::min(min_gap, r.gap);
  }
  out.all_converged = out.all_converged && converged;
  add_metric(out, "sweep.converged", converged ? 1 : 0);
  add_metric(out, "sweep.rows", static_cast<double>(out.rows.size()));
  add_metric(out, "sweep.min_gap", min_gap);
  if (!out.rows.empty()) add_metric(out, "sweep.v0", out.rows.front().v0);
  const auto shape = shape_report(shape_rows ? *shape_rows : out.rows);
  add_metric(out, "shape.max_decrease", shape.max_decrease);
  add_metric(out, "shape.max_second_difference", shape.max_second_difference);
  add_audit(out, "shape.non_decreasing", shape.max_decrease, 0.0, shape.max_decrease <= 0);
  if (out.rows.size() >= 3)
    add_audit(out, "shape.concave", shape.max_second_difference, kShapeTol,
              shape.max_second_difference <= kShapeTol);
}

/// Block chain on every ladder point with delta = eps.
void block_audit(const Instance& in, const Coupling<double>& gamma0, const std::vector<SweepRow<double>>& rows,
                 RunResult& out) {
  const double c_lip = lipschitz_estimate(in.cost, bounding_box(in.minus), bounding_box(in.plus));
  Table table{"blocks",
              {"epsilon", "marginal_error", "entropy", "H_delta", "cost0", "cost_delta", "cost_slack",
               "entropic_slack"},
              {}};
  double worst_marginal = 0, min_entropy = kInf, min_cost = kInf, min_entropic = kInf;
  for (const auto& r : rows) {
    const double delta = r.epsilon;
    const auto part_minus = make_partition(in.minus, delta);
    const auto part_plus = make_partition(in.plus, delta);
    const auto g = block_approximation(gamma0, part_minus, part_plus);
    const double marginal = std::max(
        (g.matrix.rowwise().sum() - in.minus.weights()).cwiseAbs().maxCoeff(),
        (g.matrix.colwise().sum().transpose() - in.plus.weights()).cwiseAbs().maxCoeff());
    const double H = grid_entropy(part_plus);
    const auto bound = block_bound_check(in.C, gamma0, g, c_lip, delta, r.epsilon, r.v_eps);
    const double entropy_slack = H - bound.entropy_delta;
    worst_marginal = std::max(worst_marginal, marginal);
    min_entropy = std::min(min_entropy, entropy_slack);
    min_cost = std::min(min_cost, bound.cost_slack);
    min_entropic = std::min(min_entropic, bound.entropic_slack);
    add_audit(out, at_eps("blocks.marginal_error", r.epsilon), marginal, kMarginalTol, marginal <= kMarginalTol);
    add_audit(out, at_eps("blocks.entropy_slack", r.epsilon), entropy_slack, -kEntropyTol,
              entropy_slack >= -kEntropyTol);
    add_audit(out, at_eps("blocks.cost_slack", r.epsilon), bound.cost_slack, -kCostTol,
              bound.cost_slack >= -kCostTol);
    add_audit(out, at_eps("blocks.entropic_slack", r.epsilon), bound.entropic_slack, -kEntropicTol,
              bound.entropic_slack >= -kEntropicTol);
    table.rows.push_back({r.epsilon, marginal, bound.entropy_delta, H, bound.cost0, bound.cost_delta,
                          bound.cost_slack, bound.entropic_slack});
  }
  add_metric(out, "blocks.max_marginal_error", worst_marginal);
  add_metric(out, "blocks.min_entropy_slack", min_entropy);
  add_metric(out, "blocks.min_cost_slack", min_cost);
  add_metric(out, "blocks.min_entropic_slack", min_entropic);
  out.tables.push_back(std::move(table));
}

/// Uniform marginals on [0, 1] with the abs cost have v_eps = -eps log(2 eps (1 - eps (1 - e^{-1/eps}))),
/// which stays above -eps log(2 eps).
void abs_uniform_reference(RunResult& out) {
  double min_slack = kInf, max_rel = 0;
  for (const auto& r : out.rows) {
    const double e = r.epsilon;
    const double lower = -e * std::log(2 * e);
    const double exact = -e * std::log(2 * e * (1 - e * (1 - std::exp(-1 / e))));
    min_slack = std::min(min_slack, r.v_eps - lower);
    max_rel = std::max(max_rel, std::abs(r.v_eps - exact) / std::abs(exact));
    add_audit(out, at_eps("closed_form.lower", e), r.v_eps - lower, -1e-6, r.v_eps - lower >= -1e-6);
  }
  add_metric(out, "closed_form.min_slack", min_slack);
  add_metric(out, "closed_form.max_rel_error", max_rel);
}

std::pair<double, double> default_window(const ExperimentConfig& cfg) {
  double lo = discreteness_floor(cfg);
  if (const auto h = mesh_width(cfg)) lo = std::max(lo, 20 * std::pow(*h, rho(cfg)));
  return {cfg.window.fit_min.value_or(lo), cfg.window.fit_max.value_or(0.1)};
}

void fit_rows(const ExperimentConfig& cfg, RunResult& out) {
  const auto [lo, hi] = default_window(cfg);
  out.fit = fit_rate(out.rows, lo, hi);
  add_metric(out, "fit.a", out.fit->a);
  add_metric(out, "fit.b", out.fit->b);
  add_metric(out, "fit.r_squared", out.fit->r_squared);
  add_metric(out, "fit.residual_max", out.fit->residual_max);
  add_metric(out, "fit.rows_used", static_cast<double>(out.fit->rows_used));
}

RunResult run_sweep(const ExperimentConfig& cfg, bool fit, int jobs) {
  const Instance in = make_instance(cfg);
  const auto ladder = checked_ladder(cfg);
  RunResult out;
  Reference ref;
  parallel_for(2, jobs, [&](std::size_t k) {
    if (k == 0)
      ref = reference_solution(in, false);
    else
      out.rows = sweep(in.C, in.minus.weights(), in.plus.weights(), 0.0, ladder, solver_config(cfg));
  });
  for (auto& r : out.rows) {
    r.v0 = ref.v0;
    r.gap = r.v_eps - ref.v0;
  }
  report_sweep(out);
  if (cfg.options.reference == "abs-uniform") abs_uniform_reference(out);
  if (fit) fit_rows(cfg, out);
  block_audit(in, ref.plan, out.rows, out);
  return out;
}

RunResult run_debiased(const ExperimentConfig& cfg, int jobs) {
  const Instance in = make_instance(cfg);
  const auto ladder = checked_ladder(cfg);
  const auto scfg = solver_config(cfg);
  Reference ref;
  std::vector<SweepRow<double>> cross, self_minus, self_plus;
  parallel_for(4, jobs, [&](std::size_t k) {
    switch (k) {
      case 0: ref = reference_solution(in, false); break;
      case 1: cross = sweep(in.C, in.minus.weights(), in.plus.weights(), 0.0, ladder, scfg); break;
      case 2:
        self_minus = sweep(cost_matrix(in.cost, in.minus, in.minus), in.minus.weights(), in.minus.weights(), 0.0,
                           ladder, scfg);
        break;
      default:
        self_plus = sweep(cost_matrix(in.cost, in.plus, in.plus), in.plus.weights(), in.plus.weights(), 0.0,
                          ladder, scfg);
    }
  });
  RunResult out;
  out.rows = combine_divergence(cross, self_minus, self_plus, ref.v0);
  for (auto& r : cross) {
    r.v0 = ref.v0;
    r.gap = r.v_eps - ref.v0;
  }
  // The divergence itself need not be monotone; the shape checks apply to
  // the entropic cost of the cross problem.
  report_sweep(out, &cross);
  fit_rows(cfg, out);
  block_audit(in, ref.plan, cross, out);
  return out;
}

RunResult run_gap_audit(const ExperimentConfig& cfg, int jobs) {
  const Instance in = make_instance(cfg);
  const auto ladder = checked_ladder(cfg);
  RunResult out;
  Reference ref;
  parallel_for(2, jobs, [&](std::size_t k) {
    if (k == 0)
      ref = reference_solution(in, true);
    else
      out.rows = sweep(in.C, in.minus.weights(), in.plus.weights(), 0.0, ladder, solver_config(cfg));
  });
  for (auto& r : out.rows) {
    r.v0 = ref.v0;
    r.gap = r.v_eps - ref.v0;
  }
  report_sweep(out);
  const auto gf = gap_field(in.C, *ref.duals);

  if (in.cost.is_c2()) {
    const auto audit = gap_inequality_check(gf, in.minus, in.plus, in.cost, cfg.options.radius, cfg.options.trials,
                                            cfg.seed);
    add_metric(out, "gap.trials", static_cast<double>(audit.trials));
    add_metric(out, "gap.violations", static_cast<double>(audit.violations));
    add_metric(out, "gap.graph_pairs", static_cast<double>(audit.graph_pairs));
    add_metric(out, "gap.graph_violations", static_cast<double>(audit.graph_violations));
    add_metric(out, "gap.kappa", audit.kappa);
    add_metric(out, "gap.worst_margin", audit.worst_margin);
    add_audit(out, "gap.inequality", static_cast<double>(audit.violations), 0, audit.violations == 0);
    add_audit(out, "gap.lipschitz_graph", static_cast<double>(audit.graph_violations), 0,
              audit.graph_violations == 0);
  }

  const auto& a = in.minus.weights();
  const auto& b = in.plus.weights();
  const auto lap = laplace_slope_fit(gf, a, b, ladder);
  add_metric(out, "laplace.slope", lap.slope);
  add_metric(out, "laplace.intercept", lap.intercept);
  add_metric(out, "laplace.r_squared", lap.r_squared);
  Table table{"laplace", {"epsilon", "log_integral"}, {}};
  for (std::size_t k = 0; k < lap.eps.size(); ++k) table.rows.push_back({lap.eps[k], lap.log_integral[k]});
  out.tables.push_back(std::move(table));

  double min_slack = kInf;
  for (const auto& r : out.rows) {
    const double slack = r.v_eps - (ref.v0 - r.epsilon * log_laplace_integral(gf, a, b, r.epsilon));
    min_slack = std::min(min_slack, slack);
    add_audit(out, at_eps("lower_bound.slack", r.epsilon), slack, -kLowerBoundTol, slack >= -kLowerBoundTol);
  }
  add_metric(out, "lower_bound.min_slack", min_slack);
  block_audit(in, ref.plan, out.rows, out);
  return out;
}

RunResult run_stability(const ExperimentConfig& cfg, int jobs) {
  const Instance in = make_instance(cfg);
  if (in.minus.dim() != 1 || in.cost.kind() != CostKind::Quadratic)
    throw ConfigError("the stability pipeline needs the quadratic cost on the line");
  const auto ladder = checked_ladder(cfg);
  RunResult out;
  Reference ref;
  std::vector<std::pair<double, StabilityMetrics<double>>> stats;
  const auto T = brenier_map_1d(in.minus, in.plus);
  parallel_for(2, jobs, [&](std::size_t k) {
    if (k == 0) {
      ref = reference_solution(in, true);
      return;
    }
    sweep_sinkhorn(in.C, in.minus.weights(), in.plus.weights(), ladder, solver_config(cfg),
                   [&](SinkhornResult<double>&& r) {
                     out.rows.push_back({r.epsilon, r.v_eps, 0.0, 0.0, r.entropy, r.iterations, r.residual,
                                         r.converged});
                     stats.emplace_back(r.epsilon, stability_metrics(r.plan, T, in.plus));
                   });
  });
  for (auto& r : out.rows) {
    r.v0 = ref.v0;
    r.gap = r.v_eps - ref.v0;
  }
  report_sweep(out);

  Table table{"stability", {"epsilon", "map_mse", "bary_mse", "rate", "ratio"}, {}};
  double max_ratio = 0, min_jensen = kInf;
  for (const auto& [eps, s] : stats) {
    const double rate = eps * std::log(1 / eps) + 5 * eps;
    const double ratio = s.map_mse / rate;
    max_ratio = std::max(max_ratio, ratio);
    min_jensen = std::min(min_jensen, s.map_mse - s.bary_mse);
    add_audit(out, at_eps("stability.ratio", eps), ratio, kStabilityRatio, ratio <= kStabilityRatio);
    add_audit(out, at_eps("stability.jensen", eps), s.map_mse - s.bary_mse, 0, s.bary_mse <= s.map_mse);
    table.rows.push_back({eps, s.map_mse, s.bary_mse, rate, ratio});
  }
  out.tables.push_back(std::move(table));
  add_metric(out, "stability.max_ratio", max_ratio);
  add_metric(out, "stability.min_jensen_slack", min_jensen);

  const auto gf = gap_field(in.C, *ref.duals);
  const auto det = resolvent_detachment_check(gf, in.minus, in.plus, cfg.options.samples, cfg.seed);
  add_metric(out, "resolvent.samples", static_cast<double>(det.samples));
  add_metric(out, "resolvent.violations", static_cast<double>(det.violations));
  add_metric(out, "resolvent.worst_margin", det.worst_margin);
  add_audit(out, "resolvent.detachment", static_cast<double>(det.violations), 0, det.ok());
  block_audit(in, ref.plan, out.rows, out);
  return out;
}

RunResult run_dim(const ExperimentConfig& cfg) {
  const auto mu = build_measure(*cfg.minus);
  const auto& o = cfg.options;
  const auto fit = entropy_dimension_fit(mu, log_ladder(o.delta_min, o.delta_max, o.delta_count));
  RunResult out;
  Table table{"profile", {"delta", "log_inv_delta", "H", "in_window"}, {}};
  for (std::size_t k = 0; k < fit.deltas.size(); ++k) {
    const bool in_window = mu.size() > 1 && k >= fit.window_first && k <= fit.window_last;
    table.rows.push_back({fit.deltas[k], std::log(1 / fit.deltas[k]), fit.H_values[k], in_window ? 1.0 : 0.0});
  }
  out.tables.push_back(std::move(table));
  add_metric(out, "dim.fitted", fit.fitted_dim);
  add_metric(out, "dim.residual", fit.residual);
  return out;
}

struct RandomProblem {
  Matrix C;
  Vector a, b;
};

RandomProblem random_problem(std::mt19937_64& rng, Eigen::Index n, bool uniform_weights) {
  std::uniform_real_distribution<double> unit(0.0, 1.0), weight(0.5, 1.5);
  RandomProblem p{Matrix(n, n), Vector(n), Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) p.C(i, j) = unit(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.a[i] = uniform_weights ? 1.0 : weight(rng);
    p.b[i] = uniform_weights ? 1.0 : weight(rng);
  }
  p.a /= p.a.sum();
  p.b /= p.b.sum();
  return p;
}

RunResult run_derivative(const ExperimentConfig& cfg, int jobs) {
  const auto& o = cfg.options;
  std::mt19937_64 rng(cfg.seed);
  std::vector<RandomProblem> problems;
  for (int k = 0; k < o.instances; ++k) problems.push_back(random_problem(rng, o.size, false));

  auto scfg = solver_config(cfg);
  std::vector<std::vector<DerivativeCheck<double>>> checks(problems.size());
  std::vector<std::pair<double, double>> taylor(problems.size());  // (quotient, min-entropy)
  std::vector<bool> taylor_converged(problems.size());
  parallel_for(problems.size(), jobs, [&](std::size_t k) {
    const auto& p = problems[k];
    for (const double e : o.eps_points) checks[k].push_back(derivative_check(p.C, p.a, p.b, e, o.h, scfg));
    const double v0 = solve_exact(p.C, p.a, p.b).value;
    const auto star = min_entropy_optimal_plan(p.C, p.a, p.b, 1e-9);
    auto tcfg = scfg;
    tcfg.epsilon = o.taylor_eps;
    if (!tcfg.eps_scaling) tcfg.eps_scaling = 0.5;
    const auto r = solve_sinkhorn(p.C, p.a, p.b, tcfg);
    taylor[k] = {(r.v_eps - v0) / o.taylor_eps, star.entropy()};
    taylor_converged[k] = r.converged;
  });

  RunResult out;
  Table dtable{"derivative", {"instance", "epsilon", "fd", "entropy", "abs_gap", "rel_gap", "converged"}, {}};
  Table ttable{"taylor", {"instance", "epsilon", "quotient", "min_entropy", "rel_error", "converged"}, {}};
  double max_rel = 0, max_taylor = 0;
  bool converged = true;
  for (std::size_t k = 0; k < problems.size(); ++k) {
    for (std::size_t e = 0; e < o.eps_points.size(); ++e) {
      const auto& c = checks[k][e];
      const double rel = c.gap / (1 + c.ent);
      max_rel = std::max(max_rel, rel);
      converged = converged && c.converged;
      dtable.rows.push_back({double(k), o.eps_points[e], c.fd, c.ent, c.gap, rel, c.converged ? 1.0 : 0.0});
      add_audit(out, "derivative.instance" + std::to_string(k) + at_eps("", o.eps_points[e]), rel, kDerivativeTol,
                rel <= kDerivativeTol);
    }
    const auto [quotient, ent] = taylor[k];
    const double rel = std::abs(quotient - ent) / std::max(ent, 1e-300);
    max_taylor = std::max(max_taylor, rel);
    converged = converged && taylor_converged[k];
    ttable.rows.push_back({double(k), o.taylor_eps, quotient, ent, rel, taylor_converged[k] ? 1.0 : 0.0});
    add_audit(out, "taylor.instance" + std::to_string(k), rel, kTaylorTol, rel <= kTaylorTol);
  }
  out.all_converged = converged;
  out.tables.push_back(std::move(dtable));
  out.tables.push_back(std::move(ttable));
  add_metric(out, "derivative.max_rel_gap", max_rel);
  add_metric(out, "derivative.converged", converged ? 1 : 0);
  add_metric(out, "taylor.max_rel_error", max_taylor);
  return out;
}

RunResult run_oracle(const ExperimentConfig& cfg, int jobs) {
  const auto& o = cfg.options;
  std::mt19937_64 rng(cfg.seed);
  std::vector<RandomProblem> square;
  for (int k = 0; k < o.instances; ++k) square.push_back(random_problem(rng, 2 + k % (o.size - 1), true));
  std::vector<RandomProblem> pairs;
  for (int k = 0; k < 5; ++k) pairs.push_back(random_problem(rng, 2, false));

  std::vector<std::pair<double, double>> exact(square.size());
  parallel_for(square.size(), jobs, [&](std::size_t k) {
    const auto& p = square[k];
    exact[k] = {solve_exact(p.C, p.a, p.b).value, brute_force_oracle(p.C)};
  });

  RunResult out;
  Table etable{"oracle_exact", {"instance", "n", "simplex", "brute_force", "rel_mismatch"}, {}};
  double max_mismatch = 0;
  for (std::size_t k = 0; k < square.size(); ++k) {
    const auto [simplex, brute] = exact[k];
    const double rel = std::abs(simplex - brute) / std::max(1.0, std::abs(brute));
    max_mismatch = std::max(max_mismatch, rel);
    etable.rows.push_back({double(k), double(square[k].C.rows()), simplex, brute, rel});
    add_audit(out, "oracle.exact.instance" + std::to_string(k), rel, 1e-12, rel <= 1e-12);
  }

  Table stable{"oracle_sinkhorn", {"instance", "epsilon", "sinkhorn", "golden_section", "abs_error"}, {}};
  auto scfg = solver_config(cfg);
  double max_error = 0;
  bool converged = true;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    for (const double e : o.eps_points) {
      const auto& p = pairs[k];
      scfg.epsilon = e;
      const auto r = solve_sinkhorn(p.C, p.a, p.b, scfg);
      const double ref = golden_section_2x2(p.C, p.a, p.b, e);
      const double err = std::abs(r.v_eps - ref);
      max_error = std::max(max_error, err);
      converged = converged && r.converged;
      stable.rows.push_back({double(k), e, r.v_eps, ref, err});
      add_audit(out, "oracle.sinkhorn.instance" + std::to_string(k) + at_eps("", e), err, 1e-6, err <= 1e-6);
    }
  out.all_converged = converged;
  out.tables.push_back(std::move(etable));
  out.tables.push_back(std::move(stable));
  add_metric(out, "oracle.instances", static_cast<double>(square.size()));
  add_metric(out, "oracle.max_exact_mismatch", max_mismatch);
  add_metric(out, "oracle.max_sinkhorn_error", max_error);
  return out;
}

RunResult run_alexandrov(const ExperimentConfig& cfg) {
  const auto& o = cfg.options;
  const long N = o.grid;
  if (N < 8) throw ConfigError("options.grid must be at least 8");
  const double h = (o.interval_hi - o.interval_lo) / N;
  std::vector<double> x(N), f(N), slope(N);
  for (long k = 0; k < N; ++k) {
    x[k] = o.interval_lo + (k + 0.5) * h;
    if (o.function == "abs") {
      f[k] = std::abs(x[k]);
      slope[k] = x[k] < 0 ? -1.0 : 1.0;
    } else if (o.function == "half-square") {
      f[k] = x[k] * x[k] / 2;
      slope[k] = x[k];
    } else {
      f[k] = 0.5 * x[k] + 0.25;
      slope[k] = 0.5;
    }
  }
  const double r_min = o.r_min.value_or(4 * h);
  const auto fit = alexandrov_scaling_check(x, f, slope, log_ladder(r_min, o.r_max, o.r_count));
  RunResult out;
  Table table{"alexandrov", {"r", "L"}, {}};
  for (std::size_t k = 0; k < fit.radii.size(); ++k) table.rows.push_back({fit.radii[k], fit.L_values[k]});
  out.tables.push_back(std::move(table));
  add_metric(out, "alexandrov.exact_zero", fit.exact_zero ? 1 : 0);
  if (!fit.exact_zero) add_metric(out, "alexandrov.exponent", fit.exponent);
  return out;
}

}  // namespace

std::optional<double> RunResult::metric(const std::string& name) const {
  for (const auto& [key, value] : metrics)
    if (key == name) return value;
  return std::nullopt;
}

const std::set<std::string>& known_metrics() {
  static const std::set<std::string> names{
      "fit.a", "fit.b", "fit.r_squared", "fit.residual_max", "fit.rows_used",
      "sweep.converged", "sweep.rows", "sweep.min_gap", "sweep.v0",
      "shape.max_decrease", "shape.max_second_difference",
      "closed_form.min_slack", "closed_form.max_rel_error",
      "lower_bound.min_slack",
      "laplace.slope", "laplace.intercept", "laplace.r_squared",
      "gap.trials", "gap.violations", "gap.graph_pairs", "gap.graph_violations", "gap.kappa", "gap.worst_margin",
      "dim.fitted", "dim.residual",
      "blocks.max_marginal_error", "blocks.min_entropy_slack", "blocks.min_cost_slack",
      "blocks.min_entropic_slack",
      "derivative.max_rel_gap", "derivative.converged", "taylor.max_rel_error",
      "stability.max_ratio", "stability.min_jensen_slack",
      "resolvent.samples", "resolvent.violations", "resolvent.worst_margin",
      "alexandrov.exponent", "alexandrov.exact_zero",
      "oracle.instances", "oracle.max_exact_mismatch", "oracle.max_sinkhorn_error",
  };
  return names;
}

double discreteness_floor(const ExperimentConfig& cfg) {
  const auto h = mesh_width(cfg);
  if (!h) return 0;
  return std::pow(cfg.window.floor_cells * *h, rho(cfg));
}

double golden_section_2x2(const Matrix& C, const Vector& a, const Vector& b, double eps) {
  if (C.rows() != 2 || C.cols() != 2 || a.size() != 2 || b.size() != 2)
    throw std::invalid_argument("golden_section_2x2: needs a 2x2 problem");
  auto term = [&](double g, Eigen::Index i, Eigen::Index j) {
    return g * C(i, j) + (g > 0 ? eps * g * std::log(g / (a[i] * b[j])) : 0.0);
  };
  auto objective = [&](double t) {
    return term(t, 0, 0) + term(a[0] - t, 0, 1) + term(b[0] - t, 1, 0) + term(a[1] - b[0] + t, 1, 1);
  };
  double lo = std::max(0.0, b[0] - a[1]), hi = std::min(a[0], b[0]);
  const double ratio = (std::sqrt(5.0) - 1) / 2;
  double c = hi - ratio * (hi - lo), d = lo + ratio * (hi - lo);
  double fc = objective(c), fd = objective(d);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - ratio * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + ratio * (hi - lo);
      fd = objective(d);
    }
  }
  return objective((lo + hi) / 2);
}

RunResult run_pipeline(const ExperimentConfig& cfg, int jobs) {
  switch (cfg.pipeline) {
    case Pipeline::Sweep: return run_sweep(cfg, false, jobs);
    case Pipeline::Fit: return run_sweep(cfg, true, jobs);
    case Pipeline::BlocksAudit: return run_sweep(cfg, false, jobs);
    case Pipeline::Debiased: return run_debiased(cfg, jobs);
    case Pipeline::GapAudit: return run_gap_audit(cfg, jobs);
    case Pipeline::Stability: return run_stability(cfg, jobs);
    case Pipeline::Dim: return run_dim(cfg);
    case Pipeline::Derivative: return run_derivative(cfg, jobs);
    case Pipeline::Oracle: return run_oracle(cfg, jobs);
    case Pipeline::Alexandrov: return run_alexandrov(cfg);
  }
  throw std::logic_error("unhandled pipeline");
}

}  // namespace eotr::app
