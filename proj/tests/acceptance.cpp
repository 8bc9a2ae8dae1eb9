// Acceptance gate: runs the bundled configs and checks each criterion with
// the tolerances pinned below. One line per criterion; exit 1 on any failure.

#include "eotr/app/config.hpp"
#include "eotr/app/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#ifndef EOTR_CONFIG_DIR
#error "EOTR_CONFIG_DIR must point at the bundled configs"
#endif

using namespace eotr::app;

namespace {

struct Run {
  ExperimentConfig config;
  RunResult result;
  double seconds = 0;
};

int jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

const Run& get(const std::string& name) {
  static std::map<std::string, Run> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  Run r;
  r.config = load_config(std::string(EOTR_CONFIG_DIR) + "/" + name + ".toml");
  const auto start = std::chrono::steady_clock::now();
  r.result = run_pipeline(r.config, jobs());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "  ran " << name << " in " << r.seconds << " s\n";
  return cache.emplace(name, std::move(r)).first->second;
}

// Collects the failed checks of one criterion.
class Checks {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }

  // Looks up a metric and tests it; a missing metric is a failure.
  void metric(const std::string& config, const std::string& name, const std::function<bool(double)>& ok,
              const std::string& bound) {
    const auto v = get(config).result.metric(name);
    const std::string line = config + ": " + name + " = " + (v ? fmt(*v) : std::string("missing")) + ", want " + bound;
    summary_.push_back(line);
    require(v && ok(*v), line);
  }

  void within(const std::string& config, const std::string& name, double lo, double hi) {
    metric(config, name, [=](double v) { return v >= lo && v <= hi; }, "[" + fmt(lo) + ", " + fmt(hi) + "]");
  }
  void at_most(const std::string& config, const std::string& name, double hi) {
    metric(config, name, [=](double v) { return v <= hi; }, "<= " + fmt(hi));
  }
  void at_least(const std::string& config, const std::string& name, double lo) {
    metric(config, name, [=](double v) { return v >= lo; }, ">= " + fmt(lo));
  }
  void equals(const std::string& config, const std::string& name, double target) {
    metric(config, name, [=](double v) { return v == target; }, "== " + fmt(target));
  }

  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& summary() const { return summary_; }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> summary_;
};

const std::vector<std::string> kSweepConfigs = {
    "example-abs-1d",       "quadratic-1d-identity", "quadratic-2d-identity", "quadratic-1d-debiased",
    "blocks-audit",         "gap-bilinear-1d",       "gap-quadratic-2d",      "gap-x2y2",
    "laplace-abs-1d",       "laplace-quadratic-1d",  "laplace-quadratic-2d",  "stability-translation",
};

const std::vector<std::string> kLaplaceConfigs = {
    "gap-bilinear-1d", "gap-quadratic-2d",     "gap-x2y2",
    "laplace-abs-1d",  "laplace-quadratic-1d", "laplace-quadratic-2d",
};

void criterion1(Checks& c) {
  const auto& run = get("example-abs-1d");
  c.require(run.config.minus->n == 2048 && run.config.cost.kind == "abs", "instance is abs cost with n = 2048");
  c.within("example-abs-1d", "fit.a", 0.85, 1.15);
  c.at_least("example-abs-1d", "closed_form.min_slack", -1e-6);
  c.equals("example-abs-1d", "sweep.converged", 1);
  c.require(run.seconds < 60, "runtime " + Checks::fmt(run.seconds) + " s, want < 60 s");
}

void criterion2(Checks& c) {
  c.within("quadratic-1d-identity", "fit.a", 0.35, 0.65);
  c.within("quadratic-2d-identity", "fit.a", 0.75, 1.25);
  c.equals("quadratic-1d-identity", "sweep.converged", 1);
  c.equals("quadratic-2d-identity", "sweep.converged", 1);
  const double total = get("quadratic-1d-identity").seconds + get("quadratic-2d-identity").seconds;
  c.require(total < 600, "runtime " + Checks::fmt(total) + " s, want < 600 s");
}

void criterion3(Checks& c) {
  const auto& run = get("quadratic-1d-debiased");
  const auto& window = get("quadratic-1d-identity").config.window;
  c.require(run.config.window.fit_min == window.fit_min && run.config.window.fit_max == window.fit_max,
            "debiased fit window matches the identity window");
  c.within("quadratic-1d-debiased", "fit.a", -0.05, 0.05);
}

void criterion4(Checks& c) {
  const auto& o = get("derivative-random").config.options;
  c.require(o.instances == 5 && o.size == 6 && o.h == 1e-3 && o.taylor_eps == 1e-4,
            "five 6x6 instances, h = 1e-3, Taylor at 1e-4");
  c.require(o.eps_points == std::vector<double>{0.2, 0.5, 1.0}, "epsilon points {0.2, 0.5, 1}");
  c.at_most("derivative-random", "derivative.max_rel_gap", 1e-4);
  c.at_most("derivative-random", "taylor.max_rel_error", 0.02);
  c.equals("derivative-random", "derivative.converged", 1);
}

void criterion5(Checks& c) {
  for (const auto& name : kSweepConfigs) {
    c.at_most(name, "blocks.max_marginal_error", 1e-12);
    c.at_least(name, "blocks.min_entropy_slack", -1e-12);
    c.at_least(name, "blocks.min_cost_slack", -1e-9);
    c.at_least(name, "blocks.min_entropic_slack", -1e-8);
  }
}

void criterion6(Checks& c) {
  c.within("dim-uniform-1d", "dim.fitted", 0.9, 1.1);
  c.within("dim-uniform-square", "dim.fitted", 1.9, 2.1);
  c.within("dim-segment", "dim.fitted", 0.9, 1.1);
  c.equals("dim-atom", "dim.fitted", 0);
}

void criterion7(Checks& c) {
  for (const auto& name : {"gap-quadratic-2d", "gap-bilinear-1d", "gap-x2y2"}) {
    c.at_least(name, "gap.trials", 1e4);
    c.equals(name, "gap.violations", 0);
    c.equals(name, "gap.graph_violations", 0);
  }
}

void criterion8(Checks& c) {
  c.within("laplace-quadratic-1d", "laplace.slope", 0.4, 0.6);
  c.within("laplace-quadratic-2d", "laplace.slope", 0.85, 1.15);
  c.within("laplace-abs-1d", "laplace.slope", 0.9, 1.1);
  for (const auto& name : kLaplaceConfigs) c.at_least(name, "lower_bound.min_slack", -1e-6);
}

void criterion9(Checks& c) {
  const auto& cfg = get("stability-translation").config;
  c.require(cfg.minus->n == 1024 && cfg.epsilon->min == 1e-3 && cfg.epsilon->max == 1e-1,
            "translation instance with n = 1024 on [1e-3, 1e-1]");
  c.at_most("stability-translation", "stability.max_ratio", 1.5);
  c.at_least("stability-translation", "stability.min_jensen_slack", 0);
  c.at_least("stability-translation", "resolvent.samples", 1000);
  c.equals("stability-translation", "resolvent.violations", 0);
}

void criterion10(Checks& c) {
  c.within("alexandrov-abs", "alexandrov.exponent", 1.95, 2.05);
  c.within("alexandrov-half-square", "alexandrov.exponent", 1.95, 2.05);
  c.equals("alexandrov-affine", "alexandrov.exact_zero", 1);
}

void criterion11(Checks& c) {
  c.at_least("oracle", "oracle.instances", 50);
  c.at_most("oracle", "oracle.max_exact_mismatch", 1e-12);
  c.at_most("oracle", "oracle.max_sinkhorn_error", 1e-6);
}

void criterion12(Checks& c) {
  for (const auto& name : kSweepConfigs) {
    if (get(name).result.metric("sweep.converged") != 1.0) continue;
    c.at_most(name, "shape.max_decrease", 0.0);
    c.at_most(name, "shape.max_second_difference", 1e-8);
  }
}

struct Criterion {
  int id;
  const char* title;
  void (*check)(Checks&);
};

const Criterion kCriteria[] = {
    {1, "Lipschitz sharp rate", criterion1},
    {2, "twisted C^{1,1} rate", criterion2},
    {3, "debiasing removes the log term", criterion3},
    {4, "derivative identity and Taylor limit", criterion4},
    {5, "block chain audit", criterion5},
    {6, "entropy dimension", criterion6},
    {7, "gap inequality", criterion7},
    {8, "Laplace scaling and dual lower bound", criterion8},
    {9, "stability of the entropic plan", criterion9},
    {10, "Alexandrov scaling", criterion10},
    {11, "oracle equivalence", criterion11},
    {12, "qualitative shape", criterion12},
};

}  // namespace

int main(int argc, char** argv) {
  const bool verbose = argc > 1 && std::string(argv[1]) == "-v";
  int failed = 0;
  for (const auto& crit : kCriteria) {
    Checks checks;
    try {
      crit.check(checks);
    } catch (const std::exception& e) {
      checks.require(false, std::string("error: ") + e.what());
    }
    const bool ok = checks.failures().empty();
    failed += !ok;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << crit.id << ": " << crit.title << "\n";
    for (const auto& f : checks.failures()) std::cout << "         " << f << "\n";
    if (verbose)
      for (const auto& s : checks.summary()) std::cout << "         " << s << "\n";
    std::cout.flush();
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed\n" : std::string("all criteria passed\n"));
  return failed ? 1 : 0;
}
