#pragma once

#include "eotr/costs.hpp"
#include "eotr/exact_ot.hpp"
#include "eotr/measures.hpp"
#include "eotr/regression.hpp"
#include "eotr/sinkhorn.hpp"
#include "eotr/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace eotr {

template <typename Scalar>
struct SweepRow {
  Scalar epsilon = Scalar(0);
  Scalar v_eps = Scalar(0);
  Scalar v0 = Scalar(0);
  Scalar gap = Scalar(0);  ///< v_eps - v0
  Scalar entropy = Scalar(0);
  Eigen::Index iterations = 0;
  Scalar residual = Scalar(0);
  bool converged = false;
};

namespace detail {

template <typename Scalar>
std::vector<Scalar> descending(std::vector<Scalar> ladder) {
  if (ladder.empty()) throw std::invalid_argument("epsilon ladder is empty");
  std::sort(ladder.begin(), ladder.end(), std::greater<Scalar>());
  if (std::adjacent_find(ladder.begin(), ladder.end()) != ladder.end())
    throw std::invalid_argument("epsilon ladder has repeated values");
  if (!(ladder.back() > Scalar(0))) throw std::invalid_argument("epsilon ladder must be positive");
  return ladder;
}

}  // namespace detail

/// Warm-started entropic costs along the ladder (largest epsilon first)
/// against a fixed unregularized value v0.
template <typename Scalar>
std::vector<SweepRow<Scalar>> sweep(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                                    Scalar v0, const std::vector<Scalar>& eps_ladder,
                                    const SinkhornConfig<Scalar>& cfg) {
  std::vector<SweepRow<Scalar>> rows;
  sweep_sinkhorn(C, a, b, detail::descending(eps_ladder), cfg, [&](SinkhornResult<Scalar>&& r) {
    rows.push_back({r.epsilon, r.v_eps, v0, r.v_eps - v0, r.entropy, r.iterations, r.residual, r.converged});
  });
  return rows;
}

template <typename Scalar>
std::vector<SweepRow<Scalar>> sweep(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                                    const std::vector<Scalar>& eps_ladder, const SinkhornConfig<Scalar>& cfg) {
  return sweep(C, a, b, solve_exact(C, a, b).value, eps_ladder, cfg);
}

/// Row-wise divergence v(mu-, mu+) - (v(mu-, mu-) + v(mu+, mu+)) / 2 of three
/// sweeps over the same ladder. gap = divergence - v0.
template <typename Scalar>
std::vector<SweepRow<Scalar>> combine_divergence(const std::vector<SweepRow<Scalar>>& cross,
                                                 const std::vector<SweepRow<Scalar>>& self_minus,
                                                 const std::vector<SweepRow<Scalar>>& self_plus, Scalar v0) {
  if (self_minus.size() != cross.size() || self_plus.size() != cross.size())
    throw std::invalid_argument("combine_divergence: sweeps have different lengths");
  std::vector<SweepRow<Scalar>> rows(cross.size());
  for (std::size_t k = 0; k < cross.size(); ++k) {
    if (self_minus[k].epsilon != cross[k].epsilon || self_plus[k].epsilon != cross[k].epsilon)
      throw std::invalid_argument("combine_divergence: sweeps use different ladders");
    auto& row = rows[k];
    row.epsilon = cross[k].epsilon;
    row.v_eps = cross[k].v_eps - (self_minus[k].v_eps + self_plus[k].v_eps) / Scalar(2);
    row.v0 = v0;
    row.gap = row.v_eps - v0;
    row.entropy = cross[k].entropy;
    row.iterations = cross[k].iterations + self_minus[k].iterations + self_plus[k].iterations;
    row.residual = std::max({cross[k].residual, self_minus[k].residual, self_plus[k].residual});
    row.converged = cross[k].converged && self_minus[k].converged && self_plus[k].converged;
  }
  return rows;
}

/// Sinkhorn divergence along the ladder: three warm-started sweeps combined
/// row by row.
template <typename Scalar>
std::vector<SweepRow<Scalar>> debiased_sweep(const CostModel<Scalar>& c, const DiscreteMeasure<Scalar>& mu_minus,
                                             const DiscreteMeasure<Scalar>& mu_plus, Scalar v0,
                                             const std::vector<Scalar>& eps_ladder,
                                             const SinkhornConfig<Scalar>& cfg) {
  const auto ladder = detail::descending(eps_ladder);
  auto run = [&](const DiscreteMeasure<Scalar>& p, const DiscreteMeasure<Scalar>& q) {
    return sweep(cost_matrix(c, p, q), p.weights(), q.weights(), Scalar(0), ladder, cfg);
  };
  return combine_divergence(run(mu_minus, mu_plus), run(mu_minus, mu_minus), run(mu_plus, mu_plus), v0);
}

template <typename Scalar>
struct RateFit {
  Scalar a = Scalar(0);  ///< coefficient of eps log(1/eps)
  Scalar b = Scalar(0);  ///< coefficient of eps
  Scalar r_squared = Scalar(1);
  Scalar window_lo = Scalar(0);
  Scalar window_hi = Scalar(0);
  Scalar residual_max = Scalar(0);
  std::size_t rows_used = 0;
};

/// No-intercept least squares of v_eps - v0 on {eps log(1/eps), eps} over the
/// rows with eps in [lo, hi].
template <typename Scalar>
RateFit<Scalar> fit_rate(const std::vector<SweepRow<Scalar>>& rows, Scalar lo, Scalar hi) {
  std::vector<const SweepRow<Scalar>*> used;
  const Scalar fuzz = Scalar(1e-12);
  for (const auto& r : rows)
    if (r.epsilon >= lo * (Scalar(1) - fuzz) && r.epsilon <= hi * (Scalar(1) + fuzz)) used.push_back(&r);
  if (used.size() < 4)
    throw std::invalid_argument("fit_rate: " + std::to_string(used.size()) + " rows in [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "], need at least 4");
  MatrixX<Scalar> X(used.size(), 2);
  VectorX<Scalar> y(used.size());
  for (std::size_t k = 0; k < used.size(); ++k) {
    const Scalar e = used[k]->epsilon;
    X(k, 0) = e * std::log(Scalar(1) / e);
    X(k, 1) = e;
    y[k] = used[k]->gap;
  }
  const auto ls = least_squares(X, y);
  RateFit<Scalar> out;
  out.a = ls.coef[0];
  out.b = ls.coef[1];
  out.r_squared = ls.r_squared_uncentered;
  out.window_lo = lo;
  out.window_hi = hi;
  out.residual_max = ls.max_residual;
  out.rows_used = used.size();
  return out;
}

template <typename Scalar>
RateFit<Scalar> fit_rate(const std::vector<SweepRow<Scalar>>& rows) {
  if (rows.empty()) throw std::invalid_argument("fit_rate: no rows");
  Scalar lo = std::numeric_limits<Scalar>::infinity(), hi = Scalar(0);
  for (const auto& r : rows) {
    lo = std::min(lo, r.epsilon);
    hi = std::max(hi, r.epsilon);
  }
  return fit_rate(rows, lo, hi);
}

template <typename Scalar>
RateFit<Scalar> debiased_fit(const CostModel<Scalar>& c, const DiscreteMeasure<Scalar>& mu_minus,
                             const DiscreteMeasure<Scalar>& mu_plus, Scalar v0, const std::vector<Scalar>& eps_ladder,
                             const SinkhornConfig<Scalar>& cfg) {
  return fit_rate(debiased_sweep(c, mu_minus, mu_plus, v0, eps_ladder, cfg));
}

template <typename Scalar>
struct ShapeReport {
  /// largest drop v(e_k) - v(e_{k+1}) over consecutive increasing eps; <= 0
  /// for a non-decreasing curve
  Scalar max_decrease = -std::numeric_limits<Scalar>::infinity();
  /// largest second divided difference; <= 0 for a concave curve
  Scalar max_second_difference = -std::numeric_limits<Scalar>::infinity();
};

/// Monotonicity and concavity of eps -> v_eps on the sweep rows.
template <typename Scalar>
ShapeReport<Scalar> shape_report(std::vector<SweepRow<Scalar>> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& l, const auto& r) { return l.epsilon < r.epsilon; });
  ShapeReport<Scalar> out;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k)
    out.max_decrease = std::max(out.max_decrease, rows[k].v_eps - rows[k + 1].v_eps);
  for (std::size_t k = 0; k + 2 < rows.size(); ++k) {
    const auto &p = rows[k], &q = rows[k + 1], &s = rows[k + 2];
    const Scalar left = (q.v_eps - p.v_eps) / (q.epsilon - p.epsilon);
    const Scalar right = (s.v_eps - q.v_eps) / (s.epsilon - q.epsilon);
    out.max_second_difference = std::max(out.max_second_difference, (right - left) / (s.epsilon - p.epsilon));
  }
  return out;
}

}  // namespace eotr
