#pragma once

#include "eotr/coupling.hpp"
#include "eotr/measures.hpp"
#include "eotr/regression.hpp"
#include "eotr/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace eotr {

/// Cubic mesh of one measure's support. Cells have side delta / sqrt(d), so
/// their Euclidean diameter is at most delta, and are anchored at the lower
/// corner of the support.
template <typename Scalar>
struct GridPartition {
  Scalar delta = Scalar(0);
  Scalar side = Scalar(0);
  VectorX<Scalar> anchor;
  std::vector<Eigen::Index> cell_index;  ///< atom -> cell id in [0, cell_count)
  VectorX<Scalar> cell_masses;

  Eigen::Index cell_count() const { return cell_masses.size(); }
};

template <typename Scalar>
GridPartition<Scalar> make_partition(const DiscreteMeasure<Scalar>& mu, Scalar delta) {
  if (!(delta > Scalar(0))) throw std::invalid_argument("make_partition: delta must be positive");
  GridPartition<Scalar> part;
  part.delta = delta;
  part.side = delta / std::sqrt(Scalar(mu.dim()));
  part.anchor = mu.lower_corner();
  part.cell_index.resize(static_cast<std::size_t>(mu.size()));

  std::map<std::vector<long long>, Eigen::Index> ids;
  std::vector<Scalar> masses;
  std::vector<long long> key(static_cast<std::size_t>(mu.dim()));
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    for (Eigen::Index k = 0; k < mu.dim(); ++k) {
      // The small offset keeps atoms lying on a cell face in the upper cell
      // despite rounding in the division.
      const Scalar t = (mu.points()(i, k) - part.anchor[k]) / part.side;
      key[static_cast<std::size_t>(k)] = static_cast<long long>(std::floor(t + Scalar(1e-9)));
    }
    const auto [it, fresh] = ids.try_emplace(key, static_cast<Eigen::Index>(masses.size()));
    if (fresh) masses.push_back(Scalar(0));
    part.cell_index[static_cast<std::size_t>(i)] = it->second;
    masses[static_cast<std::size_t>(it->second)] += mu.weight(i);
  }
  part.cell_masses = Eigen::Map<VectorX<Scalar>>(masses.data(), static_cast<Eigen::Index>(masses.size()));
  return part;
}

/// sum over occupied cells of m log(1/m).
template <typename Scalar>
Scalar grid_entropy(const GridPartition<Scalar>& part) {
  CompensatedSum<Scalar> h;
  for (const Scalar m : part.cell_masses)
    if (m > Scalar(0)) h.add(-m * std::log(m));
  return std::max(h.value(), Scalar(0));
}

template <typename Scalar>
Scalar grid_entropy(const DiscreteMeasure<Scalar>& mu, Scalar delta) {
  return grid_entropy(make_partition(mu, delta));
}

template <typename Scalar>
struct EntropyProfile {
  std::vector<Scalar> deltas;
  std::vector<Scalar> H_values;
  Scalar fitted_dim = Scalar(0);
  /// Index range [first, last] of the ladder used by the fit.
  std::size_t window_first = 0;
  std::size_t window_last = 0;
  Scalar residual = Scalar(0);
  Scalar intercept = Scalar(0);
};

/// Slope of H_delta against log(1/delta) over the part of the ladder lying
/// strictly between 4 cell widths and the support diameter.
template <typename Scalar>
EntropyProfile<Scalar> entropy_dimension_fit(const DiscreteMeasure<Scalar>& mu, std::vector<Scalar> ladder) {
  if (ladder.empty()) throw std::invalid_argument("entropy_dimension_fit: empty delta ladder");
  std::sort(ladder.begin(), ladder.end(), std::greater<Scalar>());
  EntropyProfile<Scalar> out;
  out.deltas = ladder;
  for (const Scalar d : ladder) out.H_values.push_back(grid_entropy(mu, d));
  if (mu.size() == 1) {
    out.window_last = ladder.size() - 1;
    return out;
  }

  const Scalar lo = Scalar(4) * mu.cell_width().value_or(Scalar(0));
  const Scalar hi = mu.diameter();
  std::vector<Scalar> x, y;
  bool first = true;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > lo && ladder[k] < hi)) continue;
    if (first) out.window_first = k;
    first = false;
    out.window_last = k;
    x.push_back(std::log(Scalar(1) / ladder[k]));
    y.push_back(out.H_values[k]);
  }
  if (x.size() < 2)
    throw std::invalid_argument("entropy_dimension_fit: fewer than two deltas inside (" + std::to_string(lo) +
                                ", " + std::to_string(hi) + ")");
  const LineFit<Scalar> fit = fit_line(x, y);
  out.fitted_dim = std::max(fit.slope, Scalar(0));
  out.residual = fit.rms_residual;
  out.intercept = fit.intercept;
  return out;
}

/// Block-wise product coupling: the mass gamma0 puts on every block A_I x B_J
/// is spread proportionally to mu-(x) mu+ inside the block.
template <typename Scalar>
Coupling<Scalar> block_approximation(const Coupling<Scalar>& gamma0, const GridPartition<Scalar>& part_minus,
                                     const GridPartition<Scalar>& part_plus) {
  const Eigen::Index n = gamma0.rows(), m = gamma0.cols();
  if (static_cast<Eigen::Index>(part_minus.cell_index.size()) != n ||
      static_cast<Eigen::Index>(part_plus.cell_index.size()) != m)
    throw std::invalid_argument("block_approximation: partitions do not match the coupling's supports");
  if (gamma0.marginal_error() > Scalar(1e-9))
    throw std::invalid_argument("block_approximation: coupling marginals do not match (error " +
                                std::to_string(gamma0.marginal_error()) + ")");

  const auto& a = gamma0.row_marginal;
  const auto& b = gamma0.col_marginal;
  MatrixX<Scalar> block = MatrixX<Scalar>::Zero(part_minus.cell_count(), part_plus.cell_count());
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      block(part_minus.cell_index[i], part_plus.cell_index[j]) += gamma0.matrix(i, j);

  // Block masses are scaled by the cell masses of the marginals themselves so
  // the marginals come out exact.
  VectorX<Scalar> mass_minus = VectorX<Scalar>::Zero(part_minus.cell_count());
  VectorX<Scalar> mass_plus = VectorX<Scalar>::Zero(part_plus.cell_count());
  for (Eigen::Index i = 0; i < n; ++i) mass_minus[part_minus.cell_index[i]] += a[i];
  for (Eigen::Index j = 0; j < m; ++j) mass_plus[part_plus.cell_index[j]] += b[j];
  for (Eigen::Index J = 0; J < block.cols(); ++J)
    for (Eigen::Index I = 0; I < block.rows(); ++I) block(I, J) /= mass_minus[I] * mass_plus[J];

  Coupling<Scalar> out{MatrixX<Scalar>(n, m), a, b};
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      out.matrix(i, j) = block(part_minus.cell_index[i], part_plus.cell_index[j]) * a[i] * b[j];
  return out;
}

template <typename Scalar>
struct BlockBound {
  Scalar cost0 = Scalar(0);
  Scalar cost_delta = Scalar(0);
  Scalar entropy_delta = Scalar(0);
  Scalar v_eps = Scalar(0);
  /// cost0 + c_lip * delta - cost_delta
  Scalar cost_slack = Scalar(0);
  /// cost_delta + eps * entropy_delta - v_eps
  Scalar entropic_slack = Scalar(0);

  bool ok(Scalar cost_tol = Scalar(1e-9), Scalar entropic_tol = Scalar(1e-8)) const {
    return cost_slack >= -cost_tol && entropic_slack >= -entropic_tol;
  }
};

/// Evaluates both links of the chain v_eps <= cost(g^d) + eps Ent(g^d) <=
/// cost(g0) + c_lip delta + eps Ent(g^d).
template <typename Scalar>
BlockBound<Scalar> block_bound_check(const MatrixX<Scalar>& C, const Coupling<Scalar>& gamma0,
                                     const Coupling<Scalar>& gamma_delta, Scalar c_lip, Scalar delta, Scalar eps,
                                     Scalar v_eps) {
  BlockBound<Scalar> out;
  out.cost0 = gamma0.cost(C);
  out.cost_delta = gamma_delta.cost(C);
  out.entropy_delta = gamma_delta.entropy();
  out.v_eps = v_eps;
  out.cost_slack = out.cost0 + c_lip * delta - out.cost_delta;
  out.entropic_slack = out.cost_delta + eps * out.entropy_delta - v_eps;
  return out;
}

template <typename Scalar>
struct AlexandrovFit {
  std::vector<Scalar> radii;
  std::vector<Scalar> L_values;
  Scalar exponent = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar intercept = std::numeric_limits<Scalar>::quiet_NaN();
  bool exact_zero = false;
};

/// Integrated first-order Taylor defect of a 1-D function sampled on a
/// uniform grid, L(r) = sum_x max_{|y - x| <= r} |f(y) - f(x) - f'(x)(y - x)| h,
/// and the slope of log L against log r. `slope` holds the chosen
/// subgradient at every grid point.
template <typename Scalar>
AlexandrovFit<Scalar> alexandrov_scaling_check(const std::vector<Scalar>& x, const std::vector<Scalar>& f,
                                               const std::vector<Scalar>& slope, const std::vector<Scalar>& radii) {
  const std::size_t N = x.size();
  if (N < 2 || f.size() != N || slope.size() != N)
    throw std::invalid_argument("alexandrov_scaling_check: grid, values and slopes must have equal length >= 2");
  if (radii.size() < 2) throw std::invalid_argument("alexandrov_scaling_check: need at least two radii");
  const Scalar h = (x.back() - x.front()) / Scalar(N - 1);
  for (const Scalar r : radii)
    if (r < Scalar(4) * h * (Scalar(1) - Scalar(1e-9)))
      throw std::invalid_argument("alexandrov_scaling_check: radius " + std::to_string(r) +
                                  " is below 4 grid steps (" + std::to_string(4 * h) + ")");

  AlexandrovFit<Scalar> out;
  out.radii = radii;
  Scalar scale = Scalar(0);
  for (const Scalar v : f) scale = std::max(scale, std::abs(v));
  for (const Scalar r : radii) {
    const auto reach = static_cast<std::ptrdiff_t>(std::floor(r / h + Scalar(1e-9)));
    Scalar total = Scalar(0);
    for (std::size_t i = 0; i < N; ++i) {
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - reach);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(N) - 1,
                                                         static_cast<std::ptrdiff_t>(i) + reach);
      Scalar worst = Scalar(0);
      for (std::ptrdiff_t j = lo; j <= hi; ++j)
        worst = std::max(worst, std::abs(f[j] - f[i] - slope[i] * (x[j] - x[i])));
      total += worst;
    }
    out.L_values.push_back(total * h);
  }

  const Scalar zero_floor = Scalar(1e-12) * (Scalar(1) + scale) * (x.back() - x.front());
  out.exact_zero = std::all_of(out.L_values.begin(), out.L_values.end(),
                               [&](Scalar v) { return v <= zero_floor; });
  if (out.exact_zero) return out;
  std::vector<Scalar> lx, ly;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(out.L_values[k] > Scalar(0))) continue;
    lx.push_back(std::log(radii[k]));
    ly.push_back(std::log(out.L_values[k]));
  }
  const LineFit<Scalar> fit = fit_line(lx, ly);
  out.exponent = fit.slope;
  out.intercept = fit.intercept;
  return out;
}

}  // namespace eotr
