#pragma once

#include "eotr/costs.hpp"
#include "eotr/coupling.hpp"
#include "eotr/measures.hpp"
#include "eotr/sinkhorn.hpp"
#include "eotr/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eotr {

struct ExactOptions {
  /// Pivot cap; 0 selects (n + m)^2 + 10000.
  std::int64_t max_pivots = 0;
  bool canonicalize = true;
};

template <typename Scalar>
struct ExactSolution {
  Coupling<Scalar> plan;
  DualPair<Scalar> duals;
  Scalar value = Scalar(0);
  std::int64_t pivots = 0;
};

namespace detail {

struct BasicCell {
  Eigen::Index i;
  Eigen::Index j;
};

// North-west corner rule. Always emits n + m - 1 cells, some possibly with
// zero flow, so the result is a spanning tree of the bipartite graph.
template <typename Scalar, typename Emit>
void north_west_corner(std::vector<Scalar> r, std::vector<Scalar> c, Emit&& emit) {
  const std::size_t n = r.size(), m = c.size();
  std::size_t i = 0, j = 0;
  while (true) {
    const bool row_done = r[i] <= c[j];
    const Scalar flow = std::max(Scalar(0), std::min(r[i], c[j]));
    emit(i, j, flow);
    r[i] -= flow;
    c[j] -= flow;
    if (i + 1 == n && j + 1 == m) break;
    if ((row_done && i + 1 < n) || j + 1 == m)
      ++i;
    else
      ++j;
  }
}

template <typename Scalar>
class TransportationSimplex {
 public:
  TransportationSimplex(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b)
      : C_(C), n_(C.rows()), m_(C.cols()), basic_(n_ * m_, 0), adj_(n_ + m_),
        u_(n_), v_(m_), parent_(n_ + m_), depth_(n_ + m_) {
    tol_ = Scalar(1e-11) * (Scalar(1) + C.cwiseAbs().maxCoeff());
    north_west_corner(std::vector<Scalar>(a.data(), a.data() + n_), std::vector<Scalar>(b.data(), b.data() + m_),
                      [&](std::size_t i, std::size_t j, Scalar f) {
                        add_cell(Eigen::Index(i), Eigen::Index(j), f);
                      });
  }

  std::int64_t run(std::int64_t max_pivots) {
    const std::int64_t block = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::sqrt(static_cast<double>(n_ * m_))));
    std::int64_t cursor = 0, pivots = 0, degenerate_run = 0;
    while (true) {
      compute_tree();
      const bool bland = degenerate_run > n_ + m_;
      const std::int64_t enter = bland ? price_bland() : price_block(cursor, block);
      if (enter < 0) return pivots;
      if (pivots >= max_pivots) {
        std::ostringstream msg;
        msg << "transportation simplex hit the pivot cap (" << max_pivots << ") with " << cells_.size()
            << " basic cells, " << degenerate_run << " consecutive degenerate pivots, entering reduced cost "
            << reduced_cost(enter / m_, enter % m_);
        throw ConvergenceError(msg.str());
      }
      const Scalar theta = pivot(enter / m_, enter % m_);
      degenerate_run = theta > Scalar(0) ? 0 : degenerate_run + 1;
      ++pivots;
    }
  }

  MatrixX<Scalar> plan() const {
    MatrixX<Scalar> g = MatrixX<Scalar>::Zero(n_, m_);
    for (std::size_t k = 0; k < cells_.size(); ++k) g(cells_[k].i, cells_[k].j) = flow_[k];
    return g;
  }

  DualPair<Scalar> duals() {
    compute_tree();
    return {u_, v_};
  }

 private:
  Scalar reduced_cost(Eigen::Index i, Eigen::Index j) const { return C_(i, j) - u_[i] - v_[j]; }

  void add_cell(Eigen::Index i, Eigen::Index j, Scalar f) {
    const std::size_t k = cells_.size();
    cells_.push_back({i, j});
    flow_.push_back(f);
    basic_[i * m_ + j] = 1;
    adj_[i].push_back(k);
    adj_[n_ + j].push_back(k);
  }

  void remove_cell(std::size_t k) {
    const std::size_t last = cells_.size() - 1;
    auto unlink = [&](std::size_t node, std::size_t id) {
      auto& list = adj_[node];
      list.erase(std::find(list.begin(), list.end(), id));
    };
    unlink(cells_[k].i, k);
    unlink(n_ + cells_[k].j, k);
    basic_[cells_[k].i * m_ + cells_[k].j] = 0;
    if (k != last) {
      // Renumber the last cell into slot k.
      for (auto* list : {&adj_[cells_[last].i], &adj_[n_ + cells_[last].j]})
        *std::find(list->begin(), list->end(), last) = k;
      cells_[k] = cells_[last];
      flow_[k] = flow_[last];
    }
    cells_.pop_back();
    flow_.pop_back();
  }

  // Potentials with u_0 = 0 and u_i + v_j = C_ij on basic cells, plus the
  // parent cell and depth of every node in the tree rooted at row 0.
  void compute_tree() {
    std::fill(depth_.begin(), depth_.end(), -1);
    queue_.clear();
    queue_.push_back(0);
    depth_[0] = 0;
    parent_[0] = std::numeric_limits<std::size_t>::max();
    u_[0] = Scalar(0);
    for (std::size_t head = 0; head < queue_.size(); ++head) {
      const Eigen::Index node = queue_[head];
      for (const std::size_t k : adj_[node]) {
        const auto [i, j] = cells_[k];
        const Eigen::Index other = node < n_ ? n_ + j : i;
        if (depth_[other] >= 0) continue;
        depth_[other] = depth_[node] + 1;
        parent_[other] = k;
        if (node < n_)
          v_[j] = C_(i, j) - u_[i];
        else
          u_[i] = C_(i, j) - v_[j];
        queue_.push_back(other);
      }
    }
    if (static_cast<Eigen::Index>(queue_.size()) != n_ + m_)
      throw std::logic_error("transportation simplex: basis is not a spanning tree");
  }

  std::int64_t price_block(std::int64_t& cursor, std::int64_t block) const {
    const std::int64_t total = n_ * m_;
    std::int64_t best = -1;
    Scalar best_rc = -tol_;
    for (std::int64_t seen = 0; seen < total;) {
      const std::int64_t stop = std::min(total, seen + block);
      for (; seen < stop; ++seen) {
        const std::int64_t id = (cursor + seen) % total;
        if (basic_[id]) continue;
        const Scalar rc = reduced_cost(id / m_, id % m_);
        if (rc < best_rc) {
          best_rc = rc;
          best = id;
        }
      }
      if (best >= 0) {
        cursor = (cursor + seen) % total;
        return best;
      }
    }
    return -1;
  }

  std::int64_t price_bland() const {
    for (std::int64_t id = 0; id < n_ * m_; ++id)
      if (!basic_[id] && reduced_cost(id / m_, id % m_) < -tol_) return id;
    return -1;
  }

  Scalar pivot(Eigen::Index ei, Eigen::Index ej) {
    // Tree path from row ei to column ej; its cells alternate -, +, -, ...
    // starting and ending with -, and the entering cell closes the cycle.
    path_a_.clear();
    path_b_.clear();
    Eigen::Index x = ei, y = n_ + ej;
    auto step = [&](Eigen::Index& node, std::vector<std::size_t>& path) {
      const std::size_t k = parent_[node];
      path.push_back(k);
      node = node < n_ ? n_ + cells_[k].j : cells_[k].i;
    };
    while (depth_[x] > depth_[y]) step(x, path_a_);
    while (depth_[y] > depth_[x]) step(y, path_b_);
    while (x != y) {
      step(x, path_a_);
      step(y, path_b_);
    }
    path_a_.insert(path_a_.end(), path_b_.rbegin(), path_b_.rend());

    Scalar theta = std::numeric_limits<Scalar>::infinity();
    for (std::size_t p = 0; p < path_a_.size(); p += 2) theta = std::min(theta, flow_[path_a_[p]]);
    std::size_t leaving = std::numeric_limits<std::size_t>::max();
    Eigen::Index leaving_id = std::numeric_limits<Eigen::Index>::max();
    for (std::size_t p = 0; p < path_a_.size(); p += 2) {
      const std::size_t k = path_a_[p];
      const Eigen::Index id = cells_[k].i * m_ + cells_[k].j;
      if (flow_[k] <= theta && id < leaving_id) {
        leaving = k;
        leaving_id = id;
      }
    }
    for (std::size_t p = 0; p < path_a_.size(); ++p) {
      if (p % 2 == 0)
        flow_[path_a_[p]] -= theta;
      else
        flow_[path_a_[p]] += theta;
    }
    remove_cell(leaving);
    add_cell(ei, ej, theta);
    return theta;
  }

  const MatrixX<Scalar>& C_;
  Eigen::Index n_, m_;
  Scalar tol_;
  std::vector<BasicCell> cells_;
  std::vector<Scalar> flow_;
  std::vector<char> basic_;
  std::vector<std::vector<std::size_t>> adj_;
  VectorX<Scalar> u_, v_;
  std::vector<std::size_t> parent_;
  std::vector<Eigen::Index> depth_;
  std::vector<Eigen::Index> queue_;
  std::vector<std::size_t> path_a_, path_b_;
};

template <typename Scalar>
void c_transform_rows(const MatrixX<Scalar>& C, DualPair<Scalar>& d) {
  for (Eigen::Index i = 0; i < C.rows(); ++i) d.phi[i] = (C.row(i).transpose() - d.psi).minCoeff();
}

template <typename Scalar>
void c_transform_cols(const MatrixX<Scalar>& C, DualPair<Scalar>& d) {
  for (Eigen::Index j = 0; j < C.cols(); ++j) d.psi[j] = (C.col(j) - d.phi).minCoeff();
}

template <typename Scalar>
bool is_symmetric_instance(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  if (C.rows() != C.cols()) return false;
  const Scalar scale = Scalar(1e-14) * (Scalar(1) + C.cwiseAbs().maxCoeff());
  return (C - C.transpose()).cwiseAbs().maxCoeff() <= scale && (a - b).cwiseAbs().maxCoeff() <= Scalar(1e-15);
}

}  // namespace detail

/// Replaces an optimal dual pair by a c-conjugate one: a c-transform pass,
/// averaging with the transposed pair on symmetric instances, a second pass,
/// then normalization.
template <typename Scalar>
DualPair<Scalar> canonicalize_duals(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                                    DualPair<Scalar> d) {
  detail::c_transform_rows(C, d);
  detail::c_transform_cols(C, d);
  if (detail::is_symmetric_instance(C, a, b)) {
    const VectorX<Scalar> mean = (d.phi + d.psi) / Scalar(2);
    d.phi = mean;
    d.psi = mean;
    detail::c_transform_rows(C, d);
    detail::c_transform_cols(C, d);
  }
  d.normalize(a);
  return d;
}

/// Transportation simplex on the dense n x m problem.
template <typename Scalar>
ExactSolution<Scalar> solve_exact(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                                  const ExactOptions& options = {}) {
  detail::check_problem(C, a, b);
  if (std::abs(a.sum() - b.sum()) > Scalar(1e-9))
    throw std::invalid_argument("solve_exact: marginals have different total mass");

  const std::int64_t n = C.rows(), m = C.cols();
  const std::int64_t cap = options.max_pivots > 0 ? options.max_pivots : (n + m) * (n + m) + 10000;
  detail::TransportationSimplex<Scalar> simplex(C, a, b);

  ExactSolution<Scalar> out;
  out.pivots = simplex.run(cap);
  out.plan = Coupling<Scalar>{simplex.plan(), a, b};
  out.duals = simplex.duals();
  if (options.canonicalize)
    out.duals = canonicalize_duals(C, a, b, out.duals);
  else
    out.duals.normalize(a);
  out.value = out.plan.cost(C);

  const Scalar gap = std::abs(out.value - out.duals.value(a, b));
  if (gap > Scalar(1e-8) * (Scalar(1) + std::abs(out.value))) {
    std::ostringstream msg;
    msg << "solve_exact: duality gap " << gap << " after " << out.pivots << " pivots";
    throw ConvergenceError(msg.str());
  }
  return out;
}

template <typename Scalar>
ExactSolution<Scalar> solve_exact(const MatrixX<Scalar>& C, const DiscreteMeasure<Scalar>& mu_minus,
                                  const DiscreteMeasure<Scalar>& mu_plus, const ExactOptions& options = {}) {
  return solve_exact(C, mu_minus.weights(), mu_plus.weights(), options);
}

/// Minimum over permutation couplings of a square uniform problem, n <= 7.
template <typename Scalar>
Scalar brute_force_oracle(const MatrixX<Scalar>& C) {
  if (C.rows() != C.cols()) throw std::invalid_argument("brute_force_oracle: cost matrix must be square");
  if (C.rows() < 1 || C.rows() > 7) throw std::invalid_argument("brute_force_oracle: size must lie in [1, 7]");
  std::vector<Eigen::Index> sigma(C.rows());
  std::iota(sigma.begin(), sigma.end(), Eigen::Index(0));
  Scalar best = std::numeric_limits<Scalar>::infinity();
  do {
    Scalar total = Scalar(0);
    for (Eigen::Index i = 0; i < C.rows(); ++i) total += C(i, sigma[i]);
    best = std::min(best, total);
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return best / Scalar(C.rows());
}

template <typename Scalar>
struct MonotoneSolution {
  Coupling<Scalar> plan;
  Scalar value = Scalar(0);
};

/// Quantile coupling of two measures on the line.
template <typename Scalar>
MonotoneSolution<Scalar> monotone_1d(const DiscreteMeasure<Scalar>& mu_minus, const DiscreteMeasure<Scalar>& mu_plus,
                                     const CostModel<Scalar>& c) {
  if (mu_minus.dim() != 1 || mu_plus.dim() != 1)
    throw std::invalid_argument("monotone_1d: measures must live on the line");
  if (!c.is_convex_difference())
    throw std::invalid_argument("monotone_1d: cost " + c.name() + " is not a convex function of x - y");

  auto order = [](const DiscreteMeasure<Scalar>& mu) {
    std::vector<Eigen::Index> idx(mu.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return mu.points()(l, 0) < mu.points()(r, 0); });
    return idx;
  };
  const auto rows = order(mu_minus), cols = order(mu_plus);
  std::vector<Scalar> r(rows.size()), s(cols.size());
  for (std::size_t k = 0; k < rows.size(); ++k) r[k] = mu_minus.weight(rows[k]);
  for (std::size_t k = 0; k < cols.size(); ++k) s[k] = mu_plus.weight(cols[k]);

  MonotoneSolution<Scalar> out;
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(mu_minus.size(), mu_plus.size());
  detail::north_west_corner(std::move(r), std::move(s), [&](std::size_t i, std::size_t j, Scalar f) {
    g(rows[i], cols[j]) += f;
    if (f > Scalar(0)) out.value += f * c(mu_minus.point(rows[i]), mu_plus.point(cols[j]));
  });
  out.plan = Coupling<Scalar>{std::move(g), mu_minus.weights(), mu_plus.weights()};
  return out;
}

struct MinEntropyOptions {
  double start_epsilon = 0;  ///< 0 selects the range of C (or 1 for constant C)
  double factor = 0.5;
  int max_levels = 48;
};

/// Small-epsilon limit of the entropic plans: walks a geometric ladder until
/// the plan entropy changes by at most `tol` between levels and the plan cost
/// is within `tol` of the unregularized value.
template <typename Scalar>
Coupling<Scalar> min_entropy_optimal_plan(const MatrixX<Scalar>& C, const VectorX<Scalar>& a,
                                          const VectorX<Scalar>& b, Scalar tol,
                                          const MinEntropyOptions& options = {}) {
  if (!(tol > Scalar(0))) throw std::invalid_argument("min_entropy_optimal_plan: tol must be positive");
  const Scalar v0 = solve_exact(C, a, b).value;
  const Scalar range = C.maxCoeff() - C.minCoeff();
  Scalar eps = options.start_epsilon > 0 ? Scalar(options.start_epsilon) : (range > Scalar(0) ? range : Scalar(1));

  SinkhornConfig<Scalar> cfg;
  cfg.tol = std::min(Scalar(1e-11), tol * Scalar(1e-3));
  std::ostringstream trace;
  Scalar previous = std::numeric_limits<Scalar>::quiet_NaN();
  for (int level = 0; level < options.max_levels; ++level, eps *= Scalar(options.factor)) {
    cfg.epsilon = eps;
    SinkhornResult<Scalar> r = solve_sinkhorn(C, a, b, cfg);
    cfg.warm_start = r.duals;
    const Scalar cost_gap = r.plan.cost(C) - v0;
    trace << "  eps=" << eps << " entropy=" << r.entropy << " cost-v0=" << cost_gap
          << (r.converged ? "" : " (not converged)") << "\n";
    if (r.converged && std::abs(r.entropy - previous) <= tol && cost_gap <= tol) return std::move(r.plan);
    previous = r.converged ? r.entropy : std::numeric_limits<Scalar>::quiet_NaN();
  }
  throw ConvergenceError("min_entropy_optimal_plan: entropy did not stabilize\n" + trace.str());
}

template <typename Scalar>
Coupling<Scalar> min_entropy_optimal_plan(const MatrixX<Scalar>& C, const DiscreteMeasure<Scalar>& mu_minus,
                                          const DiscreteMeasure<Scalar>& mu_plus, Scalar tol,
                                          const MinEntropyOptions& options = {}) {
  return min_entropy_optimal_plan(C, mu_minus.weights(), mu_plus.weights(), tol, options);
}

}  // namespace eotr
