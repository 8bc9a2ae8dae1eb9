#pragma once

#include "eotr/costs.hpp"
#include "eotr/coupling.hpp"
#include "eotr/logsumexp.hpp"
#include "eotr/measures.hpp"
#include "eotr/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eotr {

template <typename Scalar>
struct SinkhornConfig {
  Scalar epsilon = Scalar(1);
  /// Sup-norm bound on the marginal error of the returned plan.
  Scalar tol = Scalar(1e-10);
  Eigen::Index max_iter = 200000;
  std::optional<DualPair<Scalar>> warm_start;
  /// When set, solve on the geometric ladder range(C), range(C)*f, ... down
  /// to epsilon, warm-starting each level from the previous one.
  std::optional<Scalar> eps_scaling;

  void check() const {
    if (!(epsilon > Scalar(0))) throw std::invalid_argument("SinkhornConfig: epsilon must be positive");
    if (!(tol > Scalar(0))) throw std::invalid_argument("SinkhornConfig: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("SinkhornConfig: max_iter must be positive");
    if (eps_scaling && !(*eps_scaling > Scalar(0) && *eps_scaling < Scalar(1)))
      throw std::invalid_argument("SinkhornConfig: eps_scaling factor must lie in (0, 1)");
  }
};

template <typename Scalar>
struct SinkhornResult {
  Scalar epsilon = Scalar(0);
  DualPair<Scalar> duals;
  Coupling<Scalar> plan;
  Scalar v_eps = Scalar(0);
  Scalar entropy = Scalar(0);
  Eigen::Index iterations = 0;
  Scalar residual = Scalar(0);
  bool converged = false;
};

namespace detail {

// Alternating soft c-transforms for one cost matrix. Keeps a transposed copy
// so both half-steps read contiguous memory.
template <typename Scalar>
class SoftTransform {
 public:
  SoftTransform(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b)
      : C_(C), Ct_(C.transpose()), log_a_(a.array().log()), log_b_(b.array().log()),
        scratch_(std::max(C.rows(), C.cols())) {}

  // phi_i = -eps log sum_j exp((psi_j - C_ij) / eps) b_j
  void rows(const VectorX<Scalar>& psi, Scalar eps, VectorX<Scalar>& phi) {
    const Eigen::Index m = C_.cols();
    phi.resize(C_.rows());
    auto t = scratch_.head(m);
    for (Eigen::Index i = 0; i < C_.rows(); ++i) {
      t = (psi.array() - Ct_.col(i).array()) / eps + log_b_;
      phi[i] = -eps * log_sum_exp(t);
    }
  }

  // psi_j = -eps log sum_i exp((phi_i - C_ij) / eps) a_i
  void cols(const VectorX<Scalar>& phi, Scalar eps, VectorX<Scalar>& psi) {
    const Eigen::Index n = C_.rows();
    psi.resize(C_.cols());
    auto t = scratch_.head(n);
    for (Eigen::Index j = 0; j < C_.cols(); ++j) {
      t = (phi.array() - C_.col(j).array()) / eps + log_a_;
      psi[j] = -eps * log_sum_exp(t);
    }
  }

 private:
  const MatrixX<Scalar>& C_;
  MatrixX<Scalar> Ct_;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> log_a_;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> log_b_;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> scratch_;
};

template <typename Scalar>
void check_problem(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  if (C.rows() != a.size() || C.cols() != b.size())
    throw std::invalid_argument("cost matrix is " + std::to_string(C.rows()) + "x" +
                                std::to_string(C.cols()) + " but marginals have sizes " +
                                std::to_string(a.size()) + " and " + std::to_string(b.size()));
  if (!(a.array() > Scalar(0)).all() || !(b.array() > Scalar(0)).all())
    throw std::invalid_argument("marginal weights must be positive");
  if (!C.allFinite()) throw std::invalid_argument("cost matrix has non-finite entries");
}

}  // namespace detail

/// Entropic plan exp((phi + psi - C) / eps) a b^T for given potentials.
template <typename Scalar>
MatrixX<Scalar> entropic_plan(const MatrixX<Scalar>& C, const VectorX<Scalar>& a,
                              const VectorX<Scalar>& b, const DualPair<Scalar>& duals, Scalar eps) {
  const VectorX<Scalar> row_shift = duals.phi / eps + VectorX<Scalar>(a.array().log());
  const VectorX<Scalar> col_shift = duals.psi / eps + VectorX<Scalar>(b.array().log());
  MatrixX<Scalar> plan(C.rows(), C.cols());
  for (Eigen::Index j = 0; j < C.cols(); ++j)
    plan.col(j) = (row_shift.array() + col_shift[j] - C.col(j).array() / eps).exp();
  return plan;
}

/// Log-domain Sinkhorn: alternates the two equations of the Schrodinger
/// system until the row marginal of the implied plan is within cfg.tol
/// (columns are exact after every half-step).
template <typename Scalar>
SinkhornResult<Scalar> solve_sinkhorn(const MatrixX<Scalar>& C, const VectorX<Scalar>& a,
                                      const VectorX<Scalar>& b, const SinkhornConfig<Scalar>& cfg) {
  cfg.check();
  detail::check_problem(C, a, b);

  VectorX<Scalar> phi = VectorX<Scalar>::Zero(C.rows());
  VectorX<Scalar> psi = VectorX<Scalar>::Zero(C.cols());
  if (cfg.warm_start) {
    if (cfg.warm_start->phi.size() != C.rows() || cfg.warm_start->psi.size() != C.cols())
      throw std::invalid_argument("solve_sinkhorn: warm start has the wrong shape");
    phi = cfg.warm_start->phi;
    psi = cfg.warm_start->psi;
  }

  std::vector<Scalar> levels;
  if (cfg.eps_scaling) {
    for (Scalar e = C.maxCoeff() - C.minCoeff(); e > cfg.epsilon; e *= *cfg.eps_scaling) levels.push_back(e);
  }
  levels.push_back(cfg.epsilon);

  detail::SoftTransform<Scalar> transform(C, a, b);
  VectorX<Scalar> next_phi(C.rows());
  SinkhornResult<Scalar> out;
  out.epsilon = cfg.epsilon;

  for (std::size_t level = 0; level < levels.size(); ++level) {
    const Scalar eps = levels[level];
    const bool last = level + 1 == levels.size();
    const Scalar tol = last ? cfg.tol : std::max(cfg.tol, Scalar(1e-7));
    transform.cols(phi, eps, psi);
    out.converged = false;
    while (true) {
      transform.rows(psi, eps, next_phi);
      // Row sums of the current plan are a_i exp((phi_i - next_phi_i) / eps).
      const auto shift = ((phi - next_phi).array() / eps).min(Scalar(50));
      out.residual = (a.array() * (shift.exp() - Scalar(1)).abs()).maxCoeff();
      if (out.residual <= tol) {
        out.converged = true;
        break;
      }
      if (out.iterations >= cfg.max_iter) break;
      phi.swap(next_phi);
      transform.cols(phi, eps, psi);
      ++out.iterations;
    }
    if (!out.converged && out.iterations >= cfg.max_iter) break;
  }

  out.duals = DualPair<Scalar>{std::move(phi), std::move(psi)};
  out.duals.normalize(a);
  out.plan = Coupling<Scalar>{entropic_plan(C, a, b, out.duals, cfg.epsilon), a, b};
  out.v_eps = out.duals.value(a, b);

  Scalar entropy = Scalar(0);
  for (Eigen::Index j = 0; j < C.cols(); ++j)
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
      const Scalar g = out.plan.matrix(i, j);
      if (g > Scalar(0)) entropy += g * (out.duals.phi[i] + out.duals.psi[j] - C(i, j)) / cfg.epsilon;
    }
  out.entropy = std::max(entropy, Scalar(0));
  return out;
}

template <typename Scalar>
SinkhornResult<Scalar> solve_sinkhorn(const MatrixX<Scalar>& C, const DiscreteMeasure<Scalar>& mu_minus,
                                      const DiscreteMeasure<Scalar>& mu_plus,
                                      const SinkhornConfig<Scalar>& cfg) {
  return solve_sinkhorn(C, mu_minus.weights(), mu_plus.weights(), cfg);
}

/// Solves along a strictly decreasing epsilon ladder, warm-starting each
/// level from the previous duals, and hands every result to `sink`.
template <typename Scalar, typename Sink>
void sweep_sinkhorn(const MatrixX<Scalar>& C, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                    const std::vector<Scalar>& eps_ladder, SinkhornConfig<Scalar> cfg, Sink&& sink) {
  if (eps_ladder.empty()) throw std::invalid_argument("epsilon ladder is empty");
  for (std::size_t k = 1; k < eps_ladder.size(); ++k)
    if (!(eps_ladder[k] < eps_ladder[k - 1]))
      throw std::invalid_argument("epsilon ladder must be strictly decreasing");
  for (const Scalar eps : eps_ladder) {
    cfg.epsilon = eps;
    SinkhornResult<Scalar> r = solve_sinkhorn(C, a, b, cfg);
    cfg.warm_start = r.duals;
    sink(std::move(r));
  }
}

template <typename Scalar>
std::vector<SinkhornResult<Scalar>> entropic_cost_sweep(const MatrixX<Scalar>& C, const VectorX<Scalar>& a,
                                                        const VectorX<Scalar>& b,
                                                        const std::vector<Scalar>& eps_ladder,
                                                        const SinkhornConfig<Scalar>& cfg) {
  std::vector<SinkhornResult<Scalar>> out;
  sweep_sinkhorn(C, a, b, eps_ladder, cfg, [&](SinkhornResult<Scalar>&& r) { out.push_back(std::move(r)); });
  return out;
}

template <typename Scalar>
struct DerivativeCheck {
  Scalar fd = Scalar(0);   ///< central difference (v(eps+h) - v(eps-h)) / 2h
  Scalar ent = Scalar(0);  ///< entropy of the plan at eps
  Scalar gap = Scalar(0);  ///< |fd - ent|
  bool converged = false;
};

/// Compares the derivative of eps -> v_eps with the entropy of the plan.
template <typename Scalar>
DerivativeCheck<Scalar> derivative_check(const MatrixX<Scalar>& C, const VectorX<Scalar>& a,
                                         const VectorX<Scalar>& b, Scalar eps, Scalar h,
                                         SinkhornConfig<Scalar> cfg) {
  if (!(h > Scalar(0)) || !(eps - h > Scalar(0)))
    throw std::invalid_argument("derivative_check: need 0 < h < eps");
  cfg.epsilon = eps;
  const SinkhornResult<Scalar> mid = solve_sinkhorn(C, a, b, cfg);
  cfg.warm_start = mid.duals;
  cfg.epsilon = eps + h;
  const SinkhornResult<Scalar> up = solve_sinkhorn(C, a, b, cfg);
  cfg.epsilon = eps - h;
  const SinkhornResult<Scalar> down = solve_sinkhorn(C, a, b, cfg);

  DerivativeCheck<Scalar> out;
  out.fd = (up.v_eps - down.v_eps) / (Scalar(2) * h);
  out.ent = mid.entropy;
  out.gap = std::abs(out.fd - out.ent);
  out.converged = mid.converged && up.converged && down.converged;
  return out;
}

template <typename Scalar>
struct DivergenceResult {
  Scalar value = Scalar(0);  ///< v(mu-, mu+) - (v(mu-, mu-) + v(mu+, mu+)) / 2
  Scalar v_cross = Scalar(0);
  Scalar v_minus = Scalar(0);
  Scalar v_plus = Scalar(0);
  bool converged = false;
};

/// Debiased entropic cost from three solves sharing `cfg`.
template <typename Scalar>
DivergenceResult<Scalar> sinkhorn_divergence(const CostModel<Scalar>& c, const DiscreteMeasure<Scalar>& mu_minus,
                                             const DiscreteMeasure<Scalar>& mu_plus, Scalar eps,
                                             SinkhornConfig<Scalar> cfg) {
  cfg.epsilon = eps;
  cfg.warm_start.reset();
  const auto cross = solve_sinkhorn(cost_matrix(c, mu_minus, mu_plus), mu_minus, mu_plus, cfg);
  const auto self_minus = solve_sinkhorn(cost_matrix(c, mu_minus, mu_minus), mu_minus, mu_minus, cfg);
  const auto self_plus = solve_sinkhorn(cost_matrix(c, mu_plus, mu_plus), mu_plus, mu_plus, cfg);
  DivergenceResult<Scalar> out;
  out.v_cross = cross.v_eps;
  out.v_minus = self_minus.v_eps;
  out.v_plus = self_plus.v_eps;
  out.value = out.v_cross - (out.v_minus + out.v_plus) / Scalar(2);
  out.converged = cross.converged && self_minus.converged && self_plus.converged;
  return out;
}

/// Sup-norm defect of the potentials in the Schrodinger system.
template <typename Scalar>
Scalar schrodinger_residual(const DualPair<Scalar>& duals, Scalar eps, const MatrixX<Scalar>& C,
                            const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  detail::check_problem(C, a, b);
  detail::SoftTransform<Scalar> transform(C, a, b);
  VectorX<Scalar> phi_t, psi_t;
  transform.rows(duals.psi, eps, phi_t);
  transform.cols(duals.phi, eps, psi_t);
  return std::max((duals.phi - phi_t).cwiseAbs().maxCoeff(), (duals.psi - psi_t).cwiseAbs().maxCoeff());
}

template <typename Scalar>
Scalar schrodinger_residual(const SinkhornResult<Scalar>& result, const MatrixX<Scalar>& C,
                            const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  return schrodinger_residual(result.duals, result.epsilon, C, a, b);
}

}  // namespace eotr
