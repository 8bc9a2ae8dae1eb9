#pragma once

#include "eotr/costs.hpp"
#include "eotr/coupling.hpp"
#include "eotr/logsumexp.hpp"
#include "eotr/measures.hpp"
#include "eotr/regression.hpp"
#include "eotr/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace eotr {

template <typename Scalar>
struct GapField {
  MatrixX<Scalar> E;
  DualPair<Scalar> duals;
  BoolMatrix zero_set_mask;
  Scalar zero_tol = Scalar(0);
};

/// E = C - phi (+) psi, with round-off negatives clamped to zero and the
/// contact set {E <= 1e-8 (1 + max|C|)} marked.
template <typename Scalar>
GapField<Scalar> gap_field(const MatrixX<Scalar>& C, const DualPair<Scalar>& duals) {
  if (duals.phi.size() != C.rows() || duals.psi.size() != C.cols())
    throw std::invalid_argument("gap_field: duals do not match the cost matrix shape");
  const Scalar scale = Scalar(1) + C.cwiseAbs().maxCoeff();
  GapField<Scalar> out;
  out.duals = duals;
  out.E = C - duals.phi.replicate(1, C.cols()) - duals.psi.transpose().replicate(C.rows(), 1);
  const Scalar worst = out.E.minCoeff();
  if (worst < -Scalar(1e-9) * scale)
    throw std::invalid_argument("gap_field: duals violate phi + psi <= C by " + std::to_string(-worst));
  out.E = out.E.cwiseMax(Scalar(0));
  out.zero_tol = Scalar(1e-8) * scale;
  out.zero_set_mask = (out.E.array() <= out.zero_tol).matrix();
  return out;
}

template <typename Scalar>
Box<Scalar> bounding_box(const DiscreteMeasure<Scalar>& mu) {
  return Box<Scalar>{mu.lower_corner(), mu.upper_corner()};
}

/// Sampled sup of |A(p')^{-1} A(p) - I| (Frobenius) over pairs of points of
/// box_minus x box_plus at max-norm distance <= r, where A is the cross
/// Hessian. Both orders of the product are taken. Zero for costs with a
/// constant cross Hessian.
template <typename Scalar>
Scalar kappa(const CostModel<Scalar>& c, const Box<Scalar>& box_minus, const Box<Scalar>& box_plus, Scalar r,
             Eigen::Index samples = 9) {
  if (!c.is_c2()) throw std::invalid_argument("kappa: cost '" + c.name() + "' is not C^2");
  if (!(r >= Scalar(0))) throw std::invalid_argument("kappa: radius must be nonnegative");
  const auto twist = check_twist(c, box_minus, box_plus, samples);
  if (!(twist.twist_margin > Scalar(0)))
    throw std::invalid_argument("kappa: cost '" + c.name() + "' is not twisted on the boxes");
  if (c.has_constant_cross_hessian() || r == Scalar(0)) return Scalar(0);

  const Eigen::Index d = box_minus.dim();
  const Eigen::Index axes = 2 * d;
  Eigen::Index offsets = 1;
  for (Eigen::Index k = 0; k < axes; ++k) offsets *= 3;

  Scalar best = Scalar(0);
  VectorX<Scalar> x2(d), y2(d);
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(d, d);
  for_each_box_sample(box_minus, box_plus, samples, [&](const auto& x, const auto& y) {
    const MatrixX<Scalar> A = c.cross_hessian(x, y);
    for (Eigen::Index o = 0; o < offsets; ++o) {
      Eigen::Index rest = o;
      for (Eigen::Index k = 0; k < axes; ++k) {
        const Scalar shift = r * Scalar(rest % 3 - 1);
        rest /= 3;
        if (k < d)
          x2[k] = std::clamp(x[k] + shift, box_minus.lower[k], box_minus.upper[k]);
        else
          y2[k - d] = std::clamp(y[k - d] + shift, box_plus.lower[k - d], box_plus.upper[k - d]);
      }
      const MatrixX<Scalar> B = c.cross_hessian(x2, y2);
      const MatrixX<Scalar> B_inv = B.inverse();
      best = std::max({best, (B_inv * A - I).norm(), (A * B_inv - I).norm()});
    }
  });
  return Scalar(kSampledInflation) * best;
}

/// Rotated chart at a base point: u = (x + A y) / 2, v = (x - A y) / 2 with A
/// the cross Hessian at the base.
template <typename Scalar>
struct MintyFrame {
  VectorX<Scalar> base_x;
  VectorX<Scalar> base_y;
  MatrixX<Scalar> A;

  static MintyFrame at(const CostModel<Scalar>& c, const VectorX<Scalar>& x, const VectorX<Scalar>& y) {
    MintyFrame f{x, y, c.cross_hessian(x, y)};
    if (!(std::abs(f.A.determinant()) > Scalar(0)))
      throw std::invalid_argument("MintyFrame: cross Hessian is singular at the base point");
    return f;
  }

  VectorX<Scalar> u(const VectorX<Scalar>& x, const VectorX<Scalar>& y) const { return (x + A * y) / Scalar(2); }
  VectorX<Scalar> v(const VectorX<Scalar>& x, const VectorX<Scalar>& y) const { return (x - A * y) / Scalar(2); }
};

struct GapAudit {
  std::int64_t trials = 0;
  std::int64_t violations = 0;
  /// min over trials of lhs - rhs of the gap inequality
  double worst_margin = std::numeric_limits<double>::infinity();
  double kappa = 0;
  std::int64_t graph_pairs = 0;
  std::int64_t graph_violations = 0;
  /// min over contact-set pairs of (1 + k)|dv|^2 - (1 - k)|du|^2
  double graph_worst_margin = std::numeric_limits<double>::infinity();
  std::int64_t base_points = 0;

  bool ok() const { return violations == 0 && graph_violations == 0; }
};

/// Samples `trials` pairs of support points inside the max-norm ball of
/// radius r around a contact-set base point and checks
///   E(p') + E(p) >= |du|^2 - |dv|^2 - k (|du|^2 + |dv|^2)
/// in the Minty chart of the base, with k = kappa(r). Pairs drawn from the
/// contact set itself are also checked against the Lipschitz-graph bound
/// (1 - k)|du|^2 <= (1 + k)|dv|^2.
template <typename Scalar>
GapAudit gap_inequality_check(const GapField<Scalar>& gf, const DiscreteMeasure<Scalar>& mu_minus,
                              const DiscreteMeasure<Scalar>& mu_plus, const CostModel<Scalar>& c, Scalar r,
                              std::int64_t trials, std::uint64_t seed) {
  if (gf.E.rows() != mu_minus.size() || gf.E.cols() != mu_plus.size())
    throw std::invalid_argument("gap_inequality_check: gap field does not match the measures");
  GapAudit out;
  const Scalar k = kappa(c, bounding_box(mu_minus), bounding_box(mu_plus), r);
  out.kappa = static_cast<double>(k);

  std::vector<std::pair<Eigen::Index, Eigen::Index>> contact;
  for (Eigen::Index j = 0; j < gf.E.cols(); ++j)
    for (Eigen::Index i = 0; i < gf.E.rows(); ++i)
      if (gf.zero_set_mask(i, j)) contact.emplace_back(i, j);
  if (contact.empty()) throw std::invalid_argument("gap_inequality_check: empty contact set");
  out.base_points = static_cast<std::int64_t>(contact.size());

  const auto& X = mu_minus.points();
  const auto& Y = mu_plus.points();
  auto near = [r](const auto& row, const auto& centre) {
    return (row.transpose() - centre).cwiseAbs().maxCoeff() <= r;
  };

  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::size_t size) {
    return std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
  };
  const Scalar slack = Scalar(1e-9) + Scalar(2) * gf.zero_tol;
  std::vector<Eigen::Index> rows, cols;
  std::vector<std::size_t> local_contact;
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto [i0, j0] = contact[pick(contact.size())];
    const MintyFrame<Scalar> frame = MintyFrame<Scalar>::at(c, mu_minus.point(i0), mu_plus.point(j0));
    rows.clear();
    cols.clear();
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (near(X.row(i), frame.base_x)) rows.push_back(i);
    for (Eigen::Index j = 0; j < Y.rows(); ++j)
      if (near(Y.row(j), frame.base_y)) cols.push_back(j);

    auto check = [&](Eigen::Index i, Eigen::Index j, Eigen::Index i2, Eigen::Index j2, bool graph) {
      const VectorX<Scalar> x = mu_minus.point(i), y = mu_plus.point(j);
      const VectorX<Scalar> x2 = mu_minus.point(i2), y2 = mu_plus.point(j2);
      const Scalar du = (frame.u(x2, y2) - frame.u(x, y)).squaredNorm();
      const Scalar dv = (frame.v(x2, y2) - frame.v(x, y)).squaredNorm();
      const Scalar margin = gf.E(i2, j2) + gf.E(i, j) - (du - dv - k * (du + dv));
      ++out.trials;
      out.worst_margin = std::min(out.worst_margin, static_cast<double>(margin));
      if (margin < -Scalar(1e-9)) ++out.violations;
      if (graph) {
        const Scalar g = (Scalar(1) + k) * dv - (Scalar(1) - k) * du;
        ++out.graph_pairs;
        out.graph_worst_margin = std::min(out.graph_worst_margin, static_cast<double>(g));
        if (g < -slack) ++out.graph_violations;
      }
    };
    check(rows[pick(rows.size())], cols[pick(cols.size())], rows[pick(rows.size())], cols[pick(cols.size())],
          false);

    local_contact.clear();
    for (std::size_t q = 0; q < contact.size(); ++q)
      if (near(X.row(contact[q].first), frame.base_x) && near(Y.row(contact[q].second), frame.base_y))
        local_contact.push_back(q);
    const auto& p = contact[local_contact[pick(local_contact.size())]];
    const auto& p2 = contact[local_contact[pick(local_contact.size())]];
    if (k < Scalar(1)) check(p.first, p.second, p2.first, p2.second, true);
  }
  return out;
}

/// sum_ij exp(-E_ij / eps) a_i b_j
template <typename Scalar>
Scalar laplace_integral(const GapField<Scalar>& gf, const VectorX<Scalar>& a, const VectorX<Scalar>& b, Scalar eps) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("laplace_integral: eps must be positive");
  Scalar total = Scalar(0);
  for (Eigen::Index j = 0; j < gf.E.cols(); ++j)
    total += b[j] * (a.array() * (-gf.E.col(j).array() / eps).exp()).sum();
  return total;
}

/// log of laplace_integral, evaluated with a single max shift so tiny
/// integrals keep their relative precision.
template <typename Scalar>
Scalar log_laplace_integral(const GapField<Scalar>& gf, const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                            Scalar eps) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("log_laplace_integral: eps must be positive");
  const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> t =
      (-gf.E.array() / eps).colwise() + a.array().log();
  const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> s = t.rowwise() + b.array().log().transpose();
  const Scalar top = s.maxCoeff();
  return top + std::log((s - top).exp().sum());
}

template <typename Scalar>
struct LaplaceFit {
  std::vector<Scalar> eps;
  std::vector<Scalar> log_integral;
  Scalar slope = Scalar(0);
  /// Intercept of log I against log eps; exp(intercept) estimates C in
  /// I <= C eps^slope, so it plays the role of m = log C.
  Scalar intercept = Scalar(0);
  Scalar r_squared = Scalar(1);
};

template <typename Scalar>
LaplaceFit<Scalar> laplace_slope_fit(const GapField<Scalar>& gf, const VectorX<Scalar>& a,
                                     const VectorX<Scalar>& b, const std::vector<Scalar>& eps_ladder) {
  if (eps_ladder.size() < 2) throw std::invalid_argument("laplace_slope_fit: need at least two epsilons");
  LaplaceFit<Scalar> out;
  out.eps = eps_ladder;
  std::vector<Scalar> lx;
  for (const Scalar e : eps_ladder) {
    lx.push_back(std::log(e));
    out.log_integral.push_back(log_laplace_integral(gf, a, b, e));
  }
  const LineFit<Scalar> fit = fit_line(lx, out.log_integral);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.r_squared = fit.r_squared;
  return out;
}

/// Monotone rearrangement on the line: atom x_i of mu- (sorted) is sent to
/// the smallest atom of mu+ whose CDF reaches the mid-mass level
/// F(x_i-) + a_i / 2. Entry i of the result belongs to atom i of mu-.
template <typename Scalar>
std::vector<Scalar> brenier_map_1d(const DiscreteMeasure<Scalar>& mu_minus, const DiscreteMeasure<Scalar>& mu_plus) {
  if (mu_minus.dim() != 1 || mu_plus.dim() != 1)
    throw std::invalid_argument("brenier_map_1d: measures must live on the line");
  auto order = [](const DiscreteMeasure<Scalar>& mu) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(mu.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<Eigen::Index>(k);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return mu.points()(l, 0) < mu.points()(r, 0); });
    return idx;
  };
  const auto src = order(mu_minus), dst = order(mu_plus);
  std::vector<Scalar> T(src.size());
  Scalar below = Scalar(0), reached = Scalar(0);
  std::size_t j = 0;
  reached = mu_plus.weight(dst[0]);
  for (const Eigen::Index i : src) {
    const Scalar level = below + mu_minus.weight(i) / Scalar(2);
    while (reached < level && j + 1 < dst.size()) reached += mu_plus.weight(dst[++j]);
    T[static_cast<std::size_t>(i)] = mu_plus.points()(dst[j], 0);
    below += mu_minus.weight(i);
  }
  return T;
}

template <typename Scalar>
struct StabilityMetrics {
  Scalar map_mse = Scalar(0);   ///< sum_ij g_ij |y_j - T(x_i)|^2
  Scalar bary_mse = Scalar(0);  ///< sum_i r_i |T_eps(x_i) - T(x_i)|^2, r = plan row sums
};

/// Distance of a plan on the line from the graph of T, and of its
/// barycentric projection from T.
template <typename Scalar>
StabilityMetrics<Scalar> stability_metrics(const Coupling<Scalar>& plan, const std::vector<Scalar>& T,
                                           const DiscreteMeasure<Scalar>& mu_plus) {
  if (static_cast<Eigen::Index>(T.size()) != plan.rows() || mu_plus.size() != plan.cols() || mu_plus.dim() != 1)
    throw std::invalid_argument("stability_metrics: map table or target does not match the plan");
  const VectorX<Scalar> y = mu_plus.points().col(0);
  StabilityMetrics<Scalar> out;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    const auto row = plan.matrix.row(i);
    const Scalar mass = row.sum();
    if (!(mass > Scalar(0)))
      throw std::invalid_argument("stability_metrics: row " + std::to_string(i) + " of the plan has no mass");
    const Scalar Ti = T[static_cast<std::size_t>(i)];
    out.map_mse += (row.transpose().array() * (y.array() - Ti).square()).sum();
    const Scalar bary = row.dot(y) / mass;
    out.bary_mse += mass * (bary - Ti) * (bary - Ti);
  }
  return out;
}

/// Resolvent (id + df)^{-1}(z) of f(w) = max_j (w y_j - y_j^2 / 2 + psi_j),
/// the convex potential of a canonical pair for the cost |x - y|^2 / 2 on the
/// line, found by grid scan and golden-section refinement.
template <typename Scalar>
Scalar quadratic_resolvent(const VectorX<Scalar>& y, const VectorX<Scalar>& psi, Scalar z) {
  const VectorX<Scalar> g = y.array().square() / Scalar(2) - psi.array();
  auto objective = [&](Scalar w) { return (w - z) * (w - z) / Scalar(2) + (w * y - g).maxCoeff(); };
  Scalar lo = z - y.maxCoeff(), hi = z - y.minCoeff();
  if (hi - lo <= Scalar(0)) return lo;

  constexpr int kScan = 64;
  int best = 0;
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  for (int s = 0; s <= kScan; ++s) {
    const Scalar v = objective(lo + (hi - lo) * Scalar(s) / Scalar(kScan));
    if (v < best_value) {
      best_value = v;
      best = s;
    }
  }
  const Scalar width = (hi - lo) / Scalar(kScan);
  Scalar a = std::max(lo, lo + width * Scalar(best - 1)), b = std::min(hi, lo + width * Scalar(best + 1));
  const Scalar ratio = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar c = b - ratio * (b - a), d = a + ratio * (b - a);
  Scalar fc = objective(c), fd = objective(d);
  while (b - a > Scalar(1e-13) * (Scalar(1) + std::abs(z))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = objective(d);
    }
  }
  return (a + b) / Scalar(2);
}

struct DetachmentAudit {
  std::int64_t samples = 0;
  std::int64_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();  ///< min E - |x - z*|^2

  bool ok() const { return violations == 0; }
};

/// Checks E(x, y) >= |x - (id + df)^{-1}(x + y)|^2 at `samples` random atom
/// pairs (every pair when samples <= 0) for the cost |x - y|^2 / 2 on the line.
template <typename Scalar>
DetachmentAudit resolvent_detachment_check(const GapField<Scalar>& gf, const DiscreteMeasure<Scalar>& mu_minus,
                                           const DiscreteMeasure<Scalar>& mu_plus, std::int64_t samples,
                                           std::uint64_t seed, Scalar tol = Scalar(1e-6)) {
  if (mu_minus.dim() != 1 || mu_plus.dim() != 1)
    throw std::invalid_argument("resolvent_detachment_check: measures must live on the line");
  const VectorX<Scalar> x = mu_minus.points().col(0), y = mu_plus.points().col(0);
  DetachmentAudit out;
  auto check = [&](Eigen::Index i, Eigen::Index j) {
    const Scalar z = quadratic_resolvent(y, gf.duals.psi, x[i] + y[j]);
    const Scalar margin = gf.E(i, j) - (x[i] - z) * (x[i] - z);
    ++out.samples;
    out.worst_margin = std::min(out.worst_margin, static_cast<double>(margin));
    if (margin < -tol) ++out.violations;
  };
  if (samples <= 0) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      for (Eigen::Index j = 0; j < y.size(); ++j) check(i, j);
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> row(0, x.size() - 1), col(0, y.size() - 1);
  for (std::int64_t s = 0; s < samples; ++s) {
    const Eigen::Index i = row(rng);
    check(i, col(rng));
  }
  return out;
}

}  // namespace eotr
