#pragma once

#include "eotr/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eotr {

/// Axis-aligned box [lower, upper] in R^d.
template <typename Scalar>
struct Box {
  VectorX<Scalar> lower;
  VectorX<Scalar> upper;

  Box() = default;
  Box(VectorX<Scalar> lo, VectorX<Scalar> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() == 0)
      throw std::invalid_argument("Box: corner dimensions differ or are empty");
    for (Eigen::Index k = 0; k < lower.size(); ++k)
      if (!(lower[k] <= upper[k]))
        throw std::invalid_argument("Box: lower corner exceeds upper corner on axis " +
                                    std::to_string(k));
  }

  static Box unit(Eigen::Index dim) {
    return Box(VectorX<Scalar>::Zero(dim), VectorX<Scalar>::Ones(dim));
  }

  Eigen::Index dim() const { return lower.size(); }
  VectorX<Scalar> edges() const { return upper - lower; }
  VectorX<Scalar> center() const { return (lower + upper) / Scalar(2); }
  Scalar volume() const { return edges().prod(); }
  Scalar diameter() const { return edges().norm(); }
};

enum class DensityKind { Uniform, AffineRamp, TruncatedBump };

/// Bounded density on a box.
///
/// - Uniform: constant 1/volume.
/// - AffineRamp: proportional to `params[0] + params[1..d] . x`; must stay
///   nonnegative on the box.
/// - TruncatedBump: proportional to exp(-|x - center|^2 / (2 sigma^2)) with
///   `params[0] = sigma` and an optional center in `params[1..d]` (defaults to
///   the box center).
template <typename Scalar>
struct DensitySpec {
  DensityKind kind = DensityKind::Uniform;
  Box<Scalar> support;
  VectorX<Scalar> params;

  static DensitySpec uniform(Box<Scalar> box) {
    return {DensityKind::Uniform, std::move(box), VectorX<Scalar>()};
  }
  static DensitySpec affine_ramp(Box<Scalar> box, Scalar offset, const VectorX<Scalar>& slope) {
    VectorX<Scalar> p(slope.size() + 1);
    p << offset, slope;
    return {DensityKind::AffineRamp, std::move(box), p};
  }
  static DensitySpec truncated_bump(Box<Scalar> box, Scalar sigma) {
    VectorX<Scalar> p(1);
    p << sigma;
    return {DensityKind::TruncatedBump, std::move(box), p};
  }

  /// Throws std::invalid_argument when the density is unbounded, negative
  /// somewhere on the box, or cannot be normalized.
  void check() const {
    const Eigen::Index d = support.dim();
    if (d == 0) throw std::invalid_argument("DensitySpec: empty support");
    if (!(support.volume() > Scalar(0)))
      throw std::invalid_argument("DensitySpec: support box has zero volume");
    switch (kind) {
      case DensityKind::Uniform:
        return;
      case DensityKind::AffineRamp: {
        if (params.size() != d + 1)
          throw std::invalid_argument("DensitySpec: affine-ramp needs 1 + dim parameters");
        if (!params.allFinite()) throw std::invalid_argument("DensitySpec: non-finite ramp");
        // An affine function attains its minimum over a box at a corner.
        Scalar lowest = params[0];
        for (Eigen::Index k = 0; k < d; ++k)
          lowest += params[k + 1] * (params[k + 1] >= 0 ? support.lower[k] : support.upper[k]);
        if (lowest < Scalar(0))
          throw std::invalid_argument("DensitySpec: affine-ramp is negative on the support");
        if (!(ramp_mass() > Scalar(0)))
          throw std::invalid_argument("DensitySpec: affine-ramp has zero mass");
        return;
      }
      case DensityKind::TruncatedBump: {
        if (params.size() != 1 && params.size() != d + 1)
          throw std::invalid_argument("DensitySpec: truncated-bump needs sigma [, center]");
        if (!(params[0] > Scalar(0)) || !std::isfinite(static_cast<double>(params[0])))
          throw std::invalid_argument("DensitySpec: truncated-bump sigma must be positive");
        if (!(bump_mass() > Scalar(0)))
          throw std::invalid_argument("DensitySpec: truncated-bump has no mass on the support");
        return;
      }
    }
  }

  /// Normalized density value; zero outside the support.
  Scalar density(const VectorX<Scalar>& x) const {
    for (Eigen::Index k = 0; k < support.dim(); ++k)
      if (x[k] < support.lower[k] || x[k] > support.upper[k]) return Scalar(0);
    switch (kind) {
      case DensityKind::Uniform:
        return Scalar(1) / support.volume();
      case DensityKind::AffineRamp:
        return (params[0] + params.tail(params.size() - 1).dot(x)) / ramp_mass();
      case DensityKind::TruncatedBump: {
        const Scalar s = params[0];
        return std::exp(-(x - bump_center()).squaredNorm() / (Scalar(2) * s * s)) / bump_mass();
      }
    }
    return Scalar(0);
  }

 private:
  Scalar ramp_mass() const {
    return support.volume() * (params[0] + params.tail(params.size() - 1).dot(support.center()));
  }
  VectorX<Scalar> bump_center() const {
    return params.size() == 1 ? support.center() : VectorX<Scalar>(params.tail(params.size() - 1));
  }
  Scalar bump_mass() const {
    using std::erf;
    using std::sqrt;
    const Scalar s = params[0];
    const VectorX<Scalar> c = bump_center();
    const Scalar root2 = sqrt(Scalar(2));
    const Scalar half_pi = Scalar(std::acos(-1.0L)) / Scalar(2);
    Scalar mass = Scalar(1);
    for (Eigen::Index k = 0; k < support.dim(); ++k)
      mass *= s * sqrt(half_pi) *
              (erf((support.upper[k] - c[k]) / (s * root2)) - erf((support.lower[k] - c[k]) / (s * root2)));
    return mass;
  }
};

/// Weighted point cloud. Zero-weight atoms are dropped on construction so
/// that entropy sums only ever see positive masses. The weights are kept as
/// given; `validate` reports whether they form a probability vector.
template <typename Scalar>
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  DiscreteMeasure(const PointSet<Scalar>& points, const VectorX<Scalar>& weights,
                  std::optional<Scalar> cell_width = std::nullopt)
      : cell_width_(cell_width) {
    if (points.rows() != weights.size())
      throw std::invalid_argument("DiscreteMeasure: " + std::to_string(points.rows()) +
                                  " points but " + std::to_string(weights.size()) + " weights");
    if (points.cols() == 0) throw std::invalid_argument("DiscreteMeasure: zero ambient dimension");
    if (!points.allFinite() || !weights.allFinite())
      throw std::invalid_argument("DiscreteMeasure: non-finite coordinates or weights");
    if ((weights.array() < Scalar(0)).any())
      throw std::invalid_argument("DiscreteMeasure: negative weight");
    if (cell_width && !(*cell_width > Scalar(0)))
      throw std::invalid_argument("DiscreteMeasure: cell width must be positive");

    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(weights.size()));
    for (Eigen::Index i = 0; i < weights.size(); ++i)
      if (weights[i] > Scalar(0)) keep.push_back(i);
    if (keep.empty()) throw std::invalid_argument("DiscreteMeasure: all weights are zero");

    points_.resize(static_cast<Eigen::Index>(keep.size()), points.cols());
    weights_.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
      points_.row(static_cast<Eigen::Index>(r)) = points.row(keep[r]);
      weights_[static_cast<Eigen::Index>(r)] = weights[keep[r]];
    }
  }

  Eigen::Index size() const { return weights_.size(); }
  Eigen::Index dim() const { return points_.cols(); }
  const PointSet<Scalar>& points() const { return points_; }
  const VectorX<Scalar>& weights() const { return weights_; }
  VectorX<Scalar> point(Eigen::Index i) const { return points_.row(i).transpose(); }
  Scalar weight(Eigen::Index i) const { return weights_[i]; }
  std::optional<Scalar> cell_width() const { return cell_width_; }

  VectorX<Scalar> lower_corner() const { return points_.colwise().minCoeff().transpose(); }
  VectorX<Scalar> upper_corner() const { return points_.colwise().maxCoeff().transpose(); }

  /// Euclidean diameter of the support.
  Scalar diameter() const {
    if (dim() == 1) return points_.col(0).maxCoeff() - points_.col(0).minCoeff();
    const std::vector<Eigen::Index> cand = dim() == 2 ? hull_2d() : all_indices();
    Scalar best = Scalar(0);
    for (std::size_t i = 0; i < cand.size(); ++i)
      for (std::size_t j = i + 1; j < cand.size(); ++j)
        best = std::max(best, (points_.row(cand[i]) - points_.row(cand[j])).squaredNorm());
    return std::sqrt(best);
  }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    return a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
           a.points_ == b.points_ && a.weights_ == b.weights_;
  }

 private:
  std::vector<Eigen::Index> all_indices() const {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return idx;
  }

  // Vertices of the planar convex hull (monotone chain).
  std::vector<Eigen::Index> hull_2d() const {
    std::vector<Eigen::Index> idx = all_indices();
    const auto& p = points_;
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      return p(a, 0) < p(b, 0) || (p(a, 0) == p(b, 0) && p(a, 1) < p(b, 1));
    });
    if (idx.size() < 3) return idx;
    auto cross = [&](Eigen::Index o, Eigen::Index a, Eigen::Index b) {
      return (p(a, 0) - p(o, 0)) * (p(b, 1) - p(o, 1)) - (p(a, 1) - p(o, 1)) * (p(b, 0) - p(o, 0));
    };
    std::vector<Eigen::Index> hull(2 * idx.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      while (k >= 2 && cross(hull[k - 2], hull[k - 1], idx[i]) <= Scalar(0)) --k;
      hull[k++] = idx[i];
    }
    for (std::size_t i = idx.size() - 1, t = k + 1; i-- > 0;) {
      while (k >= t && cross(hull[k - 2], hull[k - 1], idx[i]) <= Scalar(0)) --k;
      hull[k++] = idx[i];
    }
    hull.resize(k - 1);
    return hull;
  }

  PointSet<Scalar> points_;
  VectorX<Scalar> weights_;
  std::optional<Scalar> cell_width_;
};

template <typename Scalar>
struct MeasureDiagnostics {
  Scalar weight_sum_error = Scalar(0);
  Scalar min_weight = Scalar(0);
  Scalar support_diameter = Scalar(0);
  Eigen::Index duplicate_points = 0;
  std::vector<std::string> flags;

  bool ok() const { return flags.empty(); }
};

/// Reports (never throws) violations of the probability-measure invariants.
template <typename Scalar>
MeasureDiagnostics<Scalar> validate(const DiscreteMeasure<Scalar>& mu) {
  MeasureDiagnostics<Scalar> out;
  out.weight_sum_error = std::abs(mu.weights().sum() - Scalar(1));
  out.min_weight = mu.weights().minCoeff();
  out.support_diameter = mu.diameter();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(mu.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& pts = mu.points();
  auto lex_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < pts.cols(); ++k) {
      if (pts(a, k) < pts(b, k)) return true;
      if (pts(b, k) < pts(a, k)) return false;
    }
    return false;
  };
  std::sort(order.begin(), order.end(), lex_less);
  for (std::size_t r = 1; r < order.size(); ++r)
    if (pts.row(order[r]) == pts.row(order[r - 1])) ++out.duplicate_points;

  if (out.weight_sum_error > Scalar(1e-12))
    out.flags.push_back("weight sum differs from 1 by " + std::to_string(static_cast<double>(out.weight_sum_error)));
  if (!(out.min_weight > Scalar(0))) out.flags.push_back("non-positive weight");
  if (out.duplicate_points > 0)
    out.flags.push_back("duplicate points: " + std::to_string(out.duplicate_points));
  return out;
}

/// Midpoint-rule discretization of a density on its box: one atom per cell
/// center, weights proportional to the density there and renormalized.
template <typename Scalar>
DiscreteMeasure<Scalar> grid_measure(const DensitySpec<Scalar>& spec, Eigen::Index n_per_axis) {
  if (n_per_axis < 2) throw std::invalid_argument("grid_measure: need at least 2 cells per axis");
  spec.check();

  const Eigen::Index d = spec.support.dim();
  Eigen::Index total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= n_per_axis;

  const VectorX<Scalar> step = spec.support.edges() / Scalar(n_per_axis);
  PointSet<Scalar> pts(total, d);
  VectorX<Scalar> w(total);
  std::vector<Eigen::Index> digit(static_cast<std::size_t>(d), 0);
  for (Eigen::Index a = 0; a < total; ++a) {
    // Last axis varies fastest.
    Eigen::Index rest = a;
    for (Eigen::Index k = d - 1; k >= 0; --k) {
      digit[static_cast<std::size_t>(k)] = rest % n_per_axis;
      rest /= n_per_axis;
    }
    for (Eigen::Index k = 0; k < d; ++k)
      pts(a, k) = spec.support.lower[k] +
                  (Scalar(digit[static_cast<std::size_t>(k)]) + Scalar(0.5)) * step[k];
    w[a] = spec.density(pts.row(a).transpose());
  }

  if (spec.kind == DensityKind::Uniform) {
    w.setConstant(Scalar(1) / Scalar(total));
  } else {
    const Scalar mass = w.sum();
    if (!(mass > Scalar(0)) || !std::isfinite(static_cast<double>(mass)))
      throw std::invalid_argument("grid_measure: density vanishes at every cell center");
    w /= mass;
  }
  return DiscreteMeasure<Scalar>(pts, w, step.maxCoeff());
}

/// n equal-mass atoms at the midpoints of n equal pieces of the segment [a, b].
template <typename Scalar>
DiscreteMeasure<Scalar> segment_measure(const VectorX<Scalar>& a, const VectorX<Scalar>& b,
                                        Eigen::Index n) {
  if (a.size() != b.size() || a.size() == 0)
    throw std::invalid_argument("segment_measure: endpoint dimensions differ");
  if (n < 1) throw std::invalid_argument("segment_measure: need at least one atom");
  const Scalar length = (b - a).norm();
  if (!(length > Scalar(0))) throw std::invalid_argument("segment_measure: endpoints coincide");

  PointSet<Scalar> pts(n, a.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar t = (Scalar(i) + Scalar(0.5)) / Scalar(n);
    pts.row(i) = (a + t * (b - a)).transpose();
  }
  return DiscreteMeasure<Scalar>(pts, VectorX<Scalar>::Constant(n, Scalar(1) / Scalar(n)),
                                 length / Scalar(n));
}

template <typename Scalar>
DiscreteMeasure<Scalar> dirac(const VectorX<Scalar>& x) {
  return DiscreteMeasure<Scalar>(x.transpose(), VectorX<Scalar>::Ones(1));
}

}  // namespace eotr
