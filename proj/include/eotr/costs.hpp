#pragma once

#include "eotr/measures.hpp"
#include "eotr/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace eotr {

enum class CostKind { Quadratic, Abs, PNormPower, Bilinear, Polynomial };

/// Sampled constants are multiplied by this factor so they behave as upper
/// bounds of the true suprema.
inline constexpr double kSampledInflation = 1.05;

/// Cost c(x, y) on R^d x R^d with analytic first and second derivatives.
///
/// Kinds:
///   Quadratic   c = |x - y|^2 / 2
///   Abs         c = |x - y|            (Lipschitz only, no second derivatives)
///   PNormPower  c = |x - y|^p, p >= 1  (C^2 when p >= 2)
///   Bilinear    c = -x . y
///   Polynomial  c = sum_i sum_{k,l} a(k,l) x_i^k y_i^l  (coordinate-separable)
template <typename Scalar>
class CostModel {
 public:
  using Vec = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;

  static CostModel quadratic(Eigen::Index dim) { return CostModel(CostKind::Quadratic, dim); }
  static CostModel abs(Eigen::Index dim) { return CostModel(CostKind::Abs, dim); }
  static CostModel bilinear(Eigen::Index dim) { return CostModel(CostKind::Bilinear, dim); }
  static CostModel p_norm_power(Eigen::Index dim, Scalar p) {
    if (!(p >= Scalar(1))) throw std::invalid_argument("p-norm-power cost needs p >= 1");
    CostModel c(CostKind::PNormPower, dim);
    c.p_ = p;
    return c;
  }
  /// `coefficients(k, l)` multiplies x^k y^l.
  static CostModel polynomial(Eigen::Index dim, Mat coefficients) {
    if (coefficients.size() == 0) throw std::invalid_argument("polynomial cost: empty table");
    CostModel c(CostKind::Polynomial, dim);
    c.coef_ = std::move(coefficients);
    return c;
  }

  CostKind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  Scalar exponent() const { return p_; }
  const Mat& coefficients() const { return coef_; }

  bool is_c2() const {
    return kind_ != CostKind::Abs && !(kind_ == CostKind::PNormPower && p_ < Scalar(2));
  }
  /// c(x, y) = h(x - y) with h convex.
  bool is_convex_difference() const {
    return kind_ == CostKind::Quadratic || kind_ == CostKind::Abs || kind_ == CostKind::PNormPower;
  }
  /// Cross-Hessian independent of (x, y).
  bool has_constant_cross_hessian() const {
    return kind_ == CostKind::Quadratic || kind_ == CostKind::Bilinear ||
           (kind_ == CostKind::PNormPower && p_ == Scalar(2));
  }

  std::string name() const {
    switch (kind_) {
      case CostKind::Quadratic: return "quadratic";
      case CostKind::Abs: return "abs";
      case CostKind::PNormPower: return "p-norm-power";
      case CostKind::Bilinear: return "bilinear";
      case CostKind::Polynomial: return "polynomial";
    }
    return "unknown";
  }

  template <typename DerivedX, typename DerivedY>
  Scalar operator()(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) const {
    switch (kind_) {
      case CostKind::Quadratic: return (x - y).squaredNorm() / Scalar(2);
      case CostKind::Abs: return (x - y).norm();
      case CostKind::PNormPower: return std::pow((x - y).norm(), p_);
      case CostKind::Bilinear: return -x.dot(y);
      case CostKind::Polynomial: {
        Scalar total = Scalar(0);
        for (Eigen::Index i = 0; i < x.size(); ++i) total += poly(x[i], y[i], 0, 0);
        return total;
      }
    }
    return Scalar(0);
  }

  Vec gradient_x(const Vec& x, const Vec& y) const {
    const Vec z = x - y;
    switch (kind_) {
      case CostKind::Quadratic: return z;
      case CostKind::Abs: {
        const Scalar r = z.norm();
        return r > Scalar(0) ? Vec(z / r) : Vec(Vec::Zero(z.size()));
      }
      case CostKind::PNormPower: {
        const Scalar r = z.norm();
        return r > Scalar(0) ? Vec(p_ * std::pow(r, p_ - Scalar(2)) * z) : Vec(Vec::Zero(z.size()));
      }
      case CostKind::Bilinear: return -y;
      case CostKind::Polynomial: {
        Vec g(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = poly(x[i], y[i], 1, 0);
        return g;
      }
    }
    return Vec();
  }

  Vec gradient_y(const Vec& x, const Vec& y) const {
    switch (kind_) {
      case CostKind::Bilinear: return -x;
      case CostKind::Polynomial: {
        Vec g(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = poly(x[i], y[i], 0, 1);
        return g;
      }
      default: return -gradient_x(x, y);
    }
  }

  /// Mixed second derivatives (d^2 c / dx_i dy_j)_{ij}.
  Mat cross_hessian(const Vec& x, const Vec& y) const {
    require_c2("cross_hessian");
    const Eigen::Index d = x.size();
    switch (kind_) {
      case CostKind::Quadratic:
      case CostKind::Bilinear: return -Mat::Identity(d, d);
      case CostKind::PNormPower: return -difference_hessian(x - y);
      case CostKind::Polynomial: {
        Mat h = Mat::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) h(i, i) = poly(x[i], y[i], 1, 1);
        return h;
      }
      default: break;
    }
    return Mat();
  }

  /// Full 2d x 2d Hessian in the variables (x, y).
  Mat full_hessian(const Vec& x, const Vec& y) const {
    require_c2("full_hessian");
    const Eigen::Index d = x.size();
    Mat h = Mat::Zero(2 * d, 2 * d);
    switch (kind_) {
      case CostKind::Quadratic:
      case CostKind::PNormPower: {
        const Mat inner = kind_ == CostKind::Quadratic ? Mat(Mat::Identity(d, d)) : difference_hessian(x - y);
        h.topLeftCorner(d, d) = inner;
        h.bottomRightCorner(d, d) = inner;
        h.topRightCorner(d, d) = -inner;
        h.bottomLeftCorner(d, d) = -inner;
        return h;
      }
      case CostKind::Bilinear:
        h.topRightCorner(d, d) = -Mat::Identity(d, d);
        h.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
        return h;
      case CostKind::Polynomial:
        for (Eigen::Index i = 0; i < d; ++i) {
          h(i, i) = poly(x[i], y[i], 2, 0);
          h(d + i, d + i) = poly(x[i], y[i], 0, 2);
          h(i, d + i) = h(d + i, i) = poly(x[i], y[i], 1, 1);
        }
        return h;
      default: break;
    }
    return h;
  }

 private:
  CostModel(CostKind kind, Eigen::Index dim) : kind_(kind), dim_(dim) {
    if (dim < 1) throw std::invalid_argument("cost dimension must be positive");
  }

  void require_c2(const char* what) const {
    if (!is_c2())
      throw std::invalid_argument(std::string(what) + ": cost '" + name() + "' is not C^2");
  }

  // Hessian of z -> |z|^p.
  Mat difference_hessian(const Vec& z) const {
    const Eigen::Index d = z.size();
    const Scalar r = z.norm();
    if (r == Scalar(0))
      return p_ == Scalar(2) ? Mat(Scalar(2) * Mat::Identity(d, d)) : Mat(Mat::Zero(d, d));
    const Vec u = z / r;
    return p_ * std::pow(r, p_ - Scalar(2)) *
           (Mat::Identity(d, d) + (p_ - Scalar(2)) * u * u.transpose());
  }

  // Partial derivative of sum_{k,l} a(k,l) x^k y^l, dx times in x and dy in y.
  Scalar poly(Scalar x, Scalar y, int dx, int dy) const {
    Scalar total = Scalar(0);
    for (Eigen::Index k = dx; k < coef_.rows(); ++k) {
      for (Eigen::Index l = dy; l < coef_.cols(); ++l) {
        if (coef_(k, l) == Scalar(0)) continue;
        Scalar factor = coef_(k, l);
        for (int t = 0; t < dx; ++t) factor *= Scalar(k - t);
        for (int t = 0; t < dy; ++t) factor *= Scalar(l - t);
        total += factor * std::pow(x, static_cast<int>(k - dx)) * std::pow(y, static_cast<int>(l - dy));
      }
    }
    return total;
  }

  CostKind kind_;
  Eigen::Index dim_;
  Scalar p_ = Scalar(2);
  Mat coef_;
};

/// Dense n x m table C(i, j) = c(x_i, y_j).
template <typename Scalar>
MatrixX<Scalar> cost_matrix(const CostModel<Scalar>& c, const DiscreteMeasure<Scalar>& mu_minus,
                            const DiscreteMeasure<Scalar>& mu_plus) {
  if (mu_minus.dim() != c.dim() || mu_plus.dim() != c.dim())
    throw std::invalid_argument("cost_matrix: measure dimension does not match cost dimension " +
                                std::to_string(c.dim()));
  const auto& x = mu_minus.points();
  const auto& y = mu_plus.points();
  MatrixX<Scalar> C(x.rows(), y.rows());
  for (Eigen::Index j = 0; j < y.rows(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) C(i, j) = c(x.row(i), y.row(j));
  return C;
}

/// Calls `fn(x, y)` on every node of the tensor grid of `samples` points per
/// axis (endpoints included) over box_minus x box_plus.
template <typename Scalar, typename Fn>
void for_each_box_sample(const Box<Scalar>& box_minus, const Box<Scalar>& box_plus,
                         Eigen::Index samples, Fn&& fn) {
  if (samples < 2) throw std::invalid_argument("need at least 2 samples per axis");
  if (box_minus.dim() != box_plus.dim()) throw std::invalid_argument("box dimensions differ");
  const Eigen::Index d = box_minus.dim();
  const Eigen::Index axes = 2 * d;
  VectorX<Scalar> lo(axes), hi(axes);
  lo << box_minus.lower, box_plus.lower;
  hi << box_minus.upper, box_plus.upper;

  Eigen::Index total = 1;
  for (Eigen::Index k = 0; k < axes; ++k) total *= samples;
  VectorX<Scalar> x(d), y(d);
  for (Eigen::Index a = 0; a < total; ++a) {
    Eigen::Index rest = a;
    for (Eigen::Index k = axes - 1; k >= 0; --k) {
      const Scalar t = Scalar(rest % samples) / Scalar(samples - 1);
      rest /= samples;
      const Scalar v = lo[k] + t * (hi[k] - lo[k]);
      if (k < d) x[k] = v; else y[k - d] = v;
    }
    fn(x, y);
  }
}

template <typename Scalar>
struct TwistReport {
  Scalar twist_margin = Scalar(0);
  VectorX<Scalar> argmin_x;
  VectorX<Scalar> argmin_y;
};

/// Smallest |det d^2c/dxdy| over the tensor sample grid.
template <typename Scalar>
TwistReport<Scalar> check_twist(const CostModel<Scalar>& c, const Box<Scalar>& box_minus,
                                const Box<Scalar>& box_plus, Eigen::Index samples_per_axis) {
  TwistReport<Scalar> out;
  out.twist_margin = std::numeric_limits<Scalar>::infinity();
  for_each_box_sample(box_minus, box_plus, samples_per_axis, [&](const auto& x, const auto& y) {
    const Scalar det = std::abs(c.cross_hessian(x, y).determinant());
    if (det < out.twist_margin) {
      out.twist_margin = det;
      out.argmin_x = x;
      out.argmin_y = y;
    }
  });
  return out;
}

namespace detail {

// sup of |x - y| over x in a, y in b.
template <typename Scalar>
Scalar max_box_distance(const Box<Scalar>& a, const Box<Scalar>& b) {
  Scalar s = Scalar(0);
  for (Eigen::Index k = 0; k < a.dim(); ++k) {
    const Scalar gap = std::max(std::abs(a.upper[k] - b.lower[k]), std::abs(a.lower[k] - b.upper[k]));
    s += gap * gap;
  }
  return std::sqrt(s);
}

template <typename Scalar>
Scalar max_box_norm(const Box<Scalar>& a) {
  return a.lower.cwiseAbs().cwiseMax(a.upper.cwiseAbs()).norm();
}

}  // namespace detail

/// Upper bound on the Lipschitz constant of c, measured as the larger of the
/// Euclidean norms of the two partial gradients.
template <typename Scalar>
Scalar lipschitz_estimate(const CostModel<Scalar>& c, const Box<Scalar>& box_minus,
                          const Box<Scalar>& box_plus, Eigen::Index samples_per_axis = 21) {
  switch (c.kind()) {
    case CostKind::Abs: return Scalar(1);
    case CostKind::Quadratic: return detail::max_box_distance(box_minus, box_plus);
    case CostKind::PNormPower:
      return c.exponent() * std::pow(detail::max_box_distance(box_minus, box_plus), c.exponent() - Scalar(1));
    case CostKind::Bilinear:
      return std::max(detail::max_box_norm(box_minus), detail::max_box_norm(box_plus));
    case CostKind::Polynomial: break;
  }
  Scalar best = Scalar(0);
  for_each_box_sample(box_minus, box_plus, samples_per_axis, [&](const auto& x, const auto& y) {
    best = std::max({best, c.gradient_x(x, y).norm(), c.gradient_y(x, y).norm()});
  });
  return Scalar(kSampledInflation) * best;
}

/// Upper bound on the operator norm of the full Hessian of c over the boxes,
/// i.e. the lambda for which c is lambda-concave there.
template <typename Scalar>
Scalar semiconcavity_estimate(const CostModel<Scalar>& c, const Box<Scalar>& box_minus,
                              const Box<Scalar>& box_plus, Eigen::Index samples_per_axis = 21) {
  if (!c.is_c2())
    throw std::invalid_argument("semiconcavity_estimate: cost '" + c.name() + "' is not C^2");
  switch (c.kind()) {
    case CostKind::Quadratic: return Scalar(2);
    case CostKind::Bilinear: return Scalar(1);
    case CostKind::PNormPower:
      if (c.exponent() == Scalar(2)) return Scalar(4);
      break;
    default: break;
  }
  Scalar best = Scalar(0);
  for_each_box_sample(box_minus, box_plus, samples_per_axis, [&](const auto& x, const auto& y) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(c.full_hessian(x, y), Eigen::EigenvaluesOnly);
    best = std::max(best, eig.eigenvalues().cwiseAbs().maxCoeff());
  });
  return Scalar(kSampledInflation) * best;
}

}  // namespace eotr
