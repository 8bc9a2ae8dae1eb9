#pragma once

#include "eotr/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace eotr {

template <typename Scalar>
struct LeastSquares {
  VectorX<Scalar> coef;
  Scalar rms_residual = Scalar(0);
  Scalar max_residual = Scalar(0);
  /// 1 - SSR / sum(y^2); defined as 1 when SSR is zero.
  Scalar r_squared_uncentered = Scalar(1);
  /// 1 - SSR / sum((y - mean y)^2); defined as 1 when SSR is zero.
  Scalar r_squared_centered = Scalar(1);
};

/// Least squares y ~ X coef by column-pivoting QR; throws when X is rank
/// deficient.
template <typename Scalar>
LeastSquares<Scalar> least_squares(const MatrixX<Scalar>& X, const VectorX<Scalar>& y) {
  if (X.rows() != y.size()) throw std::invalid_argument("least_squares: design and response sizes differ");
  if (X.rows() < X.cols()) throw std::invalid_argument("least_squares: fewer rows than unknowns");
  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(X);
  qr.setThreshold(Scalar(1e-10));
  if (qr.rank() < X.cols()) throw std::invalid_argument("least_squares: rank-deficient design");

  LeastSquares<Scalar> out;
  out.coef = qr.solve(y);
  const VectorX<Scalar> res = y - X * out.coef;
  const Scalar ssr = res.squaredNorm();
  out.rms_residual = std::sqrt(ssr / Scalar(y.size()));
  out.max_residual = res.cwiseAbs().maxCoeff();
  const Scalar sst_raw = y.squaredNorm();
  const Scalar sst = (y.array() - y.mean()).matrix().squaredNorm();
  out.r_squared_uncentered = ssr == Scalar(0) ? Scalar(1) : std::max(Scalar(0), Scalar(1) - ssr / sst_raw);
  out.r_squared_centered =
      ssr == Scalar(0) ? Scalar(1) : (sst > Scalar(0) ? std::max(Scalar(0), Scalar(1) - ssr / sst) : Scalar(0));
  return out;
}

template <typename Scalar>
struct LineFit {
  Scalar slope = Scalar(0);
  Scalar intercept = Scalar(0);
  Scalar rms_residual = Scalar(0);
  Scalar r_squared = Scalar(1);
};

/// Ordinary least squares line y = slope * x + intercept.
template <typename Scalar>
LineFit<Scalar> fit_line(const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_line: x and y sizes differ");
  if (x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
  MatrixX<Scalar> X(x.size(), 2);
  VectorX<Scalar> Y(y.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    X(k, 0) = x[k];
    X(k, 1) = Scalar(1);
    Y[k] = y[k];
  }
  const auto ls = least_squares(X, Y);
  return {ls.coef[0], ls.coef[1], ls.rms_residual, ls.r_squared_centered};
}

/// n points from lo to hi, equally spaced in log scale.
template <typename Scalar>
std::vector<Scalar> log_ladder(Scalar lo, Scalar hi, int count) {
  if (!(lo > Scalar(0)) || !(hi > lo) || count < 2)
    throw std::invalid_argument("log_ladder: need 0 < lo < hi and count >= 2");
  std::vector<Scalar> out(count);
  const Scalar step = std::log(hi / lo) / Scalar(count - 1);
  for (int k = 0; k < count; ++k) out[k] = lo * std::exp(step * Scalar(k));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace eotr
