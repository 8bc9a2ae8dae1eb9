#pragma once

#include "eotr/types.hpp"

#include <cmath>
#include <limits>

namespace eotr {

/// log(sum_k exp(v_k)), shifted by the largest entry so every exponential
/// is taken of a nonpositive argument. Returns -inf for an empty or all
/// -inf input.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::ArrayBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar top = v.maxCoeff();
  if (!std::isfinite(static_cast<double>(top))) return top;
  return top + std::log((v - top).exp().sum());
}

/// -eps * log(sum_k w_k exp(v_k / eps)) given log-weights, stabilized.
template <typename DerivedV, typename DerivedW>
typename DerivedV::Scalar soft_min(const Eigen::ArrayBase<DerivedV>& v,
                                   const Eigen::ArrayBase<DerivedW>& log_w,
                                   typename DerivedV::Scalar eps) {
  return -eps * log_sum_exp((v / eps + log_w).eval());
}

}  // namespace eotr
