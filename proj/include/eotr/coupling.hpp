#pragma once

#include "eotr/types.hpp"

#include <cmath>
#include <stdexcept>

namespace eotr {

/// Transport plan between two weight vectors.
template <typename Scalar>
struct Coupling {
  MatrixX<Scalar> matrix;
  VectorX<Scalar> row_marginal;
  VectorX<Scalar> col_marginal;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }

  Scalar cost(const MatrixX<Scalar>& C) const {
    if (C.rows() != matrix.rows() || C.cols() != matrix.cols())
      throw std::invalid_argument("Coupling::cost: cost matrix shape mismatch");
    return (matrix.array() * C.array()).sum();
  }

  /// Relative entropy with respect to row_marginal (x) col_marginal, with
  /// 0 log 0 = 0.
  Scalar entropy() const {
    CompensatedSum<Scalar> total;
    for (Eigen::Index j = 0; j < matrix.cols(); ++j)
      for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        const Scalar g = matrix(i, j);
        if (g > Scalar(0)) total.add(g * std::log(g / (row_marginal[i] * col_marginal[j])));
      }
    return total.value();
  }

  /// Largest absolute deviation of a row or column sum from its marginal.
  Scalar marginal_error() const {
    const Scalar rows_err = (matrix.rowwise().sum() - row_marginal).cwiseAbs().maxCoeff();
    const Scalar cols_err = (matrix.colwise().sum().transpose() - col_marginal).cwiseAbs().maxCoeff();
    return std::max(rows_err, cols_err);
  }

  static Coupling product(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
    return {a * b.transpose(), a, b};
  }
};

/// Potentials on the two supports. Kept normalized so that sum_i phi_i a_i = 0.
template <typename Scalar>
struct DualPair {
  VectorX<Scalar> phi;
  VectorX<Scalar> psi;

  Scalar value(const VectorX<Scalar>& a, const VectorX<Scalar>& b) const {
    return phi.dot(a) + psi.dot(b);
  }

  /// Applies (phi, psi) -> (phi - lambda, psi + lambda) with lambda = <phi, a>.
  void normalize(const VectorX<Scalar>& a) {
    const Scalar lambda = phi.dot(a) / a.sum();
    phi.array() -= lambda;
    psi.array() += lambda;
  }

  /// max_ij (phi_i + psi_j - C_ij); nonpositive for a feasible pair.
  Scalar max_violation(const MatrixX<Scalar>& C) const {
    return ((phi.replicate(1, C.cols()) + psi.transpose().replicate(C.rows(), 1)) - C).maxCoeff();
  }
};

}  // namespace eotr
