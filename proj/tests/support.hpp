#pragma once

#include "eotr/eotr.hpp"

#include <cmath>
#include <random>

namespace eotr::test {

inline DiscreteMeasure<double> uniform_line(double lo, double hi, Eigen::Index n) {
  return grid_measure(DensitySpec<double>::uniform(Box<double>(Vector::Constant(1, lo), Vector::Constant(1, hi))), n);
}

inline DiscreteMeasure<double> uniform_square(Eigen::Index n) {
  return grid_measure(DensitySpec<double>::uniform(Box<double>::unit(2)), n);
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (const double x : values) v[k++] = x;
  return v;
}

inline Matrix mat2(double c00, double c01, double c10, double c11) {
  Matrix C(2, 2);
  C << c00, c01, c10, c11;
  return C;
}

inline Vector halves() { return Vector::Constant(2, 0.5); }

inline Vector random_weights(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = u(rng);
  return w / w.sum();
}

inline Matrix random_cost(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix C(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) C(i, j) = u(rng);
  return C;
}

/// cost + eps * Ent of the 2x2 coupling with free entry t = gamma(0, 0).
inline double entropic_objective_2x2(const Matrix& C, const Vector& a, const Vector& b, double eps, double t) {
  const double g[4] = {t, a[0] - t, b[0] - t, 1 - a[0] - b[0] + t};
  const double w[4] = {a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]};
  const double c[4] = {C(0, 0), C(0, 1), C(1, 0), C(1, 1)};
  double total = 0;
  for (int k = 0; k < 4; ++k) {
    total += c[k] * g[k];
    if (g[k] > 0) total += eps * g[k] * std::log(g[k] / w[k]);
  }
  return total;
}

struct Golden {
  double t;
  double value;
};

/// Golden-section minimization of the 2x2 entropic objective over the
/// feasible range of the free entry.
inline Golden golden_2x2(const Matrix& C, const Vector& a, const Vector& b, double eps) {
  double lo = std::max(0.0, a[0] + b[0] - 1), hi = std::min(a[0], b[0]);
  const double r = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
    if (entropic_objective_2x2(C, a, b, eps, c) < entropic_objective_2x2(C, a, b, eps, d))
      hi = d;
    else
      lo = c;
  }
  const double t = (lo + hi) / 2;
  return {t, entropic_objective_2x2(C, a, b, eps, t)};
}

inline SinkhornConfig<double> tight(double eps, double tol = 1e-13) {
  SinkhornConfig<double> cfg;
  cfg.epsilon = eps;
  cfg.tol = tol;
  return cfg;
}

}  // namespace eotr::test
