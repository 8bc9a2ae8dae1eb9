#include "doctest.h"
#include "support.hpp"

#include <random>

using namespace eotr;
using eotr::test::vec;

namespace {

DiscreteMeasure<double> atoms01() {
  Points p(2, 1);
  p << 0.0, 1.0;
  return DiscreteMeasure<double>(p, eotr::test::halves());
}

// Operator norm of the full Hessian, read off a self-adjoint eigen-solve.
double hessian_norm(const CostModel<double>& c, const Vector& x, const Vector& y) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c.full_hessian(x, y));
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

CostModel<double> x2y2() {
  Matrix coef = Matrix::Zero(3, 3);
  coef(2, 2) = 1;
  return CostModel<double>::polynomial(1, coef);
}

}  // namespace

TEST_CASE("cost matrices of the basic kinds") {
  const auto mu = atoms01();
  CHECK(cost_matrix(CostModel<double>::quadratic(1), mu, mu).isApprox(eotr::test::mat2(0, 0.5, 0.5, 0)));
  CHECK(cost_matrix(CostModel<double>::abs(1), mu, mu).isApprox(eotr::test::mat2(0, 1, 1, 0)));

  Points x(1, 1), y(1, 1);
  x << 1.0;
  y << 2.0;
  const Matrix C = cost_matrix(CostModel<double>::bilinear(1), DiscreteMeasure<double>(x, vec({1.0})),
                               DiscreteMeasure<double>(y, vec({1.0})));
  CHECK(C(0, 0) == -2.0);
}

TEST_CASE("cross Hessians") {
  const Vector x = vec({0.3, -0.7}), y = vec({1.1, 0.2});
  CHECK(CostModel<double>::quadratic(2).cross_hessian(x, y) == -Matrix::Identity(2, 2));
  CHECK(CostModel<double>::bilinear(2).cross_hessian(x, y) == -Matrix::Identity(2, 2));
  CHECK(x2y2().cross_hessian(vec({1.0}), vec({1.0}))(0, 0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(CostModel<double>::abs(1).cross_hessian(vec({0.0}), vec({1.0})), std::invalid_argument);
}

TEST_CASE("twist margins") {
  const auto unit2 = Box<double>::unit(2);
  CHECK(check_twist(CostModel<double>::quadratic(2), unit2, unit2, 5).twist_margin == doctest::Approx(1.0));

  const Box<double> sym(vec({-1.0}), vec({1.0}));
  const auto flat = check_twist(x2y2(), sym, sym, 21);
  CHECK(flat.twist_margin == doctest::Approx(0.0));
  CHECK(flat.argmin_x[0] * flat.argmin_y[0] == doctest::Approx(0.0));

  const Box<double> upper(vec({0.5}), vec({1.0}));
  const auto corner = check_twist(x2y2(), upper, upper, 11);
  CHECK(corner.twist_margin == doctest::Approx(1.0));
  CHECK(corner.argmin_x[0] == doctest::Approx(0.5));
  CHECK(corner.argmin_y[0] == doctest::Approx(0.5));
}

TEST_CASE("Lipschitz constants") {
  const auto unit1 = Box<double>::unit(1);
  CHECK(lipschitz_estimate(CostModel<double>::abs(1), unit1, unit1) == 1.0);
  CHECK(lipschitz_estimate(CostModel<double>::quadratic(1), unit1, unit1) == doctest::Approx(1.0));
  CHECK(lipschitz_estimate(CostModel<double>::bilinear(1), unit1, unit1) == doctest::Approx(1.0));
}

TEST_CASE("semiconcavity constants agree with an eigen-solve") {
  const auto b1 = Box<double>::unit(1);
  const auto b2 = Box<double>::unit(2);
  const double quad1 = hessian_norm(CostModel<double>::quadratic(1), vec({0.2}), vec({0.9}));
  const double bil1 = hessian_norm(CostModel<double>::bilinear(1), vec({0.2}), vec({0.9}));
  const double quad2 = hessian_norm(CostModel<double>::quadratic(2), vec({0.2, 0.1}), vec({0.9, 0.4}));
  CHECK(quad1 == doctest::Approx(2.0));
  CHECK(bil1 == doctest::Approx(1.0));
  CHECK(quad2 == doctest::Approx(2.0));
  CHECK(semiconcavity_estimate(CostModel<double>::quadratic(1), b1, b1) == doctest::Approx(quad1));
  CHECK(semiconcavity_estimate(CostModel<double>::bilinear(1), b1, b1) == doctest::Approx(bil1));
  CHECK(semiconcavity_estimate(CostModel<double>::quadratic(2), b2, b2) == doctest::Approx(quad2));
  CHECK_THROWS_AS(semiconcavity_estimate(CostModel<double>::abs(1), b1, b1), std::invalid_argument);
}

TEST_CASE("sampled constants bound the sampled suprema") {
  const Box<double> box(vec({0.5}), vec({1.0}));
  // |d/dx x^2 y^2| = 2 x y^2 <= 2 on the box, Hessian norm is largest at (1, 1).
  CHECK(lipschitz_estimate(x2y2(), box, box) >= 2.0);
  CHECK(semiconcavity_estimate(x2y2(), box, box) >= hessian_norm(x2y2(), vec({1.0}), vec({1.0})));
}

TEST_CASE("cost matrices are symmetric on coinciding supports") {
  const auto mu = eotr::test::uniform_square(4);
  for (const auto& c : {CostModel<double>::quadratic(2), CostModel<double>::abs(2), CostModel<double>::bilinear(2),
                        CostModel<double>::p_norm_power(2, 3.0)}) {
    const Matrix C = cost_matrix(c, mu, mu);
    CHECK((C - C.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

namespace {

template <typename S>
std::vector<CostModel<S>> smooth_models(Eigen::Index d) {
  MatrixX<S> poly = MatrixX<S>::Zero(3, 4);
  poly(1, 1) = S(-1.5);
  poly(2, 1) = S(0.5);
  poly(1, 3) = S(0.25);
  poly(2, 2) = S(1);
  return {CostModel<S>::quadratic(d), CostModel<S>::bilinear(d), CostModel<S>::p_norm_power(d, S(3)),
          CostModel<S>::polynomial(d, poly)};
}

}  // namespace

// Difference quotients are taken in extended precision.
TEST_CASE("mixed finite differences match the cross Hessian") {
  using Long = long double;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  const Long step = 1e-5L;
  for (const Eigen::Index d : {1, 2, 3}) {
    const auto models = smooth_models<double>(d);
    const auto wide = smooth_models<Long>(d);
    for (std::size_t m = 0; m < models.size(); ++m)
      for (int trial = 0; trial < 20; ++trial) {
        Vector x(d), y(d);
        for (Eigen::Index k = 0; k < d; ++k) {
          x[k] = u(rng);
          y[k] = u(rng);
        }
        const Matrix H = models[m].cross_hessian(x, y);
        for (Eigen::Index i = 0; i < d; ++i)
          for (Eigen::Index j = 0; j < d; ++j) {
            auto at = [&](Long si, Long sj) {
              VectorX<Long> xs = x.cast<Long>(), ys = y.cast<Long>();
              xs[i] += si;
              ys[j] += sj;
              return wide[m](xs, ys);
            };
            const Long fd = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) / (4 * step * step);
            CHECK(std::abs(static_cast<double>(fd) - H(i, j)) <= 1e-6);
          }
      }
  }
}
