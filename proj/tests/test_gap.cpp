#include "doctest.h"
#include "support.hpp"

#include <random>

using namespace eotr;
using eotr::test::halves;
using eotr::test::mat2;
using eotr::test::uniform_line;
using eotr::test::vec;

namespace {

CostModel<double> x2y2() {
  Matrix coef = Matrix::Zero(3, 3);
  coef(2, 2) = 1;
  return CostModel<double>::polynomial(1, coef);
}

// sup of |x y / (x' y') - 1| over pairs of [0.5, 1]^2 at max-norm distance
// <= r, by dense sampling.
double kappa_oracle(double r) {
  constexpr int kSteps = 60;
  double best = 0;
  for (int i = 0; i <= kSteps; ++i)
    for (int j = 0; j <= kSteps; ++j) {
      const double x = 0.5 + 0.5 * i / kSteps, y = 0.5 + 0.5 * j / kSteps;
      for (int s = -6; s <= 6; ++s)
        for (int t = -6; t <= 6; ++t) {
          const double x2 = std::clamp(x + r * s / 6.0, 0.5, 1.0), y2 = std::clamp(y + r * t / 6.0, 0.5, 1.0);
          best = std::max({best, std::abs(x * y / (x2 * y2) - 1), std::abs(x2 * y2 / (x * y) - 1)});
        }
    }
  return best;
}

GapField<double> exact_gap(const CostModel<double>& c, const DiscreteMeasure<double>& mu,
                           const DiscreteMeasure<double>& nu) {
  const Matrix C = cost_matrix(c, mu, nu);
  return gap_field(C, solve_exact(C, mu, nu).duals);
}

}  // namespace

TEST_CASE("gap field of the canonical instance") {
  const Matrix C = mat2(0, 1, 1, 0);
  const auto s = solve_exact<double>(C, halves(), halves());
  const auto gf = gap_field(C, s.duals);
  CHECK((gf.E - C).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(gf.zero_set_mask(0, 0));
  CHECK_FALSE(gf.zero_set_mask(0, 1));

  auto shifted = s.duals;
  shifted.phi.array() += 0.7;
  shifted.psi.array() -= 0.7;
  CHECK((gap_field(C, shifted).E - gf.E).cwiseAbs().maxCoeff() <= 1e-12);

  DualPair<double> bad{vec({1.0, 0.0}), vec({0.0, 0.0})};
  CHECK_THROWS_AS(gap_field(C, bad), std::invalid_argument);
}

TEST_CASE("contact set covers every optimal support") {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 3 + trial % 6, m = 4 + trial % 5;
    const Matrix C = eotr::test::random_cost(n, m, rng);
    const Vector a = eotr::test::random_weights(n, rng), b = eotr::test::random_weights(m, rng);
    const auto s = solve_exact(C, a, b);
    const auto gf = gap_field(C, s.duals);
    CHECK(gf.E.minCoeff() >= 0.0);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (s.plan.matrix(i, j) > 1e-12) CHECK(gf.zero_set_mask(i, j));
  }
}

TEST_CASE("kappa") {
  const Box<double> unit = Box<double>::unit(2);
  CHECK(kappa(CostModel<double>::quadratic(2), unit, unit, 0.3) == 0.0);
  CHECK(kappa(CostModel<double>::bilinear(2), unit, unit, 0.3) == 0.0);

  const Box<double> box(vec({0.5}), vec({1.0}));
  const double k10 = kappa(x2y2(), box, box, 0.1), k05 = kappa(x2y2(), box, box, 0.05);
  const double k01 = kappa(x2y2(), box, box, 0.01);
  CHECK(k10 > k05);
  CHECK(k05 > k01);
  CHECK(k01 > 0.0);
  CHECK(k01 < 0.05);
  for (const double r : {0.1, 0.05}) {
    const double oracle = kappa_oracle(r);
    const double k = kappa(x2y2(), box, box, r);
    CHECK(k >= oracle / 1.05);
    CHECK(k <= 1.05 * oracle + 1e-12);
  }
  CHECK(kappa_oracle(0.1) == doctest::Approx(0.36 / 0.25 - 1).epsilon(1e-12));
  const Box<double> sym(vec({-1.0}), vec({1.0}));
  CHECK_THROWS_AS(kappa(x2y2(), sym, sym, 0.1), std::invalid_argument);
}

TEST_CASE("gap inequality on standard instances") {
  const auto mu = uniform_line(0, 1, 64), nu = uniform_line(0.2, 1.4, 64);
  for (const auto& c : {CostModel<double>::quadratic(1), CostModel<double>::bilinear(1)}) {
    const auto audit = gap_inequality_check(exact_gap(c, mu, nu), mu, nu, c, 0.25, 10000, 7);
    CHECK(audit.trials >= 10000);
    CHECK(audit.violations == 0);
    CHECK(audit.graph_violations == 0);
    CHECK(audit.kappa == 0.0);
  }
  const auto lo = uniform_line(0.5, 1, 48);
  const auto audit = gap_inequality_check(exact_gap(x2y2(), lo, lo), lo, lo, x2y2(), 0.1, 10000, 9);
  CHECK(audit.violations == 0);
  CHECK(audit.graph_violations == 0);
  CHECK(audit.kappa > 0.0);
}

TEST_CASE("Laplace integral") {
  const auto mu = uniform_line(0, 1, 512);
  const Matrix C = cost_matrix(CostModel<double>::abs(1), mu, mu);
  const auto gf = gap_field(C, DualPair<double>{Vector::Zero(512), Vector::Zero(512)});
  const double eps = 0.1;
  const double closed = 2 * eps * (1 - eps * (1 - std::exp(-1 / eps)));
  CHECK(closed == doctest::Approx(0.1800009).epsilon(1e-6));
  CHECK(laplace_integral(gf, mu.weights(), mu.weights(), eps) == doctest::Approx(closed).epsilon(0.01));
  CHECK(laplace_integral(gf, mu.weights(), mu.weights(), 1e8) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::exp(log_laplace_integral(gf, mu.weights(), mu.weights(), eps)) ==
        doctest::Approx(laplace_integral(gf, mu.weights(), mu.weights(), eps)).epsilon(1e-12));

  double previous = 0;
  for (const double e : log_ladder(1e-4, 10.0, 20)) {
    const double I = laplace_integral(gf, mu.weights(), mu.weights(), e);
    CHECK(I > 0.0);
    CHECK(I <= 1.0 + 1e-15);
    CHECK(I >= previous);
    previous = I;
  }

  GapField<double> lifted = gf;
  lifted.E.array() += 0.05;
  CHECK(laplace_integral(lifted, mu.weights(), mu.weights(), eps) <= std::exp(-0.05 / eps));
}

TEST_CASE("dual lower bound against Sinkhorn") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 8; ++trial) {
    const Matrix C = eotr::test::random_cost(7, 9, rng);
    const Vector a = eotr::test::random_weights(7, rng), b = eotr::test::random_weights(9, rng);
    const auto s = solve_exact(C, a, b);
    const auto gf = gap_field(C, s.duals);
    for (const double eps : {0.01, 0.1, 1.0}) {
      const double v = solve_sinkhorn(C, a, b, eotr::test::tight(eps, 1e-12)).v_eps;
      CHECK(v >= s.value - eps * log_laplace_integral(gf, a, b, eps) - 1e-6);
    }
  }
}

TEST_CASE("Laplace slope on the line") {
  const auto mu = uniform_line(0, 1, 512);
  const auto q = CostModel<double>::quadratic(1);
  const auto gf = exact_gap(q, mu, mu);
  const auto fit = laplace_slope_fit(gf, mu.weights(), mu.weights(), log_ladder(std::pow(10.0 / 512, 2), 5e-2, 8));
  CHECK(fit.slope == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("Brenier map on the line") {
  const auto mu = uniform_line(0, 1, 50);
  const auto same = brenier_map_1d(mu, mu);
  for (Eigen::Index i = 0; i < mu.size(); ++i) CHECK(same[i] == mu.points()(i, 0));

  const auto shifted = brenier_map_1d(mu, uniform_line(0.25, 1.25, 50));
  for (Eigen::Index i = 0; i < mu.size(); ++i) CHECK(shifted[i] == doctest::Approx(mu.points()(i, 0) + 0.25));

  const auto stretched = brenier_map_1d(mu, uniform_line(0, 2, 50));
  for (Eigen::Index i = 0; i < mu.size(); ++i) CHECK(stretched[i] == doctest::Approx(2 * mu.points()(i, 0)));
}

TEST_CASE("stability metrics") {
  const Eigen::Index n = 64;
  const auto mu = uniform_line(0, 1, n);
  const auto T = brenier_map_1d(mu, mu);
  const auto product = Coupling<double>::product(mu.weights(), mu.weights());
  const auto far = stability_metrics(product, T, mu);
  // Twice the variance of the midpoint grid.
  CHECK(far.map_mse == doctest::Approx(1.0 / 6.0 - 1.0 / (6.0 * n * n)).epsilon(1e-12));
  CHECK(far.map_mse == doctest::Approx(1.0 / 6.0).epsilon(1e-3));
  CHECK(far.bary_mse <= far.map_mse);

  const Matrix C = cost_matrix(CostModel<double>::quadratic(1), mu, mu);
  double previous = far.map_mse;
  for (const double eps : {0.1, 0.01, 1e-3, 1e-5}) {
    const auto r = solve_sinkhorn(C, mu, mu, eotr::test::tight(eps, 1e-11));
    const auto s = stability_metrics(r.plan, T, mu);
    CHECK(s.bary_mse <= s.map_mse + 1e-12);
    CHECK(s.map_mse <= previous);
    previous = s.map_mse;
  }
  CHECK(previous <= 1e-6);
}

TEST_CASE("quadratic resolvent and detachment") {
  const Eigen::Index n = 64;
  const double h = 1.0 / n;
  const auto mu = uniform_line(0, 1, n);
  const Vector y = mu.points().col(0);

  for (const double z : {0.3, 0.8, 1.2})
    CHECK(std::abs(quadratic_resolvent<double>(y, Vector::Zero(n), z) - z / 2) <= h);

  const Matrix C = cost_matrix(CostModel<double>::quadratic(1), mu, mu);
  const auto flat = gap_field(C, DualPair<double>{Vector::Zero(n), Vector::Zero(n)});
  const auto audit = resolvent_detachment_check(flat, mu, mu, 0, 1);
  CHECK(audit.samples == n * n);
  CHECK(audit.violations == 0);

  const auto nu = uniform_line(0.25, 1.25, n);
  const Matrix D = cost_matrix(CostModel<double>::quadratic(1), mu, nu);
  const auto gf = gap_field(D, solve_exact(D, mu, nu).duals);
  const Vector yt = nu.points().col(0);
  for (const double z : {0.8, 1.2, 1.6})
    CHECK(std::abs(quadratic_resolvent(yt, gf.duals.psi, z) - (z - 0.25) / 2) <= h);
  const auto shifted = resolvent_detachment_check(gf, mu, nu, 1000, 3);
  CHECK(shifted.samples == 1000);
  CHECK(shifted.violations == 0);

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (gf.zero_set_mask(i, j)) {
        const double z = quadratic_resolvent(yt, gf.duals.psi, mu.points()(i, 0) + yt[j]);
        CHECK(std::abs(z - mu.points()(i, 0)) <= 1e-6);
      }
}
