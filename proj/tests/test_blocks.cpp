#include "doctest.h"
#include "support.hpp"

#include <map>
#include <random>

using namespace eotr;
using eotr::test::uniform_line;
using eotr::test::vec;

namespace {

// Grid entropy by direct counting of atoms per cell of side delta / sqrt(d)
// anchored at the lower corner of the support.
double counted_entropy(const DiscreteMeasure<double>& mu, double delta) {
  const double side = delta / std::sqrt(double(mu.dim()));
  const Vector lo = mu.lower_corner();
  std::map<std::vector<long long>, double> cells;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    std::vector<long long> key;
    for (Eigen::Index k = 0; k < mu.dim(); ++k)
      key.push_back(static_cast<long long>(std::floor((mu.points()(i, k) - lo[k]) / side + 1e-9)));
    cells[key] += mu.weight(i);
  }
  double h = 0;
  for (const auto& [key, m] : cells) h -= m * std::log(m);
  return h;
}

DiscreteMeasure<double> two_atoms() {
  Points p(2, 1);
  p << 0.0, 1.0;
  return DiscreteMeasure<double>(p, eotr::test::halves());
}

}  // namespace

TEST_CASE("grid entropy examples") {
  CHECK(grid_entropy(uniform_line(0, 1, 64), 0.125) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
  const auto atom = dirac<double>(vec({0.3, 0.4}));
  for (const double d : {1.0, 0.1, 1e-3}) CHECK(grid_entropy(atom, d) == 0.0);

  const auto diag = segment_measure<double>(vec({0, 0}), vec({1, 1}), 1024);
  const double h = grid_entropy(diag, 0.125);
  CHECK(h == doctest::Approx(counted_entropy(diag, 0.125)).epsilon(1e-12));
  CHECK(h > std::log(8.0));
  CHECK(h < std::log(16.0));
}

TEST_CASE("grid entropy is bounded by the log of the occupied cell count") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 50 + trial * 7;
    Points p(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) << u(rng), u(rng);
    const DiscreteMeasure<double> mu(p, eotr::test::random_weights(n, rng));
    for (const double delta : {0.05, 0.2, 0.7}) {
      const auto part = make_partition(mu, delta);
      CHECK(grid_entropy(part) <= std::log(double(part.cell_count())) + 1e-12);
      CHECK(std::abs(part.cell_masses.sum() - 1) <= 1e-12);
      CHECK(grid_entropy(part) == doctest::Approx(counted_entropy(mu, delta)).epsilon(1e-12));
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < 2; ++k) {
          const double t = (mu.points()(i, k) - part.anchor[k]) / part.side;
          CHECK(t >= -1e-9);
        }
    }
  }
}

TEST_CASE("entropy dimensions") {
  auto ladder = [](double lo, double hi) { return log_ladder(lo, hi, 12); };
  CHECK(entropy_dimension_fit(uniform_line(0, 1, 4096), ladder(1.0 / 1024, 0.5)).fitted_dim ==
        doctest::Approx(1.0).epsilon(0.1));
  CHECK(entropy_dimension_fit(eotr::test::uniform_square(128), ladder(1.0 / 32, 0.5)).fitted_dim ==
        doctest::Approx(2.0).epsilon(0.05));
  const auto seg = segment_measure<double>(vec({0, 0}), vec({1, 1}), 4096);
  CHECK(entropy_dimension_fit(seg, ladder(1e-3, 0.5)).fitted_dim == doctest::Approx(1.0).epsilon(0.1));
  const auto atom = entropy_dimension_fit(dirac<double>(vec({0.5})), ladder(1e-3, 0.5));
  CHECK(atom.fitted_dim == 0.0);
  for (const double h : atom.H_values) CHECK(h == 0.0);

  const auto profile = entropy_dimension_fit(uniform_line(0, 1, 512), ladder(1e-3, 0.5));
  for (std::size_t k = 1; k < profile.H_values.size(); ++k)
    CHECK(profile.H_values[k] >= profile.H_values[k - 1] - 1e-12);
}

TEST_CASE("block approximation limits") {
  std::mt19937_64 rng(59);
  const auto mu = uniform_line(0, 1, 16), nu = uniform_line(0, 2, 16);
  const Matrix C = cost_matrix(CostModel<double>::quadratic(1), mu, nu);
  const auto gamma0 = solve_exact(C, mu, nu).plan;

  const auto fine = block_approximation(gamma0, make_partition(mu, 1e-3), make_partition(nu, 1e-3));
  CHECK((fine.matrix - gamma0.matrix).cwiseAbs().maxCoeff() <= 1e-15);

  const auto coarse = block_approximation(gamma0, make_partition(mu, 10.0), make_partition(nu, 10.0));
  CHECK((coarse.matrix - mu.weights() * nu.weights().transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(std::abs(coarse.entropy()) <= 1e-15);

  const auto atoms = two_atoms();
  const Coupling<double> diag{Matrix(Vector::Constant(2, 0.5).asDiagonal()), atoms.weights(), atoms.weights()};
  const auto part = make_partition(atoms, 0.5);
  REQUIRE(part.cell_count() == 2);
  const auto same = block_approximation(diag, part, part);
  CHECK(same.matrix == diag.matrix);
  CHECK(same.entropy() == doctest::Approx(std::log(2.0)));
  CHECK(same.entropy() == doctest::Approx(grid_entropy(part)));
}

TEST_CASE("block approximation keeps marginals and entropy bounds") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 15; ++trial) {
    const Eigen::Index n = 20 + trial, m = 25 + 2 * trial;
    Points p(n, 2), q(m, 2);
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) << u(rng), u(rng);
    for (Eigen::Index j = 0; j < m; ++j) q.row(j) << u(rng), u(rng);
    const DiscreteMeasure<double> mu(p, eotr::test::random_weights(n, rng));
    const DiscreteMeasure<double> nu(q, eotr::test::random_weights(m, rng));
    const auto c = CostModel<double>::abs(2);
    const Matrix C = cost_matrix(c, mu, nu);
    const auto gamma0 = solve_exact(C, mu, nu).plan;
    for (const double delta : {0.1, 0.3}) {
      const auto pm = make_partition(mu, delta), pp = make_partition(nu, delta);
      const auto g = block_approximation(gamma0, pm, pp);
      CHECK(g.marginal_error() <= 1e-12);
      CHECK(g.entropy() <= std::min(grid_entropy(pm), grid_entropy(pp)) + 1e-12);
      const double eps = delta;
      const auto r = solve_sinkhorn(C, mu, nu, eotr::test::tight(eps, 1e-12));
      const auto bound = block_bound_check(C, gamma0, g, 1.0, delta, eps, r.v_eps);
      CHECK(bound.cost_slack >= -1e-9);
      CHECK(bound.entropic_slack >= -1e-8);
      CHECK(r.v_eps <= gamma0.cost(C) + eps * grid_entropy(pp) + 1.0 * eps + 1e-9);
    }
  }
}

TEST_CASE("block bound examples") {
  const auto mu = uniform_line(0, 1, 8);
  const auto c = CostModel<double>::abs(1);
  const Matrix C = cost_matrix(c, mu, mu);
  const auto gamma0 = solve_exact(C, mu, mu).plan;
  const auto singleton = block_approximation(gamma0, make_partition(mu, 1e-3), make_partition(mu, 1e-3));
  const auto b = block_bound_check(C, gamma0, singleton, 1.0, 1e-3, 0.1, 0.0);
  CHECK(b.cost_slack == doctest::Approx(1e-3));

  const auto atoms = two_atoms();
  const Matrix D = cost_matrix(c, atoms, atoms);
  const Coupling<double> diag{Matrix(Vector::Constant(2, 0.5).asDiagonal()), atoms.weights(), atoms.weights()};
  const auto part = make_partition(atoms, 0.5);
  const auto same = block_approximation(diag, part, part);
  const double v = solve_sinkhorn(D, atoms, atoms, eotr::test::tight(0.1)).v_eps;
  const auto eq = block_bound_check(D, diag, same, 1.0, 0.5, 0.1, v);
  CHECK(v <= 0.1 * std::log(2.0));
  CHECK(eq.entropic_slack >= 0.0);

  const auto whole = block_approximation(gamma0, make_partition(mu, 10.0), make_partition(mu, 10.0));
  CHECK(whole.cost(C) - gamma0.cost(C) <= 1.0 * mu.diameter() + 1e-12);
}

TEST_CASE("Alexandrov scaling") {
  constexpr long N = 10000;
  const double h = 2.0 / N;
  std::vector<double> x(N), fabs(N), sabs(N), fsq(N), ssq(N), faff(N), saff(N);
  for (long k = 0; k < N; ++k) {
    x[k] = -1 + (k + 0.5) * h;
    fabs[k] = std::abs(x[k]);
    sabs[k] = x[k] > 0 ? 1.0 : -1.0;
    fsq[k] = x[k] * x[k] / 2;
    ssq[k] = x[k];
    faff[k] = 0.5 * x[k] + 0.25;
    saff[k] = 0.5;
  }
  const auto radii = log_ladder(4 * h, 0.1, 8);
  const auto kink = alexandrov_scaling_check(x, fabs, sabs, radii);
  CHECK(kink.exponent == doctest::Approx(2.0).epsilon(0.025));
  CHECK_FALSE(kink.exact_zero);
  for (std::size_t k = 0; k < radii.size(); ++k)
    CHECK(kink.L_values[k] == doctest::Approx(2 * radii[k] * radii[k]).epsilon(0.25));
  const auto smooth = alexandrov_scaling_check(x, fsq, ssq, radii);
  CHECK(smooth.exponent == doctest::Approx(2.0).epsilon(0.025));
  const auto flat = alexandrov_scaling_check(x, faff, saff, radii);
  CHECK(flat.exact_zero);
  CHECK_THROWS_AS(alexandrov_scaling_check(x, fabs, sabs, std::vector<double>{h, 0.1}), std::invalid_argument);
}
