#include "doctest.h"
#include "support.hpp"

using namespace eotr;

namespace {

std::vector<SweepRow<double>> synthetic(double a, double b, const std::vector<double>& ladder) {
  std::vector<SweepRow<double>> rows;
  for (const double e : ladder) {
    SweepRow<double> r;
    r.epsilon = e;
    r.gap = a * e * std::log(1 / e) + b * e;
    r.v_eps = r.gap;
    r.converged = true;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("exact basis recovery") {
  const auto ladder = log_ladder(1e-3, 1e-1, 8);
  const auto fit = fit_rate(synthetic(0.5, 3.0, ladder));
  CHECK(std::abs(fit.a - 0.5) <= 1e-10 * 0.5);
  CHECK(std::abs(fit.b - 3.0) <= 1e-10 * 3.0);
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK(fit.rows_used == 8);
  CHECK(fit.residual_max <= 1e-14);

  const auto linear = fit_rate(synthetic(0.0, 1.0, ladder));
  CHECK(std::abs(linear.a) <= 1e-12);
  CHECK(std::abs(linear.b - 1.0) <= 1e-10);
}

TEST_CASE("fit windows and degenerate designs") {
  const auto rows = synthetic(1.0, -2.0, log_ladder(1e-4, 1.0, 12));
  const auto windowed = fit_rate(rows, 1e-3, 1e-1);
  CHECK(windowed.rows_used < rows.size());
  CHECK(windowed.window_lo == 1e-3);
  CHECK(windowed.a == doctest::Approx(1.0));

  CHECK_THROWS_AS(fit_rate(synthetic(1.0, 1.0, {0.1, 0.05, 0.02})), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate(synthetic(1.0, 1.0, {0.1, 0.1, 0.1, 0.1, 0.1})), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate(rows, 0.5, 0.6), std::invalid_argument);
}

TEST_CASE("shape report") {
  const auto concave = shape_report(synthetic(0.5, 1.0, log_ladder(1e-3, 1e-1, 10)));
  CHECK(concave.max_decrease < 0.0);
  CHECK(concave.max_second_difference < 0.0);

  auto bumpy = synthetic(0.5, 1.0, log_ladder(1e-3, 1e-1, 10));
  bumpy[4].v_eps += 1e-3;
  CHECK(shape_report(bumpy).max_second_difference > 0.0);
  bumpy[4].v_eps = bumpy[5].v_eps + 1.0;
  CHECK(shape_report(bumpy).max_decrease > 0.0);
}

TEST_CASE("sweeps run largest epsilon first and share v0") {
  const Matrix C = eotr::test::mat2(0, 1, 1, 0);
  const auto rows = sweep<double>(C, eotr::test::halves(), eotr::test::halves(), {0.1, 0.5, 0.25}, eotr::test::tight(1));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].epsilon == 0.5);
  CHECK(rows[2].epsilon == 0.1);
  for (const auto& r : rows) {
    CHECK(r.v0 == 0.0);
    CHECK(r.gap == r.v_eps);
    CHECK(r.gap >= 0.0);
  }
  CHECK_THROWS_AS(sweep<double>(C, eotr::test::halves(), eotr::test::halves(), {0.1, 0.1}, eotr::test::tight(1)),
                  std::invalid_argument);
}

TEST_CASE("debiased sweeps") {
  const auto mu = eotr::test::uniform_line(0, 1, 24);
  const auto c = CostModel<double>::quadratic(1);
  const auto ladder = log_ladder(0.01, 0.1, 6);
  const auto rows = debiased_sweep(c, mu, mu, 0.0, ladder, eotr::test::tight(1, 1e-12));
  for (const auto& r : rows) {
    CHECK(r.v_eps == 0.0);
    CHECK(r.converged);
  }
  const auto fit = fit_rate(rows);
  CHECK(fit.a == 0.0);
  CHECK(fit.b == 0.0);

  auto shorter = rows;
  shorter.pop_back();
  CHECK_THROWS_AS(combine_divergence(rows, shorter, rows, 0.0), std::invalid_argument);
  auto moved = rows;
  moved[0].epsilon *= 2;
  CHECK_THROWS_AS(combine_divergence(rows, moved, rows, 0.0), std::invalid_argument);
}
