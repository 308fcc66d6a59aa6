#include <doctest.h>

#include <cmath>

#include "spcpool/charts.hpp"
#include "spcpool/errors.hpp"
#include "test_support.hpp"

using namespace spcpool;
using testsup::standard_normal;
using testsup::vec;

TEST_CASE("ir_chart limits from an alternating series") {
  auto chart = ir_chart(vec({1, 2, 1, 2, 1, 2}));
  CHECK(chart.limits.center_line == doctest::Approx(1.5));
  CHECK(chart.limits.mr_bar == doctest::Approx(1.0));
  CHECK(chart.limits.ucl == doctest::Approx(4.16));
  CHECK(chart.limits.lcl == doctest::Approx(-1.16));
  CHECK(chart.limits.mr_ucl == doctest::Approx(3.267));
  CHECK_FALSE(chart.any_flag());
  CHECK(chart.moving_ranges.size() == chart.values.size() - 1);
}

TEST_CASE("ir_chart degenerate and short inputs") {
  CHECK_THROWS_AS(ir_chart(vec({5, 5, 5, 5})), DegenerateLimitsError);
  CHECK_THROWS_AS(ir_chart(vec({1, 2})), InsufficientDataError);
  // Frozen limits allow any length >= 1.
  IrLimits frozen{0.0, -3.0, 3.0, 1.0, 3.267};
  auto chart = ir_chart(vec({5.0}), frozen);
  REQUIRE(chart.flags.size() == 1);
  CHECK(chart.flags[0]);
}

TEST_CASE("ir flags: strict outside, both sides, moving range") {
  IrLimits frozen{0.0, -3.0, 3.0, 1.128, 3.685};
  auto chart = ir_chart(vec({0, 3.0, -3.0, 3.01, -3.01, 0}), frozen);
  CHECK_FALSE(chart.flags[1]);  // on the limit is in control
  CHECK_FALSE(chart.flags[2]);
  CHECK(chart.flags[3]);
  CHECK(chart.flags[4]);
  // |(-3.01) - 3.01| = 6.02 > mr_ucl
  CHECK(chart.mr_flags[3]);
  CHECK(chart.any_flag());
  CHECK(chart.any_individual_flag());
}

TEST_CASE("ir flags invariant under joint affine transform") {
  spcpool::Rng rng(17);
  Eigen::VectorXd series(120);
  for (Eigen::Index i = 0; i < series.size(); ++i) series[i] = rng.normal(10.0, 2.0);
  auto base = ir_chart(series);

  double a = -2.5, b = 40.0;
  Eigen::VectorXd scaled = a * series.array() + b;
  // Transform the limits alongside; a < 0 swaps UCL/LCL.
  IrLimits lim;
  lim.center_line = a * base.limits.center_line + b;
  lim.ucl = std::max(a * base.limits.ucl + b, a * base.limits.lcl + b);
  lim.lcl = std::min(a * base.limits.ucl + b, a * base.limits.lcl + b);
  lim.mr_bar = std::abs(a) * base.limits.mr_bar;
  lim.mr_ucl = std::abs(a) * base.limits.mr_ucl;
  auto transformed = ir_chart(scaled, lim);
  CHECK(transformed.flags == base.flags);
  CHECK(transformed.mr_flags == base.mr_flags);
}

TEST_CASE("ewma recursion examples") {
  auto chart = ewma_chart(vec({0.0, 1.0}), 0.2, 3.0, EwmaParams{0.5, 1.0});
  REQUIRE(chart.z.size() == 2);
  CHECK(chart.z[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(chart.z[1] == doctest::Approx(0.52).epsilon(1e-12));

  auto flat = ewma_chart(vec({2.0, 2.0, 2.0, 2.0}), 0.2, 3.0, EwmaParams{2.0, 1.0});
  for (Eigen::Index i = 0; i < flat.z.size(); ++i) CHECK(flat.z[i] == doctest::Approx(2.0));
  CHECK_FALSE(flat.any_flag());
}

TEST_CASE("ewma asymptotic half-width and monotone limit growth") {
  auto chart = ewma_chart(standard_normal(200, 3), 0.2, 3.0, EwmaParams{0.0, 1.0});
  // Half-width converges to L*sigma*sqrt(lambda/(2-lambda)) = 1.0 exactly.
  double asymptote = 3.0 * std::sqrt(0.2 / 1.8);
  CHECK(asymptote == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index i = 1; i < chart.z.size(); ++i)
    CHECK(chart.ucl[i] - chart.lcl[i] > chart.ucl[i - 1] - chart.lcl[i - 1] - 1e-15);
  for (Eigen::Index i = 100; i < chart.z.size(); ++i)
    CHECK(std::abs(chart.ucl[i] - 1.0) < 1e-9);
}

TEST_CASE("ewma recursion identity z_i - z_{i-1} = lambda (y_i - z_{i-1})") {
  auto ys = standard_normal(500, 4);
  auto chart = ewma_chart(ys, 0.2, 3.0);
  double prev = chart.z0;
  for (Eigen::Index i = 0; i < ys.size(); ++i) {
    CHECK(chart.z[i] - prev == doctest::Approx(0.2 * (ys[i] - prev)).epsilon(1e-12));
    prev = chart.z[i];
  }
  // Estimation mode: z0 is the series mean.
  CHECK(chart.z0 == doctest::Approx(ys.mean()));
}

TEST_CASE("ewma rejects bad lambda and constant estimation input") {
  CHECK_THROWS_AS(ewma_chart(vec({1, 2, 3}), 0.0), DomainError);
  CHECK_THROWS_AS(ewma_chart(vec({1, 2, 3}), 1.0), DomainError);
  CHECK_THROWS_AS(ewma_chart(vec({2, 2, 2, 2}), 0.2), DegenerateLimitsError);
  // Frozen parameters make constant series fine.
  CHECK_NOTHROW(ewma_chart(vec({2, 2, 2}), 0.2, 3.0, EwmaParams{2.0, 1.0}));
}

TEST_CASE("run_lengths bookkeeping") {
  auto s1 = run_lengths({false, false, true, false, true});
  CHECK(s1.run_lengths == std::vector<std::size_t>{3, 2});
  CHECK(s1.arl == doctest::Approx(2.5));
  CHECK(s1.n_signals == 2);
  CHECK_FALSE(s1.censored_tail.has_value());

  auto s2 = run_lengths({true});
  CHECK(s2.run_lengths == std::vector<std::size_t>{1});
  CHECK(s2.arl == doctest::Approx(1.0));

  auto s3 = run_lengths({false, false, false});
  CHECK(s3.n_signals == 0);
  CHECK_FALSE(s3.arl.has_value());
  CHECK(s3.censored_tail == 3);

  auto s4 = run_lengths({});
  CHECK(s4.n_signals == 0);
  CHECK_FALSE(s4.censored_tail.has_value());
}

TEST_CASE("frozen +-3 limits flag about 0.27% of iid normal draws") {
  // Smaller sibling of the acceptance oracle; keeps the unit suite quick.
  auto ys = standard_normal(300000, 20250809);
  IrLimits frozen{0.0, -3.0, 3.0, 1.128, 3.685};
  auto chart = ir_chart(ys, frozen);
  std::size_t flagged = 0;
  for (bool f : chart.flags) flagged += f;
  double fraction = static_cast<double>(flagged) / static_cast<double>(ys.size());
  CHECK(fraction == doctest::Approx(0.0027).epsilon(0.12));
}
