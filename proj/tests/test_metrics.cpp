#include <doctest.h>

#include <cmath>
#include <vector>

#include "heatrec/metrics.hpp"
#include "oracles.hpp"

using namespace heatrec;

TEST_CASE("hand-worked accuracy numbers on one small field") {
  Grid64 pred(2, 2), label(2, 2);
  pred << 1.0, 2.0, 3.0, 4.0;
  label << 1.0, 3.0, 2.0, 6.0;
  const auto rec = compute_metrics<double>({pred}, {label});

  // residuals 0, 1, -1, 2
  CHECK(rec.mae_avg == doctest::Approx(1.0));
  CHECK(rec.rmse_avg == doctest::Approx(std::sqrt(1.5)));
  CHECK(rec.mre_avg ==
        doctest::Approx((0.0 + 1.0 / 3.0 + 0.5 + 2.0 / 6.0) / 4.0));
  // label mean 3, total variation 14, residual power 6
  CHECK(rec.r2_avg == doctest::Approx(1.0 - 6.0 / 14.0));
  CHECK(rec.n_test == 1);
}

TEST_CASE("metrics average per sample, not over the pooled cell set") {
  // one perfect sample and one poor one on different value scales
  Grid64 l1 = Grid64::Constant(2, 2, 300.0);
  l1(0, 0) = 310.0;
  Grid64 p1 = l1;
  Grid64 l2 = l1 * 2.0;
  Grid64 p2 = l2;
  p2.array() += 4.0;

  const auto rec = compute_metrics<double>({p1, p2}, {l1, l2});
  CHECK(rec.n_test == 2);
  CHECK(rec.mae_avg == doctest::Approx(0.5 * (0.0 + 4.0)));
  CHECK(rec.rmse_avg == doctest::Approx(0.5 * (0.0 + 4.0)));
  // sample 1 is exact (R^2 = 1); sample 2 misses by a constant
  const double denom2 = (l2.array() - l2.mean()).square().sum();
  const double expect_r2 = 0.5 * (1.0 + (1.0 - 16.0 * 4.0 / denom2));
  CHECK(rec.r2_avg == doctest::Approx(expect_r2));
}

TEST_CASE("perfect reconstruction scores zero error and unit fit") {
  Rng rng(3);
  std::vector<Grid64> fields;
  for (int i = 0; i < 4; ++i)
    fields.push_back(oracles::random_field(rng, 5, 5, 300.0, 340.0));
  const auto rec = compute_metrics<double>(fields, fields);
  CHECK(rec.mae_avg == 0.0);
  CHECK(rec.rmse_avg == 0.0);
  CHECK(rec.mre_avg == 0.0);
  CHECK(rec.r2_avg == doctest::Approx(1.0));
}

TEST_CASE("error scale-equivariance of MAE and RMSE") {
  Rng rng(9);
  const Grid64 label = oracles::random_field(rng, 6, 6, 300.0, 330.0);
  Grid64 noise = oracles::random_field(rng, 6, 6, -1.0, 1.0);
  const Grid64 p1 = label + noise;
  const Grid64 p3 = label + 3.0 * noise;
  const auto r1 = compute_metrics<double>({p1}, {label});
  const auto r3 = compute_metrics<double>({p3}, {label});
  CHECK(r3.mae_avg == doctest::Approx(3.0 * r1.mae_avg));
  CHECK(r3.rmse_avg == doctest::Approx(3.0 * r1.rmse_avg));
  CHECK(r3.r2_avg < r1.r2_avg);
}

TEST_CASE("the alternative pooled baseline is a different statistic") {
  // two samples whose true fields differ; the pooled predicted mean is a
  // worse baseline for each, so the denominator grows
  Grid64 l1(2, 2), l2(2, 2);
  l1 << 300.0, 301.0, 302.0, 303.0;
  l2 << 320.0, 321.0, 322.0, 323.0;
  Grid64 p1 = l1, p2 = l2;
  p1.array() += 1.0;
  p2.array() -= 1.0;

  const auto std_r2 =
      compute_metrics<double>({p1, p2}, {l1, l2}, R2Baseline::true_sample_mean);
  const auto alt_r2 =
      compute_metrics<double>({p1, p2}, {l1, l2}, R2Baseline::pooled_pred_mean);

  // by hand for the alternative: pooled pred = mean(p1, p2) elementwise
  const Grid64 pooled = 0.5 * (p1 + p2);
  double expect = 0.0;
  expect += 1.0 - 4.0 / (l1 - pooled).array().square().sum();
  expect += 1.0 - 4.0 / (l2 - pooled).array().square().sum();
  expect *= 0.5;
  CHECK(alt_r2.r2_avg == doctest::Approx(expect));
  CHECK(alt_r2.r2_avg != doctest::Approx(std_r2.r2_avg));
  // identical error metrics either way
  CHECK(alt_r2.mae_avg == doctest::Approx(std_r2.mae_avg));
}

TEST_CASE("degenerate inputs carry precise diagnostics") {
  const Grid64 flat = Grid64::Constant(3, 3, 300.0);
  CHECK_THROWS_AS(compute_metrics<double>({flat}, {flat}), DomainError);

  Grid64 label = Grid64::Constant(3, 3, 300.0);
  label(1, 1) = 0.0;  // relative error undefined here
  const Grid64 pred = Grid64::Constant(3, 3, 299.0);
  CHECK_THROWS_WITH_AS(compute_metrics<double>({pred}, {label}),
                       doctest::Contains("non-positive label"), DomainError);

  CHECK_THROWS_AS(compute_metrics<double>({}, {}), DomainError);
  CHECK_THROWS_AS(compute_metrics<double>({flat}, {flat, flat}), DomainError);
  const Grid64 small = Grid64::Zero(2, 2);
  CHECK_THROWS_AS(compute_metrics<double>({small}, {flat}), DomainError);
}

TEST_CASE("records serialize every field") {
  MetricsRecord rec;
  rec.mae_avg = 0.5;
  rec.rmse_avg = 0.7;
  rec.mre_avg = 0.001;
  rec.r2_avg = 0.99;
  rec.n_test = 200;
  const auto j = rec.to_json();
  CHECK(j.at("mae_avg").get<double>() == 0.5);
  CHECK(j.at("rmse_avg").get<double>() == 0.7);
  CHECK(j.at("mre_avg").get<double>() == 0.001);
  CHECK(j.at("r2_avg").get<double>() == 0.99);
  CHECK(j.at("n_test").get<int>() == 200);
}
