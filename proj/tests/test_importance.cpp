#include "survexplain/importance.hpp"

#include "survexplain/estimators.hpp"
#include "survexplain/stats.hpp"

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>
#include <numeric>

using namespace survexplain;
using survexplain::testing::AnalyticCoxModel;
using survexplain::testing::make_dataset;

namespace {

SurvivalDataset gaussian_data(std::size_t n, std::size_t p, const std::vector<double>& beta,
                              double censoring, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.p = p;
  spec.coefficients = beta;
  spec.censoring_rate = censoring;
  spec.seed = seed;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("pfi: constant columns score exactly zero") {
  auto base = gaussian_data(100, 2, {0.8, 0.0}, 0.2, 3);
  // append a constant third column
  FeatureSchema schema = base.schema();
  schema.columns.push_back({"x3", ColumnType::numeric, {}});
  FeatureTable table(schema, base.n_rows());
  for (std::size_t i = 0; i < base.n_rows(); ++i) {
    table.set(i, 0, base.features().get(i, 0));
    table.set(i, 1, base.features().get(i, 1));
    table.set(i, 2, 7.0);
  }
  SurvivalDataset data(table, base.time(), base.event());
  AnalyticCoxModel model({0.8, 0.0, 0.0}, 0.1);
  TimeGrid times = default_eval_grid(data);
  ImportanceOptions options;
  options.repeats = 3;
  options.seed = 11;
  auto result = pfi(model, data, default_brier_loss(), times, options);
  CHECK(result.features[2].aggregate == 0.0);
  for (double v : result.features[2].per_time) CHECK(v == 0.0);
}

TEST_CASE("pfi: zero-coefficient features are indistinguishable from zero") {
  auto data = gaussian_data(300, 3, {1.0, 0.0, -0.5}, 0.2, 7);
  AnalyticCoxModel model({1.0, 0.0, -0.5}, 0.1);
  TimeGrid times = default_eval_grid(data);
  ImportanceOptions options;
  options.repeats = 20;
  options.seed = 5;
  auto result = pfi(model, data, default_brier_loss(), times, options);

  const auto& null_feature = result.features[1];
  double mean = null_feature.aggregate;
  double var = 0.0;
  for (double s : null_feature.samples) var += (s - mean) * (s - mean);
  var /= static_cast<double>(null_feature.samples.size() - 1);
  double se = std::sqrt(var / static_cast<double>(null_feature.samples.size()));
  CHECK(std::fabs(mean) <= 2.0 * se + 1e-12);

  // the strongly prognostic feature is clearly positive
  const auto& strong = result.features[0];
  CHECK(strong.aggregate > 0.0);
  CHECK(strong.p_value < 0.01);
}

TEST_CASE("knockoffs: moment matching and near-independence for iid designs") {
  auto data = gaussian_data(5000, 3, {0.5, 0.5, 0.5}, 0.0, 13);
  auto knockoffs = sample_knockoffs(data, 21);
  for (std::size_t j = 0; j < 3; ++j) {
    double mx = 0, mk = 0;
    std::size_t n = data.n_rows();
    for (std::size_t i = 0; i < n; ++i) {
      mx += data.features().get(i, j);
      mk += knockoffs.features.get(i, j);
    }
    mx /= n;
    mk /= n;
    double vx = 0, vk = 0, cov = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double a = data.features().get(i, j) - mx;
      double b = knockoffs.features.get(i, j) - mk;
      vx += a * a;
      vk += b * b;
      cov += a * b;
    }
    double corr = cov / std::sqrt(vx * vk);
    CHECK(std::fabs(mk - mx) <= 0.05);
    CHECK(std::fabs(vk / n - vx / n) <= 0.1);
    // equicorrelated construction with lambda_min ~ 1 gives s ~ 1, so the
    // knockoff decorrelates from the original: max(0, 1 - 2s) ~ 0
    CHECK(std::fabs(corr) <= 0.05);
  }

  auto again = sample_knockoffs(data, 21);
  CHECK((again.encoded - knockoffs.encoded).lpNorm<Eigen::Infinity>() == 0.0);

  // single-column case degenerates to an independent matched-moment draw
  auto single = gaussian_data(4000, 1, {0.5}, 0.0, 17);
  auto k1 = sample_knockoffs(single, 9);
  double cov = 0, mx = 0, mk = 0;
  for (std::size_t i = 0; i < single.n_rows(); ++i) {
    mx += single.features().get(i, 0);
    mk += k1.features.get(i, 0);
  }
  mx /= single.n_rows();
  mk /= single.n_rows();
  for (std::size_t i = 0; i < single.n_rows(); ++i)
    cov += (single.features().get(i, 0) - mx) * (k1.features.get(i, 0) - mk);
  cov /= single.n_rows();
  CHECK(std::fabs(cov) <= 0.05);
}

TEST_CASE("cpi tracks pfi for independent features") {
  auto data = gaussian_data(300, 2, {0.9, -0.4}, 0.2, 29);
  AnalyticCoxModel model({0.9, -0.4}, 0.1);
  TimeGrid times = default_eval_grid(data);
  ImportanceOptions options;
  options.repeats = 10;
  options.seed = 3;
  auto p = pfi(model, data, default_brier_loss(), times, options);
  auto c = cpi(model, data, default_brier_loss(), times, options);

  for (std::size_t j = 0; j < 2; ++j) {
    double mean = p.features[j].aggregate;
    double var = 0.0;
    for (double s : p.features[j].samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(p.features[j].samples.size() - 1);
    double se = std::sqrt(var / static_cast<double>(p.features[j].samples.size()));
    CHECK(std::fabs(c.features[j].aggregate - mean) <= 4.0 * se + 1e-3);
  }
}

TEST_CASE("cpi collapses for duplicated features while pfi does not") {
  std::size_t wins = 0;
  std::vector<double> pfi_minus_cpi;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    // the outcome depends on x1; x2 is made an exact copy, and the model
    // splits the true effect across both copies
    auto base = gaussian_data(200, 3, {0.6, 0.0, 0.3}, 0.15, seed);
    FeatureTable table = base.features();
    for (std::size_t i = 0; i < table.n_rows(); ++i) table.set(i, 1, table.get(i, 0));
    SurvivalDataset data(table, base.time(), base.event());
    AnalyticCoxModel model({0.3, 0.3, 0.3}, 0.1);
    TimeGrid times = default_eval_grid(data);
    ImportanceOptions options;
    options.repeats = 5;
    options.seed = seed;
    auto p = pfi(model, data, default_brier_loss(), times, options);
    auto c = cpi(model, data, default_brier_loss(), times, options);
    pfi_minus_cpi.push_back(p.features[0].aggregate - c.features[0].aggregate);
    if (c.features[0].aggregate < p.features[0].aggregate) ++wins;
  }
  // paired one-sided test that PFI exceeds CPI on the duplicated feature
  double p_value = one_sided_p_value(pfi_minus_cpi);
  CHECK(p_value < 0.05);
  CHECK(wins >= 15);
}

TEST_CASE("cpi: constant features score zero") {
  auto base = gaussian_data(120, 2, {0.8, 0.0}, 0.1, 41);
  FeatureSchema schema = base.schema();
  schema.columns.push_back({"x3", ColumnType::numeric, {}});
  FeatureTable table(schema, base.n_rows());
  for (std::size_t i = 0; i < base.n_rows(); ++i) {
    table.set(i, 0, base.features().get(i, 0));
    table.set(i, 1, base.features().get(i, 1));
    table.set(i, 2, -2.5);
  }
  SurvivalDataset data(table, base.time(), base.event());
  AnalyticCoxModel model({0.8, 0.0, 0.0}, 0.1);
  TimeGrid times = default_eval_grid(data);
  ImportanceOptions options;
  options.repeats = 2;
  options.seed = 8;
  auto result = cpi(model, data, default_brier_loss(), times, options);
  CHECK(result.features[2].aggregate == 0.0);
}

TEST_CASE("loco: guards, irrelevant features and collinear copies") {
  auto lone = gaussian_data(60, 1, {0.5}, 0.1, 2);
  ModelSpec cox_spec;
  TimeGrid lone_times = default_eval_grid(lone);
  CHECK_THROWS(loco(cox_spec, lone, default_brier_loss(), lone_times));

  auto data = gaussian_data(500, 3, {0.9, -0.5, 0.0}, 0.2, 6);
  TimeGrid times = default_eval_grid(data);
  auto result = loco(cox_spec, data, default_brier_loss(), times);
  CHECK(std::fabs(result.features[2].aggregate) <= 0.01);
  CHECK(result.features[0].aggregate > result.features[2].aggregate);

  // nearly duplicated prognostic feature: dropping either copy costs nothing
  auto base = gaussian_data(400, 3, {0.8, 0.0, -0.4}, 0.2, 9);
  FeatureTable table = base.features();
  Rng rng(33);
  for (std::size_t i = 0; i < table.n_rows(); ++i)
    table.set(i, 1, table.get(i, 0) + 0.01 * rng.normal());
  SurvivalDataset collinear(table, base.time(), base.event());
  auto dup = loco(cox_spec, collinear, default_brier_loss(), default_eval_grid(collinear));
  CHECK(std::fabs(dup.features[0].aggregate) <= 0.01);
  CHECK(std::fabs(dup.features[1].aggregate) <= 0.01);
}

TEST_CASE("significance: sign test, t test and degenerate inputs") {
  ImportanceResult result;
  result.method = "pfi";
  result.times = TimeGrid({1.0});
  FeatureImportance zero;
  zero.feature = "a";
  zero.samples = {0.0, 0.0, 0.0, 0.0};
  result.features.push_back(zero);
  fi_significance(result);
  CHECK(result.features[0].p_value == doctest::Approx(1.0));

  // 30 strictly positive differences: sign test tail is 2^-30
  FeatureImportance monotone;
  monotone.feature = "b";
  for (int i = 1; i <= 30; ++i) monotone.samples.push_back(static_cast<double>(i));
  result.features[0] = monotone;
  fi_significance(result);
  CHECK(result.features[0].p_value < 1e-4);
}

TEST_CASE("student t survival function matches a quadrature oracle") {
  // adaptive Simpson on the t density, independent of the analytic route
  auto t_pdf = [](double x, double df) {
    double c = std::exp(std::lgamma((df + 1) / 2.0) - std::lgamma(df / 2.0)) /
               std::sqrt(df * 3.14159265358979323846);
    return c * std::pow(1.0 + x * x / df, -(df + 1) / 2.0);
  };
  std::function<double(double, double, double, double, double, int)> simpson =
      [&](double a, double b, double fa, double fb, double df, int depth) -> double {
    double m = 0.5 * (a + b);
    double fm = t_pdf(m, df);
    double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    if (depth <= 0) return whole;
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = t_pdf(lm, df), frm = t_pdf(rm, df);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (std::fabs(left + right - whole) < 1e-14) return left + right;
    return simpson(a, m, fa, fm, df, depth - 1) + simpson(m, b, fm, fb, df, depth - 1);
  };

  // by symmetry the survival function is one half minus the body integral,
  // which avoids truncating the polynomial tail
  auto oracle_sf = [&](double t, double df) {
    return 0.5 - simpson(0.0, t, t_pdf(0.0, df), t_pdf(t, df), df, 48);
  };
  for (double df : {4.0, 9.0, 29.0}) {
    for (double t : {0.5, 1.345, 2.7764}) {
      CHECK(student_t_sf(t, df) == doctest::Approx(oracle_sf(t, df)).epsilon(1e-10));
    }
  }

  // hand case: diffs (1.2, 0.8, 1.5, 0.9, 1.1) => t = mean / (sd / sqrt 5)
  std::vector<double> diffs{1.2, 0.8, 1.5, 0.9, 1.1};
  double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / 5.0;
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= 4.0;
  double t_stat = mean / std::sqrt(var / 5.0);
  CHECK(student_t_sf(t_stat, 4.0) == doctest::Approx(oracle_sf(t_stat, 4.0)).epsilon(1e-10));
}

TEST_CASE("difference and quotient modes are consistent") {
  auto data = gaussian_data(150, 2, {0.9, 0.0}, 0.2, 51);
  AnalyticCoxModel model({0.9, 0.0}, 0.1);
  TimeGrid times = default_eval_grid(data);
  ImportanceOptions diff_opts;
  diff_opts.repeats = 5;
  diff_opts.seed = 2;
  auto diff = pfi(model, data, default_brier_loss(), times, diff_opts);
  ImportanceOptions quot_opts = diff_opts;
  quot_opts.mode = ImportanceMode::quotient;
  auto quot = pfi(model, data, default_brier_loss(), times, quot_opts);
  for (std::size_t j = 0; j < 2; ++j) {
    if (diff.features[j].aggregate > 1e-12) CHECK(quot.features[j].aggregate > 1.0);
    if (quot.features[j].aggregate > 1.0 + 1e-12) CHECK(diff.features[j].aggregate > 0.0);
  }
}
