#include "survexplain/cox.hpp"
#include "survexplain/estimators.hpp"
#include "survexplain/rsf.hpp"
#include "survexplain/serialize.hpp"

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>

using namespace survexplain;
using survexplain::testing::make_dataset;

TEST_CASE("cox: symmetric groups give a zero coefficient") {
  // identical event patterns in both feature groups
  std::vector<double> x, time;
  std::vector<int> event;
  for (double group : {0.0, 1.0}) {
    for (int i = 0; i < 5; ++i) {
      x.push_back(group);
      time.push_back(i + 1.0);
      event.push_back(i < 4 ? 1 : 0);
    }
  }
  auto model = fit_cox(make_dataset({x}, time, event));
  CHECK(std::fabs(model.coefficients()(0)) <= 1e-6);
}

TEST_CASE("cox: recovers simulation truth and zeroes the score") {
  SyntheticSpec spec;
  spec.n = 2000;
  spec.p = 2;
  spec.coefficients = {1.0, -0.5};
  spec.censoring_rate = 0.3;
  spec.seed = 31;
  auto data = generate_synthetic(spec);
  auto model = fit_cox(data);
  CHECK(std::fabs(model.coefficients()(0) - 1.0) <= 0.1);
  CHECK(std::fabs(model.coefficients()(1) + 0.5) <= 0.1);
  CHECK(model.fit_report().gradient_norm <= 1e-9);

  // central finite differences of the partial likelihood at the solution
  Encoding enc = make_encoding(data.schema(), true);
  Eigen::MatrixXd x = enc.apply(data.features());
  const double h = 1e-5;
  for (Eigen::Index j = 0; j < model.coefficients().size(); ++j) {
    Eigen::VectorXd hi = model.coefficients(), lo = model.coefficients();
    hi(j) += h;
    lo(j) -= h;
    double g = (cox_log_partial_likelihood(x, data.time(), data.event(), hi) -
                cox_log_partial_likelihood(x, data.time(), data.event(), lo)) /
               (2 * h);
    CHECK(std::fabs(g) <= 1e-4);
  }
}

TEST_CASE("cox: prediction identities") {
  SyntheticSpec spec;
  spec.n = 300;
  spec.p = 2;
  spec.coefficients = {0.8, -0.4};
  spec.censoring_rate = 0.2;
  spec.seed = 7;
  auto data = generate_synthetic(spec);
  auto model = fit_cox(data);
  TimeGrid grid = unique_event_times(data);

  // zero linear predictor reproduces exp(-H0)
  FeatureTable zero(data.schema(), 1);
  auto curve = model.predict_survival(zero, 0, model.baseline_chf().grid());
  for (std::size_t s = 0; s < curve.size(); ++s)
    CHECK(curve.values()[s] ==
          doctest::Approx(std::exp(-model.baseline_chf().values()[s])).epsilon(1e-12));

  // log-CHF differences equal the linear predictor gap exactly
  FeatureTable pair(data.schema(), 2);
  pair.set(0, 0, 0.3); pair.set(0, 1, -1.0);
  pair.set(1, 0, 1.1); pair.set(1, 1, 0.4);
  Eigen::MatrixXd chf = model.predict_chf_matrix(pair, grid);
  double gap = model.linear_predictor(pair, 1) - model.linear_predictor(pair, 0);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    double observed = std::log(chf(1, static_cast<Eigen::Index>(s))) -
                      std::log(chf(0, static_cast<Eigen::Index>(s)));
    CHECK(observed == doctest::Approx(gap).epsilon(1e-10));
  }

  // higher risk is pointwise lower survival
  Eigen::MatrixXd surv = model.predict_survival_matrix(pair, grid);
  bool higher = model.linear_predictor(pair, 1) > model.linear_predictor(pair, 0);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (higher)
      CHECK(surv(1, static_cast<Eigen::Index>(s)) <= surv(0, static_cast<Eigen::Index>(s)));
  }

  // surface rows equal single-row predictions exactly
  Eigen::MatrixXd surface = model.predict_surface(pair, grid).values;
  auto row1 = model.predict_survival(pair, 1, grid);
  for (std::size_t s = 0; s < grid.size(); ++s)
    CHECK(surface(1, static_cast<Eigen::Index>(s)) == row1.values()[s]);
}

TEST_CASE("cox: rescaling a feature rescales its coefficient") {
  SyntheticSpec spec;
  spec.n = 500;
  spec.p = 2;
  spec.coefficients = {0.6, -0.3};
  spec.censoring_rate = 0.2;
  spec.seed = 13;
  auto data = generate_synthetic(spec);
  auto base = fit_cox(data);

  const double a = 10.0;
  FeatureTable scaled = data.features();
  for (std::size_t i = 0; i < scaled.n_rows(); ++i) scaled.set(i, 0, a * scaled.get(i, 0));
  auto rescaled =
      fit_cox(SurvivalDataset(scaled, data.time(), data.event()));
  CHECK(rescaled.coefficients()(0) == doctest::Approx(base.coefficients()(0) / a).epsilon(1e-6));
  CHECK(rescaled.coefficients()(1) == doctest::Approx(base.coefficients()(1)).epsilon(1e-6));
}

TEST_CASE("cox: error paths") {
  // duplicated column is rank-deficient on the event subset
  std::vector<double> x = {0.1, 0.7, -0.4, 1.2, 0.5, -0.9};
  auto dup = make_dataset({x, x}, {1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 0, 0});
  CHECK_THROWS_WITH_AS(fit_cox(dup), doctest::Contains("rank-deficient"),
                       std::invalid_argument);

  // perfect separation on a tiny-scale feature forces the coefficient out
  // past the divergence guard before the score can flatten
  auto separated = make_dataset({{0, 0, 0, 0.1, 0.1, 0.1}}, {1, 2, 3, 10, 11, 12},
                                {1, 1, 1, 1, 1, 1});
  CHECK_THROWS_WITH_AS(fit_cox(separated), doctest::Contains("monotone likelihood"),
                       std::runtime_error);

  auto no_events = make_dataset({1, 2}, {0, 0});
  CHECK_THROWS(fit_cox(no_events));
}

TEST_CASE("cox: unknown categorical level is rejected at prediction") {
  FeatureSchema schema;
  schema.columns.push_back({"group", ColumnType::categorical, {"a", "b"}});
  FeatureTable table(schema, 6);
  std::vector<double> time{1, 2, 3, 4, 5, 6};
  std::vector<int> event{1, 1, 0, 1, 1, 0};
  for (std::size_t i = 0; i < 6; ++i) table.set(i, 0, i % 2 == 0 ? 0.0 : 1.0);
  auto model = fit_cox(SurvivalDataset(table, time, event));

  FeatureSchema wider = schema;
  wider.columns[0].levels.push_back("c");
  FeatureTable bad(wider, 1);
  bad.set(0, 0, 2.0);  // level "c", unseen at fit time
  TimeGrid grid({1.0});
  CHECK_THROWS(model.predict_survival_matrix(bad, grid));
}

TEST_CASE("cox: json round trip preserves predictions") {
  SyntheticSpec spec;
  spec.n = 200;
  spec.p = 2;
  spec.coefficients = {0.5, 0.5};
  spec.censoring_rate = 0.1;
  spec.seed = 3;
  auto data = generate_synthetic(spec);
  auto model = fit_cox(data);
  auto restored = cox_from_json(cox_to_json(model));
  TimeGrid grid = unique_event_times(data);
  Eigen::MatrixXd a = model.predict_survival_matrix(data.features(), grid);
  Eigen::MatrixXd b = restored.predict_survival_matrix(data.features(), grid);
  CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("rsf: single full-sample root reproduces the training estimator") {
  auto data = testing::binary_hazard_dataset(60, 2.0, 40.0, 17);
  RSFConfig config;
  config.n_trees = 1;
  config.min_node_size = data.n_rows();
  config.bootstrap = false;
  config.seed = 1;
  auto model = fit_rsf(data, config);

  auto na = nelson_aalen(data);
  FeatureTable probe(data.schema(), 1);
  probe.set(0, 0, 1.0);
  auto chf = model.ensemble_chf(probe, 0);
  REQUIRE(model.forest_grid().points() == na.grid().points());
  for (std::size_t s = 0; s < na.size(); ++s)
    CHECK(chf[s] == doctest::Approx(na.values()[s]).epsilon(1e-12));
}

TEST_CASE("rsf: out-of-bag concordance separates signal from noise") {
  // pure noise: OOB concordance hovers around one half
  double noise_acc = 0.0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    SyntheticSpec spec;
    spec.n = 200;
    spec.p = 3;
    spec.coefficients = {0.0, 0.0, 0.0};
    spec.censoring_rate = 0.2;
    spec.seed = seed;
    auto data = generate_synthetic(spec);
    RSFConfig config;
    config.n_trees = 40;
    config.seed = seed;
    auto model = fit_rsf(data, config);
    REQUIRE(model.fit_report().has_oob);
    noise_acc += model.fit_report().oob_cindex;
  }
  double noise_mean = noise_acc / 5.0;
  CHECK(noise_mean >= 0.45);
  CHECK(noise_mean <= 0.55);

  // one strongly prognostic binary feature, hazard ratio 4; with half-credit
  // ties on same-group pairs the concordance ceiling sits near 0.65
  auto data = testing::binary_hazard_dataset(400, 4.0, 60.0, 23);
  RSFConfig config;
  config.n_trees = 50;
  config.seed = 2;
  auto model = fit_rsf(data, config);
  REQUIRE(model.fit_report().has_oob);
  CHECK(model.fit_report().oob_cindex >= 0.6);
}

TEST_CASE("rsf: hand-built forests average terminal curves") {
  FeatureSchema schema;
  schema.columns.push_back({"x1", ColumnType::numeric, {}});
  TimeGrid grid({1.0, 2.0});

  RSFTree t1, t2;
  RSFNode leaf1;
  leaf1.chf = {0.2, 0.6};
  t1.nodes.push_back(leaf1);
  RSFNode leaf2;
  leaf2.chf = {0.4, 1.0};
  t2.nodes.push_back(leaf2);

  RSFConfig config;
  config.n_trees = 2;
  RSFModel pair(schema, grid, {t1, t2}, config);
  FeatureTable probe(schema, 1);
  probe.set(0, 0, 3.0);
  auto chf = pair.ensemble_chf(probe, 0);
  CHECK(chf[0] == doctest::Approx(0.3));
  CHECK(chf[1] == doctest::Approx(0.8));

  // single tree passes its curve through untouched and stays nonnegative
  RSFModel single(schema, grid, {t1}, config);
  auto one = single.ensemble_chf(probe, 0);
  CHECK(one == leaf1.chf);
  for (double v : one) CHECK(v >= 0.0);
}

TEST_CASE("rsf: fits are invariant to training row order") {
  auto data = testing::binary_hazard_dataset(120, 3.0, 50.0, 5);
  std::vector<std::size_t> reversed(data.n_rows());
  for (std::size_t i = 0; i < data.n_rows(); ++i) reversed[i] = data.n_rows() - 1 - i;
  auto shuffled = data.select_rows(reversed);

  RSFConfig config;
  config.n_trees = 10;
  config.min_node_size = 10;
  config.seed = 99;
  auto a = fit_rsf(data, config);
  auto b = fit_rsf(shuffled, config);

  TimeGrid grid = unique_event_times(data);
  FeatureTable probe(data.schema(), 2);
  probe.set(0, 0, 0.0);
  probe.set(1, 0, 1.0);
  Eigen::MatrixXd pa = a.predict_chf_matrix(probe, grid);
  Eigen::MatrixXd pb = b.predict_chf_matrix(probe, grid);
  CHECK((pa - pb).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("rsf: json round trip preserves predictions") {
  auto data = testing::binary_hazard_dataset(100, 3.0, 50.0, 8);
  RSFConfig config;
  config.n_trees = 5;
  config.min_node_size = 10;
  config.seed = 4;
  auto model = fit_rsf(data, config);
  auto restored = rsf_from_json(rsf_to_json(model));
  TimeGrid grid = unique_event_times(data);
  Eigen::MatrixXd a = model.predict_chf_matrix(data.features(), grid);
  Eigen::MatrixXd b = restored.predict_chf_matrix(data.features(), grid);
  CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("rsf: categorical splits and unknown level errors") {
  FeatureSchema schema;
  schema.columns.push_back({"group", ColumnType::categorical, {"a", "b", "c"}});
  std::size_t n = 90;
  FeatureTable table(schema, n);
  std::vector<double> time(n);
  std::vector<int> event(n, 1);
  Rng rng(11);
  for (std::size_t i = 0; i < n; ++i) {
    double level = static_cast<double>(i % 3);
    table.set(i, 0, level);
    double rate = level == 2.0 ? 0.5 : 0.05;  // level c fails much faster
    time[i] = -std::log(rng.uniform()) / rate;
  }
  auto data = SurvivalDataset(table, time, event);
  RSFConfig config;
  config.n_trees = 20;
  config.min_node_size = 5;
  config.seed = 3;
  auto model = fit_rsf(data, config);

  TimeGrid grid = unique_event_times(data);
  FeatureTable probe(schema, 2);
  probe.set(0, 0, 2.0);  // "c"
  probe.set(1, 0, 0.0);  // "a"
  Eigen::MatrixXd chf = model.predict_chf_matrix(probe, grid);
  // the fast-failing level accumulates more hazard by the end of the grid
  CHECK(chf(0, static_cast<Eigen::Index>(grid.size() - 1)) >
        chf(1, static_cast<Eigen::Index>(grid.size() - 1)));

  FeatureSchema wider = schema;
  wider.columns[0].levels.push_back("d");
  FeatureTable bad(wider, 1);
  bad.set(0, 0, 3.0);
  CHECK_THROWS(model.predict_chf_matrix(bad, grid));
}
