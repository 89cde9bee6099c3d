// Acceptance suite: one self-contained check per shipping criterion, each
// printed as a PASS/FAIL line. Exits nonzero if any criterion fails.

#include "survexplain/cli_run.hpp"
#include "survexplain/cox.hpp"
#include "survexplain/counterfactual.hpp"
#include "survexplain/effects.hpp"
#include "survexplain/estimators.hpp"
#include "survexplain/importance.hpp"
#include "survexplain/interactions.hpp"
#include "survexplain/metrics.hpp"
#include "survexplain/rsf.hpp"
#include "survexplain/serialize.hpp"
#include "survexplain/stats.hpp"
#include "survexplain/survlime.hpp"
#include "survexplain/survshap.hpp"

#include <json.hpp>

#include "helpers.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace survexplain;
using survexplain::testing::AnalyticCoxModel;
using survexplain::testing::MockModel;
using survexplain::testing::make_dataset;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Checker {
  bool ok = true;
  std::ostringstream detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      detail << (detail.tellp() > 0 ? "; " : "") << what;
    }
  }
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

SurvivalDataset synth(std::size_t n, const std::vector<double>& beta, double censoring,
                      std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.p = beta.size();
  spec.coefficients = beta;
  spec.censoring_rate = censoring;
  spec.seed = seed;
  return generate_synthetic(spec);
}

// ---- criterion 1: estimator oracles -------------------------------------

bool criterion_estimators(std::string& message) {
  Checker c;
  double start = now_seconds();

  auto data = make_dataset({1, 2, 3}, {1, 0, 1});
  auto km = kaplan_meier(data);
  c.require(std::fabs(km.values()[0] - 2.0 / 3.0) <= 1e-12, "KM step 1");
  c.require(std::fabs(km.values()[1] - 0.0) <= 1e-12, "KM step 2");
  auto na = nelson_aalen(data);
  c.require(std::fabs(na.values()[0] - 1.0 / 3.0) <= 1e-12, "NA step 1");
  c.require(std::fabs(na.values()[1] - (1.0 / 3.0 + 1.0)) <= 1e-12, "NA step 2");

  auto censored = make_dataset({1, 5, 6}, {0, 1, 0});
  c.require(std::fabs(kaplan_meier(censored).values()[0] - 0.5) <= 1e-12,
            "KM risk set with censoring");

  auto big = synth(200, {0.5, -0.5}, 0.2, 9);
  auto km2 = kaplan_meier(big);
  auto na2 = nelson_aalen(big);
  double sup = 0.0;
  for (std::size_t i = 0; i < km2.size(); ++i)
    sup = std::max(sup, std::fabs(km2.values()[i] - std::exp(-na2.values()[i])));
  c.require(sup <= 0.05, "exp(-NA) vs KM sup distance");

  double elapsed = now_seconds() - start;
  c.require(elapsed < 1.0, "runtime");
  message = c.detail.str();
  return c.ok;
}

// ---- criterion 2: cox recovery -------------------------------------------

bool criterion_cox(std::string& message) {
  Checker c;
  double start = now_seconds();

  std::vector<double> truth{1.0, -0.5, 0.25, 0.0, 0.75};
  auto data = synth(2000, truth, 0.3, 42);
  auto model = fit_cox(data);
  for (std::size_t j = 0; j < truth.size(); ++j)
    c.require(std::fabs(model.coefficients()(static_cast<Eigen::Index>(j)) - truth[j]) <= 0.1,
              "coefficient " + std::to_string(j + 1));

  Encoding enc = make_encoding(data.schema(), true);
  Eigen::MatrixXd x = enc.apply(data.features());
  const double h = 1e-5;
  double sup = 0.0;
  for (Eigen::Index j = 0; j < model.coefficients().size(); ++j) {
    Eigen::VectorXd hi = model.coefficients(), lo = model.coefficients();
    hi(j) += h;
    lo(j) -= h;
    double g = (cox_log_partial_likelihood(x, data.time(), data.event(), hi) -
                cox_log_partial_likelihood(x, data.time(), data.event(), lo)) /
               (2 * h);
    sup = std::max(sup, std::fabs(g));
  }
  c.require(sup <= 1e-4, "finite-difference score");

  double elapsed = now_seconds() - start;
  c.require(elapsed < 10.0, "runtime");
  message = c.detail.str();
  return c.ok;
}

// ---- criterion 3: effect identities ---------------------------------------

bool criterion_effects(std::string& message) {
  Checker c;
  auto data = synth(80, {0.7, -0.3, 0.2}, 0.2, 11);
  auto model = fit_cox(data);
  TimeGrid times = unique_event_times(data);
  auto grid = build_grid(data, "x1", GridKind::quantile, 8);

  auto ice = ice_curves(model, data, grid, times);
  auto pdp = pdp_curves(model, data, grid, times);
  bool mean_exact = true;
  for (std::size_t k = 0; k < pdp.n_grid; ++k)
    for (std::size_t s = 0; s < pdp.n_times; ++s) {
      double acc = 0.0;
      for (std::size_t i = 0; i < ice.n_instances; ++i) acc += ice.at(i, k, s);
      if (pdp.at(0, k, s) != acc / static_cast<double>(ice.n_instances)) mean_exact = false;
    }
  c.require(mean_exact, "PDP equals the ICE mean");

  auto c_ice = ice_curves(model, data, grid, times, grid.points.front());
  auto c_pdp = pdp_curves(model, data, grid, times, grid.points.front());
  bool centered_zero = true;
  for (std::size_t i = 0; i < c_ice.n_instances; ++i)
    for (std::size_t s = 0; s < c_ice.n_times; ++s)
      if (c_ice.at(i, 0, s) != 0.0) centered_zero = false;
  for (std::size_t s = 0; s < c_pdp.n_times; ++s)
    if (c_pdp.at(0, 0, s) != 0.0) centered_zero = false;
  c.require(centered_zero, "centered surfaces vanish at the reference");

  auto single = synth(60, {0.8}, 0.15, 6);
  auto cox1 = fit_cox(single);
  TimeGrid times1 = unique_event_times(single);
  auto grid1 = build_grid(single, "x1", GridKind::quantile, 9);
  auto surface = ice_curves(cox1, single, grid1, times1);
  double b = cox1.coefficients()(0);
  double worst = 0.0;
  for (std::size_t i = 0; i < surface.n_instances; ++i)
    for (std::size_t k = 0; k < surface.n_grid; ++k)
      for (std::size_t s = 0; s < surface.n_times; ++s) {
        double expected =
            std::exp(-cox1.baseline_chf().eval(times1[s]) * std::exp(b * grid1.points[k]));
        worst = std::max(worst, std::fabs(surface.at(i, k, s) - expected));
      }
  c.require(worst <= 1e-12, "closed-form ICE");

  message = c.detail.str();
  return c.ok;
}

// ---- criterion 4: ALE under correlation -----------------------------------

bool criterion_ale(std::string& message) {
  Checker c;
  std::size_t n = 400;
  Rng rng(15);
  std::vector<double> xa(n), xb(n), time(n);
  std::vector<int> event(n, 1);
  double rho = 0.95;
  for (std::size_t i = 0; i < n; ++i) {
    xa[i] = rng.normal();
    xb[i] = rho * xa[i] + std::sqrt(1 - rho * rho) * rng.normal();
    time[i] = i + 1.0;
  }
  auto data = make_dataset({xa, xb}, time, event);
  const double beta = 0.2, gamma = 0.5;
  MockModel interacting([&](const FeatureTable& x, std::size_t i, double) {
    return beta * x.get(i, 0) + gamma * x.get(i, 0) * x.get(i, 1);
  });
  TimeGrid one({1.0});
  auto truth = [&](double v) { return beta * v + 0.5 * gamma * rho * v * v; };

  auto ale = ale_curves(interacting, data, "x1", one, 20, true);
  auto grid = build_grid(data, "x1", GridKind::quantile, 20);
  auto pdp = pdp_curves(interacting, data, grid, one);

  auto nearest_weights = [&](const std::vector<double>& points) {
    std::vector<double> w(points.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < points.size(); ++k)
        if (std::fabs(points[k] - xa[i]) < std::fabs(points[best] - xa[i])) best = k;
      w[best] += 1.0;
    }
    return w;
  };
  auto centered_errors = [&](const std::vector<double>& points,
                             const std::function<double(std::size_t)>& value) {
    auto w = nearest_weights(points);
    double total = 0.0, mean_v = 0.0, mean_t = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k) {
      total += w[k];
      mean_v += w[k] * value(k);
      mean_t += w[k] * truth(points[k]);
    }
    mean_v /= total;
    mean_t /= total;
    double sup = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k)
      sup = std::max(sup, std::fabs((value(k) - mean_v) - (truth(points[k]) - mean_t)));
    return sup;
  };

  double ale_err =
      centered_errors(ale.grid.points, [&](std::size_t k) { return ale.at(0, k, 0); });
  double pdp_err =
      centered_errors(grid.points, [&](std::size_t k) { return pdp.at(0, k, 0); });
  c.require(ale_err <= 0.5 * pdp_err,
            "ALE/PDP sup-error ratio (" + std::to_string(ale_err / pdp_err) + ")");

  MockModel blind([](const FeatureTable& x, std::size_t i, double) {
    return 0.4 * x.get(i, 1);
  });
  auto zero = ale_curves(blind, data, "x1", one, 10, true);
  double worst = 0.0;
  for (std::size_t k = 0; k < zero.n_grid; ++k)
    worst = std::max(worst, std::fabs(zero.at(0, k, 0)));
  c.require(worst <= 1e-10, "ignored feature");

  message = c.detail.str();
  return c.ok;
}

// ---- criterion 5: h-statistics --------------------------------------------

bool criterion_hstat(std::string& message) {
  Checker c;
  auto data = synth(60, {0.5, -0.5, 0.2}, 0.1, 19);
  TimeGrid times({1.0, 2.0, 3.0});
  MockModel additive([](const FeatureTable& x, std::size_t i, double t) {
    return 0.4 * x.get(i, 0) - 0.7 * x.get(i, 1) + 0.1 * x.get(i, 2) * t;
  });
  auto h_add = h_two_way(additive, data, "x1", "x2", times);
  for (double v : h_add.values) c.require(std::fabs(v) <= 1e-10, "additive two-way");
  auto h_tot = h_total(additive, data, "x1", times);
  for (double v : h_tot.values) c.require(std::fabs(v) <= 1e-10, "additive total");

  std::vector<double> xa{-1, -1, 1, 1}, xb{-1, 1, -1, 1};
  auto tiny = make_dataset({xa, xb}, {1, 2, 3, 4}, {1, 1, 1, 1});
  MockModel product([](const FeatureTable& x, std::size_t i, double) {
    return x.get(i, 0) * x.get(i, 1);
  });
  auto pure = h_two_way(product, tiny, "x1", "x2", TimeGrid({1.0}));
  c.require(std::fabs(pure.values[0] - 1.0) <= 1e-10, "pure interaction");

  // hand enumeration on three rows
  std::vector<double> ya{0.0, 1.0, 2.0}, yb{1.0, 0.0, 2.0};
  auto three = make_dataset({ya, yb}, {1, 2, 3}, {1, 1, 1});
  auto f = [](double a, double b) { return a * a + 0.5 * a * b - b; };
  MockModel model_f([&](const FeatureTable& x, std::size_t i, double) {
    return f(x.get(i, 0), x.get(i, 1));
  });
  std::vector<double> pd_ab(3), pd_a(3), pd_b(3);
  for (std::size_t i = 0; i < 3; ++i) {
    pd_ab[i] = f(ya[i], yb[i]);
    pd_a[i] = (f(ya[i], yb[0]) + f(ya[i], yb[1]) + f(ya[i], yb[2])) / 3.0;
    pd_b[i] = (f(ya[0], yb[i]) + f(ya[1], yb[i]) + f(ya[2], yb[i])) / 3.0;
  }
  auto center = [](std::vector<double>& v) {
    double mean = (v[0] + v[1] + v[2]) / 3.0;
    for (double& x : v) x -= mean;
  };
  center(pd_ab);
  center(pd_a);
  center(pd_b);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double d = pd_ab[i] - pd_a[i] - pd_b[i];
    num += d * d;
    den += pd_ab[i] * pd_ab[i];
  }
  auto hand = h_two_way(model_f, three, "x1", "x2", TimeGrid({1.0}));
  c.require(std::fabs(hand.values[0] - num / den) <= 1e-12, "hand oracle");

  message = c.detail.str();
  return c.ok;
}

// ---- criterion 6: importance ----------------------------------------------

bool criterion_importance(std::string& message) {
  Checker c;
  double start = now_seconds();

  {
    auto data = synth(300, {1.0, 0.0, -0.5}, 0.2, 7);
    AnalyticCoxModel model({1.0, 0.0, -0.5}, 0.1);
    TimeGrid times = default_eval_grid(data);
    ImportanceOptions options;
    options.repeats = 20;
    options.seed = 5;
    auto result = pfi(model, data, default_brier_loss(), times, options);
    const auto& null_feature = result.features[1];
    double mean = null_feature.aggregate, var = 0.0;
    for (double s : null_feature.samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(null_feature.samples.size() - 1);
    double se = std::sqrt(var / static_cast<double>(null_feature.samples.size()));
    c.require(std::fabs(mean) <= 2.0 * se + 1e-12, "PFI of a null feature");
  }

  {
    std::vector<double> gaps;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto base = synth(200, {0.6, 0.0, 0.3}, 0.15, seed);
      FeatureTable table = base.features();
      for (std::size_t i = 0; i < table.n_rows(); ++i) table.set(i, 1, table.get(i, 0));
      SurvivalDataset data(table, base.time(), base.event());
      AnalyticCoxModel model({0.3, 0.3, 0.3}, 0.1);
      TimeGrid times = default_eval_grid(data);
      ImportanceOptions options;
      options.repeats = 5;
      options.seed = seed;
      auto p = pfi(model, data, default_brier_loss(), times, options);
      auto k = cpi(model, data, default_brier_loss(), times, options);
      gaps.push_back(p.features[0].aggregate - k.features[0].aggregate);
    }
    c.require(one_sided_p_value(gaps) < 0.05, "CPI below PFI on duplicates");
  }

  {
    auto data = synth(500, {0.9, -0.5, 0.0}, 0.2, 6);
    ModelSpec spec;
    auto result = loco(spec, data, default_brier_loss(), default_eval_grid(data));
    c.require(std::fabs(result.features[2].aggregate) <= 0.01, "LOCO of an irrelevant feature");
  }

  {
    // quadrature oracle for the one-sided paired t-test p-value
    auto t_pdf = [](double x, double df) {
      double norm = std::exp(std::lgamma((df + 1) / 2.0) - std::lgamma(df / 2.0)) /
                    std::sqrt(df * 3.14159265358979323846);
      return norm * std::pow(1.0 + x * x / df, -(df + 1) / 2.0);
    };
    std::function<double(double, double, double, double, double, int)> simpson =
        [&](double a, double b, double fa, double fb, double df, int depth) -> double {
      double m = 0.5 * (a + b), fm = t_pdf(m, df);
      double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
      if (depth <= 0) return whole;
      double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      double flm = t_pdf(lm, df), frm = t_pdf(rm, df);
      double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
      double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
      if (std::fabs(left + right - whole) < 1e-14) return left + right;
      return simpson(a, m, fa, fm, df, depth - 1) + simpson(m, b, fm, fb, df, depth - 1);
    };
    std::vector<double> diffs{1.2, 0.8, 1.5, 0.9, 1.1};
    double mean = 0.0;
    for (double d : diffs) mean += d / diffs.size();
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean) / (diffs.size() - 1);
    double t_stat = mean / std::sqrt(var / diffs.size());
    double oracle = 0.5 - simpson(0.0, t_stat, t_pdf(0.0, 4.0), t_pdf(t_stat, 4.0), 4.0, 48);
    c.require(std::fabs(student_t_sf(t_stat, 4.0) - oracle) <= 1e-10, "t-test oracle");
  }

  double elapsed = now_seconds() - start;
  c.require(elapsed < 60.0, "runtime");
  message = c.detail.str();
  return c.ok;
}

// ---- criterion 7: survlime -------------------------------------------------

bool criterion_survlime(std::string& message) {
  Checker c;
  double start = now_seconds();

  auto data = synth(500, {0.3, -0.2, 0.1}, 0.2, 11);
  auto cox = fit_cox(data);
  SurvLimeOptions options;
  options.n_points = 100;
  options.kernel_radius = 0.5;
  options.seed = 4;
  auto result = survlime_explain(cox, data, data.features(), 5, options);
  double rel = (result.coefficients_raw - cox.coefficients()).lpNorm<Eigen::Infinity>() /
               cox.coefficients().lpNorm<Eigen::Infinity>();
  c.require(rel <= 0.15, "coefficient recovery (" + std::to_string(rel) + ")");

  SurvLimeOptions dense = options;
  dense.dense_solve = true;
  auto direct = survlime_explain(cox, data, data.features(), 5, dense);
  c.require((result.coefficients - direct.coefficients).lpNorm<Eigen::Infinity>() <= 1e-8,
            "dense re-solve");

  double elapsed = now_seconds() - start;
  c.require(elapsed < 30.0, "runtime");
  message = c.detail.str();
  return c.ok;
}

// ---- criterion 8: survshap --------------------------------------------------

bool criterion_survshap(std::string& message) {
  Checker c;
  auto data = synth(40, {0.5, -0.4, 0.3, 0.2, -0.1}, 0.15, 13);
  auto cox = fit_cox(data);
  TimeGrid times = unique_event_times(data);
  FeatureTable background = data.features().select_rows({0, 1, 2, 3, 4, 5, 6, 7});

  auto exact = survshap_sampling(cox, background, data.features(), 9, times, true);
  Eigen::MatrixXd pred = cox.predict_survival_matrix(data.features().select_rows({9}), times);
  double eff = 0.0;
  for (std::size_t s = 0; s < times.size(); ++s) {
    double total = exact.baseline[s];
    for (Eigen::Index j = 0; j < exact.phi.rows(); ++j)
      total += exact.phi(j, static_cast<Eigen::Index>(s));
    eff = std::max(eff, std::fabs(total - pred(0, static_cast<Eigen::Index>(s))));
  }
  c.require(eff <= 1e-10, "efficiency");

  auto kernel = survshap_kernel(cox, background, data.features(), 9, times);
  c.require((exact.phi - kernel.phi).lpNorm<Eigen::Infinity>() <= 1e-8, "kernel vs exact");

  {
    // sampled estimator stays within three standard errors of exact
    TimeGrid single({times[times.size() / 2]});
    auto exact1 = survshap_sampling(cox, background, data.features(), 9, single, true);
    const int runs = 30;
    std::vector<Eigen::MatrixXd> estimates;
    SurvShapOptions options;
    options.n_permutations = 20;
    for (int r = 0; r < runs; ++r) {
      options.seed = static_cast<std::uint64_t>(r + 1);
      estimates.push_back(
          survshap_sampling(cox, background, data.features(), 9, single, false, options).phi);
    }
    for (Eigen::Index j = 0; j < exact1.phi.rows(); ++j) {
      double mean = 0.0, var = 0.0;
      for (const auto& e : estimates) mean += e(j, 0) / runs;
      for (const auto& e : estimates) var += (e(j, 0) - mean) * (e(j, 0) - mean) / (runs - 1);
      double se = std::sqrt(var / runs);
      c.require(std::fabs(mean - exact1.phi(j, 0)) <= 3.0 * se + 1e-12, "sampling bias");
    }
  }

  {
    FeatureSchema schema;
    schema.columns.push_back({"x1", ColumnType::numeric, {}});
    schema.columns.push_back({"x2", ColumnType::numeric, {}});
    FeatureTable bg(schema, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      double v = static_cast<double>(i) - 2.0;
      bg.set(i, 0, v);
      bg.set(i, 1, v);
    }
    FeatureTable star(schema, 1);
    star.set(0, 0, 1.3);
    star.set(0, 1, 1.3);
    MockModel symmetric([](const FeatureTable& x, std::size_t i, double t) {
      return std::exp(-0.1 * t * std::exp(0.5 * (x.get(i, 0) + x.get(i, 1))));
    });
    TimeGrid two({1.0, 2.0});
    auto sym = survshap_sampling(symmetric, bg, star, 0, two, true);
    c.require((sym.phi.row(0) - sym.phi.row(1)).lpNorm<Eigen::Infinity>() == 0.0, "symmetry");

    FeatureTable bg2 = bg;
    for (std::size_t i = 0; i < 5; ++i) bg2.set(i, 1, 0.7);
    FeatureTable star2 = star;
    star2.set(0, 1, 0.7);
    auto missing = survshap_sampling(symmetric, bg2, star2, 0, two, true);
    c.require(missing.phi.row(1).lpNorm<Eigen::Infinity>() == 0.0, "missingness");
  }

  message = c.detail.str();
  return c.ok;
}

// ---- criterion 9: counterfactual --------------------------------------------

bool criterion_counterfactual(std::string& message) {
  Checker c;
  auto data = synth(300, {-0.8}, 0.2, 31);
  auto cox = fit_cox(data);
  TimeGrid grid = unique_event_times(data);

  CounterfactualOptions options;
  options.required_gap = 3.0;
  options.regularization = 0.05;
  options.seed = 9;
  std::size_t row = 2;
  auto result = counterfactual_explain(cox, data, data.features(), row, grid, options);

  double lo = data.features().get(0, 0), hi = lo;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    lo = std::min(lo, data.features().get(i, 0));
    hi = std::max(hi, data.features().get(i, 0));
  }
  double base = expected_survival_time(cox, data.features(), row, grid);
  double x0 = data.features().get(row, 0);
  const int steps = 2000;
  double best_loss = 1e300, best_v = x0;
  FeatureTable probe = data.features().select_rows({row});
  for (int k = 0; k <= steps; ++k) {
    double v = lo + (hi - lo) * k / steps;
    probe.set(0, 0, v);
    double e = expected_survival_time(cox, probe, 0, grid);
    double loss = std::max(0.0, options.required_gap - (e - base)) +
                  options.regularization * std::fabs(v - x0);
    if (loss < best_loss) {
      best_loss = loss;
      best_v = v;
    }
  }
  double resolution = (hi - lo) / steps;
  c.require(result.loss <= best_loss + options.regularization * resolution + 1e-9,
            "grid-search loss");
  c.require(std::fabs(result.counterfactual.get(0, 0) - best_v) <= 10 * resolution + 1e-9,
            "grid-search location");

  CounterfactualOptions zero_gap;
  zero_gap.required_gap = 0.0;
  zero_gap.seed = 3;
  zero_gap.pso.iterations = 50;
  auto trivial = counterfactual_explain(cox, data, data.features(), row, grid, zero_gap);
  c.require(trivial.loss == 0.0 && trivial.distance == 0.0, "zero-gap identity");

  CounterfactualOptions heavy;
  heavy.required_gap = 5.0;
  heavy.regularization = 1e6;
  heavy.seed = 6;
  heavy.pso.iterations = 50;
  auto pinned = counterfactual_explain(cox, data, data.features(), row, grid, heavy);
  c.require(std::fabs(pinned.counterfactual.get(0, 0) - x0) <= 1e-6, "large-C identity");

  message = c.detail.str();
  return c.ok;
}

// ---- criteria 10 and 11: CLI determinism and end-to-end runtime -------------

int run_cli_args(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("survexplain");
  for (const auto& a : args) argv.push_back(a.c_str());
  return survexplain::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// numeric payload of an artifact: CSV data lines, or the JSON result subtree
std::string payload(const fs::path& path) {
  std::string text = slurp(path);
  if (path.extension() == ".csv") {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("# ", 0) != 0) out << line << "\n";
    return out.str();
  }
  json doc = json::parse(text);
  if (doc.contains("result")) return doc["result"].dump();
  doc.erase("run_config");
  return doc.dump();
}

bool criterion_determinism(std::string& message) {
  Checker c;
  fs::path root = fs::temp_directory_path() / "survexplain_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);
  auto at = [&](const std::string& sub) { return (root / sub).string(); };

  c.require(run_cli_args({"synth", "--n", "150", "--p", "3", "--coefs", "0.6,-0.4,0.2",
                          "--censoring", "0.2", "--seed", "3", "--out", at("d")}) == 0,
            "synth run");
  c.require(run_cli_args({"fit", "--data", at("d/synthetic.csv"), "--schema",
                          at("d/schema.json"), "--model-type", "cox", "--out", at("d")}) == 0,
            "cox fit");

  struct Command {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::string> outputs;
  };
  std::vector<std::string> base{"--data", at("d/synthetic.csv"), "--schema",
                                at("d/schema.json"), "--model", at("d/model.json"),
                                "--seed", "17"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> extra) {
    for (auto& e : extra) head.push_back(e);
    return head;
  };
  std::vector<Command> commands = {
      {"synth",
       {"synth", "--n", "150", "--p", "3", "--coefs", "0.6,-0.4,0.2", "--censoring", "0.2",
        "--seed", "3"},
       {"synthetic.csv"}},
      {"fit-rsf",
       {"fit", "--data", at("d/synthetic.csv"), "--schema", at("d/schema.json"),
        "--model-type", "rsf", "--n-trees", "10", "--seed", "5"},
       {"model.json"}},
      {"ice", with({"explain", "ice"}, with(base, {"--feature", "x1"})), {"ice.csv", "ice.json"}},
      {"pdp", with({"explain", "pdp"}, with(base, {"--feature", "x1"})), {"pdp.csv", "pdp.json"}},
      {"ale", with({"explain", "ale"}, with(base, {"--feature", "x1"})), {"ale.csv", "ale.json"}},
      {"mplot", with({"explain", "mplot"}, with(base, {"--feature", "x1"})),
       {"mplot.csv", "mplot.json"}},
      {"hstat",
       with({"explain", "hstat"}, with(base, {"--feature", "x1", "--feature-b", "x2"})),
       {"hstat.csv", "hstat.json"}},
      {"pfi", with({"explain", "pfi"}, with(base, {"--repeats", "3"})), {"pfi.csv", "pfi.json"}},
      {"cpi", with({"explain", "cpi"}, with(base, {"--repeats", "2"})), {"cpi.csv", "cpi.json"}},
      {"loco",
       {"explain", "loco", "--data", at("d/synthetic.csv"), "--schema", at("d/schema.json"),
        "--seed", "17"},
       {"loco.csv", "loco.json"}},
      {"survlime", with({"explain", "survlime"}, with(base, {"--instance", "4"})),
       {"survlime.json"}},
      {"survshap", with({"explain", "survshap"}, with(base, {"--instance", "4"})),
       {"survshap.json"}},
      {"counterfactual",
       with({"explain", "counterfactual"},
            with(base, {"--instance", "4", "--r-gap", "1.0", "--pso-iters", "40"})),
       {"counterfactual.json"}},
  };

  for (const auto& cmd : commands) {
    std::vector<std::string> payloads;
    int pass = 0;
    for (const std::string threads : {"1", "3"}) {
      std::string out_dir = at(cmd.name + "_t" + threads);
      auto args = cmd.args;
      args.push_back("--threads");
      args.push_back(threads);
      args.push_back("--out");
      args.push_back(out_dir);
      if (run_cli_args(args) != 0) {
        c.require(false, cmd.name + " failed");
        break;
      }
      std::string joined;
      for (const auto& file : cmd.outputs) joined += payload(fs::path(out_dir) / file);
      payloads.push_back(joined);
      ++pass;
    }
    if (pass == 2)
      c.require(payloads[0] == payloads[1], cmd.name + " payload differs across thread counts");
  }

  fs::remove_all(root);
  message = c.detail.str();
  return c.ok;
}

bool criterion_pipeline(std::string& message) {
  Checker c;
  double start = now_seconds();
  fs::path root = fs::temp_directory_path() / "survexplain_acceptance_e2e";
  fs::remove_all(root);
  fs::create_directories(root);
  auto at = [&](const std::string& sub) { return (root / sub).string(); };

  std::string times = "auto";
  {
    c.require(run_cli_args({"synth", "--n", "500", "--p", "10", "--coefs",
                            "0.8,-0.6,0.5,-0.4,0.3,-0.2,0.1,0.0,0.0,0.0", "--censoring", "0.3",
                            "--seed", "1", "--out", at("data")}) == 0,
              "synth");
    // 50 evaluation times spanning the clipped event horizon
    auto loaded = load_csv(at("data/synthetic.csv"),
                           DatasetSchema::from_json_text(slurp(at("data/schema.json"))));
    TimeGrid grid = default_eval_grid(loaded.data);
    std::ostringstream list;
    for (int k = 0; k < 50; ++k) {
      std::size_t idx = static_cast<std::size_t>(k) * (grid.size() - 1) / 49;
      list << (k > 0 ? "," : "") << format_double(grid[idx]);
    }
    times = list.str();
  }

  auto run = [&](std::vector<std::string> args, const std::string& what) {
    if (run_cli_args(args) != 0) c.require(false, what);
  };
  run({"fit", "--data", at("data/synthetic.csv"), "--schema", at("data/schema.json"),
       "--model-type", "cox", "--out", at("cox")},
      "fit cox");
  run({"fit", "--data", at("data/synthetic.csv"), "--schema", at("data/schema.json"),
       "--model-type", "rsf", "--n-trees", "100", "--seed", "2", "--out", at("rsf")},
      "fit rsf");
  run({"evaluate", "--data", at("data/synthetic.csv"), "--schema", at("data/schema.json"),
       "--model", at("cox/model.json"), "--out", at("eval_cox")},
      "evaluate cox");
  run({"evaluate", "--data", at("data/synthetic.csv"), "--schema", at("data/schema.json"),
       "--model", at("rsf/model.json"), "--out", at("eval_rsf")},
      "evaluate rsf");

  std::vector<std::string> base{"--data",  at("data/synthetic.csv"),
                                "--schema", at("data/schema.json"),
                                "--model", at("cox/model.json"),
                                "--seed",  "7",
                                "--times", times};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> extra) {
    for (auto& e : extra) head.push_back(e);
    return head;
  };
  run(with({"explain", "ice"}, with(base, {"--feature", "x1", "--out", at("ice")})), "ice");
  run(with({"explain", "pdp"}, with(base, {"--feature", "x2", "--out", at("pdp")})), "pdp");
  run(with({"explain", "ale"}, with(base, {"--feature", "x3", "--out", at("ale")})), "ale");
  run(with({"explain", "mplot"}, with(base, {"--feature", "x4", "--out", at("mplot")})),
      "mplot");
  run(with({"explain", "hstat"},
           with(base, {"--feature", "x1", "--feature-b", "x2", "--sample-size", "100", "--out",
                       at("hstat")})),
      "hstat");
  run(with({"explain", "pfi"}, with(base, {"--repeats", "5", "--out", at("pfi")})), "pfi");
  run(with({"explain", "cpi"}, with(base, {"--repeats", "5", "--out", at("cpi")})), "cpi");
  run({"explain", "loco", "--data", at("data/synthetic.csv"), "--schema",
       at("data/schema.json"), "--seed", "7", "--times", times, "--out", at("loco")},
      "loco");
  run({"explain", "survlime", "--data", at("data/synthetic.csv"), "--schema",
       at("data/schema.json"), "--model", at("cox/model.json"), "--seed", "7", "--instance",
       "12", "--out", at("survlime")},
      "survlime");
  run(with({"explain", "survshap"},
           with(base, {"--instance", "12", "--estimator", "sampling", "--n-perms", "100",
                       "--out", at("survshap")})),
      "survshap");
  run(with({"explain", "counterfactual"},
           with(base, {"--instance", "12", "--r-gap", "2.0", "--out", at("cf")})),
      "counterfactual");

  // one rsf-backed explanation exercises the slower model path
  std::vector<std::string> rsf_base{"--data",  at("data/synthetic.csv"),
                                    "--schema", at("data/schema.json"),
                                    "--model", at("rsf/model.json"),
                                    "--seed",  "7",
                                    "--times", times};
  run(with({"explain", "pdp"}, with(rsf_base, {"--feature", "x1", "--out", at("pdp_rsf")})),
      "pdp on rsf");

  double elapsed = now_seconds() - start;
  c.require(elapsed < 300.0, "runtime " + std::to_string(elapsed) + "s");
  fs::remove_all(root);
  message = c.detail.str();
  return c.ok;
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<bool(std::string&)> check;
  };
  std::vector<Criterion> criteria = {
      {"1 estimator oracles", criterion_estimators},
      {"2 cox recovery", criterion_cox},
      {"3 effect identities", criterion_effects},
      {"4 ale under correlation", criterion_ale},
      {"5 h-statistics", criterion_hstat},
      {"6 importance", criterion_importance},
      {"7 survlime", criterion_survlime},
      {"8 survshap", criterion_survshap},
      {"9 counterfactual", criterion_counterfactual},
      {"10 determinism", criterion_determinism},
      {"11 end-to-end pipeline", criterion_pipeline},
  };

  int failures = 0;
  for (auto& criterion : criteria) {
    std::string message;
    bool ok = false;
    try {
      ok = criterion.check(message);
    } catch (const std::exception& e) {
      message = std::string("exception: ") + e.what();
    }
    if (ok) {
      std::cout << "[PASS] criterion " << criterion.name << "\n";
    } else {
      ++failures;
      std::cout << "[FAIL] criterion " << criterion.name
                << (message.empty() ? "" : " (" + message + ")") << "\n";
    }
    std::cout.flush();
  }
  return failures == 0 ? 0 : 1;
}
