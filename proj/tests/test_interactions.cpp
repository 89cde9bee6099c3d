#include "survexplain/interactions.hpp"

#include "survexplain/dataio.hpp"

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>

using namespace survexplain;
using survexplain::testing::make_dataset;
using survexplain::testing::MockModel;

TEST_CASE("h-statistics vanish for additive models") {
  SyntheticSpec spec;
  spec.n = 60;
  spec.p = 3;
  spec.coefficients = {0.5, -0.5, 0.2};
  spec.censoring_rate = 0.1;
  spec.seed = 19;
  auto data = generate_synthetic(spec);
  TimeGrid times({1.0, 2.0});
  MockModel additive([](const FeatureTable& x, std::size_t i, double t) {
    return 0.4 * x.get(i, 0) - 0.7 * x.get(i, 1) + 0.1 * x.get(i, 2) * t;
  });

  auto two_way = h_two_way(additive, data, "x1", "x2", times);
  for (double v : two_way.values) CHECK(std::fabs(v) <= 1e-10);
  CHECK(two_way.marginal <= 1e-10);

  auto total = h_total(additive, data, "x1", times);
  for (double v : total.values) CHECK(std::fabs(v) <= 1e-10);
}

TEST_CASE("pure interaction with centered marginals saturates at one") {
  // evaluation rows hold both features exactly mean-centered
  std::vector<double> xa{-1, -1, 1, 1}, xb{-1, 1, -1, 1};
  auto data = make_dataset({xa, xb}, {1, 2, 3, 4}, {1, 1, 1, 1});
  MockModel product([](const FeatureTable& x, std::size_t i, double) {
    return x.get(i, 0) * x.get(i, 1);
  });
  TimeGrid times({1.0});
  auto result = h_two_way(product, data, "x1", "x2", times);
  CHECK(result.values[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("h-statistics match a direct enumeration oracle") {
  std::vector<double> xa{0.0, 1.0, 2.0}, xb{1.0, 0.0, 2.0};
  auto data = make_dataset({xa, xb}, {1, 2, 3}, {1, 1, 1});
  auto f = [](double a, double b) { return a * a + 0.5 * a * b - b; };
  MockModel model([&](const FeatureTable& x, std::size_t i, double) {
    return f(x.get(i, 0), x.get(i, 1));
  });
  TimeGrid times({1.0});

  std::size_t n = 3;
  // enumerate the partial-dependence tables by hand
  std::vector<double> pd_ab(n), pd_a(n), pd_b(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = f(xa[i], xb[i]);
    pd_ab[i] = 0.0;
    pd_a[i] = 0.0;
    pd_b[i] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      pd_ab[i] += f(xa[i], xb[i]) / n;  // both pinned: constant over l
      pd_a[i] += f(xa[i], xb[l]) / n;
      pd_b[i] += f(xa[l], xb[i]) / n;
    }
  }
  auto center = [&](std::vector<double>& v) {
    double mean = (v[0] + v[1] + v[2]) / 3.0;
    for (double& x : v) x -= mean;
  };
  center(pd_ab);
  center(pd_a);
  center(pd_b);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = pd_ab[i] - pd_a[i] - pd_b[i];
    num += d * d;
    den += pd_ab[i] * pd_ab[i];
  }

  auto result = h_two_way(model, data, "x1", "x2", times);
  CHECK(result.values[0] == doctest::Approx(num / den).epsilon(1e-12));

  // total statistic against the same kind of enumeration
  std::vector<double> pd_rest(n);
  for (std::size_t i = 0; i < n; ++i) {
    pd_rest[i] = 0.0;
    for (std::size_t l = 0; l < n; ++l) pd_rest[i] += f(xa[l], xb[i]) / n;
  }
  center(pred);
  center(pd_rest);
  // pd_a was centered above
  double tnum = 0.0, tden = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = pred[i] - pd_a[i] - pd_rest[i];
    tnum += d * d;
    tden += pred[i] * pred[i];
  }
  auto total = h_total(model, data, "x1", times);
  CHECK(total.values[0] == doctest::Approx(tnum / tden).epsilon(1e-12));
}

TEST_CASE("single-feature models have no total interaction") {
  SyntheticSpec spec;
  spec.n = 40;
  spec.p = 1;
  spec.coefficients = {0.8};
  spec.censoring_rate = 0.0;
  spec.seed = 2;
  auto data = generate_synthetic(spec);
  MockModel lone([](const FeatureTable& x, std::size_t i, double) {
    return 0.3 * x.get(i, 0) * x.get(i, 0);
  });
  TimeGrid times({1.0, 2.0});
  auto result = h_total(lone, data, "x1", times);
  for (double v : result.values) CHECK(std::fabs(v) <= 1e-10);
}

TEST_CASE("h-statistics flag values above one and reject bad input") {
  SyntheticSpec spec;
  spec.n = 20;
  spec.p = 2;
  spec.coefficients = {0.1, 0.1};
  spec.censoring_rate = 0.0;
  spec.seed = 4;
  auto data = generate_synthetic(spec);
  MockModel any([](const FeatureTable& x, std::size_t i, double) { return x.get(i, 0); });
  TimeGrid times({1.0});
  CHECK_THROWS(h_two_way(any, data, "x1", "x1", times));
}
