#pragma once

#include "survexplain/model.hpp"
#include "survexplain/rng.hpp"
#include "survexplain/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace survexplain::testing {

// Numeric-only dataset from column vectors.
inline SurvivalDataset make_dataset(const std::vector<std::vector<double>>& columns,
                                    std::vector<double> time, std::vector<int> event) {
  FeatureSchema schema;
  for (std::size_t j = 0; j < columns.size(); ++j)
    schema.columns.push_back({"x" + std::to_string(j + 1), ColumnType::numeric, {}});
  FeatureTable table(schema, time.size());
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (std::size_t i = 0; i < time.size(); ++i) table.set(i, j, columns[j][i]);
  return SurvivalDataset(std::move(table), std::move(time), std::move(event));
}

inline SurvivalDataset make_dataset(std::vector<double> time, std::vector<int> event) {
  std::vector<double> filler(time.size(), 0.0);
  return make_dataset({filler}, std::move(time), std::move(event));
}

// Black box defined by an arbitrary (row, t) -> value function. Values are
// returned as-is, so mocks may live on any output scale.
class MockModel : public SurvivalModel {
 public:
  using Fn = std::function<double(const FeatureTable&, std::size_t, double)>;
  explicit MockModel(Fn fn) : fn_(std::move(fn)) {}

  Eigen::MatrixXd predict_survival_matrix(const FeatureTable& x,
                                          const TimeGrid& grid) const override {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(x.n_rows()),
                        static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < x.n_rows(); ++i)
      for (std::size_t s = 0; s < grid.size(); ++s)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = fn_(x, i, grid[s]);
    return out;
  }

 private:
  Fn fn_;
};

// Proportional-hazards black box with a fixed coefficient vector and an
// exponential baseline; survival and hazard outputs are exact.
class AnalyticCoxModel : public SurvivalModel {
 public:
  AnalyticCoxModel(std::vector<double> beta, double rate) : beta_(std::move(beta)), rate_(rate) {}

  Eigen::MatrixXd predict_survival_matrix(const FeatureTable& x,
                                          const TimeGrid& grid) const override {
    return (-predict_chf_matrix(x, grid).array()).exp().matrix();
  }

  Eigen::MatrixXd predict_chf_matrix(const FeatureTable& x,
                                     const TimeGrid& grid) const override {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(x.n_rows()),
                        static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      double lp = 0.0;
      for (std::size_t j = 0; j < beta_.size() && j < x.n_cols(); ++j)
        lp += beta_[j] * x.get(i, j);
      for (std::size_t s = 0; s < grid.size(); ++s)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) =
            rate_ * grid[s] * std::exp(lp);
    }
    return out;
  }

 private:
  std::vector<double> beta_;
  double rate_;
};

// Bernoulli feature with proportional-hazards survival times and optional
// uniform censoring; used where the library generator is too rigid.
inline SurvivalDataset binary_hazard_dataset(std::size_t n, double hazard_ratio,
                                             double censor_horizon, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n), time(n);
  std::vector<int> event(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    double rate = 0.1 * (x[i] > 0.5 ? hazard_ratio : 1.0);
    double t = -std::log(rng.uniform()) / rate;
    if (censor_horizon > 0.0) {
      double c = rng.uniform(0.0, censor_horizon);
      if (c < t) {
        time[i] = c;
        event[i] = 0;
        continue;
      }
    }
    time[i] = t;
  }
  return make_dataset({x}, std::move(time), std::move(event));
}

}  // namespace survexplain::testing
