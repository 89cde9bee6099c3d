#pragma once

#include "survexplain/model.hpp"

#include <cstdint>

namespace survexplain {

struct PsoConfig {
  std::size_t particles = 50;
  std::size_t iterations = 200;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  double velocity_clamp = 0.5;  // fraction of the box width
};

struct CounterfactualOptions {
  double required_gap = 0.0;  // smallest wanted increase in expected time
  double regularization = 1.0;
  PsoConfig pso;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct CounterfactualResult {
  FeatureTable counterfactual;      // single row
  double expected_time_original = 0.0;
  double expected_time_counterfactual = 0.0;
  double distance = 0.0;            // euclidean, over the searched coordinates
  double loss = 0.0;
  std::vector<double> loss_trace;   // best-so-far per iteration
  bool converged = false;           // the required gap was met
};

// Expected survival time proxy: sum of S(t_s) * (t_{s+1} - t_s) over the grid
// (restricted mean up to the last grid point).
double expected_survival_time(const SurvivalModel& model, const FeatureTable& x, std::size_t row,
                              const TimeGrid& grid);

// Hinge-loss counterfactual search by particle swarm over the numeric
// coordinates, box-constrained to the observed feature ranges. Categorical
// coordinates stay fixed.
CounterfactualResult counterfactual_explain(const SurvivalModel& model,
                                            const SurvivalDataset& data, const FeatureTable& x,
                                            std::size_t row, const TimeGrid& grid,
                                            const CounterfactualOptions& options);

}  // namespace survexplain
