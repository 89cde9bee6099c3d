#include "survexplain/counterfactual.hpp"

#include "survexplain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace survexplain {

namespace {

double expected_time_from_row(const Eigen::MatrixXd& survival, Eigen::Index row,
                              const TimeGrid& grid) {
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < grid.size(); ++s)
    acc += survival(row, static_cast<Eigen::Index>(s)) * (grid[s + 1] - grid[s]);
  return acc;
}

}  // namespace

double expected_survival_time(const SurvivalModel& model, const FeatureTable& x, std::size_t row,
                              const TimeGrid& grid) {
  Eigen::MatrixXd s = model.predict_survival_matrix(x.select_rows({row}), grid);
  return expected_time_from_row(s, 0, grid);
}

CounterfactualResult counterfactual_explain(const SurvivalModel& model,
                                            const SurvivalDataset& data, const FeatureTable& x,
                                            std::size_t row, const TimeGrid& grid,
                                            const CounterfactualOptions& options) {
  if (options.required_gap < 0.0) throw std::invalid_argument("required gap must be nonnegative");
  if (options.regularization <= 0.0)
    throw std::invalid_argument("regularization strength must be positive");
  if (grid.size() < 2) throw std::invalid_argument("need at least two grid times");

  // only numeric coordinates enter the search
  std::vector<std::size_t> search_cols;
  for (std::size_t j = 0; j < data.n_features(); ++j)
    if (data.schema().columns[j].type == ColumnType::numeric) search_cols.push_back(j);
  if (search_cols.empty())
    throw std::invalid_argument("counterfactual search needs at least one numeric feature");
  std::size_t dim = search_cols.size();

  // box constraints from the observed ranges
  std::vector<double> box_lo(dim), box_hi(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    double lo = data.features().get(0, search_cols[d]);
    double hi = lo;
    for (std::size_t i = 1; i < data.n_rows(); ++i) {
      double v = data.features().get(i, search_cols[d]);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    box_lo[d] = lo;
    box_hi[d] = hi;
  }

  double base_expected = expected_survival_time(model, x, row, grid);

  auto hinge = [&](double expected) {
    return std::max(0.0, options.required_gap - (expected - base_expected));
  };
  auto distance = [&](const std::vector<double>& pos) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      double delta = pos[d] - x.get(row, search_cols[d]);
      d2 += delta * delta;
    }
    return std::sqrt(d2);
  };

  const PsoConfig& pso = options.pso;
  std::size_t np = pso.particles;
  if (np < 1) throw std::invalid_argument("need at least one particle");

  std::vector<std::vector<double>> pos(np, std::vector<double>(dim));
  std::vector<std::vector<double>> vel(np, std::vector<double>(dim, 0.0));
  std::vector<Rng> rngs;
  rngs.reserve(np);
  for (std::size_t i = 0; i < np; ++i) rngs.emplace_back(derive_seed(options.seed, 0xcf, i));

  // particle 0 starts at the original point so the identity candidate is
  // always evaluated
  for (std::size_t d = 0; d < dim; ++d) pos[0][d] = x.get(row, search_cols[d]);
  for (std::size_t i = 1; i < np; ++i)
    for (std::size_t d = 0; d < dim; ++d) {
      pos[i][d] = rngs[i].uniform(box_lo[d], box_hi[d]);
      double width = box_hi[d] - box_lo[d];
      vel[i][d] = rngs[i].uniform(-width, width) * pso.velocity_clamp;
    }

  FeatureTable batch(data.schema(), np);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < data.n_features(); ++j) batch.set(i, j, x.get(row, j));

  auto evaluate = [&](std::vector<double>& losses, std::vector<double>& expecteds) {
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t d = 0; d < dim; ++d) batch.set(i, search_cols[d], pos[i][d]);
    Eigen::MatrixXd s = model.predict_survival_matrix(batch, grid);
    for (std::size_t i = 0; i < np; ++i) {
      expecteds[i] = expected_time_from_row(s, static_cast<Eigen::Index>(i), grid);
      losses[i] = hinge(expecteds[i]) + options.regularization * distance(pos[i]);
    }
  };

  std::vector<double> losses(np), expecteds(np);
  evaluate(losses, expecteds);

  std::vector<std::vector<double>> best_pos = pos;
  std::vector<double> best_loss = losses;
  std::size_t gbest = 0;
  for (std::size_t i = 1; i < np; ++i)
    if (losses[i] < losses[gbest]) gbest = i;
  std::vector<double> global_pos = pos[gbest];
  double global_loss = losses[gbest];
  double global_expected = expecteds[gbest];

  CounterfactualResult result;
  result.loss_trace.push_back(global_loss);

  for (std::size_t iter = 0; iter < pso.iterations; ++iter) {
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        double width = box_hi[d] - box_lo[d];
        double clamp = pso.velocity_clamp * width;
        double r1 = rngs[i].uniform();
        double r2 = rngs[i].uniform();
        vel[i][d] = pso.inertia * vel[i][d] +
                    pso.cognitive * r1 * (best_pos[i][d] - pos[i][d]) +
                    pso.social * r2 * (global_pos[d] - pos[i][d]);
        vel[i][d] = std::clamp(vel[i][d], -clamp, clamp);
        pos[i][d] = std::clamp(pos[i][d] + vel[i][d], box_lo[d], box_hi[d]);
      }
    }
    evaluate(losses, expecteds);
    for (std::size_t i = 0; i < np; ++i) {
      if (losses[i] < best_loss[i]) {
        best_loss[i] = losses[i];
        best_pos[i] = pos[i];
      }
      if (losses[i] < global_loss) {
        global_loss = losses[i];
        global_pos = pos[i];
        global_expected = expecteds[i];
      }
    }
    result.loss_trace.push_back(global_loss);
  }

  result.counterfactual = x.select_rows({row});
  for (std::size_t d = 0; d < dim; ++d)
    result.counterfactual.set(0, search_cols[d], global_pos[d]);
  result.expected_time_original = base_expected;
  result.expected_time_counterfactual = global_expected;
  result.distance = distance(global_pos);
  result.loss = global_loss;
  result.converged = hinge(global_expected) == 0.0;
  return result;
}

}  // namespace survexplain
