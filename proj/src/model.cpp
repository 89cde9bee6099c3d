#include "survexplain/model.hpp"

#include <cmath>

namespace survexplain {

Eigen::MatrixXd SurvivalModel::predict_chf_matrix(const FeatureTable& x,
                                                  const TimeGrid& grid) const {
  Eigen::MatrixXd s = predict_survival_matrix(x, grid);
  return (-(s.array().max(kSurvivalFloor).log())).matrix();
}

PredictionSurface SurvivalModel::predict_surface(const FeatureTable& x, const TimeGrid& grid,
                                                 OutputKind kind) const {
  PredictionSurface out;
  out.grid = grid;
  if (kind == OutputKind::survival) {
    out.values = predict_survival_matrix(x, grid);
    out.kind = CurveKind::survival;
  } else {
    out.values = predict_chf_matrix(x, grid);
    out.kind = CurveKind::chf;
  }
  return out;
}

StepCurve SurvivalModel::predict_survival(const FeatureTable& x, std::size_t row,
                                          const TimeGrid& grid) const {
  FeatureTable single = x.select_rows({row});
  Eigen::MatrixXd m = predict_survival_matrix(single, grid);
  std::vector<double> v(grid.size());
  for (std::size_t s = 0; s < grid.size(); ++s) v[s] = m(0, static_cast<Eigen::Index>(s));
  return StepCurve(grid, std::move(v), CurveKind::survival);
}

StepCurve SurvivalModel::predict_chf(const FeatureTable& x, std::size_t row,
                                     const TimeGrid& grid) const {
  FeatureTable single = x.select_rows({row});
  Eigen::MatrixXd m = predict_chf_matrix(single, grid);
  std::vector<double> v(grid.size());
  for (std::size_t s = 0; s < grid.size(); ++s) v[s] = m(0, static_cast<Eigen::Index>(s));
  return StepCurve(grid, std::move(v), CurveKind::chf);
}

}  // namespace survexplain
