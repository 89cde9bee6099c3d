#pragma once

#include "survexplain/types.hpp"

namespace survexplain {

enum class OutputKind { survival, chf };

// Black-box prediction contract every explainer consumes. Implementations
// must keep predict_surface row i equal to the single-row prediction of
// row i.
class SurvivalModel {
 public:
  virtual ~SurvivalModel() = default;

  // n x m survival probabilities over instances x grid points
  virtual Eigen::MatrixXd predict_survival_matrix(const FeatureTable& x,
                                                  const TimeGrid& grid) const = 0;

  // n x m cumulative hazards; default derives from survival
  virtual Eigen::MatrixXd predict_chf_matrix(const FeatureTable& x, const TimeGrid& grid) const;

  PredictionSurface predict_surface(const FeatureTable& x, const TimeGrid& grid,
                                    OutputKind kind = OutputKind::survival) const;

  StepCurve predict_survival(const FeatureTable& x, std::size_t row, const TimeGrid& grid) const;
  StepCurve predict_chf(const FeatureTable& x, std::size_t row, const TimeGrid& grid) const;
};

}  // namespace survexplain
