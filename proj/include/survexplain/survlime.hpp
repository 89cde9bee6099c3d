#pragma once

#include "survexplain/dataio.hpp"
#include "survexplain/model.hpp"

#include <cstdint>

namespace survexplain {

struct SurvLimeOptions {
  std::size_t n_points = 100;     // neighborhood size including the point itself
  double kernel_radius = 0.5;     // Epanechnikov-style radius on standardized coords
  std::uint64_t seed = 0;
  double perturb_sd = 0.2;        // numeric jitter, in units of the feature sd
  double categorical_flip = 0.2;  // resampling probability per categorical cell
  bool dense_solve = false;       // QR on the stacked rows instead of normal equations
  int threads = 0;
};

struct SurvLimeResult {
  Encoding encoding;
  Eigen::VectorXd coefficients;       // surrogate b on standardized coordinates
  Eigen::VectorXd coefficients_raw;   // rescaled to raw feature units
  std::vector<double> local_importance;  // |b_raw_j * x_j| per encoded column
  StepCurve surrogate_curve;          // surrogate survival at the explained point
  StepCurve blackbox_curve;           // black-box survival at the explained point
  double fidelity = 0.0;              // interval-weighted L2 gap of the log CHFs
  double objective = 0.0;             // weighted least-squares objective at b
  double objective_at_zero = 0.0;     // same objective with all coefficients zero
  std::size_t dropped_cells = 0;      // (point, time) cells with unusable CHF
  bool ridged = false;
  Eigen::MatrixXd neighborhood;       // encoded neighborhood points (raw scale)
  std::vector<double> point_weights;  // kernel weight per neighborhood point
};

// Local Cox surrogate: a baseline cumulative hazard from the data plus
// coefficients fitted by weighted least squares so the surrogate log CHF
// tracks the black box over a perturbation neighborhood of x.
SurvLimeResult survlime_explain(const SurvivalModel& model, const SurvivalDataset& data,
                                const FeatureTable& x, std::size_t row,
                                const SurvLimeOptions& options = {});

}  // namespace survexplain
