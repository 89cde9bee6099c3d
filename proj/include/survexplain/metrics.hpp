#pragma once

#include "survexplain/model.hpp"

namespace survexplain {

struct BrierResult {
  double value = 0.0;
  std::size_t dropped = 0;  // rows removed because the censoring weight hit 0
};

struct DCalibrationResult {
  double statistic = 0.0;
  std::vector<double> bin_counts;  // fractional for censored rows; sums to n
};

struct EvalReport {
  TimeGrid times;
  std::vector<double> brier;
  double integrated_brier = 0.0;
  double c_index = 0.0;
  DCalibrationResult d_calibration;
  std::size_t brier_dropped = 0;
};

// Inverse-probability-of-censoring weights: Kaplan-Meier estimate of the
// censoring distribution.
StepCurve censoring_weights(const SurvivalDataset& data);

// Graf-form IPCW Brier score at horizon t. Rows whose event precedes t use
// G(t_i-), surviving rows use G(t); rows censored before t contribute zero.
BrierResult brier_at_t(const SurvivalModel& model, const SurvivalDataset& data, double t);

double integrated_brier(const SurvivalModel& model, const SurvivalDataset& data,
                        const TimeGrid& grid);

// Harrell's concordance over comparable pairs (t_i < t_k with an event at i);
// risk is the negative expected-survival-time proxy -sum_s S(t_s | x).
double concordance_index(const SurvivalModel& model, const SurvivalDataset& data);
double concordance_index(const SurvivalModel& model, const SurvivalDataset& data,
                         const TimeGrid& grid);

// Chi-square calibration statistic over bins of S(t_i | x_i); censored rows
// spread uniformly over their surviving bins.
DCalibrationResult d_calibration(const SurvivalModel& model, const SurvivalDataset& data,
                                 int bins = 10);

// Unique event times clipped to [first event, 95th percentile of observed
// times]; the default horizon set for evaluation and loss curves.
TimeGrid default_eval_grid(const SurvivalDataset& data);

EvalReport evaluate(const SurvivalModel& model, const SurvivalDataset& data, int dcal_bins = 10);

// Loss contract used by the importance module: per-time losses over a fixed
// grid plus a scalar aggregate.
struct LossValues {
  std::vector<double> per_time;
  double aggregate = 0.0;
  std::vector<double> per_row_aggregate;  // per-row contributions to the aggregate
  std::size_t dropped = 0;
};

// IPCW Brier at each grid time with the trapezoid-integrated score as the
// aggregate. Censoring weights come from the unmodified data.
LossValues brier_loss(const SurvivalDataset& data, const PredictionSurface& predictions);

}  // namespace survexplain
