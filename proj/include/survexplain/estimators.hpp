#pragma once

#include "survexplain/types.hpp"

namespace survexplain {

// Ascending unique times among event rows; set include_censoring_times to add
// censoring times to the grid. Throws when no event is observed.
TimeGrid unique_event_times(const SurvivalDataset& data, bool include_censoring_times = false);

// Product-limit survival estimator. Tied events are processed in one
// risk-set step.
StepCurve kaplan_meier(const SurvivalDataset& data);

// Cumulative-hazard estimator H(t) = sum of d_s / r_s over event times <= t.
StepCurve nelson_aalen(const SurvivalDataset& data);

// Kaplan-Meier estimate of the censoring distribution (event roles
// inverted). With no censored rows the curve is identically 1.
StepCurve censoring_km(const SurvivalDataset& data);

}  // namespace survexplain
