#pragma once

#include "survexplain/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace survexplain {

struct SurvShapOptions {
  int n_permutations = 200;  // sampling estimator
  int n_coalitions = 0;      // kernel estimator; 0 means all interior coalitions
  std::uint64_t seed = 0;
  int threads = 0;
};

struct SurvShapResult {
  std::size_t instance = 0;
  TimeGrid times;
  Eigen::MatrixXd phi;            // p x m attributions
  std::vector<double> baseline;   // mean predicted survival over the background
  std::string estimator;          // "exact", "sampling" or "kernel"
  int n_samples = 0;
  bool ridged = false;
};

// Attributions of the predicted survival curve against the background-average
// curve, with interventional conditioning: absent features are drawn from the
// background rows. Exact mode enumerates all coalitions (p <= 20 guard);
// otherwise permutations are sampled.
SurvShapResult survshap_sampling(const SurvivalModel& model, const FeatureTable& background,
                                 const FeatureTable& x, std::size_t row, const TimeGrid& times,
                                 bool exact, const SurvShapOptions& options = {});

// Kernel-weighted least squares over coalition rows; the empty and grand
// coalitions are pinned through the efficiency constraint.
SurvShapResult survshap_kernel(const SurvivalModel& model, const FeatureTable& background,
                               const FeatureTable& x, std::size_t row, const TimeGrid& times,
                               const SurvShapOptions& options = {});

struct GlobalShapSummary {
  TimeGrid times;
  std::vector<std::string> features;
  Eigen::MatrixXd mean_abs_phi;    // p x m importance-over-time curves
  std::vector<std::size_t> instances;
  Eigen::MatrixXd aggregated_phi;  // instances x p, time-averaged
  Eigen::MatrixXd feature_values;  // instances x p, observed values
};

// Global summaries: mean |phi_j(t)| over instances plus the per-instance
// time-aggregated table used for beeswarm plots. All results must share one
// time grid.
GlobalShapSummary aggregate_global(const std::vector<SurvShapResult>& results,
                                   const SurvivalDataset& data);

}  // namespace survexplain
