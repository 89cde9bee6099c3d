#pragma once

#include "survexplain/cox.hpp"
#include "survexplain/metrics.hpp"
#include "survexplain/rsf.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>

namespace survexplain {

using SurvLoss =
    std::function<LossValues(const SurvivalDataset&, const PredictionSurface&)>;

// Default loss: IPCW Brier per time with the integrated score as aggregate.
SurvLoss default_brier_loss();

enum class ImportanceMode { difference, quotient };

struct ImportanceOptions {
  int repeats = 10;
  ImportanceMode mode = ImportanceMode::difference;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct FeatureImportance {
  std::string feature;
  std::vector<double> per_time;
  double aggregate = 0.0;
  double p_value = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  // paired samples behind the significance test: per-repeat aggregate loss
  // differences (PFI) or per-row differences averaged over repeats (CPI)
  std::vector<double> samples;
};

struct ImportanceResult {
  std::string method;
  ImportanceMode mode = ImportanceMode::difference;
  TimeGrid times;
  int repeats = 1;
  std::vector<FeatureImportance> features;
};

ImportanceResult pfi(const SurvivalModel& model, const SurvivalDataset& data,
                     const SurvLoss& loss, const TimeGrid& times,
                     const ImportanceOptions& options = {});

// Second-order Gaussian knockoffs of the full one-hot encoded design,
// equicorrelated construction, re-discretized to the feature schema.
struct KnockoffSample {
  FeatureTable features;    // knockoff values in schema space
  Eigen::MatrixXd encoded;  // knockoff values in the encoded design
  Encoding encoding;        // full one-hot encoding used
};

KnockoffSample sample_knockoffs(const SurvivalDataset& data, std::uint64_t seed);

ImportanceResult cpi(const SurvivalModel& model, const SurvivalDataset& data,
                     const SurvLoss& loss, const TimeGrid& times,
                     const ImportanceOptions& options = {});

// Refit recipe for leave-one-covariate-out.
struct ModelSpec {
  enum class Family { cox, rsf } family = Family::cox;
  CoxFitConfig cox;
  RSFConfig rsf;

  std::unique_ptr<SurvivalModel> fit(const SurvivalDataset& data) const;
};

SurvivalDataset drop_feature(const SurvivalDataset& data, std::size_t col);

ImportanceResult loco(const ModelSpec& spec, const SurvivalDataset& data, const SurvLoss& loss,
                      const TimeGrid& times, const ImportanceOptions& options = {});

// One-sided tests of H0: FI_j <= 0 against FI_j > 0 over each feature's
// paired samples; fills the p_value fields in place.
void fi_significance(ImportanceResult& result);

}  // namespace survexplain
