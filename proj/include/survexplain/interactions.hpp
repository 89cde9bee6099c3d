#pragma once

#include "survexplain/model.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace survexplain {

enum class ExplainScale { survival, log_chf };

struct HStatOptions {
  std::size_t sample_size = 200;  // evaluation rows (cost is quadratic)
  std::uint64_t seed = 0;
  ExplainScale scale = ExplainScale::survival;
  int threads = 0;
};

struct HStatResult {
  std::string kind;  // "two-way" or "total"
  std::string feature_a;
  std::string feature_b;  // empty for total
  TimeGrid times;
  std::vector<double> values;  // H^2 per time; NaN where the denominator vanished
  double marginal = 0.0;       // mean over defined time points
  bool any_gt1 = false;
};

// Share of centered two-way partial-dependence variance not explained by the
// centered one-way terms, per time point.
HStatResult h_two_way(const SurvivalModel& model, const SurvivalDataset& data,
                      const std::string& feature_a, const std::string& feature_b,
                      const TimeGrid& times, const HStatOptions& options = {});

// Interaction strength between one feature and all remaining features; the
// full-set partial dependence is the model prediction itself.
HStatResult h_total(const SurvivalModel& model, const SurvivalDataset& data,
                    const std::string& feature, const TimeGrid& times,
                    const HStatOptions& options = {});

}  // namespace survexplain
