#pragma once

#include "survexplain/model.hpp"

#include <cstdint>
#include <vector>

namespace survexplain {

struct RSFConfig {
  std::size_t n_trees = 100;
  std::size_t mtry = 0;           // 0: ceil(sqrt(p))
  std::size_t min_node_size = 15;
  bool bootstrap = true;          // false: every tree sees the full sample
  std::uint64_t seed = 0;
  int threads = 0;
};

struct RSFNode {
  int feature = -1;               // -1 marks a terminal node
  double threshold = 0.0;         // numeric split: x <= threshold goes left
  std::uint64_t level_mask = 0;   // categorical split: level bit set goes left
  int left = -1;
  int right = -1;
  std::vector<double> chf;        // terminal Nelson-Aalen over the forest grid
};

struct RSFTree {
  std::vector<RSFNode> nodes;
};

struct RSFFitReport {
  double oob_cindex = 0.0;
  bool has_oob = false;
};

// Ensemble of log-rank survival trees; the ensemble cumulative hazard is the
// pointwise mean of terminal Nelson-Aalen curves.
class RSFModel : public SurvivalModel {
 public:
  RSFModel() = default;
  RSFModel(FeatureSchema schema, TimeGrid forest_grid, std::vector<RSFTree> trees,
           RSFConfig config, RSFFitReport report = {}, StepCurve marginal_chf = {});

  const FeatureSchema& schema() const { return schema_; }
  const TimeGrid& forest_grid() const { return forest_grid_; }
  const std::vector<RSFTree>& trees() const { return trees_; }
  const RSFConfig& config() const { return config_; }
  const RSFFitReport& fit_report() const { return report_; }
  // marginal cumulative hazard of the training sample
  const StepCurve& marginal_chf() const { return marginal_chf_; }

  Eigen::MatrixXd predict_chf_matrix(const FeatureTable& x, const TimeGrid& grid) const override;
  Eigen::MatrixXd predict_survival_matrix(const FeatureTable& x,
                                          const TimeGrid& grid) const override;

  // ensemble cumulative hazard on the forest grid
  std::vector<double> ensemble_chf(const FeatureTable& x, std::size_t row) const;

 private:
  void check_schema(const FeatureSchema& schema) const;

  FeatureSchema schema_;
  TimeGrid forest_grid_;
  std::vector<RSFTree> trees_;
  RSFConfig config_;
  RSFFitReport report_;
  StepCurve marginal_chf_;
};

RSFModel fit_rsf(const SurvivalDataset& data, const RSFConfig& config = {});

}  // namespace survexplain
