#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace survexplain {

// Floor applied to survival probabilities before taking logarithms.
inline constexpr double kSurvivalFloor = 1e-12;

// Strictly increasing, finite, nonempty sequence of nonnegative times.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> points);

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  bool empty() const { return points_.empty(); }

  // index of the last grid point <= t, or npos when t precedes the grid
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index_at(double t) const;

  bool operator==(const TimeGrid& other) const { return points_ == other.points_; }

 private:
  std::vector<double> points_;
};

enum class CurveKind { survival, chf, generic };

// Right-continuous step function over a time grid. Survival curves start at 1
// before the first grid point, cumulative hazards at 0.
class StepCurve {
 public:
  StepCurve() = default;
  StepCurve(TimeGrid grid, std::vector<double> values, CurveKind kind);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  CurveKind kind() const { return kind_; }
  std::size_t size() const { return values_.size(); }

  double eval(double t) const;
  // left limit: value just before t
  double eval_before(double t) const;

  double value_before_start() const;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
  CurveKind kind_ = CurveKind::generic;
};

StepCurve chf_to_survival(const StepCurve& curve);
StepCurve survival_to_chf(const StepCurve& curve);

enum class ColumnType { numeric, categorical };

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::numeric;
  std::vector<std::string> levels;  // categorical only
};

struct FeatureSchema {
  std::vector<ColumnSpec> columns;

  std::size_t size() const { return columns.size(); }
  std::size_t index_of(const std::string& name) const;  // throws if absent
};

// Feature values in row-major order against a schema; categorical cells hold
// the level index. This is the evaluation payload every model consumes, so
// explainers can build hybrid rows cheaply.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(FeatureSchema schema, std::size_t n_rows);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return schema_.size(); }
  const FeatureSchema& schema() const { return schema_; }

  double get(std::size_t row, std::size_t col) const { return data_[row * n_cols() + col]; }
  void set(std::size_t row, std::size_t col, double v) { data_[row * n_cols() + col] = v; }
  void set_column(std::size_t col, double v);

  const std::vector<double>& data() const { return data_; }

  FeatureTable select_rows(const std::vector<std::size_t>& rows) const;

 private:
  FeatureSchema schema_;
  std::size_t n_rows_ = 0;
  std::vector<double> data_;
};

// Right-censored sample: feature table plus per-row observed time and event
// indicator.
class SurvivalDataset {
 public:
  SurvivalDataset() = default;
  SurvivalDataset(FeatureTable features, std::vector<double> time, std::vector<int> event);

  std::size_t n_rows() const { return features_.n_rows(); }
  std::size_t n_features() const { return features_.n_cols(); }
  const FeatureTable& features() const { return features_; }
  const FeatureSchema& schema() const { return features_.schema(); }
  const std::vector<double>& time() const { return time_; }
  const std::vector<int>& event() const { return event_; }

  std::size_t n_events() const;
  SurvivalDataset select_rows(const std::vector<std::size_t>& rows) const;

 private:
  FeatureTable features_;
  std::vector<double> time_;
  std::vector<int> event_;
};

// n instances x m grid points of model output; the universal black-box
// prediction payload.
struct PredictionSurface {
  TimeGrid grid;
  Eigen::MatrixXd values;  // n x m
  CurveKind kind = CurveKind::survival;

  StepCurve row_curve(std::size_t i) const;
};

}  // namespace survexplain
