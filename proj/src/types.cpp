#include "survexplain/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace survexplain {

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("time grid must be nonempty");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i]) || points_[i] < 0.0)
      throw std::invalid_argument("time grid points must be finite and nonnegative");
    if (i > 0 && points_[i] <= points_[i - 1])
      throw std::invalid_argument("time grid must be strictly increasing");
  }
}

std::size_t TimeGrid::index_at(double t) const {
  auto it = std::upper_bound(points_.begin(), points_.end(), t);
  if (it == points_.begin()) return npos;
  return static_cast<std::size_t>(it - points_.begin()) - 1;
}

StepCurve::StepCurve(TimeGrid grid, std::vector<double> values, CurveKind kind)
    : grid_(std::move(grid)), values_(std::move(values)), kind_(kind) {
  if (grid_.size() != values_.size())
    throw std::invalid_argument("step curve grid/value size mismatch");
  const double tol = 1e-9;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double v = values_[i];
    if (!std::isfinite(v)) throw std::invalid_argument("step curve values must be finite");
    if (kind_ == CurveKind::survival) {
      if (v < -tol || v > 1.0 + tol)
        throw std::invalid_argument("survival values must lie in [0, 1]");
      if (i > 0 && v > values_[i - 1] + tol)
        throw std::invalid_argument("survival curve must be nonincreasing");
    } else if (kind_ == CurveKind::chf) {
      if (v < -tol) throw std::invalid_argument("cumulative hazard must be nonnegative");
      if (i > 0 && v < values_[i - 1] - tol)
        throw std::invalid_argument("cumulative hazard must be nondecreasing");
    }
  }
}

double StepCurve::value_before_start() const {
  switch (kind_) {
    case CurveKind::survival: return 1.0;
    case CurveKind::chf: return 0.0;
    default: return values_.empty() ? 0.0 : values_.front();
  }
}

double StepCurve::eval(double t) const {
  std::size_t idx = grid_.index_at(t);
  if (idx == TimeGrid::npos) return value_before_start();
  return values_[idx];
}

double StepCurve::eval_before(double t) const {
  const auto& pts = grid_.points();
  auto it = std::lower_bound(pts.begin(), pts.end(), t);
  if (it == pts.begin()) return value_before_start();
  return values_[static_cast<std::size_t>(it - pts.begin()) - 1];
}

StepCurve chf_to_survival(const StepCurve& curve) {
  if (curve.kind() != CurveKind::chf)
    throw std::invalid_argument("chf_to_survival expects a cumulative hazard curve");
  std::vector<double> values(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i)
    values[i] = std::exp(-curve.values()[i]);
  return StepCurve(curve.grid(), std::move(values), CurveKind::survival);
}

StepCurve survival_to_chf(const StepCurve& curve) {
  if (curve.kind() != CurveKind::survival)
    throw std::invalid_argument("survival_to_chf expects a survival curve");
  std::vector<double> values(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    double s = std::max(curve.values()[i], kSurvivalFloor);
    values[i] = -std::log(s);
  }
  return StepCurve(curve.grid(), std::move(values), CurveKind::chf);
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  throw std::invalid_argument("unknown feature: " + name);
}

FeatureTable::FeatureTable(FeatureSchema schema, std::size_t n_rows)
    : schema_(std::move(schema)), n_rows_(n_rows), data_(n_rows * schema_.size(), 0.0) {}

void FeatureTable::set_column(std::size_t col, double v) {
  for (std::size_t i = 0; i < n_rows_; ++i) set(i, col, v);
}

FeatureTable FeatureTable::select_rows(const std::vector<std::size_t>& rows) const {
  FeatureTable out(schema_, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < n_cols(); ++j)
      out.set(i, j, get(rows[i], j));
  return out;
}

SurvivalDataset::SurvivalDataset(FeatureTable features, std::vector<double> time,
                                 std::vector<int> event)
    : features_(std::move(features)), time_(std::move(time)), event_(std::move(event)) {
  std::size_t n = features_.n_rows();
  if (n == 0) throw std::invalid_argument("dataset must have at least one row");
  if (features_.n_cols() == 0) throw std::invalid_argument("dataset must have at least one feature");
  if (time_.size() != n || event_.size() != n)
    throw std::invalid_argument("time/event length must match feature rows");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(time_[i]) || time_[i] < 0.0)
      throw std::invalid_argument("times must be finite and nonnegative");
    if (event_[i] != 0 && event_[i] != 1)
      throw std::invalid_argument("event indicator must be 0 or 1");
  }
  for (std::size_t j = 0; j < features_.n_cols(); ++j) {
    const auto& col = schema().columns[j];
    if (col.type == ColumnType::categorical) {
      for (std::size_t i = 0; i < n; ++i) {
        double v = features_.get(i, j);
        auto idx = static_cast<long long>(v);
        if (v != static_cast<double>(idx) || idx < 0 ||
            idx >= static_cast<long long>(col.levels.size()))
          throw std::invalid_argument("categorical value out of range in column " + col.name);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(features_.get(i, j)))
          throw std::invalid_argument("non-finite numeric value in column " + col.name);
    }
  }
}

std::size_t SurvivalDataset::n_events() const {
  std::size_t k = 0;
  for (int e : event_) k += static_cast<std::size_t>(e);
  return k;
}

SurvivalDataset SurvivalDataset::select_rows(const std::vector<std::size_t>& rows) const {
  std::vector<double> t(rows.size());
  std::vector<int> e(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t[i] = time_[rows[i]];
    e[i] = event_[rows[i]];
  }
  return SurvivalDataset(features_.select_rows(rows), std::move(t), std::move(e));
}

StepCurve PredictionSurface::row_curve(std::size_t i) const {
  std::vector<double> v(static_cast<std::size_t>(values.cols()));
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
  return StepCurve(grid, std::move(v), kind);
}

}  // namespace survexplain
