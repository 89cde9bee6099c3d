#include "survexplain/metrics.hpp"

#include "survexplain/estimators.hpp"
#include "survexplain/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace survexplain {

StepCurve censoring_weights(const SurvivalDataset& data) { return censoring_km(data); }

namespace {

// Per-row Graf contributions at horizon t, scaled so that their plain mean
// equals the score. Rows with an undefined weight are flagged as dropped.
struct BrierTerms {
  std::vector<double> contribution;
  std::size_t usable = 0;
  std::size_t dropped = 0;
};

BrierTerms brier_terms(const SurvivalDataset& data, const StepCurve& censor_km,
                       const Eigen::MatrixXd& survival, Eigen::Index col, double t) {
  std::size_t n = data.n_rows();
  BrierTerms terms;
  terms.contribution.assign(n, 0.0);
  std::vector<bool> ok(n, true);
  double g_t = censor_km.eval(t);
  for (std::size_t i = 0; i < n; ++i) {
    double s = survival(static_cast<Eigen::Index>(i), col);
    if (data.time()[i] <= t && data.event()[i] == 1) {
      double g = censor_km.eval_before(data.time()[i]);
      if (g <= 0.0) {
        ok[i] = false;
        ++terms.dropped;
        continue;
      }
      terms.contribution[i] = s * s / g;
    } else if (data.time()[i] > t) {
      if (g_t <= 0.0) {
        ok[i] = false;
        ++terms.dropped;
        continue;
      }
      terms.contribution[i] = (1.0 - s) * (1.0 - s) / g_t;
    }
    // censored at or before t: weight 0, still counted
  }
  terms.usable = n - terms.dropped;
  if (terms.usable == 0) throw std::runtime_error("no usable rows for the Brier score");
  double scale = static_cast<double>(n) / static_cast<double>(terms.usable);
  for (std::size_t i = 0; i < n; ++i)
    terms.contribution[i] = ok[i] ? terms.contribution[i] * scale : 0.0;
  return terms;
}

double trapezoid_mean(const TimeGrid& grid, const std::vector<double>& values) {
  double span = grid.back() - grid.front();
  if (grid.size() < 2 || span <= 0.0)
    throw std::invalid_argument("integration grid must span a positive interval");
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < grid.size(); ++s)
    acc += 0.5 * (values[s] + values[s + 1]) * (grid[s + 1] - grid[s]);
  return acc / span;
}

}  // namespace

BrierResult brier_at_t(const SurvivalModel& model, const SurvivalDataset& data, double t) {
  if (t < 0.0) throw std::invalid_argument("horizon must be nonnegative");
  StepCurve g = censoring_weights(data);
  TimeGrid grid({t == 0.0 ? 0.0 : t});
  Eigen::MatrixXd s = model.predict_survival_matrix(data.features(), grid);
  BrierTerms terms = brier_terms(data, g, s, 0, t);
  double mean = 0.0;
  for (double c : terms.contribution) mean += c;
  mean /= static_cast<double>(data.n_rows());
  return BrierResult{mean, terms.dropped};
}

LossValues brier_loss(const SurvivalDataset& data, const PredictionSurface& predictions) {
  if (predictions.kind != CurveKind::survival)
    throw std::invalid_argument("brier loss needs survival predictions");
  if (static_cast<std::size_t>(predictions.values.rows()) != data.n_rows())
    throw std::invalid_argument("prediction rows must match the dataset");
  StepCurve g = censoring_weights(data);
  const TimeGrid& grid = predictions.grid;
  std::size_t n = data.n_rows(), m = grid.size();

  LossValues out;
  out.per_time.assign(m, 0.0);
  Eigen::MatrixXd contributions(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t s = 0; s < m; ++s) {
    BrierTerms terms = brier_terms(data, g, predictions.values, static_cast<Eigen::Index>(s),
                                   grid[s]);
    out.dropped += terms.dropped;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      contributions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) =
          terms.contribution[i];
      mean += terms.contribution[i];
    }
    out.per_time[s] = mean / static_cast<double>(n);
  }

  if (m >= 2 && grid.back() > grid.front()) {
    out.aggregate = trapezoid_mean(grid, out.per_time);
    out.per_row_aggregate.assign(n, 0.0);
    double span = grid.back() - grid.front();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t s = 0; s + 1 < m; ++s)
        acc += 0.5 *
               (contributions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) +
                contributions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s + 1))) *
               (grid[s + 1] - grid[s]);
      out.per_row_aggregate[i] = acc / span;
    }
  } else {
    out.aggregate = out.per_time[0];
    out.per_row_aggregate.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      out.per_row_aggregate[i] = contributions(static_cast<Eigen::Index>(i), 0);
  }
  return out;
}

double integrated_brier(const SurvivalModel& model, const SurvivalDataset& data,
                        const TimeGrid& grid) {
  PredictionSurface surface = model.predict_surface(data.features(), grid);
  LossValues loss = brier_loss(data, surface);
  if (grid.size() < 2 || grid.back() <= grid.front())
    throw std::invalid_argument("integration grid must span a positive interval");
  return loss.aggregate;
}

double concordance_index(const SurvivalModel& model, const SurvivalDataset& data) {
  return concordance_index(model, data, default_eval_grid(data));
}

double concordance_index(const SurvivalModel& model, const SurvivalDataset& data,
                         const TimeGrid& grid) {
  Eigen::MatrixXd s = model.predict_survival_matrix(data.features(), grid);
  std::size_t n = data.n_rows();
  std::vector<double> risk(n);
  for (std::size_t i = 0; i < n; ++i) risk[i] = -s.row(static_cast<Eigen::Index>(i)).sum();
  double concordant = 0.0, comparable = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (data.event()[i] != 1) continue;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i || data.time()[i] >= data.time()[k]) continue;
      comparable += 1.0;
      if (risk[i] > risk[k]) concordant += 1.0;
      else if (risk[i] == risk[k]) concordant += 0.5;
    }
  }
  if (comparable == 0.0) throw std::runtime_error("no comparable pairs");
  return concordant / comparable;
}

DCalibrationResult d_calibration(const SurvivalModel& model, const SurvivalDataset& data,
                                 int bins) {
  if (bins < 2) throw std::invalid_argument("need at least two calibration bins");
  std::size_t n = data.n_rows();

  // predict once on the grid of distinct observed times, then read each row's
  // own survival value
  std::vector<double> times(data.time());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  TimeGrid grid(std::move(times));
  Eigen::MatrixXd s = model.predict_survival_matrix(data.features(), grid);

  std::size_t b = static_cast<std::size_t>(bins);
  std::vector<double> counts(b, 0.0);
  double width = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = grid.index_at(data.time()[i]);
    double si = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(idx));
    si = std::clamp(si, 0.0, 1.0);
    if (data.event()[i] == 1) {
      auto bin = std::min(b - 1, static_cast<std::size_t>(si / width));
      counts[bin] += 1.0;
    } else if (si <= 0.0) {
      counts[0] += 1.0;
    } else {
      // survival value at the unobserved event time is uniform on [0, si]
      for (std::size_t k = 0; k < b; ++k) {
        double lo = static_cast<double>(k) * width;
        double hi = std::min(si, static_cast<double>(k + 1) * width);
        if (hi > lo) counts[k] += (hi - lo) / si;
      }
    }
  }

  double expected = static_cast<double>(n) / static_cast<double>(b);
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  return DCalibrationResult{stat, std::move(counts)};
}

TimeGrid default_eval_grid(const SurvivalDataset& data) {
  TimeGrid events = unique_event_times(data);
  double p95 = quantile_type7(data.time(), 0.95);
  std::vector<double> keep;
  for (double t : events.points())
    if (t <= p95) keep.push_back(t);
  if (keep.empty()) keep.push_back(events.front());
  return TimeGrid(std::move(keep));
}

EvalReport evaluate(const SurvivalModel& model, const SurvivalDataset& data, int dcal_bins) {
  EvalReport report;
  report.times = default_eval_grid(data);
  PredictionSurface surface = model.predict_surface(data.features(), report.times);
  LossValues loss = brier_loss(data, surface);
  report.brier = loss.per_time;
  report.integrated_brier = loss.aggregate;
  report.brier_dropped = loss.dropped;
  report.c_index = concordance_index(model, data, report.times);
  report.d_calibration = d_calibration(model, data, dcal_bins);
  return report;
}

}  // namespace survexplain
