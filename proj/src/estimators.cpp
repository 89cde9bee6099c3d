#include "survexplain/estimators.hpp"

#include <algorithm>
#include <stdexcept>

namespace survexplain {

namespace {

struct RiskStep {
  double time;
  std::size_t deaths;
  std::size_t at_risk;
};

// One entry per unique time carrying the count of target events (per flag)
// and the size of the risk set {i : t_i >= time}.
std::vector<RiskStep> risk_steps(const SurvivalDataset& data, int target_event) {
  std::size_t n = data.n_rows();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.time()[a] < data.time()[b];
  });

  std::vector<RiskStep> steps;
  std::size_t i = 0;
  while (i < n) {
    double t = data.time()[order[i]];
    std::size_t deaths = 0;
    std::size_t j = i;
    while (j < n && data.time()[order[j]] == t) {
      if (data.event()[order[j]] == target_event) ++deaths;
      ++j;
    }
    if (deaths > 0) steps.push_back({t, deaths, n - i});
    i = j;
  }
  return steps;
}

}  // namespace

TimeGrid unique_event_times(const SurvivalDataset& data, bool include_censoring_times) {
  std::vector<double> times;
  for (std::size_t i = 0; i < data.n_rows(); ++i)
    if (data.event()[i] == 1 || include_censoring_times) times.push_back(data.time()[i]);
  if (data.n_events() == 0) throw std::invalid_argument("no observed events");
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return TimeGrid(std::move(times));
}

StepCurve kaplan_meier(const SurvivalDataset& data) {
  if (data.n_events() == 0) throw std::invalid_argument("no observed events");
  auto steps = risk_steps(data, 1);
  std::vector<double> grid(steps.size()), values(steps.size());
  double s = 1.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    s *= 1.0 - static_cast<double>(steps[k].deaths) / static_cast<double>(steps[k].at_risk);
    grid[k] = steps[k].time;
    values[k] = s;
  }
  return StepCurve(TimeGrid(std::move(grid)), std::move(values), CurveKind::survival);
}

StepCurve nelson_aalen(const SurvivalDataset& data) {
  if (data.n_events() == 0) throw std::invalid_argument("no observed events");
  auto steps = risk_steps(data, 1);
  std::vector<double> grid(steps.size()), values(steps.size());
  double h = 0.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    h += static_cast<double>(steps[k].deaths) / static_cast<double>(steps[k].at_risk);
    grid[k] = steps[k].time;
    values[k] = h;
  }
  return StepCurve(TimeGrid(std::move(grid)), std::move(values), CurveKind::chf);
}

StepCurve censoring_km(const SurvivalDataset& data) {
  auto steps = risk_steps(data, 0);
  if (steps.empty()) {
    return StepCurve(TimeGrid({0.0}), {1.0}, CurveKind::survival);
  }
  std::vector<double> grid(steps.size()), values(steps.size());
  double s = 1.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    s *= 1.0 - static_cast<double>(steps[k].deaths) / static_cast<double>(steps[k].at_risk);
    grid[k] = steps[k].time;
    values[k] = s;
  }
  return StepCurve(TimeGrid(std::move(grid)), std::move(values), CurveKind::survival);
}

}  // namespace survexplain
