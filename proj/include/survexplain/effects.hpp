#pragma once

#include "survexplain/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace survexplain {

enum class GridKind { equidistant, quantile, sample, levels };

struct EffectGrid {
  std::string feature;
  GridKind kind = GridKind::quantile;
  std::vector<double> points;  // numeric values, or level indices for levels grids
  bool constant_feature = false;
};

enum class EffectMethod { ice, c_ice, pdp, c_pdp, mplot, ale_uncentered, ale_centered };
enum class TimeMarginal { none, mean_time, sum_time };

// Explanation values indexed by (instance, grid point, time). Aggregated
// surfaces (PDP, M-plot, ALE) carry a single instance slot and no ids.
struct EffectSurface {
  std::string feature;
  EffectGrid grid;
  TimeGrid times;
  std::vector<std::size_t> instances;
  std::size_t n_instances = 0, n_grid = 0, n_times = 0;
  std::vector<double> values;
  EffectMethod method = EffectMethod::ice;
  std::optional<double> reference;
  TimeMarginal marginal = TimeMarginal::none;

  double& at(std::size_t i, std::size_t k, std::size_t s) {
    return values[(i * n_grid + k) * n_times + s];
  }
  double at(std::size_t i, std::size_t k, std::size_t s) const {
    return values[(i * n_grid + k) * n_times + s];
  }
};

// Grid construction per kind; quantile grids use type-7 quantiles of the
// observed values, deduplicated. Categorical features always yield the
// observed levels in schema order.
EffectGrid build_grid(const SurvivalDataset& data, const std::string& feature, GridKind kind,
                      int g, std::uint64_t seed = 0);

// Seeded instance subsample used for ICE plotting (caps at `cap` rows).
std::vector<std::size_t> sample_instances(std::size_t n, std::size_t cap, std::uint64_t seed);

EffectSurface ice_curves(const SurvivalModel& model, const SurvivalDataset& data,
                         const EffectGrid& grid, const TimeGrid& times,
                         std::optional<double> center_at = std::nullopt,
                         const std::vector<std::size_t>& sample = {}, int threads = 0);

EffectSurface pdp_curves(const SurvivalModel& model, const SurvivalDataset& data,
                         const EffectGrid& grid, const TimeGrid& times,
                         std::optional<double> center_at = std::nullopt,
                         const std::vector<std::size_t>& sample = {}, int threads = 0);

// Conditional means over a symmetric rank window holding ceil(fraction * n)
// rows around each grid value. Empty neighborhoods yield NaN.
EffectSurface m_plot(const SurvivalModel& model, const SurvivalDataset& data,
                     const EffectGrid& grid, const TimeGrid& times,
                     double neighborhood_fraction = 0.1, int threads = 0);

// Accumulated local effects over quantile intervals; empty intervals merge
// into their left neighbor. Categorical features are ordered first (see
// order_categories).
EffectSurface ale_curves(const SurvivalModel& model, const SurvivalDataset& data,
                         const std::string& feature, const TimeGrid& times, int g_intervals = 10,
                         bool centered = true, int threads = 0);

// Time-marginalized ALE with the time average (or sum) taken inside the
// finite differences.
EffectSurface ale_t(const SurvivalModel& model, const SurvivalDataset& data,
                    const std::string& feature, const TimeGrid& times, TimeMarginal mode,
                    int g_intervals = 10, bool centered = true, int threads = 0);

// Collapses the time axis. Optional weights (e.g. multiplicities of observed
// times) must align with the surface grid; empty means uniform.
EffectSurface marginalize_time(const EffectSurface& surface, TimeMarginal mode,
                               const std::vector<double>& weights = {});

// Level order by similarity of the remaining features: pairwise
// Kolmogorov-Smirnov / total-variation distances reduced by classical 1-D
// multidimensional scaling. The first observed level in schema order gets a
// nonpositive coordinate.
std::vector<std::size_t> order_categories(const SurvivalDataset& data,
                                          const std::string& feature);

}  // namespace survexplain
