#include "survexplain/effects.hpp"

#include "survexplain/parallel.hpp"
#include "survexplain/rng.hpp"
#include "survexplain/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace survexplain {

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

// Re-runs single rows to attach the failing instance to a prediction error.
Eigen::MatrixXd predict_with_context(const SurvivalModel& model, const FeatureTable& table,
                                     const TimeGrid& times,
                                     const std::vector<std::size_t>& instances) {
  try {
    return model.predict_survival_matrix(table, times);
  } catch (const std::exception& e) {
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
      try {
        (void)model.predict_survival_matrix(table.select_rows({i}), times);
      } catch (const std::exception&) {
        std::size_t id = instances.empty() ? i : instances[i];
        throw std::runtime_error("prediction failed for instance " + std::to_string(id) + ": " +
                                 e.what());
      }
    }
    throw;
  }
}

}  // namespace

EffectGrid build_grid(const SurvivalDataset& data, const std::string& feature, GridKind kind,
                      int g, std::uint64_t seed) {
  std::size_t col = data.schema().index_of(feature);
  const auto& spec = data.schema().columns[col];
  EffectGrid grid;
  grid.feature = feature;

  if (spec.type == ColumnType::categorical) {
    grid.kind = GridKind::levels;
    std::set<double> seen;
    for (std::size_t i = 0; i < data.n_rows(); ++i) seen.insert(data.features().get(i, col));
    grid.points.assign(seen.begin(), seen.end());
    return grid;
  }

  std::vector<double> values(data.n_rows());
  for (std::size_t i = 0; i < data.n_rows(); ++i) values[i] = data.features().get(i, col);
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  grid.kind = kind;

  if (lo == hi) {
    grid.points = {lo};
    grid.constant_feature = true;
    return grid;
  }
  if (g < 2) throw std::invalid_argument("numeric grids need at least two points");

  switch (kind) {
    case GridKind::equidistant: {
      grid.points.resize(static_cast<std::size_t>(g));
      for (int k = 0; k < g; ++k)
        grid.points[static_cast<std::size_t>(k)] =
            lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(g - 1);
      break;
    }
    case GridKind::quantile: {
      for (int k = 0; k < g; ++k)
        grid.points.push_back(
            quantile_type7(values, static_cast<double>(k) / static_cast<double>(g - 1)));
      std::sort(grid.points.begin(), grid.points.end());
      grid.points.erase(std::unique(grid.points.begin(), grid.points.end()), grid.points.end());
      break;
    }
    case GridKind::sample: {
      Rng rng(derive_seed(seed, 0x62d));
      std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(g), values.size());
      for (std::size_t i : rng.sample_without_replacement(values.size(), take))
        grid.points.push_back(values[i]);
      std::sort(grid.points.begin(), grid.points.end());
      grid.points.erase(std::unique(grid.points.begin(), grid.points.end()), grid.points.end());
      break;
    }
    case GridKind::levels:
      throw std::invalid_argument("levels grid requested for numeric feature " + feature);
  }
  return grid;
}

std::vector<std::size_t> sample_instances(std::size_t n, std::size_t cap, std::uint64_t seed) {
  if (n <= cap) return all_rows(n);
  Rng rng(derive_seed(seed, 0x1ce));
  auto rows = rng.sample_without_replacement(n, cap);
  std::sort(rows.begin(), rows.end());
  return rows;
}

EffectSurface ice_curves(const SurvivalModel& model, const SurvivalDataset& data,
                         const EffectGrid& grid, const TimeGrid& times,
                         std::optional<double> center_at, const std::vector<std::size_t>& sample,
                         int threads) {
  std::size_t col = data.schema().index_of(grid.feature);
  std::vector<std::size_t> rows = sample.empty() ? all_rows(data.n_rows()) : sample;
  FeatureTable base = data.features().select_rows(rows);

  if (center_at) {
    if (grid.points.empty()) throw std::invalid_argument("empty grid");
    double lo = grid.points.front(), hi = grid.points.back();
    if (*center_at < lo || *center_at > hi)
      throw std::invalid_argument("center_at must lie within the grid range");
  }

  EffectSurface surface;
  surface.feature = grid.feature;
  surface.grid = grid;
  surface.times = times;
  surface.instances = rows;
  surface.n_instances = rows.size();
  surface.n_grid = grid.points.size();
  surface.n_times = times.size();
  surface.values.assign(surface.n_instances * surface.n_grid * surface.n_times, 0.0);
  surface.method = center_at ? EffectMethod::c_ice : EffectMethod::ice;
  surface.reference = center_at;

  Eigen::MatrixXd ref;
  if (center_at) {
    FeatureTable table = base;
    table.set_column(col, *center_at);
    ref = predict_with_context(model, table, times, rows);
  }

  parallel_for(surface.n_grid, threads, [&](std::size_t k) {
    FeatureTable table = base;
    table.set_column(col, grid.points[k]);
    Eigen::MatrixXd pred = predict_with_context(model, table, times, rows);
    for (std::size_t i = 0; i < surface.n_instances; ++i)
      for (std::size_t s = 0; s < surface.n_times; ++s) {
        double v = pred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
        if (center_at) v -= ref(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
        surface.at(i, k, s) = v;
      }
  });
  return surface;
}

EffectSurface pdp_curves(const SurvivalModel& model, const SurvivalDataset& data,
                         const EffectGrid& grid, const TimeGrid& times,
                         std::optional<double> center_at, const std::vector<std::size_t>& sample,
                         int threads) {
  EffectSurface ice = ice_curves(model, data, grid, times, center_at, sample, threads);
  EffectSurface surface;
  surface.feature = ice.feature;
  surface.grid = ice.grid;
  surface.times = ice.times;
  surface.n_instances = 1;
  surface.n_grid = ice.n_grid;
  surface.n_times = ice.n_times;
  surface.values.assign(surface.n_grid * surface.n_times, 0.0);
  surface.method = center_at ? EffectMethod::c_pdp : EffectMethod::pdp;
  surface.reference = center_at;
  for (std::size_t k = 0; k < surface.n_grid; ++k)
    for (std::size_t s = 0; s < surface.n_times; ++s) {
      double acc = 0.0;
      for (std::size_t i = 0; i < ice.n_instances; ++i) acc += ice.at(i, k, s);
      surface.at(0, k, s) = acc / static_cast<double>(ice.n_instances);
    }
  return surface;
}

EffectSurface m_plot(const SurvivalModel& model, const SurvivalDataset& data,
                     const EffectGrid& grid, const TimeGrid& times, double neighborhood_fraction,
                     int threads) {
  if (neighborhood_fraction <= 0.0 || neighborhood_fraction > 1.0)
    throw std::invalid_argument("neighborhood fraction must lie in (0, 1]");
  std::size_t col = data.schema().index_of(grid.feature);
  std::size_t n = data.n_rows();
  bool categorical = data.schema().columns[col].type == ColumnType::categorical;

  EffectSurface surface;
  surface.feature = grid.feature;
  surface.grid = grid;
  surface.times = times;
  surface.n_instances = 1;
  surface.n_grid = grid.points.size();
  surface.n_times = times.size();
  surface.values.assign(surface.n_grid * surface.n_times,
                        std::numeric_limits<double>::quiet_NaN());
  surface.method = EffectMethod::mplot;

  std::vector<std::size_t> order;
  std::vector<double> sorted_values;
  if (!categorical) {
    order = all_rows(n);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return data.features().get(a, col) < data.features().get(b, col);
    });
    sorted_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) sorted_values[i] = data.features().get(order[i], col);
  }
  std::size_t window =
      std::min<std::size_t>(n, static_cast<std::size_t>(
                                   std::ceil(neighborhood_fraction * static_cast<double>(n))));

  parallel_for(surface.n_grid, threads, [&](std::size_t k) {
    std::vector<std::size_t> rows;
    if (categorical) {
      for (std::size_t i = 0; i < n; ++i)
        if (data.features().get(i, col) == grid.points[k]) rows.push_back(i);
    } else {
      auto it = std::lower_bound(sorted_values.begin(), sorted_values.end(), grid.points[k]);
      std::size_t pos = static_cast<std::size_t>(it - sorted_values.begin());
      std::size_t lo = pos > window / 2 ? pos - window / 2 : 0;
      lo = std::min(lo, n - window);
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                  order.begin() + static_cast<std::ptrdiff_t>(lo + window));
    }
    if (rows.empty()) return;  // value stays missing
    FeatureTable table = data.features().select_rows(rows);
    table.set_column(col, grid.points[k]);
    Eigen::MatrixXd pred = predict_with_context(model, table, times, rows);
    for (std::size_t s = 0; s < surface.n_times; ++s) {
      double acc = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i)
        acc += pred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
      surface.at(0, k, s) = acc / static_cast<double>(rows.size());
    }
  });
  return surface;
}

namespace {

struct AlePartition {
  std::vector<double> boundaries;                 // g + 1 values
  std::vector<std::vector<std::size_t>> members;  // rows per interval
};

AlePartition ale_partition_numeric(const SurvivalDataset& data, std::size_t col, int g) {
  std::size_t n = data.n_rows();
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = data.features().get(i, col);
  std::vector<double> distinct(values);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2)
    throw std::invalid_argument("ALE needs at least two distinct feature values");

  double lo = distinct.front(), hi = distinct.back();
  std::vector<double> bounds;
  bounds.push_back(lo - 1e-9 * (hi - lo));
  for (int k = 1; k < g; ++k)
    bounds.push_back(quantile_type7(values, static_cast<double>(k) / static_cast<double>(g)));
  bounds.push_back(hi);
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  AlePartition part;
  part.boundaries = bounds;
  part.members.assign(bounds.size() - 1, {});
  for (std::size_t i = 0; i < n; ++i) {
    // x in (q_{k-1}, q_k]
    auto it = std::lower_bound(bounds.begin() + 1, bounds.end(), values[i]);
    auto k = static_cast<std::size_t>(it - (bounds.begin() + 1));
    k = std::min(k, part.members.size() - 1);
    part.members[k].push_back(i);
  }

  // merge empty intervals into the left neighbor (leading empties merge right)
  for (std::size_t k = 0; k < part.members.size();) {
    if (!part.members[k].empty()) {
      ++k;
      continue;
    }
    if (part.members.size() == 1)
      throw std::invalid_argument("ALE partition collapsed to one empty interval");
    if (k == 0) {
      part.boundaries.erase(part.boundaries.begin() + 1);
      part.members[1].insert(part.members[1].end(), part.members[0].begin(),
                             part.members[0].end());
      part.members.erase(part.members.begin());
    } else {
      part.boundaries.erase(part.boundaries.begin() + static_cast<std::ptrdiff_t>(k));
      part.members[k - 1].insert(part.members[k - 1].end(), part.members[k].begin(),
                                 part.members[k].end());
      part.members.erase(part.members.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  return part;
}

// Shared accumulation for per-time ALE and its time-marginalized variant.
EffectSurface ale_impl(const SurvivalModel& model, const SurvivalDataset& data,
                       const std::string& feature, const TimeGrid& times, int g_intervals,
                       bool centered, TimeMarginal marginal, int threads) {
  if (g_intervals < 1) throw std::invalid_argument("ALE needs at least one interval");
  std::size_t col = data.schema().index_of(feature);
  const auto& spec = data.schema().columns[col];
  std::size_t n = data.n_rows();

  std::vector<double> edge_values;  // substituted at interval edges
  std::vector<std::vector<std::size_t>> members;

  if (spec.type == ColumnType::numeric) {
    AlePartition part = ale_partition_numeric(data, col, g_intervals);
    edge_values = part.boundaries;
    members = std::move(part.members);
  } else {
    auto ordered = order_categories(data, feature);
    for (std::size_t l : ordered) edge_values.push_back(static_cast<double>(l));
    members.assign(ordered.size() - 1, {});
    // the interval between consecutive ordered levels collects rows of both
    for (std::size_t i = 0; i < n; ++i) {
      auto lev = static_cast<std::size_t>(data.features().get(i, col));
      for (std::size_t k = 0; k + 1 < ordered.size(); ++k)
        if (ordered[k] == lev || ordered[k + 1] == lev) members[k].push_back(i);
    }
  }

  std::size_t g = members.size();
  std::size_t out_times = marginal == TimeMarginal::none ? times.size() : 1;

  std::vector<std::vector<double>> effects(g, std::vector<double>(out_times, 0.0));
  parallel_for(g, threads, [&](std::size_t k) {
    const auto& rows = members[k];
    if (rows.empty()) return;
    FeatureTable upper = data.features().select_rows(rows);
    FeatureTable lower = upper;
    upper.set_column(col, edge_values[k + 1]);
    lower.set_column(col, edge_values[k]);
    Eigen::MatrixXd hi = predict_with_context(model, upper, times, rows);
    Eigen::MatrixXd lo = predict_with_context(model, lower, times, rows);
    Eigen::MatrixXd diff = hi - lo;
    if (marginal == TimeMarginal::none) {
      for (std::size_t s = 0; s < out_times; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i)
          acc += diff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
        effects[k][s] = acc / static_cast<double>(rows.size());
      }
    } else {
      // time marginalization sits inside the observation-wise differences
      double acc = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        double inner = 0.0;
        for (std::size_t s = 0; s < times.size(); ++s)
          inner += diff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
        if (marginal == TimeMarginal::mean_time)
          inner /= static_cast<double>(times.size());
        acc += inner;
      }
      effects[k][0] = acc / static_cast<double>(rows.size());
    }
  });

  EffectSurface surface;
  surface.feature = feature;
  surface.grid.feature = feature;
  surface.grid.kind = spec.type == ColumnType::numeric ? GridKind::quantile : GridKind::levels;
  surface.grid.points = edge_values;
  surface.times = marginal == TimeMarginal::none ? times : TimeGrid();
  surface.n_instances = 1;
  surface.n_grid = edge_values.size();
  surface.n_times = out_times;
  surface.values.assign(surface.n_grid * out_times, 0.0);
  surface.method = centered ? EffectMethod::ale_centered : EffectMethod::ale_uncentered;
  surface.marginal = marginal;

  for (std::size_t s = 0; s < out_times; ++s) {
    double cum = 0.0;
    surface.at(0, 0, s) = 0.0;
    for (std::size_t k = 0; k < g; ++k) {
      cum += effects[k][s];
      surface.at(0, k + 1, s) = cum;
    }
  }

  if (centered) {
    // the accumulated value a data point carries is the one at its own grid
    // position: interval upper edge for numeric, own level for categorical
    std::vector<double> weight(surface.n_grid, 0.0);
    if (spec.type == ColumnType::numeric) {
      for (std::size_t k = 0; k < g; ++k)
        weight[k + 1] = static_cast<double>(members[k].size());
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        auto lev = data.features().get(i, col);
        for (std::size_t k = 0; k < surface.n_grid; ++k)
          if (edge_values[k] == lev) weight[k] += 1.0;
      }
    }
    double total = 0.0;
    for (double w : weight) total += w;
    for (std::size_t s = 0; s < out_times; ++s) {
      double mean = 0.0;
      for (std::size_t k = 0; k < surface.n_grid; ++k) mean += weight[k] * surface.at(0, k, s);
      mean /= total;
      for (std::size_t k = 0; k < surface.n_grid; ++k) surface.at(0, k, s) -= mean;
    }
  }
  return surface;
}

}  // namespace

EffectSurface ale_curves(const SurvivalModel& model, const SurvivalDataset& data,
                         const std::string& feature, const TimeGrid& times, int g_intervals,
                         bool centered, int threads) {
  return ale_impl(model, data, feature, times, g_intervals, centered, TimeMarginal::none,
                  threads);
}

EffectSurface ale_t(const SurvivalModel& model, const SurvivalDataset& data,
                    const std::string& feature, const TimeGrid& times, TimeMarginal mode,
                    int g_intervals, bool centered, int threads) {
  if (mode == TimeMarginal::none)
    throw std::invalid_argument("ale_t needs a time marginalization mode");
  return ale_impl(model, data, feature, times, g_intervals, centered, mode, threads);
}

EffectSurface marginalize_time(const EffectSurface& surface, TimeMarginal mode,
                               const std::vector<double>& weights) {
  if (surface.marginal != TimeMarginal::none)
    throw std::invalid_argument("surface is already time-marginalized");
  if (mode == TimeMarginal::none) throw std::invalid_argument("marginalization mode required");
  if (!weights.empty() && weights.size() != surface.n_times)
    throw std::invalid_argument("time weight count must match the surface grid");

  EffectSurface out;
  out.feature = surface.feature;
  out.grid = surface.grid;
  out.times = TimeGrid();
  out.instances = surface.instances;
  out.n_instances = surface.n_instances;
  out.n_grid = surface.n_grid;
  out.n_times = 1;
  out.values.assign(out.n_instances * out.n_grid, 0.0);
  out.method = surface.method;
  out.reference = surface.reference;
  out.marginal = mode;

  double total_w = 0.0;
  for (std::size_t s = 0; s < surface.n_times; ++s)
    total_w += weights.empty() ? 1.0 : weights[s];

  for (std::size_t i = 0; i < out.n_instances; ++i)
    for (std::size_t k = 0; k < out.n_grid; ++k) {
      double acc = 0.0;
      for (std::size_t s = 0; s < surface.n_times; ++s) {
        double w = weights.empty() ? 1.0 : weights[s];
        acc += w * surface.at(i, k, s);
      }
      out.at(i, k, 0) = mode == TimeMarginal::mean_time ? acc / total_w : acc;
    }
  return out;
}

std::vector<std::size_t> order_categories(const SurvivalDataset& data,
                                          const std::string& feature) {
  std::size_t col = data.schema().index_of(feature);
  const auto& spec = data.schema().columns[col];
  if (spec.type != ColumnType::categorical)
    throw std::invalid_argument("order_categories needs a categorical feature");

  std::vector<std::size_t> observed;
  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
      if (static_cast<std::size_t>(data.features().get(i, col)) == l) {
        observed.push_back(l);
        break;
      }
    }
  }
  if (observed.size() < 2)
    throw std::invalid_argument("need at least two observed levels to order");

  std::size_t m = observed.size();
  Eigen::MatrixXd dist =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      double d = 0.0;
      for (std::size_t j = 0; j < data.n_features(); ++j) {
        if (j == col) continue;
        std::vector<double> va, vb;
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
          auto lev = static_cast<std::size_t>(data.features().get(i, col));
          if (lev == observed[a]) va.push_back(data.features().get(i, j));
          else if (lev == observed[b]) vb.push_back(data.features().get(i, j));
        }
        if (data.schema().columns[j].type == ColumnType::numeric) {
          d += ks_distance(va, vb);
        } else {
          std::size_t n_levels = data.schema().columns[j].levels.size();
          std::vector<double> pa(n_levels, 0.0), pb(n_levels, 0.0);
          for (double v : va)
            pa[static_cast<std::size_t>(v)] += 1.0 / static_cast<double>(va.size());
          for (double v : vb)
            pb[static_cast<std::size_t>(v)] += 1.0 / static_cast<double>(vb.size());
          double tv = 0.0;
          for (std::size_t l = 0; l < n_levels; ++l) tv += std::fabs(pa[l] - pb[l]);
          d += 0.5 * tv;
        }
      }
      dist(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d;
      dist(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = d;
    }
  }

  Eigen::VectorXd coords = mds_1d(dist);
  if (coords(0) > 0.0) coords = -coords;

  // coordinates tied up to solver noise keep their schema order
  double tie_eps = 1e-9 * (1.0 + coords.cwiseAbs().maxCoeff());
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    double da = coords(static_cast<Eigen::Index>(a));
    double db = coords(static_cast<Eigen::Index>(b));
    if (std::fabs(da - db) <= tie_eps) return false;
    return da < db;
  });
  std::vector<std::size_t> ordered(m);
  for (std::size_t i = 0; i < m; ++i) ordered[i] = observed[idx[i]];
  return ordered;
}

}  // namespace survexplain
