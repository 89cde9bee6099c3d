#include "survexplain/rsf.hpp"

#include "survexplain/estimators.hpp"
#include "survexplain/parallel.hpp"
#include "survexplain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace survexplain {

namespace {

constexpr std::size_t kExhaustiveLevelLimit = 10;

struct NodeContext {
  // per node-row: time bucket (number of forest death times <= t), event flag,
  // and raw feature access
  const SurvivalDataset* data;
  const std::vector<double>* death_times;  // node-local unique event times
  std::vector<std::size_t> bucket;         // per node row, bucket in [0, D]
  std::vector<std::size_t> rows;           // training row ids (with multiplicity)
  std::vector<double> deaths;              // d_s at node level
  std::vector<double> at_risk;             // Y_s at node level
};

// |log-rank| for a left/right partition described by per-bucket left counts.
// cnt1[b] = left rows whose time falls in bucket b, d1[s] = left deaths at
// death time s.
double logrank_stat(const NodeContext& ctx, const std::vector<double>& cnt1,
                    const std::vector<double>& d1) {
  std::size_t d_count = ctx.death_times->size();
  double num = 0.0, den = 0.0;
  double y1 = 0.0;
  for (std::size_t b = d_count + 1; b-- > 1;) {
    y1 += cnt1[b];
    std::size_t s = b - 1;
    double y = ctx.at_risk[s];
    double d = ctx.deaths[s];
    if (y < 2.0) continue;
    num += d1[s] - y1 * d / y;
    den += (y1 / y) * (1.0 - y1 / y) * ((y - d) / (y - 1.0)) * d;
  }
  if (den <= 0.0) return -1.0;
  return std::fabs(num) / std::sqrt(den);
}

struct BestSplit {
  double stat = -1.0;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::uint64_t level_mask = 0;
  bool categorical = false;
};

void search_numeric(const NodeContext& ctx, std::size_t feature, std::size_t min_node_size,
                    BestSplit& best) {
  std::size_t k = ctx.rows.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const FeatureTable& ft = ctx.data->features();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ft.get(ctx.rows[a], feature) < ft.get(ctx.rows[b], feature);
  });

  std::size_t d_count = ctx.death_times->size();
  std::vector<double> cnt1(d_count + 1, 0.0), d1(d_count, 0.0);
  std::size_t pos = 0;
  while (pos < k) {
    double value = ft.get(ctx.rows[order[pos]], feature);
    // move every row tied at this value into the left child
    while (pos < k && ft.get(ctx.rows[order[pos]], feature) == value) {
      std::size_t local = order[pos];
      cnt1[ctx.bucket[local]] += 1.0;
      if (ctx.data->event()[ctx.rows[local]] == 1) {
        std::size_t s = ctx.bucket[local];
        d1[s - 1] += 1.0;
      }
      ++pos;
    }
    if (pos == k) break;  // largest value cannot split
    std::size_t left_n = pos, right_n = k - pos;
    if (left_n < min_node_size || right_n < min_node_size) continue;
    double stat = logrank_stat(ctx, cnt1, d1);
    if (stat > best.stat) {
      best.stat = stat;
      best.feature = feature;
      best.threshold = value;
      best.categorical = false;
    }
  }
}

void search_categorical(const NodeContext& ctx, std::size_t feature, std::size_t n_levels,
                        std::size_t min_node_size, BestSplit& best) {
  std::size_t k = ctx.rows.size();
  std::size_t d_count = ctx.death_times->size();
  const FeatureTable& ft = ctx.data->features();

  std::vector<std::vector<double>> cnt(n_levels, std::vector<double>(d_count + 1, 0.0));
  std::vector<std::vector<double>> dl(n_levels, std::vector<double>(d_count, 0.0));
  std::vector<std::size_t> level_count(n_levels, 0);
  for (std::size_t local = 0; local < k; ++local) {
    auto lev = static_cast<std::size_t>(ft.get(ctx.rows[local], feature));
    cnt[lev][ctx.bucket[local]] += 1.0;
    if (ctx.data->event()[ctx.rows[local]] == 1) dl[lev][ctx.bucket[local] - 1] += 1.0;
    level_count[lev] += 1;
  }

  std::vector<std::size_t> present;
  for (std::size_t l = 0; l < n_levels; ++l)
    if (level_count[l] > 0) present.push_back(l);
  if (present.size() < 2) return;

  std::vector<double> cnt1(d_count + 1), d1(d_count);
  auto evaluate_mask = [&](std::uint64_t mask) {
    std::fill(cnt1.begin(), cnt1.end(), 0.0);
    std::fill(d1.begin(), d1.end(), 0.0);
    std::size_t left_n = 0;
    for (std::size_t l : present) {
      if (!(mask & (1ULL << l))) continue;
      left_n += level_count[l];
      for (std::size_t b = 0; b <= d_count; ++b) cnt1[b] += cnt[l][b];
      for (std::size_t s = 0; s < d_count; ++s) d1[s] += dl[l][s];
    }
    if (left_n < min_node_size || k - left_n < min_node_size) return;
    double stat = logrank_stat(ctx, cnt1, d1);
    if (stat > best.stat) {
      best.stat = stat;
      best.feature = feature;
      best.level_mask = mask;
      best.categorical = true;
    }
  };

  if (present.size() <= kExhaustiveLevelLimit) {
    // all proper binary partitions; the first present level stays right so
    // each partition is visited once
    std::size_t m = present.size() - 1;
    for (std::uint64_t combo = 1; combo < (1ULL << m); ++combo) {
      std::uint64_t mask = 0;
      for (std::size_t b = 0; b < m; ++b)
        if (combo & (1ULL << b)) mask |= 1ULL << present[b + 1];
      evaluate_mask(mask);
    }
  } else {
    for (std::size_t l : present) evaluate_mask(1ULL << l);
  }
}

std::vector<double> terminal_chf(const SurvivalDataset& data, const std::vector<std::size_t>& rows,
                                 const TimeGrid& forest_grid) {
  std::size_t m = forest_grid.size();
  std::vector<double> deaths(m, 0.0), at_risk(m, 0.0);
  for (std::size_t row : rows) {
    double t = data.time()[row];
    // contributes to the risk set of every grid time <= t
    auto idx = forest_grid.index_at(t);
    if (idx != TimeGrid::npos) {
      at_risk[0] += 1.0;
      if (idx + 1 < m) at_risk[idx + 1] -= 1.0;
      if (data.event()[row] == 1 && forest_grid[idx] == t) deaths[idx] += 1.0;
    }
  }
  // at_risk currently holds difference flags; integrate
  double run = 0.0;
  std::vector<double> chf(m, 0.0);
  double cum = 0.0;
  for (std::size_t s = 0; s < m; ++s) {
    run += at_risk[s];
    if (run > 0.0) cum += deaths[s] / run;
    chf[s] = cum;
  }
  return chf;
}

struct TreeScratch {
  RSFTree tree;
  std::vector<bool> in_bag;
};

TreeScratch grow_tree(const SurvivalDataset& data, const TimeGrid& forest_grid,
                      const std::vector<std::size_t>& canonical, const RSFConfig& config,
                      std::size_t tree_index) {
  Rng rng(derive_seed(config.seed, 0x7255, tree_index));
  std::size_t n = data.n_rows();

  TreeScratch scratch;
  scratch.in_bag.assign(n, false);
  std::vector<std::size_t> root_rows;
  root_rows.reserve(n);
  if (config.bootstrap) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t row = canonical[rng.uniform_int(n)];
      root_rows.push_back(row);
      scratch.in_bag[row] = true;
    }
  } else {
    root_rows = canonical;
    scratch.in_bag.assign(n, true);
  }

  std::size_t p = data.n_features();
  std::size_t mtry = config.mtry;
  if (mtry == 0) mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
  mtry = std::min(mtry, p);

  struct Task {
    int node;
    std::vector<std::size_t> rows;
  };
  std::vector<Task> stack;
  scratch.tree.nodes.emplace_back();
  stack.push_back({0, std::move(root_rows)});

  while (!stack.empty()) {
    Task task = std::move(stack.back());
    stack.pop_back();
    RSFNode& node = scratch.tree.nodes[static_cast<std::size_t>(task.node)];

    bool terminal = task.rows.size() < 2 * config.min_node_size;
    BestSplit best;
    NodeContext ctx;
    if (!terminal) {
      // node-local death times and risk counts
      std::vector<double> death_times;
      for (std::size_t row : task.rows)
        if (data.event()[row] == 1) death_times.push_back(data.time()[row]);
      std::sort(death_times.begin(), death_times.end());
      death_times.erase(std::unique(death_times.begin(), death_times.end()), death_times.end());
      if (death_times.empty()) {
        terminal = true;
      } else {
        ctx.data = &data;
        ctx.death_times = &death_times;
        ctx.rows = task.rows;
        std::size_t d_count = death_times.size();
        ctx.bucket.resize(task.rows.size());
        std::vector<double> cnt(d_count + 1, 0.0);
        ctx.deaths.assign(d_count, 0.0);
        for (std::size_t local = 0; local < task.rows.size(); ++local) {
          double t = data.time()[task.rows[local]];
          auto it = std::upper_bound(death_times.begin(), death_times.end(), t);
          auto b = static_cast<std::size_t>(it - death_times.begin());
          ctx.bucket[local] = b;
          cnt[b] += 1.0;
          if (data.event()[task.rows[local]] == 1 && b > 0 && death_times[b - 1] == t)
            ctx.deaths[b - 1] += 1.0;
        }
        ctx.at_risk.assign(d_count, 0.0);
        double suffix = 0.0;
        for (std::size_t b = d_count + 1; b-- > 1;) {
          suffix += cnt[b];
          ctx.at_risk[b - 1] = suffix;
        }

        for (std::size_t f : rng.sample_without_replacement(p, mtry)) {
          const auto& col = data.schema().columns[f];
          if (col.type == ColumnType::numeric)
            search_numeric(ctx, f, config.min_node_size, best);
          else
            search_categorical(ctx, f, col.levels.size(), config.min_node_size, best);
        }
        if (best.stat <= 0.0) terminal = true;
      }
    }

    if (terminal) {
      node.feature = -1;
      node.chf = terminal_chf(data, task.rows, forest_grid);
      continue;
    }

    std::vector<std::size_t> left_rows, right_rows;
    const FeatureTable& ft = data.features();
    for (std::size_t row : task.rows) {
      double v = ft.get(row, best.feature);
      bool goes_left = best.categorical
                           ? (best.level_mask >> static_cast<std::size_t>(v)) & 1ULL
                           : v <= best.threshold;
      (goes_left ? left_rows : right_rows).push_back(row);
    }

    int left_id = static_cast<int>(scratch.tree.nodes.size());
    scratch.tree.nodes.emplace_back();
    int right_id = static_cast<int>(scratch.tree.nodes.size());
    scratch.tree.nodes.emplace_back();
    // re-fetch: emplace_back may have reallocated
    scratch.tree.nodes[static_cast<std::size_t>(task.node)].left = left_id;
    scratch.tree.nodes[static_cast<std::size_t>(task.node)].right = right_id;
    scratch.tree.nodes[static_cast<std::size_t>(task.node)].feature = static_cast<int>(best.feature);
    scratch.tree.nodes[static_cast<std::size_t>(task.node)].threshold = best.threshold;
    scratch.tree.nodes[static_cast<std::size_t>(task.node)].level_mask =
        best.categorical ? best.level_mask : 0;
    stack.push_back({left_id, std::move(left_rows)});
    stack.push_back({right_id, std::move(right_rows)});
  }
  return scratch;
}

const std::vector<double>& traverse(const RSFTree& tree, const FeatureTable& x, std::size_t row) {
  int node = 0;
  for (;;) {
    const RSFNode& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (nd.feature < 0) return nd.chf;
    double v = x.get(row, static_cast<std::size_t>(nd.feature));
    bool goes_left = nd.level_mask != 0 ? ((nd.level_mask >> static_cast<std::size_t>(v)) & 1ULL)
                                        : v <= nd.threshold;
    node = goes_left ? nd.left : nd.right;
  }
}

double harrell_c(const std::vector<double>& time, const std::vector<int>& event,
                 const std::vector<double>& risk, const std::vector<bool>& usable) {
  double concordant = 0.0, comparable = 0.0;
  std::size_t n = time.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!usable[i] || event[i] != 1) continue;
    for (std::size_t k = 0; k < n; ++k) {
      if (!usable[k] || k == i) continue;
      if (time[i] < time[k]) {
        comparable += 1.0;
        if (risk[i] > risk[k]) concordant += 1.0;
        else if (risk[i] == risk[k]) concordant += 0.5;
      }
    }
  }
  if (comparable == 0.0) return std::nan("");
  return concordant / comparable;
}

}  // namespace

RSFModel fit_rsf(const SurvivalDataset& data, const RSFConfig& config) {
  if (config.n_trees < 1) throw std::invalid_argument("n_trees must be positive");
  if (config.min_node_size < 1) throw std::invalid_argument("min_node_size must be positive");
  // min_node_size == n is allowed and yields root-only trees
  if (data.n_rows() < config.min_node_size)
    throw std::invalid_argument("need at least min_node_size rows");
  TimeGrid forest_grid = unique_event_times(data);

  // canonical row order keeps fits invariant to the layout of the training
  // table: sort by (time, event, features)
  std::size_t n = data.n_rows();
  std::vector<std::size_t> canonical(n);
  std::iota(canonical.begin(), canonical.end(), std::size_t{0});
  std::sort(canonical.begin(), canonical.end(), [&](std::size_t a, std::size_t b) {
    if (data.time()[a] != data.time()[b]) return data.time()[a] < data.time()[b];
    if (data.event()[a] != data.event()[b]) return data.event()[a] < data.event()[b];
    for (std::size_t j = 0; j < data.n_features(); ++j) {
      double va = data.features().get(a, j), vb = data.features().get(b, j);
      if (va != vb) return va < vb;
    }
    return false;
  });

  std::vector<TreeScratch> scratch(config.n_trees);
  parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
    scratch[t] = grow_tree(data, forest_grid, canonical, config, t);
  });

  std::vector<RSFTree> trees(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) trees[t] = std::move(scratch[t].tree);

  // out-of-bag concordance with risk = summed ensemble hazard
  RSFFitReport report;
  {
    std::vector<double> risk(n, 0.0);
    std::vector<int> oob_count(n, 0);
    std::size_t m = forest_grid.size();
    std::vector<double> acc(m);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      int cnt = 0;
      for (std::size_t t = 0; t < config.n_trees; ++t) {
        if (scratch[t].in_bag[i]) continue;
        const auto& chf = traverse(trees[t], data.features(), i);
        for (std::size_t s = 0; s < m; ++s) acc[s] += chf[s];
        ++cnt;
      }
      oob_count[i] = cnt;
      if (cnt > 0) {
        double sum = 0.0;
        for (std::size_t s = 0; s < m; ++s) sum += acc[s] / static_cast<double>(cnt);
        risk[i] = sum;
      }
    }
    std::vector<bool> usable(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      usable[i] = oob_count[i] > 0;
      any = any || usable[i];
    }
    if (any) {
      double c = harrell_c(data.time(), data.event(), risk, usable);
      if (!std::isnan(c)) {
        report.oob_cindex = c;
        report.has_oob = true;
      }
    }
  }

  StepCurve marginal = nelson_aalen(data);
  return RSFModel(data.schema(), std::move(forest_grid), std::move(trees), config, report,
                  std::move(marginal));
}

RSFModel::RSFModel(FeatureSchema schema, TimeGrid forest_grid, std::vector<RSFTree> trees,
                   RSFConfig config, RSFFitReport report, StepCurve marginal_chf)
    : schema_(std::move(schema)),
      forest_grid_(std::move(forest_grid)),
      trees_(std::move(trees)),
      config_(config),
      report_(report),
      marginal_chf_(std::move(marginal_chf)) {
  if (trees_.empty()) throw std::invalid_argument("forest must contain at least one tree");
}

void RSFModel::check_schema(const FeatureSchema& schema) const {
  if (schema.size() != schema_.size())
    throw std::invalid_argument("feature count does not match the fitted model");
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& got = schema.columns[j];
    const auto& fit = schema_.columns[j];
    if (got.name != fit.name || got.type != fit.type)
      throw std::invalid_argument("feature schema does not match the fitted model");
    std::size_t shared = std::min(got.levels.size(), fit.levels.size());
    for (std::size_t l = 0; l < shared; ++l)
      if (got.levels[l] != fit.levels[l])
        throw std::invalid_argument("categorical levels of " + got.name +
                                    " do not match the fitted model");
  }
}

std::vector<double> RSFModel::ensemble_chf(const FeatureTable& x, std::size_t row) const {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_.columns[j].type != ColumnType::categorical) continue;
    auto lev = static_cast<long long>(x.get(row, j));
    if (lev < 0 || lev >= static_cast<long long>(schema_.columns[j].levels.size()))
      throw std::invalid_argument("unknown categorical level in column " +
                                  schema_.columns[j].name);
  }
  std::size_t m = forest_grid_.size();
  std::vector<double> acc(m, 0.0);
  for (const auto& tree : trees_) {
    const auto& chf = traverse(tree, x, row);
    for (std::size_t s = 0; s < m; ++s) acc[s] += chf[s];
  }
  double inv = 1.0 / static_cast<double>(trees_.size());
  for (double& v : acc) v *= inv;
  return acc;
}

Eigen::MatrixXd RSFModel::predict_chf_matrix(const FeatureTable& x, const TimeGrid& grid) const {
  check_schema(x.schema());
  std::size_t n = x.n_rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.size()));
  // map requested times onto the forest grid once
  std::vector<std::size_t> idx(grid.size());
  for (std::size_t s = 0; s < grid.size(); ++s) idx[s] = forest_grid_.index_at(grid[s]);
  parallel_for(n, config_.threads, [&](std::size_t i) {
    std::vector<double> chf = ensemble_chf(x, i);
    for (std::size_t s = 0; s < grid.size(); ++s)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) =
          idx[s] == TimeGrid::npos ? 0.0 : chf[idx[s]];
  });
  return out;
}

Eigen::MatrixXd RSFModel::predict_survival_matrix(const FeatureTable& x,
                                                  const TimeGrid& grid) const {
  return (-predict_chf_matrix(x, grid).array()).exp().matrix();
}

}  // namespace survexplain
