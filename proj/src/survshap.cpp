#include "survexplain/survshap.hpp"

#include "survexplain/parallel.hpp"
#include "survexplain/rng.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace survexplain {

namespace {

// Interventional coalition values: e^A(t) is the background mean of the
// prediction with the coalition's features pinned to the explained point.
class CoalitionValues {
 public:
  CoalitionValues(const SurvivalModel& model, const FeatureTable& background,
                  const FeatureTable& x, std::size_t row, const TimeGrid& times)
      : model_(model), background_(background), x_(x), row_(row), times_(times) {}

  const std::vector<double>& get(std::uint64_t mask) {
    auto it = cache_.find(mask);
    if (it != cache_.end()) return it->second;
    FeatureTable table = background_;
    for (std::size_t j = 0; j < table.n_cols(); ++j)
      if ((mask >> j) & 1ULL) table.set_column(j, x_.get(row_, j));
    Eigen::MatrixXd pred = model_.predict_survival_matrix(table, times_);
    std::vector<double> means(times_.size());
    for (std::size_t s = 0; s < times_.size(); ++s) {
      double acc = 0.0;
      for (std::size_t i = 0; i < background_.n_rows(); ++i)
        acc += pred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
      means[s] = acc / static_cast<double>(background_.n_rows());
    }
    return cache_.emplace(mask, std::move(means)).first->second;
  }

  void prefetch(const std::vector<std::uint64_t>& masks, int threads) {
    std::vector<std::uint64_t> missing;
    for (std::uint64_t m : masks)
      if (cache_.find(m) == cache_.end()) missing.push_back(m);
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::vector<std::vector<double>> values(missing.size());
    parallel_for(missing.size(), threads, [&](std::size_t i) {
      FeatureTable table = background_;
      for (std::size_t j = 0; j < table.n_cols(); ++j)
        if ((missing[i] >> j) & 1ULL) table.set_column(j, x_.get(row_, j));
      Eigen::MatrixXd pred = model_.predict_survival_matrix(table, times_);
      std::vector<double> means(times_.size());
      for (std::size_t s = 0; s < times_.size(); ++s) {
        double acc = 0.0;
        for (std::size_t b = 0; b < background_.n_rows(); ++b)
          acc += pred(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(s));
        means[s] = acc / static_cast<double>(background_.n_rows());
      }
      values[i] = std::move(means);
    });
    for (std::size_t i = 0; i < missing.size(); ++i)
      cache_.emplace(missing[i], std::move(values[i]));
  }

 private:
  const SurvivalModel& model_;
  const FeatureTable& background_;
  const FeatureTable& x_;
  std::size_t row_;
  const TimeGrid& times_;
  std::unordered_map<std::uint64_t, std::vector<double>> cache_;
};

double shapley_weight(std::size_t coalition_size, std::size_t p) {
  // |A|! (p - |A| - 1)! / p! = 1 / (p * C(p-1, |A|))
  double binom = 1.0;
  for (std::size_t i = 0; i < coalition_size; ++i)
    binom = binom * static_cast<double>(p - 1 - i) / static_cast<double>(i + 1);
  return 1.0 / (static_cast<double>(p) * binom);
}

void check_inputs(const FeatureTable& background, const FeatureTable& x, std::size_t row) {
  if (background.n_rows() == 0) throw std::invalid_argument("background must be nonempty");
  if (background.n_cols() != x.n_cols())
    throw std::invalid_argument("background and explained point schemas differ");
  if (row >= x.n_rows()) throw std::invalid_argument("row index out of range");
  if (background.n_cols() > 20)
    throw std::invalid_argument("more than 20 features are not supported");
}

}  // namespace

SurvShapResult survshap_sampling(const SurvivalModel& model, const FeatureTable& background,
                                 const FeatureTable& x, std::size_t row, const TimeGrid& times,
                                 bool exact, const SurvShapOptions& options) {
  check_inputs(background, x, row);
  std::size_t p = background.n_cols();
  std::size_t m = times.size();
  CoalitionValues values(model, background, x, row, times);

  SurvShapResult result;
  result.instance = row;
  result.times = times;
  result.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));

  if (exact) {
    result.estimator = "exact";
    result.n_samples = static_cast<int>(1ULL << p);
    std::vector<std::uint64_t> all_masks;
    for (std::uint64_t mask = 0; mask < (1ULL << p); ++mask) all_masks.push_back(mask);
    values.prefetch(all_masks, options.threads);
    std::uint64_t full = (1ULL << p) - 1;
    for (std::size_t j = 0; j < p; ++j) {
      for (std::uint64_t mask = 0; mask <= full; ++mask) {
        if ((mask >> j) & 1ULL) continue;
        std::size_t size = static_cast<std::size_t>(__builtin_popcountll(mask));
        double w = shapley_weight(size, p);
        const auto& without = values.get(mask);
        const auto& with = values.get(mask | (1ULL << j));
        for (std::size_t s = 0; s < m; ++s)
          result.phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) +=
              w * (with[s] - without[s]);
      }
    }
  } else {
    if (options.n_permutations < 1) throw std::invalid_argument("need at least one permutation");
    result.estimator = "sampling";
    result.n_samples = options.n_permutations;
    Rng rng(derive_seed(options.seed, 0x5a9));
    std::vector<std::vector<std::size_t>> perms(
        static_cast<std::size_t>(options.n_permutations));
    std::vector<std::uint64_t> needed;
    for (auto& perm : perms) {
      perm = rng.permutation(p);
      std::uint64_t mask = 0;
      needed.push_back(mask);
      for (std::size_t j : perm) {
        mask |= 1ULL << j;
        needed.push_back(mask);
      }
    }
    values.prefetch(needed, options.threads);
    for (const auto& perm : perms) {
      std::uint64_t mask = 0;
      for (std::size_t j : perm) {
        const auto& without = values.get(mask);
        mask |= 1ULL << j;
        const auto& with = values.get(mask);
        for (std::size_t s = 0; s < m; ++s)
          result.phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) +=
              with[s] - without[s];
      }
    }
    result.phi /= static_cast<double>(options.n_permutations);
  }

  result.baseline = values.get(0);
  return result;
}

SurvShapResult survshap_kernel(const SurvivalModel& model, const FeatureTable& background,
                               const FeatureTable& x, std::size_t row, const TimeGrid& times,
                               const SurvShapOptions& options) {
  check_inputs(background, x, row);
  std::size_t p = background.n_cols();
  std::size_t m = times.size();
  CoalitionValues values(model, background, x, row, times);

  SurvShapResult result;
  result.instance = row;
  result.times = times;
  result.estimator = "kernel";
  result.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));

  std::uint64_t full = p >= 64 ? ~0ULL : (1ULL << p) - 1;
  values.prefetch({0, full}, options.threads);
  const auto& e_empty = values.get(0);
  const auto& e_full = values.get(full);
  std::vector<double> delta(m);
  for (std::size_t s = 0; s < m; ++s) delta[s] = e_full[s] - e_empty[s];
  result.baseline = e_empty;

  if (p == 1) {
    // the efficiency constraint determines the single attribution
    result.n_samples = 2;
    for (std::size_t s = 0; s < m; ++s) result.phi(0, static_cast<Eigen::Index>(s)) = delta[s];
    return result;
  }

  // interior coalition rows and their kernel weights
  std::vector<std::uint64_t> masks;
  std::vector<double> weights;
  if (options.n_coalitions <= 0 ||
      static_cast<std::uint64_t>(options.n_coalitions) >= (1ULL << p) - 2) {
    // all interior coalitions with kernel weights (p-1) / (C(p,s) s (p-s))
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      auto size = static_cast<std::size_t>(__builtin_popcountll(mask));
      double binom = 1.0;
      for (std::size_t i = 0; i < size; ++i)
        binom = binom * static_cast<double>(p - i) / static_cast<double>(i + 1);
      masks.push_back(mask);
      weights.push_back(static_cast<double>(p - 1) /
                        (binom * static_cast<double>(size) * static_cast<double>(p - size)));
    }
  } else {
    // sample coalitions from the kernel distribution: sizes carry mass
    // proportional to (p-1)/(s(p-s)), members are uniform within a size
    std::vector<double> size_weight(p, 0.0);
    double total = 0.0;
    for (std::size_t size = 1; size < p; ++size) {
      size_weight[size] = static_cast<double>(p - 1) /
                          (static_cast<double>(size) * static_cast<double>(p - size));
      total += size_weight[size];
    }
    Rng rng(derive_seed(options.seed, 0x6e1));
    std::unordered_map<std::uint64_t, double> counts;
    for (int c = 0; c < options.n_coalitions; ++c) {
      double u = rng.uniform() * total;
      std::size_t size = 1;
      for (; size + 1 < p; ++size) {
        if (u < size_weight[size]) break;
        u -= size_weight[size];
      }
      auto members = rng.sample_without_replacement(p, size);
      std::uint64_t mask = 0;
      for (std::size_t j : members) mask |= 1ULL << j;
      counts[mask] += 1.0;
    }
    for (const auto& [mask, count] : counts) masks.push_back(mask);
    std::sort(masks.begin(), masks.end());
    weights.resize(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) weights[i] = counts[masks[i]];
  }
  result.n_samples = static_cast<int>(masks.size()) + 2;
  values.prefetch(masks, options.threads);

  // eliminate phi_p through the efficiency constraint and solve the reduced
  // weighted least squares per time point
  Eigen::Index pr = static_cast<Eigen::Index>(p) - 1;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(masks.size()), pr);
  for (std::size_t r = 0; r < masks.size(); ++r) {
    double zp = (masks[r] >> (p - 1)) & 1ULL ? 1.0 : 0.0;
    for (std::size_t j = 0; j + 1 < p; ++j) {
      double zj = (masks[r] >> j) & 1ULL ? 1.0 : 0.0;
      design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = zj - zp;
    }
  }
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(),
                                                  static_cast<Eigen::Index>(weights.size()));
  Eigen::MatrixXd gram = design.transpose() * w.asDiagonal() * design;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  bool ridged = false;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    gram += 1e-10 * Eigen::MatrixXd::Identity(pr, pr);
    ldlt.compute(gram);
    ridged = true;
  }
  result.ridged = ridged;

  for (std::size_t s = 0; s < m; ++s) {
    Eigen::VectorXd target(static_cast<Eigen::Index>(masks.size()));
    for (std::size_t r = 0; r < masks.size(); ++r) {
      double zp = (masks[r] >> (p - 1)) & 1ULL ? 1.0 : 0.0;
      target(static_cast<Eigen::Index>(r)) =
          values.get(masks[r])[s] - e_empty[s] - zp * delta[s];
    }
    Eigen::VectorXd reduced = ldlt.solve(design.transpose() * (w.asDiagonal() * target));
    double tail = delta[s];
    for (Eigen::Index j = 0; j < pr; ++j) {
      result.phi(j, static_cast<Eigen::Index>(s)) = reduced(j);
      tail -= reduced(j);
    }
    result.phi(static_cast<Eigen::Index>(p) - 1, static_cast<Eigen::Index>(s)) = tail;
  }
  return result;
}

GlobalShapSummary aggregate_global(const std::vector<SurvShapResult>& results,
                                   const SurvivalDataset& data) {
  if (results.empty()) throw std::invalid_argument("no per-instance results to aggregate");
  const TimeGrid& times = results.front().times;
  std::size_t p = static_cast<std::size_t>(results.front().phi.rows());
  for (const auto& r : results) {
    if (!(r.times == times)) throw std::invalid_argument("results use heterogeneous time grids");
    if (static_cast<std::size_t>(r.phi.rows()) != p)
      throw std::invalid_argument("results disagree on the feature count");
  }
  if (p != data.n_features())
    throw std::invalid_argument("results do not match the dataset feature count");

  GlobalShapSummary summary;
  summary.times = times;
  for (const auto& col : data.schema().columns) summary.features.push_back(col.name);
  std::size_t m = times.size(), n = results.size();
  summary.mean_abs_phi =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));
  summary.aggregated_phi =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  summary.feature_values =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = results[i];
    summary.instances.push_back(r.instance);
    for (std::size_t j = 0; j < p; ++j) {
      double mean_phi = 0.0;
      for (std::size_t s = 0; s < m; ++s) {
        double v = r.phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s));
        summary.mean_abs_phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) +=
            std::fabs(v) / static_cast<double>(n);
        mean_phi += v / static_cast<double>(m);
      }
      summary.aggregated_phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          mean_phi;
      summary.feature_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          data.features().get(r.instance, j);
    }
  }
  return summary;
}

}  // namespace survexplain
