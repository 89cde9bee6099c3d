#include "survexplain/importance.hpp"

#include "survexplain/parallel.hpp"
#include "survexplain/rng.hpp"
#include "survexplain/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace survexplain {

SurvLoss default_brier_loss() {
  return [](const SurvivalDataset& data, const PredictionSurface& predictions) {
    return brier_loss(data, predictions);
  };
}

namespace {

std::vector<double> combine(const std::vector<double>& changed, const std::vector<double>& base,
                            ImportanceMode mode) {
  std::vector<double> out(changed.size());
  for (std::size_t s = 0; s < changed.size(); ++s)
    out[s] = mode == ImportanceMode::difference ? changed[s] - base[s]
                                                : changed[s] / base[s];
  return out;
}

double combine_scalar(double changed, double base, ImportanceMode mode) {
  return mode == ImportanceMode::difference ? changed - base : changed / base;
}

}  // namespace

ImportanceResult pfi(const SurvivalModel& model, const SurvivalDataset& data,
                     const SurvLoss& loss, const TimeGrid& times,
                     const ImportanceOptions& options) {
  if (options.repeats < 1) throw std::invalid_argument("repeats must be positive");
  std::size_t n = data.n_rows(), p = data.n_features();

  PredictionSurface base_surface = model.predict_surface(data.features(), times);
  LossValues base = loss(data, base_surface);

  ImportanceResult result;
  result.method = "pfi";
  result.mode = options.mode;
  result.times = times;
  result.repeats = options.repeats;
  result.features.resize(p);

  std::size_t tasks = p * static_cast<std::size_t>(options.repeats);
  std::vector<LossValues> losses(tasks);
  parallel_for(tasks, options.threads, [&](std::size_t task) {
    std::size_t j = task / static_cast<std::size_t>(options.repeats);
    std::size_t r = task % static_cast<std::size_t>(options.repeats);
    Rng rng(derive_seed(options.seed, 0x9f1, j, r));
    auto perm = rng.permutation(n);
    FeatureTable table = data.features();
    for (std::size_t i = 0; i < n; ++i) table.set(i, j, data.features().get(perm[i], j));
    PredictionSurface surface = model.predict_surface(table, times);
    losses[task] = loss(data, surface);
  });

  for (std::size_t j = 0; j < p; ++j) {
    FeatureImportance& fi = result.features[j];
    fi.feature = data.schema().columns[j].name;
    fi.per_time.assign(times.size(), 0.0);
    double agg = 0.0;
    for (int r = 0; r < options.repeats; ++r) {
      const LossValues& lv = losses[j * static_cast<std::size_t>(options.repeats) +
                                    static_cast<std::size_t>(r)];
      auto per_time = combine(lv.per_time, base.per_time, options.mode);
      for (std::size_t s = 0; s < times.size(); ++s) fi.per_time[s] += per_time[s];
      agg += combine_scalar(lv.aggregate, base.aggregate, options.mode);
      fi.samples.push_back(lv.aggregate - base.aggregate);
    }
    double inv = 1.0 / static_cast<double>(options.repeats);
    for (double& v : fi.per_time) v *= inv;
    fi.aggregate = agg * inv;
  }
  fi_significance(result);
  return result;
}

KnockoffSample sample_knockoffs(const SurvivalDataset& data, std::uint64_t seed) {
  KnockoffSample out;
  out.encoding = make_encoding(data.schema(), /*drop_reference=*/false);
  Eigen::MatrixXd x = out.encoding.apply(data.features());
  Eigen::Index n = x.rows(), q = x.cols();
  if (n < 2) throw std::invalid_argument("knockoffs need at least two rows");

  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd z = x.rowwise() - mean;
  Eigen::RowVectorXd sd(q);
  std::vector<bool> constant(static_cast<std::size_t>(q), false);
  for (Eigen::Index c = 0; c < q; ++c) {
    double v = z.col(c).squaredNorm() / static_cast<double>(n - 1);
    if (v <= 0.0) {
      constant[static_cast<std::size_t>(c)] = true;
      sd(c) = 1.0;
    } else {
      sd(c) = std::sqrt(v);
    }
    z.col(c) /= sd(c);
  }

  Eigen::MatrixXd sigma = (z.transpose() * z) / static_cast<double>(n - 1);
  // constant columns carry no structure; pin their diagonal
  for (Eigen::Index c = 0; c < q; ++c)
    if (constant[static_cast<std::size_t>(c)]) sigma(c, c) = 1.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw std::runtime_error("knockoff covariance decomposition failed");
  double lambda_min = eig.eigenvalues().minCoeff();
  double ridge = std::max(0.0, 1e-6 - lambda_min);
  if (ridge > 0.0) {
    sigma += ridge * Eigen::MatrixXd::Identity(q, q);
    eig.compute(sigma);
    lambda_min = eig.eigenvalues().minCoeff();
  }
  if (lambda_min <= 0.0) throw std::runtime_error("knockoff covariance is singular beyond repair");

  // equicorrelated construction: D = s I with s = min(1, 2 lambda_min)
  double s = std::min(1.0, 2.0 * lambda_min);
  Eigen::MatrixXd sigma_inv_d = s * sigma.llt().solve(Eigen::MatrixXd::Identity(q, q));
  Eigen::MatrixXd m = 2.0 * s * Eigen::MatrixXd::Identity(q, q) - s * sigma_inv_d;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> meig(m);
  if (meig.info() != Eigen::Success) throw std::runtime_error("knockoff factor decomposition failed");
  Eigen::VectorXd evals = meig.eigenvalues();
  for (Eigen::Index i = 0; i < q; ++i) {
    if (evals(i) < -1e-8) throw std::runtime_error("knockoff construction infeasible");
    evals(i) = std::sqrt(std::max(evals(i), 0.0));
  }
  Eigen::MatrixXd c = meig.eigenvectors() * evals.asDiagonal() * meig.eigenvectors().transpose();

  Rng rng(derive_seed(seed, 0x6e0c));
  Eigen::MatrixXd noise(n, q);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) noise(i, j) = rng.normal();

  Eigen::MatrixXd zt = z * (Eigen::MatrixXd::Identity(q, q) - sigma_inv_d) + noise * c;

  // back to the raw scale
  out.encoded = zt;
  for (Eigen::Index col = 0; col < q; ++col) {
    if (constant[static_cast<std::size_t>(col)]) {
      out.encoded.col(col) = x.col(col);
    } else {
      out.encoded.col(col) = (zt.col(col) * sd(col)).array() + mean(col);
    }
  }

  out.features = out.encoding.decode(out.encoded);
  // numeric knockoff values come straight from the encoded matrix; decode
  // already copied them, categorical blocks were re-discretized by argmax
  return out;
}

ImportanceResult cpi(const SurvivalModel& model, const SurvivalDataset& data,
                     const SurvLoss& loss, const TimeGrid& times,
                     const ImportanceOptions& options) {
  if (options.repeats < 1) throw std::invalid_argument("repeats must be positive");
  std::size_t n = data.n_rows(), p = data.n_features();

  PredictionSurface base_surface = model.predict_surface(data.features(), times);
  LossValues base = loss(data, base_surface);

  std::vector<KnockoffSample> knockoffs(static_cast<std::size_t>(options.repeats));
  for (int r = 0; r < options.repeats; ++r)
    knockoffs[static_cast<std::size_t>(r)] =
        sample_knockoffs(data, derive_seed(options.seed, 0xc91, static_cast<std::uint64_t>(r)));

  ImportanceResult result;
  result.method = "cpi";
  result.mode = options.mode;
  result.times = times;
  result.repeats = options.repeats;
  result.features.resize(p);

  std::size_t tasks = p * static_cast<std::size_t>(options.repeats);
  std::vector<LossValues> losses(tasks);
  parallel_for(tasks, options.threads, [&](std::size_t task) {
    std::size_t j = task / static_cast<std::size_t>(options.repeats);
    std::size_t r = task % static_cast<std::size_t>(options.repeats);
    FeatureTable table = data.features();
    for (std::size_t i = 0; i < n; ++i) table.set(i, j, knockoffs[r].features.get(i, j));
    PredictionSurface surface = model.predict_surface(table, times);
    losses[task] = loss(data, surface);
  });

  for (std::size_t j = 0; j < p; ++j) {
    FeatureImportance& fi = result.features[j];
    fi.feature = data.schema().columns[j].name;
    fi.per_time.assign(times.size(), 0.0);
    fi.samples.assign(n, 0.0);
    double agg = 0.0;
    for (int r = 0; r < options.repeats; ++r) {
      const LossValues& lv = losses[j * static_cast<std::size_t>(options.repeats) +
                                    static_cast<std::size_t>(r)];
      auto per_time = combine(lv.per_time, base.per_time, options.mode);
      for (std::size_t s = 0; s < times.size(); ++s) fi.per_time[s] += per_time[s];
      agg += combine_scalar(lv.aggregate, base.aggregate, options.mode);
      for (std::size_t i = 0; i < n; ++i)
        fi.samples[i] += lv.per_row_aggregate[i] - base.per_row_aggregate[i];
    }
    double inv = 1.0 / static_cast<double>(options.repeats);
    for (double& v : fi.per_time) v *= inv;
    fi.aggregate = agg * inv;
    for (double& v : fi.samples) v *= inv;
  }
  fi_significance(result);
  return result;
}

std::unique_ptr<SurvivalModel> ModelSpec::fit(const SurvivalDataset& data) const {
  if (family == Family::cox) return std::make_unique<CoxModel>(fit_cox(data, cox));
  return std::make_unique<RSFModel>(fit_rsf(data, rsf));
}

SurvivalDataset drop_feature(const SurvivalDataset& data, std::size_t col) {
  if (data.n_features() < 2)
    throw std::invalid_argument("cannot drop the only feature");
  if (col >= data.n_features()) throw std::invalid_argument("feature index out of range");
  FeatureSchema schema;
  for (std::size_t j = 0; j < data.n_features(); ++j)
    if (j != col) schema.columns.push_back(data.schema().columns[j]);
  FeatureTable table(schema, data.n_rows());
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    std::size_t out_j = 0;
    for (std::size_t j = 0; j < data.n_features(); ++j) {
      if (j == col) continue;
      table.set(i, out_j++, data.features().get(i, j));
    }
  }
  return SurvivalDataset(std::move(table), data.time(), data.event());
}

ImportanceResult loco(const ModelSpec& spec, const SurvivalDataset& data, const SurvLoss& loss,
                      const TimeGrid& times, const ImportanceOptions& options) {
  std::size_t p = data.n_features();
  if (p < 2) throw std::invalid_argument("leave-one-covariate-out needs at least two features");

  auto full = spec.fit(data);
  LossValues base = loss(data, full->predict_surface(data.features(), times));

  ImportanceResult result;
  result.method = "loco";
  result.mode = options.mode;
  result.times = times;
  result.repeats = 1;
  result.features.resize(p);

  parallel_for(p, options.threads, [&](std::size_t j) {
    FeatureImportance& fi = result.features[j];
    fi.feature = data.schema().columns[j].name;
    try {
      SurvivalDataset reduced = drop_feature(data, j);
      auto reduced_model = spec.fit(reduced);
      LossValues lv = loss(reduced, reduced_model->predict_surface(reduced.features(), times));
      fi.per_time = combine(lv.per_time, base.per_time, options.mode);
      fi.aggregate = combine_scalar(lv.aggregate, base.aggregate, options.mode);
    } catch (const std::exception&) {
      fi.failed = true;
      fi.per_time.assign(times.size(), std::numeric_limits<double>::quiet_NaN());
      fi.aggregate = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return result;
}

void fi_significance(ImportanceResult& result) {
  for (auto& fi : result.features) {
    if (fi.failed || fi.samples.empty()) continue;
    fi.p_value = one_sided_p_value(fi.samples);
  }
}

}  // namespace survexplain
