#include "survexplain/interactions.hpp"

#include "survexplain/effects.hpp"
#include "survexplain/parallel.hpp"
#include "survexplain/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace survexplain {

namespace {

Eigen::MatrixXd predict_scaled(const SurvivalModel& model, const FeatureTable& table,
                               const TimeGrid& times, ExplainScale scale) {
  if (scale == ExplainScale::survival) return model.predict_survival_matrix(table, times);
  Eigen::MatrixXd chf = model.predict_chf_matrix(table, times);
  return chf.array().max(kSurvivalFloor).log().matrix();
}

// Partial dependence at each evaluation row's own coordinates for the feature
// set `cols`: average over the evaluation sample of hybrids that take `cols`
// from row i and everything else from row l. N x m output.
Eigen::MatrixXd pd_at_rows(const SurvivalModel& model, const FeatureTable& base,
                           const std::vector<std::size_t>& cols, const TimeGrid& times,
                           ExplainScale scale, int threads) {
  std::size_t n = base.n_rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(times.size()));
  parallel_for(n, threads, [&](std::size_t i) {
    FeatureTable hybrid = base;
    for (std::size_t c : cols) hybrid.set_column(c, base.get(i, c));
    Eigen::MatrixXd pred = predict_scaled(model, hybrid, times, scale);
    out.row(static_cast<Eigen::Index>(i)) =
        pred.colwise().sum() / static_cast<double>(n);
  });
  return out;
}

void center_columns(Eigen::MatrixXd& m) {
  Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
}

std::vector<std::size_t> eval_sample(std::size_t n, const HStatOptions& options) {
  if (n <= options.sample_size) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
  }
  Rng rng(derive_seed(options.seed, 0x457a7));
  auto rows = rng.sample_without_replacement(n, options.sample_size);
  std::sort(rows.begin(), rows.end());
  return rows;
}

HStatResult assemble(const std::string& kind, const std::string& a, const std::string& b,
                     const TimeGrid& times, const Eigen::MatrixXd& numerator_terms,
                     const Eigen::MatrixXd& denominator_terms) {
  HStatResult result;
  result.kind = kind;
  result.feature_a = a;
  result.feature_b = b;
  result.times = times;
  std::size_t m = times.size();
  result.values.assign(m, 0.0);
  double marginal_acc = 0.0;
  std::size_t defined = 0;
  for (std::size_t s = 0; s < m; ++s) {
    double num = numerator_terms.col(static_cast<Eigen::Index>(s)).squaredNorm();
    double den = denominator_terms.col(static_cast<Eigen::Index>(s)).squaredNorm();
    if (den <= 0.0) {
      result.values[s] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double h2 = num / den;
    result.values[s] = h2;
    if (h2 > 1.0) result.any_gt1 = true;
    marginal_acc += h2;
    ++defined;
  }
  if (defined == 0) throw std::runtime_error("H-statistic undefined at every time point");
  result.marginal = marginal_acc / static_cast<double>(defined);
  return result;
}

}  // namespace

HStatResult h_two_way(const SurvivalModel& model, const SurvivalDataset& data,
                      const std::string& feature_a, const std::string& feature_b,
                      const TimeGrid& times, const HStatOptions& options) {
  if (feature_a == feature_b)
    throw std::invalid_argument("two-way interaction needs two distinct features");
  std::size_t ca = data.schema().index_of(feature_a);
  std::size_t cb = data.schema().index_of(feature_b);
  FeatureTable base = data.features().select_rows(eval_sample(data.n_rows(), options));

  Eigen::MatrixXd pd_ab = pd_at_rows(model, base, {ca, cb}, times, options.scale, options.threads);
  Eigen::MatrixXd pd_a = pd_at_rows(model, base, {ca}, times, options.scale, options.threads);
  Eigen::MatrixXd pd_b = pd_at_rows(model, base, {cb}, times, options.scale, options.threads);
  center_columns(pd_ab);
  center_columns(pd_a);
  center_columns(pd_b);

  Eigen::MatrixXd numerator = pd_ab - pd_a - pd_b;
  return assemble("two-way", feature_a, feature_b, times, numerator, pd_ab);
}

HStatResult h_total(const SurvivalModel& model, const SurvivalDataset& data,
                    const std::string& feature, const TimeGrid& times,
                    const HStatOptions& options) {
  std::size_t ca = data.schema().index_of(feature);
  FeatureTable base = data.features().select_rows(eval_sample(data.n_rows(), options));

  // full-set partial dependence is the prediction at the observed row
  Eigen::MatrixXd full = predict_scaled(model, base, times, options.scale);

  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < data.n_features(); ++j)
    if (j != ca) rest.push_back(j);

  Eigen::MatrixXd pd_a = pd_at_rows(model, base, {ca}, times, options.scale, options.threads);
  Eigen::MatrixXd pd_rest =
      rest.empty() ? Eigen::MatrixXd::Zero(full.rows(), full.cols())
                   : pd_at_rows(model, base, rest, times, options.scale, options.threads);
  center_columns(full);
  center_columns(pd_a);
  center_columns(pd_rest);

  Eigen::MatrixXd numerator = full - pd_a - pd_rest;
  return assemble("total", feature, "", times, numerator, full);
}

}  // namespace survexplain
