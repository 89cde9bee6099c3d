#include "survexplain/cox.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace survexplain {

namespace {

struct EventGroup {
  double time;
  std::vector<std::size_t> deaths;  // row indices with an event at this time
};

// Unique event times ascending with their death sets, plus row order sorted
// by time ascending.
struct CoxLayout {
  std::vector<std::size_t> order;
  std::vector<EventGroup> groups;
};

CoxLayout build_layout(const std::vector<double>& time, const std::vector<int>& event) {
  CoxLayout layout;
  std::size_t n = time.size();
  layout.order.resize(n);
  std::iota(layout.order.begin(), layout.order.end(), std::size_t{0});
  std::sort(layout.order.begin(), layout.order.end(),
            [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
  std::size_t i = 0;
  while (i < n) {
    double t = time[layout.order[i]];
    EventGroup g{t, {}};
    std::size_t j = i;
    while (j < n && time[layout.order[j]] == t) {
      if (event[layout.order[j]] == 1) g.deaths.push_back(layout.order[j]);
      ++j;
    }
    if (!g.deaths.empty()) layout.groups.push_back(std::move(g));
    i = j;
  }
  return layout;
}

struct Derivatives {
  double ll = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

// Walks the risk sets from the latest time downward, accumulating
// S0 = sum exp(lp), S1 = sum x exp(lp), S2 = sum xx' exp(lp).
Derivatives cox_derivatives(const Eigen::MatrixXd& x, const std::vector<double>& time,
                            const CoxLayout& layout, const Eigen::VectorXd& beta,
                            bool with_info) {
  Eigen::Index q = x.cols();
  Eigen::VectorXd lp = x * beta;
  Derivatives d;
  d.score = Eigen::VectorXd::Zero(q);
  d.info = Eigen::MatrixXd::Zero(q, q);

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(q, q);

  std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(layout.order.size()) - 1;
  for (auto git = layout.groups.rbegin(); git != layout.groups.rend(); ++git) {
    while (pos >= 0 && time[layout.order[static_cast<std::size_t>(pos)]] >= git->time) {
      std::size_t row = layout.order[static_cast<std::size_t>(pos)];
      double w = std::exp(lp(static_cast<Eigen::Index>(row)));
      s0 += w;
      s1 += w * x.row(static_cast<Eigen::Index>(row)).transpose();
      if (with_info)
        s2 += w * x.row(static_cast<Eigen::Index>(row)).transpose() *
              x.row(static_cast<Eigen::Index>(row));
      --pos;
    }
    double dn = static_cast<double>(git->deaths.size());
    for (std::size_t row : git->deaths) {
      d.ll += lp(static_cast<Eigen::Index>(row));
      d.score += x.row(static_cast<Eigen::Index>(row)).transpose();
    }
    d.ll -= dn * std::log(s0);
    Eigen::VectorXd mu = s1 / s0;
    d.score -= dn * mu;
    if (with_info) d.info += dn * (s2 / s0 - mu * mu.transpose());
  }
  return d;
}

double log_likelihood_only(const Eigen::MatrixXd& x, const std::vector<double>& time,
                           const CoxLayout& layout, const Eigen::VectorXd& beta) {
  Eigen::VectorXd lp = x * beta;
  double ll = 0.0;
  double s0 = 0.0;
  std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(layout.order.size()) - 1;
  for (auto git = layout.groups.rbegin(); git != layout.groups.rend(); ++git) {
    while (pos >= 0 && time[layout.order[static_cast<std::size_t>(pos)]] >= git->time) {
      s0 += std::exp(lp(static_cast<Eigen::Index>(layout.order[static_cast<std::size_t>(pos)])));
      --pos;
    }
    for (std::size_t row : git->deaths) ll += lp(static_cast<Eigen::Index>(row));
    ll -= static_cast<double>(git->deaths.size()) * std::log(s0);
  }
  return ll;
}

}  // namespace

double cox_log_partial_likelihood(const Eigen::MatrixXd& x, const std::vector<double>& time,
                                  const std::vector<int>& event, const Eigen::VectorXd& beta) {
  CoxLayout layout = build_layout(time, event);
  return log_likelihood_only(x, time, layout, beta);
}

CoxModel fit_cox(const SurvivalDataset& data, const CoxFitConfig& config) {
  if (data.n_events() == 0) throw std::invalid_argument("no observed events");
  Encoding encoding = make_encoding(data.schema(), /*drop_reference=*/true);
  Eigen::MatrixXd x_raw = encoding.apply(data.features());
  Eigen::Index q = x_raw.cols();

  // the partial likelihood only sees covariates of event rows against their
  // risk sets, so identifiability needs full rank on the event subset
  std::vector<Eigen::Index> event_rows;
  for (std::size_t i = 0; i < data.n_rows(); ++i)
    if (data.event()[i] == 1) event_rows.push_back(static_cast<Eigen::Index>(i));
  Eigen::MatrixXd x_events(event_rows.size(), q);
  for (std::size_t i = 0; i < event_rows.size(); ++i)
    x_events.row(static_cast<Eigen::Index>(i)) = x_raw.row(event_rows[i]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x_events);
  if (qr.rank() < q)
    throw std::invalid_argument("design matrix is rank-deficient on the event subset");

  // center for conditioning; the partial likelihood and score are invariant
  Eigen::RowVectorXd mean = x_raw.colwise().mean();
  Eigen::MatrixXd x = x_raw.rowwise() - mean;

  CoxLayout layout = build_layout(data.time(), data.event());

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  double ll = log_likelihood_only(x, data.time(), layout, beta);
  CoxFitReport report;
  bool converged = false;

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    Derivatives d = cox_derivatives(x, data.time(), layout, beta, true);
    report.iterations = iter;
    report.gradient_norm = d.score.lpNorm<Eigen::Infinity>();
    report.log_partial_likelihood = d.ll;
    if (report.gradient_norm <= config.tolerance) {
      converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(d.info);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(d.score);
    } else {
      Eigen::MatrixXd ridged = d.info + 1e-8 * Eigen::MatrixXd::Identity(q, q);
      step = ridged.ldlt().solve(d.score);
      report.ridged = true;
    }
    double new_ll = 0.0;
    Eigen::VectorXd candidate;
    bool improved = false;
    // slack covers the rounding granularity of ll so full Newton steps keep
    // being taken when the objective is flat to machine precision
    double slack = 1e-10 * (1.0 + std::fabs(ll));
    for (int halving = 0; halving <= 20; ++halving) {
      candidate = beta + step;
      new_ll = log_likelihood_only(x, data.time(), layout, candidate);
      if (new_ll >= ll - slack) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      // stuck; report the score at the current point
      break;
    }
    beta = candidate;
    ll = new_ll;
    if (beta.lpNorm<Eigen::Infinity>() > 50.0)
      throw std::runtime_error("monotone likelihood: a coefficient diverged");
  }

  if (!converged) {
    Derivatives d = cox_derivatives(x, data.time(), layout, beta, false);
    if (d.score.lpNorm<Eigen::Infinity>() <= config.tolerance) {
      converged = true;
      report.gradient_norm = d.score.lpNorm<Eigen::Infinity>();
      report.log_partial_likelihood = d.ll;
    } else {
      throw CoxConvergenceError("Cox fit did not converge within max_iter", beta);
    }
  }

  // Breslow baseline on the raw covariate scale: accumulate over risk sets
  // with centered weights, then shift by exp(-b' mean).
  double shift = std::exp(-beta.dot(mean.transpose()));
  Eigen::VectorXd lp = x * beta;
  std::vector<double> grid(layout.groups.size()), h0(layout.groups.size());
  {
    double s0 = 0.0;
    std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(layout.order.size()) - 1;
    std::vector<double> denom(layout.groups.size());
    for (std::size_t gi = layout.groups.size(); gi-- > 0;) {
      const auto& g = layout.groups[gi];
      while (pos >= 0 && data.time()[layout.order[static_cast<std::size_t>(pos)]] >= g.time) {
        s0 += std::exp(lp(static_cast<Eigen::Index>(layout.order[static_cast<std::size_t>(pos)])));
        --pos;
      }
      denom[gi] = s0;
    }
    double cum = 0.0;
    for (std::size_t gi = 0; gi < layout.groups.size(); ++gi) {
      cum += static_cast<double>(layout.groups[gi].deaths.size()) / denom[gi];
      grid[gi] = layout.groups[gi].time;
      h0[gi] = cum * shift;
    }
  }

  return CoxModel(std::move(encoding), std::move(beta),
                  StepCurve(TimeGrid(std::move(grid)), std::move(h0), CurveKind::chf), report);
}

CoxModel::CoxModel(Encoding encoding, Eigen::VectorXd coefficients, StepCurve baseline_chf,
                   CoxFitReport report)
    : encoding_(std::move(encoding)),
      coefficients_(std::move(coefficients)),
      baseline_chf_(std::move(baseline_chf)),
      report_(report) {
  if (static_cast<std::size_t>(coefficients_.size()) != encoding_.width())
    throw std::invalid_argument("coefficient count must equal encoded width");
  if (baseline_chf_.kind() != CurveKind::chf)
    throw std::invalid_argument("baseline curve must be a cumulative hazard");
}

void CoxModel::check_schema(const FeatureSchema& schema) const {
  if (schema.size() != encoding_.schema.size())
    throw std::invalid_argument("feature count does not match the fitted model");
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& got = schema.columns[j];
    const auto& fit = encoding_.schema.columns[j];
    if (got.name != fit.name || got.type != fit.type)
      throw std::invalid_argument("feature schema does not match the fitted model");
    // level indices are interpreted against the fit-time list, so the shared
    // prefix must agree; rows using levels beyond it fail in the encoder
    std::size_t shared = std::min(got.levels.size(), fit.levels.size());
    for (std::size_t l = 0; l < shared; ++l)
      if (got.levels[l] != fit.levels[l])
        throw std::invalid_argument("categorical levels of " + got.name +
                                    " do not match the fitted model");
  }
}

double CoxModel::linear_predictor(const FeatureTable& x, std::size_t row) const {
  check_schema(x.schema());
  return encoding_.apply_row(x, row).dot(coefficients_);
}

Eigen::MatrixXd CoxModel::predict_chf_matrix(const FeatureTable& x, const TimeGrid& grid) const {
  check_schema(x.schema());
  Eigen::MatrixXd enc = encoding_.apply(x);
  Eigen::VectorXd risk = (enc * coefficients_).array().exp();
  Eigen::MatrixXd out(enc.rows(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t s = 0; s < grid.size(); ++s) {
    double h0 = baseline_chf_.eval(grid[s]);
    out.col(static_cast<Eigen::Index>(s)) = h0 * risk;
  }
  return out;
}

Eigen::MatrixXd CoxModel::predict_survival_matrix(const FeatureTable& x,
                                                  const TimeGrid& grid) const {
  return (-predict_chf_matrix(x, grid).array()).exp().matrix();
}

}  // namespace survexplain
