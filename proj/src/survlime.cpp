#include "survexplain/survlime.hpp"

#include "survexplain/estimators.hpp"
#include "survexplain/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace survexplain {

SurvLimeResult survlime_explain(const SurvivalModel& model, const SurvivalDataset& data,
                                const FeatureTable& x, std::size_t row,
                                const SurvLimeOptions& options) {
  if (options.n_points < 2) throw std::invalid_argument("neighborhood needs at least two points");
  if (options.kernel_radius <= 0.0) throw std::invalid_argument("kernel radius must be positive");

  SurvLimeResult result;
  result.encoding = make_encoding(data.schema(), /*drop_reference=*/true);
  std::size_t q = result.encoding.width();
  std::size_t g = options.n_points;
  std::size_t p = data.n_features();

  // standardization constants from the data, per raw feature column
  std::vector<double> mean(p, 0.0), sd(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    if (data.schema().columns[j].type != ColumnType::numeric) continue;
    double m = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) m += data.features().get(i, j);
    m /= static_cast<double>(data.n_rows());
    double v = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
      double d = data.features().get(i, j) - m;
      v += d * d;
    }
    v /= static_cast<double>(std::max<std::size_t>(data.n_rows() - 1, 1));
    mean[j] = m;
    sd[j] = v > 0.0 ? std::sqrt(v) : 1.0;
  }

  // neighborhood: x itself plus g-1 perturbed copies
  Rng rng(derive_seed(options.seed, 0x11e));
  FeatureTable neighborhood(data.schema(), g);
  for (std::size_t j = 0; j < p; ++j) neighborhood.set(0, j, x.get(row, j));
  for (std::size_t k = 1; k < g; ++k) {
    for (std::size_t j = 0; j < p; ++j) {
      const auto& col = data.schema().columns[j];
      double v = x.get(row, j);
      if (col.type == ColumnType::numeric) {
        v += options.perturb_sd * sd[j] * rng.normal();
      } else if (rng.uniform() < options.categorical_flip) {
        std::size_t pick = static_cast<std::size_t>(rng.uniform_int(data.n_rows()));
        v = data.features().get(pick, j);
      }
      neighborhood.set(k, j, v);
    }
  }

  // kernel weights on standardized coordinates; the point itself gets 1
  result.point_weights.assign(g, 0.0);
  for (std::size_t k = 0; k < g; ++k) {
    double dist2 = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (data.schema().columns[j].type == ColumnType::numeric) {
        double d = (neighborhood.get(k, j) - x.get(row, j)) / sd[j];
        dist2 += d * d;
      } else if (neighborhood.get(k, j) != x.get(row, j)) {
        dist2 += 1.0;
      }
    }
    double dist = std::sqrt(dist2);
    result.point_weights[k] = std::max(0.0, 1.0 - std::sqrt(dist / options.kernel_radius));
  }

  // baseline cumulative hazard and black-box CHFs on the event-time grid
  StepCurve baseline = nelson_aalen(data);
  const TimeGrid& grid = baseline.grid();
  std::size_t m = grid.size();
  Eigen::MatrixXd chf = model.predict_chf_matrix(neighborhood, grid);

  // standardized encoded design with a leading free-intercept column; the
  // intercept rescales the surrogate baseline and absorbs the level gap
  // between the black-box hazards and the Nelson-Aalen baseline
  Eigen::MatrixXd enc = result.encoding.apply(neighborhood);
  result.neighborhood = enc;
  Eigen::RowVectorXd enc_scale(static_cast<Eigen::Index>(q));
  Eigen::RowVectorXd enc_center(static_cast<Eigen::Index>(q));
  for (std::size_t c = 0; c < q; ++c) {
    const auto& ec = result.encoding.columns[c];
    if (ec.level < 0) {
      enc_center(static_cast<Eigen::Index>(c)) = mean[ec.source_col];
      enc_scale(static_cast<Eigen::Index>(c)) = sd[ec.source_col];
    } else {
      enc_center(static_cast<Eigen::Index>(c)) = 0.0;
      enc_scale(static_cast<Eigen::Index>(c)) = 1.0;
    }
  }
  Eigen::Index qi = static_cast<Eigen::Index>(q) + 1;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(g), qi);
  design.col(0).setOnes();
  design.rightCols(static_cast<Eigen::Index>(q)) =
      ((enc.rowwise() - enc_center).array().rowwise() / enc_scale.array()).matrix();

  // stack one weighted regression row per usable (point, interval) cell
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(qi, qi);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(qi);
  std::vector<double> w_rows, y_rows;
  std::vector<Eigen::Index> k_rows;

  for (std::size_t k = 0; k < g; ++k) {
    double wk = result.point_weights[k];
    if (wk <= 0.0) continue;
    for (std::size_t s = 0; s + 1 < m; ++s) {
      double dt = grid[s + 1] - grid[s];
      if (dt <= 0.0) continue;
      double h = chf(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s));
      double h0 = baseline.values()[s];
      if (h <= 0.0 || h0 <= 0.0 || std::log(h) == 0.0) {
        ++result.dropped_cells;
        continue;
      }
      double lh = std::log(h);
      double v = h / lh;  // straightening weight
      double weight = wk * v * v * dt;
      double y = lh - std::log(h0);
      Eigen::RowVectorXd zrow = design.row(static_cast<Eigen::Index>(k));
      normal.noalias() += weight * zrow.transpose() * zrow;
      rhs.noalias() += weight * y * zrow.transpose();
      w_rows.push_back(weight);
      y_rows.push_back(y);
      k_rows.push_back(static_cast<Eigen::Index>(k));
    }
  }
  if (w_rows.empty()) throw std::runtime_error("no usable neighborhood observations");

  Eigen::VectorXd solution;
  if (options.dense_solve) {
    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(w_rows.size()), qi);
    Eigen::VectorXd target(static_cast<Eigen::Index>(w_rows.size()));
    for (std::size_t r = 0; r < w_rows.size(); ++r) {
      double sw = std::sqrt(w_rows[r]);
      stacked.row(static_cast<Eigen::Index>(r)) = sw * design.row(k_rows[r]);
      target(static_cast<Eigen::Index>(r)) = sw * y_rows[r];
    }
    solution = stacked.colPivHouseholderQr().solve(target);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    bool usable = ldlt.info() == Eigen::Success;
    if (usable) {
      solution = ldlt.solve(rhs);
      usable = (normal * solution - rhs).norm() <= 1e-8 * (1.0 + rhs.norm());
    }
    if (!usable) {
      Eigen::MatrixXd ridged = normal + 1e-8 * Eigen::MatrixXd::Identity(qi, qi);
      solution = ridged.ldlt().solve(rhs);
      result.ridged = true;
    }
  }

  double intercept = solution(0);
  result.coefficients = solution.tail(static_cast<Eigen::Index>(q));

  double objective = 0.0, objective_zero = 0.0;
  for (std::size_t r = 0; r < w_rows.size(); ++r) {
    double resid = y_rows[r] - design.row(k_rows[r]).dot(solution);
    objective += w_rows[r] * resid * resid;
    objective_zero += w_rows[r] * y_rows[r] * y_rows[r];
  }
  result.objective = objective;
  result.objective_at_zero = objective_zero;

  // raw-scale coefficients: b_raw = b_std / scale
  result.coefficients_raw =
      (result.coefficients.array() / enc_scale.transpose().array()).matrix();

  Eigen::RowVectorXd x_enc = result.encoding.apply_row(x, row);
  result.local_importance.resize(q);
  for (std::size_t c = 0; c < q; ++c)
    result.local_importance[c] = std::fabs(result.coefficients_raw(static_cast<Eigen::Index>(c)) *
                                           x_enc(static_cast<Eigen::Index>(c)));

  // surrogate and black-box curves at x, plus the fidelity gap
  double lp = intercept;
  for (std::size_t c = 0; c < q; ++c)
    lp += result.coefficients(static_cast<Eigen::Index>(c)) *
          (x_enc(static_cast<Eigen::Index>(c)) - enc_center(static_cast<Eigen::Index>(c))) /
          enc_scale(static_cast<Eigen::Index>(c));
  std::vector<double> surrogate(m);
  for (std::size_t s = 0; s < m; ++s)
    surrogate[s] = std::exp(-baseline.values()[s] * std::exp(lp));
  result.surrogate_curve = StepCurve(grid, std::move(surrogate), CurveKind::survival);
  result.blackbox_curve = model.predict_survival(x, row, grid);

  Eigen::MatrixXd chf_x = model.predict_chf_matrix(x.select_rows({row}), grid);
  double fidelity = 0.0;
  for (std::size_t s = 0; s + 1 < m; ++s) {
    double dt = grid[s + 1] - grid[s];
    double hb = chf_x(0, static_cast<Eigen::Index>(s));
    double hs = baseline.values()[s] * std::exp(lp);
    if (hb <= 0.0 || hs <= 0.0 || dt <= 0.0) continue;
    double d = std::log(hb) - std::log(hs);
    fidelity += d * d * dt;
  }
  result.fidelity = fidelity;
  return result;
}

}  // namespace survexplain
