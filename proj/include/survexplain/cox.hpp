#pragma once

#include "survexplain/dataio.hpp"
#include "survexplain/model.hpp"

#include <stdexcept>

namespace survexplain {

struct CoxFitConfig {
  double tolerance = 1e-9;  // sup-norm of the score vector
  int max_iter = 100;
};

struct CoxFitReport {
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_partial_likelihood = 0.0;
  bool ridged = false;
};

// Thrown when Newton iteration exhausts max_iter; carries the last iterate.
class CoxConvergenceError : public std::runtime_error {
 public:
  CoxConvergenceError(const std::string& msg, Eigen::VectorXd last)
      : std::runtime_error(msg), last_coefficients(std::move(last)) {}
  Eigen::VectorXd last_coefficients;
};

// Proportional hazards model with Breslow tie handling and Breslow baseline.
// H(t | x) = H0(t) * exp(b' enc(x)).
class CoxModel : public SurvivalModel {
 public:
  CoxModel() = default;
  CoxModel(Encoding encoding, Eigen::VectorXd coefficients, StepCurve baseline_chf,
           CoxFitReport report);

  const Encoding& encoding() const { return encoding_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }
  const StepCurve& baseline_chf() const { return baseline_chf_; }
  const CoxFitReport& fit_report() const { return report_; }

  double linear_predictor(const FeatureTable& x, std::size_t row) const;

  Eigen::MatrixXd predict_survival_matrix(const FeatureTable& x,
                                          const TimeGrid& grid) const override;
  Eigen::MatrixXd predict_chf_matrix(const FeatureTable& x, const TimeGrid& grid) const override;

 private:
  void check_schema(const FeatureSchema& schema) const;

  Encoding encoding_;
  Eigen::VectorXd coefficients_;
  StepCurve baseline_chf_;
  CoxFitReport report_;
};

CoxModel fit_cox(const SurvivalDataset& data, const CoxFitConfig& config = {});

// Breslow log partial likelihood of encoded design x against (time, event).
// Exposed for finite-difference checks of the fitted score.
double cox_log_partial_likelihood(const Eigen::MatrixXd& x, const std::vector<double>& time,
                                  const std::vector<int>& event, const Eigen::VectorXd& beta);

}  // namespace survexplain
