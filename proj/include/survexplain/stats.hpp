#pragma once

#include <Eigen/Core>
#include <vector>

namespace survexplain {

// Type-7 quantile of a sample (linear interpolation of order statistics).
double quantile_type7(std::vector<double> values, double p);

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(T > t) for Student's t with df degrees of freedom.
double student_t_sf(double t, double df);

// One-sided paired test of mean(diffs) > 0. Uses a t-test when n >= 30 and an
// exact sign test otherwise; degenerate variance falls back per the t-test
// contract (p = 1 when the mean is <= 0, else sign test).
double one_sided_p_value(const std::vector<double>& diffs);

// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b);

// Classical multidimensional scaling to one dimension: double-center the
// squared distance matrix and return sqrt(lambda_1) * v_1.
Eigen::VectorXd mds_1d(const Eigen::MatrixXd& distances);

}  // namespace survexplain
