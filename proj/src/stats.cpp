#include "survexplain/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace survexplain {

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile probability must be in [0, 1]");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n == 1) return values[0];
  double h = (static_cast<double>(n) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n - 1) return values[n - 1];
  double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

// Continued fraction for the incomplete beta function (Lentz's method).
double betacf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 3e-16;
  const double fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  double front = std::exp(ln_beta + a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("degrees of freedom must be positive");
  double x = df / (df + t * t);
  double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? tail : 1.0 - tail;
}

double one_sided_p_value(const std::vector<double>& diffs) {
  std::size_t n = diffs.size();
  if (n == 0) throw std::invalid_argument("no samples for significance test");
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(n);

  auto sign_test = [&]() {
    std::size_t nonzero = 0, positive = 0;
    for (double d : diffs) {
      if (d != 0.0) {
        ++nonzero;
        if (d > 0.0) ++positive;
      }
    }
    if (nonzero == 0) return 1.0;
    // exact binomial tail P(X >= positive), X ~ Bin(nonzero, 1/2)
    double p = 0.0;
    double log_half = std::log(0.5);
    for (std::size_t k = positive; k <= nonzero; ++k) {
      double log_term = std::lgamma(static_cast<double>(nonzero) + 1.0) -
                        std::lgamma(static_cast<double>(k) + 1.0) -
                        std::lgamma(static_cast<double>(nonzero - k) + 1.0) +
                        static_cast<double>(nonzero) * log_half;
      p += std::exp(log_term);
    }
    return std::min(p, 1.0);
  };

  if (n < 30) return sign_test();

  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= static_cast<double>(n - 1);
  if (var <= 0.0) {
    if (mean <= 0.0) return 1.0;
    return sign_test();
  }
  double t = mean / std::sqrt(var / static_cast<double>(n));
  return student_t_sf(t, static_cast<double>(n - 1));
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS distance of empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    double fa = static_cast<double>(i) / static_cast<double>(a.size());
    double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

Eigen::VectorXd mds_1d(const Eigen::MatrixXd& distances) {
  Eigen::Index n = distances.rows();
  if (n != distances.cols() || n < 2)
    throw std::invalid_argument("distance matrix must be square with at least two rows");
  Eigen::MatrixXd d2 = distances.array().square();
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) -
                      Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd b = -0.5 * j * d2 * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("MDS eigendecomposition failed");
  // eigenvalues are ascending; take the largest
  double lambda = solver.eigenvalues()(n - 1);
  Eigen::VectorXd v = solver.eigenvectors().col(n - 1);
  if (lambda <= 0.0) return Eigen::VectorXd::Zero(n);
  return std::sqrt(lambda) * v;
}

}  // namespace survexplain
