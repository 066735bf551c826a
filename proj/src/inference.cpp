#include "rootsgd/inference.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rootsgd {

namespace {

// Acklam's rational approximation for the inverse normal CDF.
double inverse_normal_initial(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

constexpr double kSqrt2Pi = 2.5066282746310002;

double clamped_variance(double var, double tolerance, const char* method) {
  if (var < -tolerance) {
    std::ostringstream msg;
    msg << method << ": covariance diagonal entry " << var
        << " is negative; the estimate is broken";
    throw std::invalid_argument(msg.str());
  }
  return var < 0.0 ? 0.0 : var;
}

ConfidenceInterval build_interval(const Vector& theta, const Matrix& scale,
                                  long t, double level, double quantile,
                                  const char* method) {
  if (t < 1) {
    throw std::invalid_argument("confidence interval: need t >= 1");
  }
  if (theta.size() != scale.rows() || scale.rows() != scale.cols()) {
    throw std::invalid_argument("confidence interval: dimension mismatch");
  }
  const double root_t = std::sqrt(static_cast<double>(t));
  const double tolerance =
      1e-9 * std::max(1.0, scale.diagonal().cwiseAbs().maxCoeff());
  ConfidenceInterval ci;
  ci.level = level;
  ci.method = method;
  ci.lower.resize(theta.size());
  ci.upper.resize(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    const double var = clamped_variance(scale(j, j), tolerance, method);
    const double half = quantile * std::sqrt(var) / root_t;
    ci.lower[j] = theta[j] - half;
    ci.upper[j] = theta[j] + half;
  }
  return ci;
}

}  // namespace

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw std::invalid_argument("normal_quantile: probability must lie in (0, 1)");
  }
  double x = inverse_normal_initial(prob);
  // One Halley step against the exact CDF via erfc.
  const double err = 0.5 * std::erfc(-x / std::sqrt(2.0)) - prob;
  const double u = err * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

ConfidenceInterval ci_normal(const Vector& theta, const Matrix& sigma, long t,
                             double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("ci_normal: level must lie in (0, 1)");
  }
  const double z = normal_quantile(0.5 * (1.0 + level));
  return build_interval(theta, sigma, t, level, z, "ci_normal");
}

ConfidenceInterval ci_normal(const Vector& theta,
                             const CovarianceEstimate& estimate, long t,
                             double level) {
  return ci_normal(theta, estimate.sigma, t, level);
}

ConfidenceInterval ci_random_scaling(const Vector& theta, const Matrix& v_t,
                                     long t, double level,
                                     std::optional<double> quantile) {
  double q;
  if (quantile.has_value()) {
    q = *quantile;
  } else if (std::abs(level - 0.95) <= 1e-12) {
    q = ReferenceConstants::q_rs_0975;
  } else {
    std::ostringstream msg;
    msg << "ci_random_scaling: only level 0.95 is tabulated; pass an "
        << "explicit pivot quantile for level " << level;
    throw std::invalid_argument(msg.str());
  }
  return build_interval(theta, v_t, t, level, q, "ci_random_scaling");
}

CovarianceEstimate rs_covariance(const Matrix& v_t) {
  CovarianceEstimate out;
  out.sigma = ReferenceConstants::var_x_rs * v_t;
  out.method = "random-scaling";
  return out;
}

}  // namespace rootsgd
