#pragma once

#include <optional>
#include <string>

#include "rootsgd/plugin_cov.hpp"

namespace rootsgd {

/// Tabulated constants for interval construction. q_rs_0975 is the 97.5%
/// quantile of the self-normalized limit variable and var_x_rs its
/// variance; both come from published numerical tables and are treated as
/// exact. Other levels of the self-normalized pivot require a
/// user-supplied quantile.
struct ReferenceConstants {
  static constexpr double z_0975 = 1.959963984540054;
  static constexpr double q_rs_0975 = 6.747;
  static constexpr double var_x_rs = 11.177513184;
};

/// Inverse standard-normal CDF, accurate to well below 1e-8 absolute
/// (rational initial guess plus one Halley refinement).
double normal_quantile(double prob);

struct ConfidenceInterval {
  Vector lower;
  Vector upper;
  double level = 0.0;
  std::string method;

  Vector half_widths() const { return 0.5 * (upper - lower); }
  bool contains(Index j, double value) const {
    return lower[j] <= value && value <= upper[j];
  }
};

/// Per-coordinate interval theta_j +/- z * sqrt(sigma_jj) / sqrt(t) with z
/// the standard-normal (1 + level)/2 quantile. Throws on a meaningfully
/// negative diagonal; sub-rounding negatives are clamped to zero.
ConfidenceInterval ci_normal(const Vector& theta, const Matrix& sigma, long t,
                             double level);
ConfidenceInterval ci_normal(const Vector& theta,
                             const CovarianceEstimate& estimate, long t,
                             double level);

/// Per-coordinate interval theta_j +/- q * sqrt(v_jj) / sqrt(t) using the
/// self-normalized pivot quantile. Only level 0.95 ships a tabulated q;
/// any other level needs an explicit `quantile`.
ConfidenceInterval ci_random_scaling(const Vector& theta, const Matrix& v_t,
                                     long t, double level,
                                     std::optional<double> quantile = {});

/// Covariance estimate derived from the scaling matrix: var_x_rs * V_t.
CovarianceEstimate rs_covariance(const Matrix& v_t);

}  // namespace rootsgd
