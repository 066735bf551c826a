#pragma once

#include <limits>
#include <optional>
#include <string>

#include "rootsgd/models.hpp"

namespace rootsgd {

/// Settings for assembling a plug-in covariance estimate.
///
/// delta lower-thresholds the averaged Hessian before inversion and
/// delta_prime upper-thresholds the averaged Hessian Kronecker square.
/// The defaults (1e-6 / 1e6) are effectively inactive: thresholding is a
/// safeguard against ill-conditioned draws, and the theoretically ideal
/// values depend on population constants that are unknown in practice.
/// Callers can override both per run.
struct PluginConfig {
  double delta = 1e-6;
  double delta_prime = 1e6;
  double eta = 0.0;  // optimizer step size; required for the full path
  bool hessian_deterministic = false;
};

/// Running sums of per-step Hessians, gradient outer products, and
/// (optionally) Hessian Kronecker squares, evaluated at the pre-update
/// iterate against the step's sample. Sums are stored raw and divided
/// only at finalize. The caller is responsible for feeding only
/// post-burn-in steps; `burn_in` is carried as bookkeeping.
class PluginAccumulator {
 public:
  PluginAccumulator(int dim, long burn_in, bool kron_enabled);

  void observe(const Vector& theta_pre, const Sample& x,
               const LossModel& model);

  int dim() const { return dim_; }
  long burn_in() const { return burn_in_; }
  bool kron_enabled() const { return kron_enabled_; }
  long count() const { return count_; }

  Matrix mean_hessian() const;         // \hat A
  Matrix mean_gradient_outer() const;  // \hat S
  Matrix mean_hessian_kron() const;    // \hat P, p^2 x p^2

 private:
  int dim_;
  long burn_in_;
  bool kron_enabled_;
  long count_ = 0;
  Matrix sum_hessian_;
  Matrix sum_gradient_outer_;
  Matrix sum_hessian_kron_;
};

/// Solves the empirical fixed-step covariance balance equation
///   L A + A L - eta * P(L) = eta * S
/// for L, where P acts on L through the vectorized system
///   (A (x) I + I (x) A - eta * P) vec(L) = eta * vec(S).
/// `a_thr` must already be lower-thresholded and `p_thr`
/// upper-thresholded; a singular system signals threshold
/// misconfiguration and raises std::runtime_error.
Matrix solve_lambda_hat(const Matrix& a_thr, const Matrix& p_thr,
                        const Matrix& s_hat, double eta);

/// Relative residual of the balance equation above at `lambda`,
/// measured against ||eta * S||_F.
double lyapunov_residual(const Matrix& lambda, const Matrix& a_thr,
                         const Matrix& p_thr, const Matrix& s_hat, double eta);

struct CovarianceEstimate {
  Matrix sigma;
  std::string method;
  long sample_count = 0;
  /// Balance-equation residual when the full path ran; NaN otherwise.
  double lyapunov_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Assembles the plug-in covariance from explicit averaged inputs.
///
/// With a deterministic Hessian the curvature-noise term vanishes and the
/// estimate collapses to the sandwich A^{-1} S A^{-1}. Otherwise the full
/// path thresholds A and P, solves for the balance matrix L, and returns
///   A^{-1} ((1/eta) (L A + A L) - A L A) A^{-1}
/// which simplifies to (1/eta)(A^{-1} L + L A^{-1}) - L.
CovarianceEstimate plugin_covariance(const Matrix& a_hat, const Matrix& s_hat,
                                     const std::optional<Matrix>& p_hat,
                                     long sample_count,
                                     const PluginConfig& config);

/// Finalize for a ROOT-SGD run: pure function of the accumulator state,
/// so it can be called at any checkpoint.
CovarianceEstimate plugin_finalize(const PluginAccumulator& acc,
                                   const PluginConfig& config);

/// Sandwich estimate A^{-1} S A^{-1} for averaged SGD, fed with the raw
/// SGD iterates from step 1 (no burn-in exclusion). The averaged Hessian
/// is inverted through a lower-thresholded eigendecomposition.
CovarianceEstimate asgd_plugin_finalize(const PluginAccumulator& acc,
                                        double delta = 1e-6);

/// Whether the Kronecker-square accumulation should run for this model:
/// skipped for deterministic Hessians (the full path is never needed) and
/// for dim > 32, where the p^2 x p^2 solve stops being reasonable.
bool plugin_kron_enabled(const LossModel& model);

}  // namespace rootsgd
