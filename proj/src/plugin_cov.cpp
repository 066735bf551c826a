#include "rootsgd/plugin_cov.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rootsgd {

namespace {

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_square(const Matrix& m, Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream msg;
    msg << what << " must be " << n << "x" << n << ", got " << m.rows() << "x"
        << m.cols();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

PluginAccumulator::PluginAccumulator(int dim, long burn_in, bool kron_enabled)
    : dim_(dim),
      burn_in_(burn_in),
      kron_enabled_(kron_enabled),
      sum_hessian_(Matrix::Zero(dim, dim)),
      sum_gradient_outer_(Matrix::Zero(dim, dim)),
      sum_hessian_kron_(kron_enabled ? Matrix::Zero(dim * dim, dim * dim)
                                     : Matrix()) {
  if (dim < 1) {
    throw std::invalid_argument("PluginAccumulator: dim must be positive");
  }
  if (burn_in < 0) {
    throw std::invalid_argument("PluginAccumulator: burn-in must be >= 0");
  }
}

void PluginAccumulator::observe(const Vector& theta_pre, const Sample& x,
                                const LossModel& model) {
  const Matrix h = model.hessian(theta_pre, x);
  const Vector g = model.grad(theta_pre, x);
  sum_hessian_ += h;
  sum_gradient_outer_.noalias() += g * g.transpose();
  if (kron_enabled_) {
    // In-place Kronecker accumulation; avoids a p^2 x p^2 temporary per step.
    const Index p = dim_;
    for (Index j = 0; j < p; ++j) {
      for (Index i = 0; i < p; ++i) {
        sum_hessian_kron_.block(i * p, j * p, p, p).noalias() += h(i, j) * h;
      }
    }
  }
  ++count_;
}

Matrix PluginAccumulator::mean_hessian() const {
  if (count_ == 0) {
    throw std::logic_error("PluginAccumulator: no observations");
  }
  return sum_hessian_ / static_cast<double>(count_);
}

Matrix PluginAccumulator::mean_gradient_outer() const {
  if (count_ == 0) {
    throw std::logic_error("PluginAccumulator: no observations");
  }
  return sum_gradient_outer_ / static_cast<double>(count_);
}

Matrix PluginAccumulator::mean_hessian_kron() const {
  if (!kron_enabled_) {
    throw std::logic_error(
        "PluginAccumulator: Kronecker accumulation is disabled");
  }
  if (count_ == 0) {
    throw std::logic_error("PluginAccumulator: no observations");
  }
  return sum_hessian_kron_ / static_cast<double>(count_);
}

Matrix solve_lambda_hat(const Matrix& a_thr, const Matrix& p_thr,
                        const Matrix& s_hat, double eta) {
  const Index p = a_thr.rows();
  check_square(a_thr, p, "solve_lambda_hat: averaged Hessian");
  check_square(s_hat, p, "solve_lambda_hat: gradient second moment");
  check_square(p_thr, p * p, "solve_lambda_hat: Kronecker term");
  if (!(eta > 0.0)) {
    throw std::invalid_argument("solve_lambda_hat: eta must be positive");
  }
  const Matrix ident = Matrix::Identity(p, p);
  Matrix system = kron(a_thr, ident) + kron(ident, a_thr);
  system.noalias() -= eta * p_thr;
  Vector sol;
  try {
    sol = solve_linear(system, eta * vectorize(s_hat));
  } catch (const std::runtime_error& e) {
    std::ostringstream msg;
    msg << "solve_lambda_hat: singular system; check the thresholds "
        << "delta/delta' against the step size (" << e.what() << ")";
    throw std::runtime_error(msg.str());
  }
  return symmetrized(unvectorize(sol, p));
}

double lyapunov_residual(const Matrix& lambda, const Matrix& a_thr,
                         const Matrix& p_thr, const Matrix& s_hat,
                         double eta) {
  const Index p = a_thr.rows();
  Matrix lhs = lambda * a_thr + a_thr * lambda;
  lhs -= eta * unvectorize(p_thr * vectorize(lambda), p);
  const double num = (lhs - eta * s_hat).norm();
  const double den = eta * s_hat.norm();
  return den > 0.0 ? num / den : num;
}

CovarianceEstimate plugin_covariance(const Matrix& a_hat, const Matrix& s_hat,
                                     const std::optional<Matrix>& p_hat,
                                     long sample_count,
                                     const PluginConfig& config) {
  if (sample_count < 1) {
    throw std::invalid_argument("plugin_covariance: need at least one sample");
  }
  const Matrix a_sym = symmetrized(a_hat);
  const Matrix s_sym = symmetrized(s_hat);
  const Matrix a_thr = spectral_threshold_lower(a_sym, config.delta);

  CovarianceEstimate out;
  out.sample_count = sample_count;

  if (config.hessian_deterministic) {
    // Constant Hessian: the curvature-noise term is identically zero and
    // the estimate is the plain sandwich.
    Eigen::PartialPivLU<Matrix> lu(a_thr);
    const Matrix half = lu.solve(s_sym);
    out.sigma = symmetrized(lu.solve(half.transpose()).transpose());
    out.method = "plugin-direct";
    return out;
  }

  if (!p_hat.has_value()) {
    throw std::runtime_error(
        "plugin_covariance: the full path needs the Kronecker accumulator; "
        "it is disabled for this run (stochastic Hessian with dim > 32?)");
  }
  const Matrix p_thr =
      spectral_threshold_upper(symmetrized(*p_hat), config.delta_prime);
  const Matrix lambda = solve_lambda_hat(a_thr, p_thr, s_sym, config.eta);
  out.lyapunov_residual =
      rootsgd::lyapunov_residual(lambda, a_thr, p_thr, s_sym, config.eta);

  Eigen::PartialPivLU<Matrix> lu(a_thr);
  const Matrix a_inv_lambda = lu.solve(lambda);
  out.sigma = symmetrized(
      (a_inv_lambda + a_inv_lambda.transpose()) / config.eta - lambda);
  out.method = "plugin-threshold";
  return out;
}

CovarianceEstimate plugin_finalize(const PluginAccumulator& acc,
                                   const PluginConfig& config) {
  std::optional<Matrix> p_hat;
  if (!config.hessian_deterministic && acc.kron_enabled()) {
    p_hat = acc.mean_hessian_kron();
  }
  return plugin_covariance(acc.mean_hessian(), acc.mean_gradient_outer(),
                           p_hat, acc.count(), config);
}

CovarianceEstimate asgd_plugin_finalize(const PluginAccumulator& acc,
                                        double delta) {
  PluginConfig config;
  config.delta = delta;
  config.hessian_deterministic = true;  // forces the sandwich path
  CovarianceEstimate out = plugin_covariance(
      acc.mean_hessian(), acc.mean_gradient_outer(), std::nullopt,
      acc.count(), config);
  out.method = "asgd-plugin";
  return out;
}

bool plugin_kron_enabled(const LossModel& model) {
  return model.hessian_kind() != HessianKind::deterministic &&
         model.dim() <= 32;
}

}  // namespace rootsgd
