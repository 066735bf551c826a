#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "rootsgd/linalg.hpp"

namespace rootsgd {

/// One observation from the data stream. Regression models split the
/// observation into explanatory `features` and a scalar `response`;
/// sufficient-statistic models carry the whole observation in `features`.
struct Sample {
  Vector features;
  double response = 0.0;
  bool has_response = false;
};

enum class HessianKind { available, deterministic, unavailable };

/// Default simulation parameter: dim equally spaced values on [0, 1]
/// inclusive; a single value of 0.5 when dim == 1.
Vector equally_spaced_param(int dim);

/// A stochastic loss f(theta; x) with gradient, optional Hessian, and a
/// seeded sampling law. Models are immutable and safe to share across
/// threads; mutable per-replication state lives in SampleStream.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual int dim() const = 0;
  virtual HessianKind hessian_kind() const = 0;
  virtual bool has_true_param() const { return true; }
  virtual const Vector& true_param() const = 0;
  virtual std::string name() const = 0;

  virtual double loss(const Vector& theta, const Sample& x) const = 0;
  virtual Vector grad(const Vector& theta, const Sample& x) const = 0;
  virtual Matrix hessian(const Vector& theta, const Sample& x) const;
  virtual Sample draw(std::mt19937_64& rng) const = 0;

  /// Closed-form covariance of the rescaled estimation error for a fixed
  /// step size, where known (see concrete models). nullopt otherwise.
  virtual std::optional<Matrix> asymptotic_covariance(double eta) const;

 protected:
  void check_dim(const Vector& theta) const;
};

/// f(theta; x) = 0.5 * ||theta - x||^2 with x ~ N(theta*, I).
/// The Hessian is identically I, so the sandwich covariance is exactly I.
class NormalMeanModel : public LossModel {
 public:
  explicit NormalMeanModel(Vector theta_star);

  int dim() const override { return static_cast<int>(theta_star_.size()); }
  HessianKind hessian_kind() const override { return HessianKind::deterministic; }
  const Vector& true_param() const override { return theta_star_; }
  std::string name() const override { return "normal-mean"; }

  double loss(const Vector& theta, const Sample& x) const override;
  Vector grad(const Vector& theta, const Sample& x) const override;
  Matrix hessian(const Vector& theta, const Sample& x) const override;
  Sample draw(std::mt19937_64& rng) const override;
  std::optional<Matrix> asymptotic_covariance(double eta) const override;

 private:
  Vector theta_star_;
};

/// Squared loss f(theta; (a, b)) = 0.5 * (a^T theta - b)^2 with
/// a ~ N(0, I), b = a^T theta* + eps, eps ~ N(0, 1).
class LinearRegressionModel : public LossModel {
 public:
  explicit LinearRegressionModel(Vector theta_star);

  int dim() const override { return static_cast<int>(theta_star_.size()); }
  HessianKind hessian_kind() const override { return HessianKind::available; }
  const Vector& true_param() const override { return theta_star_; }
  std::string name() const override { return "linear"; }

  double loss(const Vector& theta, const Sample& x) const override;
  Vector grad(const Vector& theta, const Sample& x) const override;
  Matrix hessian(const Vector& theta, const Sample& x) const override;
  Sample draw(std::mt19937_64& rng) const override;

  /// For isotropic Gaussian inputs the rescaled error covariance is
  /// (1 + lambda * (dim + 1)) * I with lambda = eta / (2 - eta * (dim + 2)).
  std::optional<Matrix> asymptotic_covariance(double eta) const override;

 private:
  Vector theta_star_;
};

/// Logistic loss f(theta; (a, b)) = log(1 + exp(-b <a, theta>)) with
/// b in {-1, +1}, P(b = 1) = sigmoid(<a, theta*>), a ~ N(0, I).
/// Gradient and Hessian use overflow-safe sigmoid/softplus forms; the
/// naive ratio expressions blow up past |<a, theta>| ~ 700.
class LogisticRegressionModel : public LossModel {
 public:
  explicit LogisticRegressionModel(Vector theta_star);

  int dim() const override { return static_cast<int>(theta_star_.size()); }
  HessianKind hessian_kind() const override { return HessianKind::available; }
  const Vector& true_param() const override { return theta_star_; }
  std::string name() const override { return "logistic"; }

  double loss(const Vector& theta, const Sample& x) const override;
  Vector grad(const Vector& theta, const Sample& x) const override;
  Matrix hessian(const Vector& theta, const Sample& x) const override;
  Sample draw(std::mt19937_64& rng) const override;

 private:
  Vector theta_star_;
};

/// Negative log-likelihood of a natural exponential family,
/// f(theta; x) = -<theta, T(x)> + B(theta), generic over user-supplied
/// log-partition callbacks and sufficient statistic.
class ExponentialFamilyModel : public LossModel {
 public:
  using ScalarFn = std::function<double(const Vector&)>;
  using VectorFn = std::function<Vector(const Vector&)>;
  using MatrixFn = std::function<Matrix(const Vector&)>;
  using StatFn = std::function<Vector(const Sample&)>;
  using SamplerFn = std::function<Sample(std::mt19937_64&)>;

  ExponentialFamilyModel(int dim, ScalarFn log_partition,
                         VectorFn grad_log_partition,
                         MatrixFn hess_log_partition, StatFn sufficient_stat,
                         SamplerFn sampler, Vector theta_star,
                         std::string name = "exp-family");

  int dim() const override { return dim_; }
  HessianKind hessian_kind() const override { return HessianKind::deterministic; }
  const Vector& true_param() const override { return theta_star_; }
  std::string name() const override { return name_; }

  double loss(const Vector& theta, const Sample& x) const override;
  Vector grad(const Vector& theta, const Sample& x) const override;
  Matrix hessian(const Vector& theta, const Sample& x) const override;
  Sample draw(std::mt19937_64& rng) const override;

  Vector sufficient_stat(const Sample& x) const { return sufficient_stat_(x); }

  /// Newton solve of grad_log_partition(theta) = stat_mean. Throws
  /// std::runtime_error if the iteration does not converge.
  Vector solve_stat_match(const Vector& stat_mean) const;

 private:
  int dim_;
  ScalarFn log_partition_;
  VectorFn grad_log_partition_;
  MatrixFn hess_log_partition_;
  StatFn sufficient_stat_;
  SamplerFn sampler_;
  Vector theta_star_;
  std::string name_;
};

/// Normal-mean estimation expressed as an exponential family:
/// B(theta) = 0.5 ||theta||^2, T(x) = x, x ~ N(theta*, I).
ExponentialFamilyModel exponential_family_normal_mean(Vector theta_star);

/// Quadratic log-partition B(theta) = 0.5 theta^T Q theta for SPD Q;
/// T(x) = x with x ~ N(Q theta*, I). Useful for exercising contraction
/// with distinct strong-convexity and smoothness constants.
ExponentialFamilyModel exponential_family_quadratic(Matrix curvature,
                                                    Vector theta_star);

/// Seeded i.i.d. sample stream; identical seeds yield identical sequences.
/// Single-owner mutable state: clone with distinct seeds for parallel use.
class SampleStream {
 public:
  SampleStream(std::shared_ptr<const LossModel> model, std::uint64_t seed);

  Sample next();
  std::uint64_t draws() const { return draws_; }
  const LossModel& model() const { return *model_; }

 private:
  std::shared_ptr<const LossModel> model_;
  std::mt19937_64 rng_;
  std::uint64_t draws_ = 0;
};

/// Dispatch helper for the closed-form covariance oracles.
std::optional<Matrix> oracle_asymptotic_covariance(const LossModel& model,
                                                   double eta);

/// Distance ||theta - theta_t|| where theta_t matches the running mean of
/// sufficient statistics: grad_log_partition(theta_t) = running_stat_mean.
double exp_family_mle_gap(const ExponentialFamilyModel& model,
                          const Vector& theta, const Vector& running_stat_mean);

}  // namespace rootsgd
