#include "rootsgd/models.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace rootsgd {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow for large |z|.
double softplus(double z) {
  if (z > 0.0) {
    return z + std::log1p(std::exp(-z));
  }
  return std::log1p(std::exp(z));
}

Vector gaussian_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    out[i] = normal(rng);
  }
  return out;
}

void check_finite_param(const Vector& theta_star, const char* who) {
  if (theta_star.size() == 0 || !theta_star.allFinite()) {
    std::ostringstream msg;
    msg << who << ": parameter must be non-empty and finite";
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

Vector equally_spaced_param(int dim) {
  if (dim < 1) {
    throw std::invalid_argument("equally_spaced_param: dim must be positive");
  }
  Vector out(dim);
  if (dim == 1) {
    out[0] = 0.5;
    return out;
  }
  for (int j = 0; j < dim; ++j) {
    out[j] = static_cast<double>(j) / static_cast<double>(dim - 1);
  }
  return out;
}

void LossModel::check_dim(const Vector& theta) const {
  if (theta.size() != dim()) {
    std::ostringstream msg;
    msg << name() << ": parameter has length " << theta.size()
        << ", model dimension is " << dim();
    throw std::invalid_argument(msg.str());
  }
}

Matrix LossModel::hessian(const Vector&, const Sample&) const {
  throw std::logic_error(name() + ": stochastic Hessian is unavailable");
}

std::optional<Matrix> LossModel::asymptotic_covariance(double) const {
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Normal mean estimation

NormalMeanModel::NormalMeanModel(Vector theta_star)
    : theta_star_(std::move(theta_star)) {
  check_finite_param(theta_star_, "NormalMeanModel");
}

double NormalMeanModel::loss(const Vector& theta, const Sample& x) const {
  check_dim(theta);
  return 0.5 * (theta - x.features).squaredNorm();
}

Vector NormalMeanModel::grad(const Vector& theta, const Sample& x) const {
  check_dim(theta);
  return theta - x.features;
}

Matrix NormalMeanModel::hessian(const Vector& theta, const Sample&) const {
  check_dim(theta);
  return Matrix::Identity(dim(), dim());
}

Sample NormalMeanModel::draw(std::mt19937_64& rng) const {
  Sample s;
  s.features = theta_star_ + gaussian_vector(rng, dim());
  return s;
}

std::optional<Matrix> NormalMeanModel::asymptotic_covariance(double) const {
  // The Hessian is constant, so the extra curvature-noise term vanishes
  // and the sandwich reduces to A^{-1} S A^{-1} = I.
  return Matrix::Identity(dim(), dim());
}

// ---------------------------------------------------------------------------
// Linear regression

LinearRegressionModel::LinearRegressionModel(Vector theta_star)
    : theta_star_(std::move(theta_star)) {
  check_finite_param(theta_star_, "LinearRegressionModel");
}

double LinearRegressionModel::loss(const Vector& theta, const Sample& x) const {
  check_dim(theta);
  const double r = x.features.dot(theta) - x.response;
  return 0.5 * r * r;
}

Vector LinearRegressionModel::grad(const Vector& theta, const Sample& x) const {
  check_dim(theta);
  return x.features * (x.features.dot(theta) - x.response);
}

Matrix LinearRegressionModel::hessian(const Vector& theta,
                                      const Sample& x) const {
  check_dim(theta);
  return x.features * x.features.transpose();
}

Sample LinearRegressionModel::draw(std::mt19937_64& rng) const {
  Sample s;
  s.features = gaussian_vector(rng, dim());
  std::normal_distribution<double> normal(0.0, 1.0);
  s.response = s.features.dot(theta_star_) + normal(rng);
  s.has_response = true;
  return s;
}

std::optional<Matrix> LinearRegressionModel::asymptotic_covariance(
    double eta) const {
  const double p = static_cast<double>(dim());
  const double denom = 2.0 - eta * (p + 2.0);
  if (!(denom > 0.0)) {
    std::ostringstream msg;
    msg << "LinearRegressionModel: step size " << eta
        << " leaves no finite covariance (need eta < " << 2.0 / (p + 2.0)
        << ")";
    throw std::invalid_argument(msg.str());
  }
  const double lambda = eta / denom;
  return (1.0 + lambda * (p + 1.0)) * Matrix::Identity(dim(), dim());
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegressionModel::LogisticRegressionModel(Vector theta_star)
    : theta_star_(std::move(theta_star)) {
  check_finite_param(theta_star_, "LogisticRegressionModel");
}

double LogisticRegressionModel::loss(const Vector& theta,
                                     const Sample& x) const {
  check_dim(theta);
  return softplus(-x.response * x.features.dot(theta));
}

Vector LogisticRegressionModel::grad(const Vector& theta,
                                     const Sample& x) const {
  check_dim(theta);
  const double margin = x.response * x.features.dot(theta);
  return (-x.response * stable_sigmoid(-margin)) * x.features;
}

Matrix LogisticRegressionModel::hessian(const Vector& theta,
                                        const Sample& x) const {
  check_dim(theta);
  const double u = x.features.dot(theta);
  const double weight = stable_sigmoid(u) * stable_sigmoid(-u);
  return weight * (x.features * x.features.transpose());
}

Sample LogisticRegressionModel::draw(std::mt19937_64& rng) const {
  Sample s;
  s.features = gaussian_vector(rng, dim());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double p_plus = stable_sigmoid(s.features.dot(theta_star_));
  s.response = unif(rng) < p_plus ? 1.0 : -1.0;
  s.has_response = true;
  return s;
}

// ---------------------------------------------------------------------------
// Exponential family

ExponentialFamilyModel::ExponentialFamilyModel(
    int dim, ScalarFn log_partition, VectorFn grad_log_partition,
    MatrixFn hess_log_partition, StatFn sufficient_stat, SamplerFn sampler,
    Vector theta_star, std::string name)
    : dim_(dim),
      log_partition_(std::move(log_partition)),
      grad_log_partition_(std::move(grad_log_partition)),
      hess_log_partition_(std::move(hess_log_partition)),
      sufficient_stat_(std::move(sufficient_stat)),
      sampler_(std::move(sampler)),
      theta_star_(std::move(theta_star)),
      name_(std::move(name)) {
  if (dim_ < 1) {
    throw std::invalid_argument("ExponentialFamilyModel: dim must be positive");
  }
  if (!log_partition_ || !grad_log_partition_ || !hess_log_partition_ ||
      !sufficient_stat_) {
    throw std::invalid_argument(
        "ExponentialFamilyModel: log-partition and sufficient-stat callbacks "
        "are required");
  }
}

double ExponentialFamilyModel::loss(const Vector& theta,
                                    const Sample& x) const {
  check_dim(theta);
  return -theta.dot(sufficient_stat_(x)) + log_partition_(theta);
}

Vector ExponentialFamilyModel::grad(const Vector& theta,
                                    const Sample& x) const {
  check_dim(theta);
  return grad_log_partition_(theta) - sufficient_stat_(x);
}

Matrix ExponentialFamilyModel::hessian(const Vector& theta,
                                       const Sample&) const {
  check_dim(theta);
  return hess_log_partition_(theta);
}

Sample ExponentialFamilyModel::draw(std::mt19937_64& rng) const {
  if (!sampler_) {
    throw std::logic_error(name_ + ": no sampling law configured");
  }
  return sampler_(rng);
}

Vector ExponentialFamilyModel::solve_stat_match(const Vector& stat_mean) const {
  if (stat_mean.size() != dim_) {
    throw std::invalid_argument("solve_stat_match: dimension mismatch");
  }
  Vector theta = Vector::Zero(dim_);
  const double tol = 1e-12 * std::max(1.0, stat_mean.norm());
  for (int iter = 0; iter < 100; ++iter) {
    const Vector residual = grad_log_partition_(theta) - stat_mean;
    if (residual.norm() <= tol) {
      return theta;
    }
    theta -= solve_linear(hess_log_partition_(theta), residual);
  }
  throw std::runtime_error(name_ +
                           ": stat-match Newton solve did not converge");
}

ExponentialFamilyModel exponential_family_normal_mean(Vector theta_star) {
  const int p = static_cast<int>(theta_star.size());
  Vector star = theta_star;
  return ExponentialFamilyModel(
      p, [](const Vector& t) { return 0.5 * t.squaredNorm(); },
      [](const Vector& t) { return t; },
      [p](const Vector&) { return Matrix::Identity(p, p); },
      [](const Sample& x) { return x.features; },
      [star, p](std::mt19937_64& rng) {
        Sample s;
        s.features = star + gaussian_vector(rng, p);
        return s;
      },
      std::move(theta_star), "exp-family-normal-mean");
}

ExponentialFamilyModel exponential_family_quadratic(Matrix curvature,
                                                    Vector theta_star) {
  if (curvature.rows() != curvature.cols() ||
      curvature.rows() != theta_star.size()) {
    throw std::invalid_argument(
        "exponential_family_quadratic: curvature must be square and match "
        "the parameter dimension");
  }
  const int p = static_cast<int>(theta_star.size());
  Matrix q = curvature;
  Vector stat_mean = q * theta_star;
  return ExponentialFamilyModel(
      p, [q](const Vector& t) { return 0.5 * t.dot(q * t); },
      [q](const Vector& t) { return Vector(q * t); },
      [q](const Vector&) { return q; },
      [](const Sample& x) { return x.features; },
      [stat_mean, p](std::mt19937_64& rng) {
        Sample s;
        s.features = stat_mean + gaussian_vector(rng, p);
        return s;
      },
      std::move(theta_star), "exp-family-quadratic");
}

// ---------------------------------------------------------------------------

SampleStream::SampleStream(std::shared_ptr<const LossModel> model,
                           std::uint64_t seed)
    : model_(std::move(model)), rng_(seed) {
  if (!model_) {
    throw std::invalid_argument("SampleStream: model is required");
  }
}

Sample SampleStream::next() {
  ++draws_;
  return model_->draw(rng_);
}

std::optional<Matrix> oracle_asymptotic_covariance(const LossModel& model,
                                                   double eta) {
  return model.asymptotic_covariance(eta);
}

double exp_family_mle_gap(const ExponentialFamilyModel& model,
                          const Vector& theta,
                          const Vector& running_stat_mean) {
  const Vector matched = model.solve_stat_match(running_stat_mean);
  return (theta - matched).norm();
}

}  // namespace rootsgd
