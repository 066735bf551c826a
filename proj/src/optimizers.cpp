#include "rootsgd/optimizers.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace rootsgd {

namespace {

constexpr double kDivergenceLimit = 1e8;

Vector resolve_start(const LossModel& model, Vector theta0) {
  if (theta0.size() == 0) {
    return Vector::Zero(model.dim());
  }
  if (theta0.size() != model.dim()) {
    std::ostringstream msg;
    msg << "optimizer: starting point has length " << theta0.size()
        << ", model dimension is " << model.dim();
    throw std::invalid_argument(msg.str());
  }
  return theta0;
}

[[noreturn]] void throw_divergence(const char* who, long step, double norm,
                                   double eta) {
  std::ostringstream msg;
  msg << who << ": iterate norm " << norm << " exceeded " << kDivergenceLimit
      << " at step " << step << "; the step size (eta=" << eta
      << ") is likely too large for this problem";
  throw std::runtime_error(msg.str());
}

}  // namespace

RootSgd::RootSgd(const LossModel& model, double eta, long burn_in,
                 Vector theta0)
    : model_(&model),
      eta_(eta),
      burn_in_(burn_in),
      theta_(resolve_start(model, std::move(theta0))),
      theta_pre_(theta_),
      v_(Vector::Zero(model.dim())) {
  if (!(eta_ > 0.0)) {
    throw std::invalid_argument("RootSgd: eta must be positive");
  }
  if (burn_in_ < 1) {
    throw std::invalid_argument("RootSgd: burn-in must be at least 1");
  }
}

void RootSgd::step(const Sample& x) {
  ++step_;
  if (step_ == 1) {
    v_ = model_->grad(theta_, x);
  } else {
    const double carry =
        static_cast<double>(step_ - 1) / static_cast<double>(step_);
    v_ = model_->grad(theta_, x) + carry * (v_ - model_->grad(theta_pre_, x));
  }
  if (!v_.allFinite()) {
    std::ostringstream msg;
    msg << "RootSgd: non-finite gradient estimate at step " << step_;
    throw std::runtime_error(msg.str());
  }
  theta_pre_ = theta_;
  if (step_ >= burn_in_) {
    theta_ -= eta_ * v_;
    if (theta_.norm() > kDivergenceLimit) {
      throw_divergence("RootSgd", step_, theta_.norm(), eta_);
    }
  }
}

Asgd::Asgd(const LossModel& model, double eta0, double alpha, Vector theta0)
    : model_(&model),
      eta0_(eta0),
      alpha_(alpha),
      theta_(resolve_start(model, std::move(theta0))),
      theta_pre_(theta_),
      avg_(theta_) {
  if (!(eta0_ > 0.0)) {
    throw std::invalid_argument("Asgd: eta0 must be positive");
  }
  if (!(alpha_ > 0.5 && alpha_ < 1.0)) {
    throw std::invalid_argument("Asgd: alpha must lie in (1/2, 1)");
  }
}

void Asgd::step(const Sample& x) {
  ++step_;
  const double eta_i = eta0_ * std::pow(static_cast<double>(step_), -alpha_);
  const Vector g = model_->grad(theta_, x);
  if (!g.allFinite()) {
    std::ostringstream msg;
    msg << "Asgd: non-finite gradient at step " << step_;
    throw std::runtime_error(msg.str());
  }
  theta_pre_ = theta_;
  theta_ -= eta_i * g;
  if (step_ == 1) {
    avg_ = theta_;
  } else {
    avg_ += (theta_ - avg_) / static_cast<double>(step_);
  }
  if (theta_.norm() > kDivergenceLimit) {
    throw_divergence("Asgd", step_, theta_.norm(), eta0_);
  }
}

Vector rootsgd_run(const LossModel& model, SampleStream& stream, long horizon,
                   double eta, long burn_in,
                   const std::vector<RootObserver>& observers, Vector theta0) {
  if (horizon < burn_in) {
    throw std::invalid_argument("rootsgd_run: need horizon >= burn_in");
  }
  RootSgd state(model, eta, burn_in, std::move(theta0));
  for (long i = 1; i <= horizon; ++i) {
    const Sample x = stream.next();
    state.step(x);
    for (const auto& observer : observers) {
      observer(i, state.theta(), state.theta_pre(), x);
    }
  }
  return state.theta();
}

Vector asgd_run(const LossModel& model, SampleStream& stream, long horizon,
                double eta0, double alpha,
                const std::vector<AsgdObserver>& observers, Vector theta0) {
  if (horizon < 1) {
    throw std::invalid_argument("asgd_run: need horizon >= 1");
  }
  Asgd state(model, eta0, alpha, std::move(theta0));
  for (long i = 1; i <= horizon; ++i) {
    const Sample x = stream.next();
    state.step(x);
    for (const auto& observer : observers) {
      observer(i, state.theta(), state.average(), state.theta_pre(), x);
    }
  }
  return state.average();
}

RootObserver IterateTrace::root_observer() {
  return [this](long, const Vector& theta, const Vector& theta_pre,
                const Sample& x) {
    iterates.push_back(theta);
    pre_iterates.push_back(theta_pre);
    samples.push_back(x);
  };
}

AsgdObserver IterateTrace::asgd_observer() {
  return [this](long, const Vector& theta, const Vector& avg,
                const Vector& theta_pre, const Sample& x) {
    iterates.push_back(theta);
    averages.push_back(avg);
    pre_iterates.push_back(theta_pre);
    samples.push_back(x);
  };
}

double contraction_rate(double mu, double l, double eta) {
  if (!(mu > 0.0 && l >= mu)) {
    throw std::invalid_argument("contraction_rate: need 0 < mu <= l");
  }
  const double eta_max = 2.0 * mu / (l * (mu + l));
  if (!(eta > 0.0 && eta <= eta_max)) {
    std::ostringstream msg;
    msg << "contraction_rate: eta must lie in (0, " << eta_max << "]";
    throw std::invalid_argument(msg.str());
  }
  const double kappa = eta * (mu + l) / 2.0;
  const double sum = mu + l;
  const double alpha =
      (sum - std::sqrt(sum * sum - 4.0 * mu * l * kappa * kappa)) /
      (2.0 * kappa);
  return 1.0 - eta * alpha;
}

}  // namespace rootsgd
