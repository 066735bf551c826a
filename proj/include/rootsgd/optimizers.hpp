#pragma once

#include <functional>
#include <vector>

#include "rootsgd/models.hpp"

namespace rootsgd {

/// Called once per step with (step index, updated iterate, pre-update
/// iterate, the sample consumed). Observers must not mutate optimizer
/// state; everything is handed out by const reference.
using RootObserver = std::function<void(long step, const Vector& theta,
                                        const Vector& theta_pre,
                                        const Sample& x)>;

/// ASGD observers additionally receive the running average, since the
/// covariance baselines disagree about which sequence to consume: the
/// plug-in and batch-mean accumulators read the raw SGD iterates while
/// random scaling reads the averages.
using AsgdObserver = std::function<void(long step, const Vector& theta_sgd,
                                        const Vector& theta_avg,
                                        const Vector& theta_sgd_pre,
                                        const Sample& x)>;

/// Variance-reduced ROOT-SGD state machine. Each step evaluates the
/// gradient at the two most recent iterates against the same incoming
/// sample and folds them into the running direction
///   v_i = grad(theta_{i-1}; x_i) + (i-1)/i * (v_{i-1} - grad(theta_{i-2}; x_i)),
/// then applies theta_i = theta_{i-1} - eta * v_i once the step index
/// reaches the burn-in. During burn-in the iterate is frozen bit-for-bit
/// while the direction keeps updating.
class RootSgd {
 public:
  /// theta0 defaults to the zero vector.
  RootSgd(const LossModel& model, double eta, long burn_in,
          Vector theta0 = Vector());

  void step(const Sample& x);

  long steps() const { return step_; }
  double eta() const { return eta_; }
  long burn_in() const { return burn_in_; }
  const Vector& theta() const { return theta_; }
  const Vector& theta_pre() const { return theta_pre_; }
  const Vector& direction() const { return v_; }

 private:
  const LossModel* model_;
  double eta_;
  long burn_in_;
  long step_ = 0;
  Vector theta_;      // theta_i after i steps
  Vector theta_pre_;  // theta_{i-1}
  Vector v_;
};

/// Plain SGD with decaying steps eta_i = eta0 * i^(-alpha), alpha in
/// (1/2, 1), plus the running average of all iterates.
class Asgd {
 public:
  Asgd(const LossModel& model, double eta0, double alpha,
       Vector theta0 = Vector());

  void step(const Sample& x);

  long steps() const { return step_; }
  const Vector& theta() const { return theta_; }
  const Vector& theta_pre() const { return theta_pre_; }
  const Vector& average() const { return avg_; }

 private:
  const LossModel* model_;
  double eta0_;
  double alpha_;
  long step_ = 0;
  Vector theta_;
  Vector theta_pre_;
  Vector avg_;
};

/// Drives ROOT-SGD for `horizon` steps, consuming exactly one sample per
/// step and invoking every observer once per step in order. Returns the
/// final iterate.
Vector rootsgd_run(const LossModel& model, SampleStream& stream, long horizon,
                   double eta, long burn_in,
                   const std::vector<RootObserver>& observers = {},
                   Vector theta0 = Vector());

/// Drives averaged SGD; returns the final running average.
Vector asgd_run(const LossModel& model, SampleStream& stream, long horizon,
                double eta0, double alpha,
                const std::vector<AsgdObserver>& observers = {},
                Vector theta0 = Vector());

/// Recording observer for tests and offline checks: keeps every iterate,
/// pre-update iterate, and sample in step order.
struct IterateTrace {
  std::vector<Vector> iterates;
  std::vector<Vector> pre_iterates;
  std::vector<Vector> averages;  // filled by the ASGD observer only
  std::vector<Sample> samples;

  RootObserver root_observer();
  AsgdObserver asgd_observer();
};

/// Guaranteed per-step contraction rate 1 - eta * alpha for the
/// stat-matching recursion of an exponential-family loss whose
/// log-partition is mu-strongly convex and l-smooth. Requires
/// eta <= 2*mu / (l*(mu + l)).
double contraction_rate(double mu, double l, double eta);

}  // namespace rootsgd
