#pragma once

#include <vector>

#include "rootsgd/linalg.hpp"

namespace rootsgd {

/// Online form of the step-weighted centered second moment
///   V_t = (1/t^2) * sum_{i=1..t} i^2 (theta_i - theta_t)(theta_i - theta_t)^T.
/// Only the running sums sum i^2 theta theta^T and sum i^2 theta are kept,
/// so memory is O(dim^2) regardless of t. Feed ROOT-SGD with its raw
/// iterates and averaged SGD with its running averages.
class RandomScalingAccumulator {
 public:
  explicit RandomScalingAccumulator(int dim);

  /// `step` must be exactly one past the previous call, starting at 1.
  void observe(long step, const Vector& theta);

  /// Expands the centered sum around `theta_final` (the latest iterate):
  ///   V = (s2 - s1 f^T - f s1^T + c f f^T) / t^2,  c = t(t+1)(2t+1)/6.
  Matrix finalize(const Vector& theta_final) const;

  long count() const { return count_; }
  int dim() const { return dim_; }

 private:
  int dim_;
  long count_ = 0;
  Matrix weighted_outer_sum_;  // sum i^2 theta theta^T
  Vector weighted_sum_;        // sum i^2 theta
};

/// Non-overlapping batch means over a stream of iterates. Completed
/// batches all hold exactly `batch_size` members; a trailing partial
/// batch is discarded at finalize.
class BatchMeanAccumulator {
 public:
  BatchMeanAccumulator(int dim, long batch_size);

  void observe(const Vector& theta);

  /// Sample covariance of the batch means, scaled by the batch size:
  ///   (b / (M - 1)) * sum_j (m_j - mbar)(m_j - mbar)^T
  /// over the M completed batches. Needs M >= 2.
  Matrix finalize() const;

  long batch_size() const { return batch_size_; }
  long completed_batches() const { return static_cast<long>(means_.size()); }
  long observations() const { return total_; }

 private:
  int dim_;
  long batch_size_;
  long total_ = 0;
  long in_batch_ = 0;
  Vector batch_sum_;
  std::vector<Vector> means_;
};

}  // namespace rootsgd
