#include "rootsgd/random_scaling.hpp"

#include <sstream>
#include <stdexcept>

namespace rootsgd {

RandomScalingAccumulator::RandomScalingAccumulator(int dim)
    : dim_(dim),
      weighted_outer_sum_(Matrix::Zero(dim, dim)),
      weighted_sum_(Vector::Zero(dim)) {
  if (dim < 1) {
    throw std::invalid_argument(
        "RandomScalingAccumulator: dim must be positive");
  }
}

void RandomScalingAccumulator::observe(long step, const Vector& theta) {
  if (step != count_ + 1) {
    std::ostringstream msg;
    msg << "RandomScalingAccumulator: step " << step
        << " out of order (expected " << count_ + 1 << ")";
    throw std::invalid_argument(msg.str());
  }
  if (theta.size() != dim_) {
    throw std::invalid_argument("RandomScalingAccumulator: dimension mismatch");
  }
  const double w = static_cast<double>(step) * static_cast<double>(step);
  weighted_outer_sum_.noalias() += w * (theta * theta.transpose());
  weighted_sum_ += w * theta;
  count_ = step;
}

Matrix RandomScalingAccumulator::finalize(const Vector& theta_final) const {
  if (count_ == 0) {
    throw std::logic_error("RandomScalingAccumulator: no observations");
  }
  if (theta_final.size() != dim_) {
    throw std::invalid_argument("RandomScalingAccumulator: dimension mismatch");
  }
  const long t = count_;
  // sum_{i<=t} i^2, exact in 64-bit for every horizon we run.
  const double weight_total =
      static_cast<double>(t * (t + 1) * (2 * t + 1) / 6);
  const double scale = static_cast<double>(t) * static_cast<double>(t);
  Matrix v = weighted_outer_sum_;
  v.noalias() -= weighted_sum_ * theta_final.transpose();
  v.noalias() -= theta_final * weighted_sum_.transpose();
  v.noalias() += weight_total * (theta_final * theta_final.transpose());
  return v / scale;
}

BatchMeanAccumulator::BatchMeanAccumulator(int dim, long batch_size)
    : dim_(dim), batch_size_(batch_size), batch_sum_(Vector::Zero(dim)) {
  if (dim < 1) {
    throw std::invalid_argument("BatchMeanAccumulator: dim must be positive");
  }
  if (batch_size < 1) {
    throw std::invalid_argument(
        "BatchMeanAccumulator: batch size must be >= 1");
  }
}

void BatchMeanAccumulator::observe(const Vector& theta) {
  if (theta.size() != dim_) {
    throw std::invalid_argument("BatchMeanAccumulator: dimension mismatch");
  }
  batch_sum_ += theta;
  ++in_batch_;
  ++total_;
  if (in_batch_ == batch_size_) {
    means_.push_back(batch_sum_ / static_cast<double>(batch_size_));
    batch_sum_.setZero();
    in_batch_ = 0;
  }
}

Matrix BatchMeanAccumulator::finalize() const {
  const long m = completed_batches();
  if (m < 2) {
    std::ostringstream msg;
    msg << "BatchMeanAccumulator: need at least 2 completed batches, have "
        << m << " (batch size " << batch_size_ << ", " << total_
        << " observations)";
    throw std::runtime_error(msg.str());
  }
  Vector grand = Vector::Zero(dim_);
  for (const Vector& mean : means_) {
    grand += mean;
  }
  grand /= static_cast<double>(m);
  Matrix out = Matrix::Zero(dim_, dim_);
  for (const Vector& mean : means_) {
    const Vector centered = mean - grand;
    out.noalias() += centered * centered.transpose();
  }
  out *= static_cast<double>(batch_size_) / static_cast<double>(m - 1);
  return out;
}

}  // namespace rootsgd
