#pragma once

#include <cmath>
#include <deque>
#include <optional>

#include "artde/linalg.hpp"

namespace artde {

/// One entry of the input/acceleration history.
struct DelaySample {
  double t = 0.0;
  Vector tau;
  Vector ddq;
};

/// Fixed-delay history of (tau, ddq) pairs.
///
/// The controller runs at a fixed period, so lookup(t) resolves to the sample
/// pushed closest to t - L, accepted when it lies within half a period. Before
/// t >= L the zero sample is returned. Entries older than t - 2L are evicted
/// on push.
class DelayLine {
 public:
  DelayLine(double delay, Eigen::Index dim, double period = 0.0)
      : delay_(delay), period_(period > 0.0 ? period : delay), dim_(dim) {
    if (!(delay > 0.0) || !std::isfinite(delay)) detail::fail("delay L must be positive, got ", delay);
    if (dim <= 0) detail::fail("delay line dimension must be positive, got ", dim);
  }

  double delay() const { return delay_; }
  double period() const { return period_; }
  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return buffer_.size(); }

  void push(DelaySample sample) {
    if (sample.tau.size() != dim_ || sample.ddq.size() != dim_)
      detail::fail("delay sample has dimension (", sample.tau.size(), ", ", sample.ddq.size(),
                   "), expected ", dim_);
    if (!buffer_.empty() && !(sample.t > buffer_.back().t))
      detail::fail("delay sample time ", sample.t, " is not after the last pushed time ",
                   buffer_.back().t);
    const double horizon = sample.t - 2.0 * delay_ - 0.5 * period_;
    buffer_.push_back(std::move(sample));
    while (buffer_.size() > 1 && buffer_.front().t < horizon) buffer_.pop_front();
  }

  DelaySample zero_sample(double t) const {
    return {t - delay_, Vector::Zero(dim_), Vector::Zero(dim_)};
  }

  /// The sample recorded at t - L, or the zero sample during start-up.
  DelaySample lookup(double t) const {
    const double target = t - delay_;
    const double tol = 0.5 * period_;
    if (target < -tol || buffer_.empty()) return zero_sample(t);
    for (auto it = buffer_.rbegin(); it != buffer_.rend(); ++it) {
      if (std::abs(it->t - target) <= tol) return *it;
      if (it->t < target - tol) break;
    }
    return zero_sample(t);
  }

 private:
  double delay_;
  double period_;
  Eigen::Index dim_;
  std::deque<DelaySample> buffer_;
};

/// Time-delayed estimate of the lumped dynamics: tau(t-L) - M_bar * ddq(t-L).
inline Vector estimate_N(const DelayLine& line, const Matrix& m_bar, double t) {
  if (m_bar.rows() != line.dim() || m_bar.cols() != line.dim())
    detail::fail("M_bar is ", m_bar.rows(), "x", m_bar.cols(), " but the delay line holds ",
                 line.dim(), "-vectors");
  const DelaySample s = line.lookup(t);
  return s.tau - m_bar * s.ddq;
}

/// Backward difference of velocity. Without a previous sample returns zero.
inline Vector estimate_acceleration(const std::optional<Vector>& prev_dq, const Vector& curr_dq,
                                    double dt) {
  if (!(dt > 0.0)) detail::fail("dt must be positive, got ", dt);
  if (!prev_dq) return Vector::Zero(curr_dq.size());
  if (prev_dq->size() != curr_dq.size())
    detail::fail("velocity dimension changed from ", prev_dq->size(), " to ", curr_dq.size());
  return (curr_dq - *prev_dq) / dt;
}

}  // namespace artde
