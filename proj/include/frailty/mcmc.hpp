#pragma once

#include "frailty/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace frailty {

/// Acceptance bookkeeping of one kernel.
struct AcceptanceCounter {
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed; }
};

/// Gaussian random-walk Metropolis kernel for a vector block.
///
/// Proposal N(current, s^2 Sigma). While adapting, Sigma tracks the running
/// covariance of visited states (Haario et al.) once enough samples exist
/// and log s follows a Robbins-Monro recursion towards the target
/// acceptance rate. After freeze() both stay fixed.
class AdaptiveRandomWalk {
 public:
  AdaptiveRandomWalk() = default;
  AdaptiveRandomWalk(const Matrix& initial_covariance, double target_rate = 0.234);

  int dim() const { return static_cast<int>(mean_.size()); }

  /// current + s * L z with L the Cholesky factor of Sigma.
  Vector propose(const Vector& current, Rng& rng);

  /// Record the outcome of the last proposal and the resulting state.
  void observe(const Vector& state, bool accepted);

  void freeze() { adapting_ = false; }
  bool adapting() const { return adapting_; }

  double scale() const { return std::exp(log_scale_); }
  const Matrix& proposal_covariance() const { return covariance_; }
  const AcceptanceCounter& counter() const { return counter_; }
  void reset_counter() { counter_ = {}; }

 private:
  void refresh_factor();

  Matrix covariance_;
  Matrix factor_;
  Vector mean_;
  Matrix scatter_;
  long samples_ = 0;
  long steps_ = 0;
  double log_scale_ = 0.0;
  double target_ = 0.234;
  bool adapting_ = true;
  AcceptanceCounter counter_;
  Vector z_;
};

/// Scalar random walk with Robbins-Monro scale adaptation.
class AdaptiveScalarWalk {
 public:
  explicit AdaptiveScalarWalk(double initial_scale = 1.0, double target_rate = 0.44)
      : log_scale_(initial_scale > 0 ? std::log(initial_scale)
                                     : -std::numeric_limits<double>::infinity()),
        target_(target_rate) {}

  double propose(double current, Rng& rng) const {
    return current + scale() * rng.normal();
  }

  void observe(bool accepted) {
    ++counter_.proposed;
    if (accepted) ++counter_.accepted;
    if (!adapting_ || !std::isfinite(log_scale_)) return;
    ++steps_;
    log_scale_ += step_size(steps_) * ((accepted ? 1.0 : 0.0) - target_);
  }

  void freeze() { adapting_ = false; }
  bool adapting() const { return adapting_; }
  double scale() const { return std::exp(log_scale_); }
  const AcceptanceCounter& counter() const { return counter_; }
  void reset_counter() { counter_ = {}; }

  static double step_size(long step) { return std::min(0.5, 5.0 * std::pow(step, -0.6)); }

 private:
  double log_scale_;
  double target_;
  long steps_ = 0;
  bool adapting_ = true;
  AcceptanceCounter counter_;
};

/// Metropolis accept/reject on the log scale.
inline bool metropolis_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(rng.uniform()) < log_ratio;
}

}  // namespace frailty
