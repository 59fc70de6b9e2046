#include "frailty/mcmc.hpp"

namespace frailty {

namespace {

// Running-covariance adaptation starts once this many states were seen.
long warmup_samples(int dim) { return 100 + 10L * dim; }

}  // namespace

AdaptiveRandomWalk::AdaptiveRandomWalk(const Matrix& initial_covariance, double target_rate)
    : covariance_(initial_covariance),
      mean_(Vector::Zero(initial_covariance.rows())),
      scatter_(Matrix::Zero(initial_covariance.rows(), initial_covariance.cols())),
      target_(target_rate),
      z_(initial_covariance.rows()) {
  if (initial_covariance.rows() != initial_covariance.cols())
    throw std::invalid_argument("AdaptiveRandomWalk: covariance must be square");
  const int d = std::max(1, dim());
  log_scale_ = std::log(2.38 / std::sqrt(static_cast<double>(d)));
  refresh_factor();
}

void AdaptiveRandomWalk::refresh_factor() {
  const Eigen::Index d = covariance_.rows();
  Eigen::LLT<Matrix> llt(covariance_);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  // Semi-definite input (e.g. a point-mass prior): fall back to the
  // symmetric square root with clipped eigenvalues.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * root.asDiagonal();
  if (factor_.rows() != d) factor_ = Matrix::Zero(d, d);
}

Vector AdaptiveRandomWalk::propose(const Vector& current, Rng& rng) {
  for (Eigen::Index k = 0; k < z_.size(); ++k) z_[k] = rng.normal();
  return current + scale() * (factor_ * z_);
}

void AdaptiveRandomWalk::observe(const Vector& state, bool accepted) {
  ++counter_.proposed;
  if (accepted) ++counter_.accepted;
  if (!adapting_) return;
  ++steps_;
  log_scale_ += AdaptiveScalarWalk::step_size(steps_) * ((accepted ? 1.0 : 0.0) - target_);

  // Welford update of the running mean and scatter matrix.
  ++samples_;
  const Vector delta = state - mean_;
  mean_ += delta / static_cast<double>(samples_);
  scatter_.noalias() += delta * (state - mean_).transpose();

  if (samples_ >= warmup_samples(dim()) && samples_ % 50 == 0) {
    Matrix empirical = scatter_ / static_cast<double>(samples_ - 1);
    const double jitter = 1e-10 * std::max(1e-300, empirical.diagonal().cwiseAbs().maxCoeff());
    empirical.diagonal().array() += jitter;
    if (empirical.allFinite() && empirical.diagonal().minCoeff() > 0.0) {
      covariance_ = std::move(empirical);
      refresh_factor();
    }
  }
}

}  // namespace frailty
