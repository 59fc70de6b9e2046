#pragma once

#include "frailty/common.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace frailty {

template <typename Scalar>
inline Scalar normal_cdf(Scalar z) {
  return Scalar(0.5) * std::erfc(-z / std::numbers::sqrt2_v<Scalar>);
}

/// Upper tail 1 - Phi(z), accurate for large positive z.
template <typename Scalar>
inline Scalar normal_ccdf(Scalar z) {
  return Scalar(0.5) * std::erfc(z / std::numbers::sqrt2_v<Scalar>);
}

template <typename Scalar>
inline Scalar normal_quantile(Scalar p) {
  if (p <= Scalar(0)) return -std::numeric_limits<Scalar>::infinity();
  if (p >= Scalar(1)) return std::numeric_limits<Scalar>::infinity();
  return -std::numbers::sqrt2_v<Scalar> * boost::math::erfc_inv(Scalar(2) * p);
}

template <typename Scalar>
inline Scalar log_normal_pdf(Scalar x, Scalar mean, Scalar variance) {
  const Scalar d = x - mean;
  return Scalar(-0.5) * (std::log(Scalar(2) * std::numbers::pi_v<Scalar> * variance) +
                         d * d / variance);
}

template <typename Scalar>
inline Scalar normal_pdf(Scalar x, Scalar mean, Scalar variance) {
  return std::exp(log_normal_pdf(x, mean, variance));
}

template <typename Scalar>
inline Scalar logistic(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
inline Scalar log1p_exp(Scalar x) {
  if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// log h(x) and log(1 - h(x)) for the logistic h.
template <typename Scalar>
inline Scalar log_logistic(Scalar x) {
  return -log1p_exp(-x);
}
template <typename Scalar>
inline Scalar log_one_minus_logistic(Scalar x) {
  return -log1p_exp(x);
}

/// Gamma log density, shape/rate parameterization.
template <typename Scalar>
inline Scalar log_gamma_pdf(Scalar x, Scalar shape, Scalar rate) {
  if (x <= Scalar(0)) return -std::numeric_limits<Scalar>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - Scalar(1)) * std::log(x) -
         rate * x;
}

template <typename Derived>
inline typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar m = values.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((values.derived().array() - m).exp().sum());
}

/// Pairwise (cascade) summation. Fixed reduction tree, so results do not
/// depend on how a caller later partitions the work.
double pairwise_sum(std::span<const double> values);

/// Mean computed around the first value; a constant series gives that
/// constant back exactly.
double shifted_mean(std::span<const double> values);

/// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  Vector nodes;
  Vector weights;
};

/// Nodes and weights from Newton iteration on the Legendre recurrence.
/// Rules are cached per order; the returned reference stays valid.
const QuadratureRule& gauss_legendre(int order);

/// Empirical quantile of already-sorted data with linear interpolation
/// between order statistics (R type 7).
double sorted_quantile(std::span<const double> sorted, double prob);

double median(std::vector<double> values);

/// Batch-means Monte Carlo standard error of the mean of a correlated series.
double batch_means_se(std::span<const double> series, int batches = 50);

}  // namespace frailty
