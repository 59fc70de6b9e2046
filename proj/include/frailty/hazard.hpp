#pragma once

#include "frailty/common.hpp"
#include "frailty/data.hpp"

#include <string>
#include <vector>

namespace frailty {

/// Strictly increasing interval endpoints a_1 < ... < a_K, with a_0 = 0
/// implicit. Interval k (0-based here) is (a_{k-1}, a_k].
class CutPoints {
 public:
  CutPoints() = default;
  /// Throws ConfigError unless `points` is positive and strictly increasing.
  explicit CutPoints(Vector points);

  int size() const { return static_cast<int>(points_.size()); }
  const Vector& points() const { return points_; }
  double upper(int k) const { return points_[k]; }
  double lower(int k) const { return k == 0 ? 0.0 : points_[k - 1]; }
  double width(int k) const { return upper(k) - lower(k); }

  /// 0-based K(t): first interval whose upper end is >= t; times beyond
  /// a_K map to the last interval.
  int interval_of(double t) const;

  /// Delta_k(t) = min(a_k, t) - a_{k-1}; the last interval is open-ended.
  double exposure(int k, double t) const;

 private:
  Vector points_;
};

struct CutPointSelection {
  CutPoints cuts;
  std::vector<std::string> warnings;
};

/// a_k = empirical (k/K)-quantile of the follow-up times (inverse ECDF),
/// with a_K the maximum time. Ties are pushed to the midpoint with the next
/// distinct time so the result stays strictly increasing.
CutPoints quantile_cutpoints(const Dataset& dataset, int num_intervals, bool events_only = false);

/// Validates user-chosen cut-points; a_K below the largest time is moved up
/// to it with a warning.
CutPointSelection explicit_cutpoints(const Vector& points, const Dataset& dataset);

/// Parses "quantile:K" or a comma-separated list of reals.
CutPointSelection parse_cutpoints(const std::string& text, const Dataset& dataset,
                                  bool events_only = false);

/// Piecewise-constant baseline hazard lambda_0.
struct PiecewiseHazard {
  CutPoints cuts;
  Vector log_heights;

  Vector heights() const { return log_heights.array().exp(); }
  double hazard(double t) const { return std::exp(log_heights[cuts.interval_of(t)]); }
};

/// Lambda_0(t) = sum_k lambda_k Delta_k(t). Beyond a_K the last height is
/// extended linearly.
double cumulative_hazard(const PiecewiseHazard& h, double t);

/// One (i, j, k) pseudo-observation of the Poisson representation.
struct PoissonRow {
  int cluster = 0;
  int record = 0;
  int interval = 0;
  double response = 0.0;    // y_ijk
  double log_exposure = 0;  // log Delta_k(t_ij)
};

/// Exact Poisson data augmentation of the piecewise-exponential PH
/// likelihood. Design rows are z_ijk = (iota_k, w_ij) of length K + p.
struct PoissonExpansion {
  int num_intervals = 0;
  int num_covariates = 0;
  int num_clusters = 0;
  std::vector<PoissonRow> rows;
  Matrix design;
  /// K(t_ij) (1-based count of intervals reached) per record.
  std::vector<int> intervals_reached;
  std::vector<int> rows_per_cluster;
  int dropped_rows = 0;

  int num_rows() const { return static_cast<int>(rows.size()); }
};

PoissonExpansion expand_poisson(const Dataset& dataset, const CutPoints& cuts);

/// Poisson log-likelihood without the sum[y log Delta] constant:
/// sum[y (z'g + e) - exp(z'g + e + log Delta)], identical to the PH log-likelihood.
double poisson_loglik(const PoissonExpansion& expansion, const Vector& gamma,
                      const Vector& frailties);

/// Writes the expansion as delimited text (one pseudo-row per line).
std::string format_expansion(const PoissonExpansion& expansion, char delimiter = ',');

/// Precomputed survival design for fast direct evaluation of the
/// conditional PH likelihood
///   sum_ij [delta_ij log lambda(t_ij | w, e) - Lambda(t_ij | w, e)].
/// Records are reordered so each cluster occupies a contiguous block.
class PhLikelihood {
 public:
  PhLikelihood() = default;
  PhLikelihood(const Dataset& dataset, const CutPoints& cuts);

  int num_intervals() const { return cuts_.size(); }
  int num_covariates() const { return static_cast<int>(design_.cols()); }
  int num_clusters() const { return static_cast<int>(cluster_begin_.size()) - 1; }
  int num_records() const { return static_cast<int>(design_.rows()); }
  const CutPoints& cuts() const { return cuts_; }

  /// Position of original record r inside the cluster-sorted layout.
  const std::vector<int>& order() const { return order_; }

  /// Per-record linear predictor w'xi (sorted layout).
  Vector linear_predictor(const Vector& xi) const { return design_ * xi; }

  /// Lambda_0(t) for every record given log heights (sorted layout).
  Vector baseline_cumulative(const Vector& log_heights) const;

  /// Total log-likelihood.
  double loglik(const Vector& gamma, const Vector& frailties) const;

  /// Per-record log-likelihood, indexed by ORIGINAL record order.
  Vector record_loglik(const Vector& gamma, const Vector& frailties) const;

  /// Sufficient statistics of cluster i for its frailty:
  /// loglik_i(e) = const + events_i * e - exposure_i * exp(e), with
  /// exposure_i = sum_j Lambda_0(t_ij) exp(w_ij'xi).
  void cluster_statistics(const Vector& gamma, Vector& events, Vector& exposure,
                          Vector& constant) const;

  const Vector& cluster_events() const { return cluster_events_; }

 private:
  CutPoints cuts_;
  Matrix design_;           // sorted layout
  Vector events_;           // delta
  std::vector<int> interval_;  // 0-based K(t)
  Vector partial_;          // Delta_{K(t)}(t)
  std::vector<int> cluster_;
  std::vector<int> cluster_begin_;
  std::vector<int> order_;  // original -> sorted
  Vector cluster_events_;
};

}  // namespace frailty
