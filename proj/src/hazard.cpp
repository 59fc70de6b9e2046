#include "frailty/hazard.hpp"

#include "frailty/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace frailty {

CutPoints::CutPoints(Vector points) : points_(std::move(points)) {
  if (points_.size() == 0) throw ConfigError("cut-points: need at least one point");
  double previous = 0.0;
  for (Eigen::Index k = 0; k < points_.size(); ++k) {
    if (!std::isfinite(points_[k]) || !(points_[k] > previous))
      throw ConfigError("cut-points must be positive and strictly increasing (position " +
                        std::to_string(k + 1) + ")");
    previous = points_[k];
  }
}

int CutPoints::interval_of(double t) const {
  const double* begin = points_.data();
  const double* end = begin + points_.size();
  const double* it = std::lower_bound(begin, end, t);
  if (it == end) return size() - 1;
  return static_cast<int>(it - begin);
}

double CutPoints::exposure(int k, double t) const {
  const double hi = k == size() - 1 ? std::max(t, upper(k)) : upper(k);
  return std::max(0.0, std::min(hi, t) - lower(k));
}

CutPoints quantile_cutpoints(const Dataset& data, int num_intervals, bool events_only) {
  if (num_intervals < 1) throw ConfigError("quantile cut-points: K must be >= 1");
  std::vector<double> times;
  for (const auto& r : data.records)
    if (!events_only || r.event) times.push_back(r.time);
  if (times.empty()) throw DataError("quantile cut-points: no follow-up times");
  std::sort(times.begin(), times.end());
  const std::vector<double> distinct = [&] {
    std::vector<double> d(times);
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
  }();
  if (static_cast<std::size_t>(num_intervals) > distinct.size())
    throw ConfigError("quantile cut-points: K = " + std::to_string(num_intervals) +
                      " exceeds the " + std::to_string(distinct.size()) + " distinct times");

  const double n = static_cast<double>(times.size());
  Vector a(num_intervals);
  for (int k = 1; k <= num_intervals; ++k) {
    // Inverse ECDF: smallest t with F_n(t) >= k/K.
    const double target = n * k / num_intervals;
    auto idx = static_cast<std::size_t>(std::ceil(target - 1e-9));
    idx = std::clamp<std::size_t>(idx, 1, times.size());
    a[k - 1] = times[idx - 1];
  }
  a[num_intervals - 1] = data.max_time();

  auto next_distinct_above = [&](double v) {
    auto it = std::upper_bound(distinct.begin(), distinct.end(), v);
    return it == distinct.end() ? a[num_intervals - 1] : *it;
  };
  auto previous_distinct_below = [&](double v) {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), v);
    return it == distinct.begin() ? 0.0 : *std::prev(it);
  };
  // Forward: a tied point moves to the midpoint with the next distinct time.
  for (int k = 1; k < num_intervals - 1; ++k) {
    if (a[k] <= a[k - 1]) a[k] = 0.5 * (a[k - 1] + next_distinct_above(a[k - 1]));
  }
  // Backward: points that collided with the maximum move down.
  for (int k = num_intervals - 2; k >= 0; --k) {
    if (a[k] >= a[k + 1]) a[k] = 0.5 * (a[k + 1] + previous_distinct_below(a[k + 1]));
  }
  return CutPoints(a);
}

CutPointSelection explicit_cutpoints(const Vector& points, const Dataset& data) {
  CutPointSelection out{CutPoints(points), {}};
  const double tmax = data.max_time();
  if (points[points.size() - 1] < tmax) {
    Vector extended = points;
    extended[extended.size() - 1] = tmax;
    std::ostringstream msg;
    msg << "last cut-point " << points[points.size() - 1]
        << " is below the largest follow-up time " << tmax << "; moved to " << tmax
        << ". This widens the last interval and changes its meaning";
    if (points.size() == 1) msg << " (the single-interval exponential baseline now spans [0, " << tmax << "])";
    if (extended.size() > 1 && extended[extended.size() - 2] >= tmax)
      throw ConfigError("cut-points: interior points exceed the largest follow-up time");
    out.cuts = CutPoints(extended);
    out.warnings.push_back(msg.str());
  }
  return out;
}

CutPointSelection parse_cutpoints(const std::string& text, const Dataset& data,
                                  bool events_only) {
  const std::string prefix = "quantile:";
  if (text.rfind(prefix, 0) == 0) {
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(text.substr(prefix.size()), &used);
      if (used != text.size() - prefix.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("cut-points: cannot parse '" + text + "'");
    }
    return {quantile_cutpoints(data, k, events_only), {}};
  }
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cut-points: cannot parse '" + item + "'");
    }
  }
  if (values.empty()) throw ConfigError("cut-points: empty list");
  return explicit_cutpoints(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())), data);
}

double cumulative_hazard(const PiecewiseHazard& h, double t) {
  if (t < 0.0) throw std::invalid_argument("cumulative_hazard: t must be nonnegative");
  if (t == 0.0) return 0.0;
  const int last = h.cuts.interval_of(t);
  double total = 0.0;
  for (int k = 0; k <= last; ++k) total += std::exp(h.log_heights[k]) * h.cuts.exposure(k, t);
  return total;
}

PoissonExpansion expand_poisson(const Dataset& data, const CutPoints& cuts) {
  PoissonExpansion ex;
  ex.num_intervals = cuts.size();
  ex.num_covariates = data.num_covariates();
  ex.num_clusters = data.num_clusters();
  ex.rows_per_cluster.assign(static_cast<std::size_t>(data.num_clusters()), 0);
  std::vector<Vector> design_rows;
  for (int r = 0; r < data.num_records(); ++r) {
    const auto& rec = data.records[r];
    const int reached = cuts.interval_of(rec.time);
    ex.intervals_reached.push_back(reached + 1);
    const Vector w = data.design_row(r);
    double pending_event = 0.0;
    std::vector<PoissonRow> kept;
    for (int k = 0; k <= reached; ++k) {
      const double delta = cuts.exposure(k, rec.time);
      const double y = (rec.event && k == reached) ? 1.0 : 0.0;
      if (!(delta > 0.0)) {
        ++ex.dropped_rows;
        pending_event += y;
        continue;
      }
      kept.push_back({rec.cluster, r, k, y, std::log(delta)});
    }
    if (pending_event > 0.0) {
      // Event mass moves to the nearest retained interval on the left.
      if (kept.empty()) throw DataError("record " + std::to_string(r + 1) + " has no exposure");
      kept.back().response += pending_event;
    }
    for (const auto& row : kept) {
      Vector z = Vector::Zero(cuts.size() + w.size());
      z[row.interval] = 1.0;
      z.tail(w.size()) = w;
      design_rows.push_back(std::move(z));
      ex.rows.push_back(row);
      ex.rows_per_cluster[rec.cluster] += 1;
    }
  }
  ex.design.resize(static_cast<Eigen::Index>(design_rows.size()), cuts.size() + ex.num_covariates);
  for (std::size_t i = 0; i < design_rows.size(); ++i)
    ex.design.row(static_cast<Eigen::Index>(i)) = design_rows[i].transpose();
  return ex;
}

double poisson_loglik(const PoissonExpansion& ex, const Vector& gamma, const Vector& frailties) {
  if (gamma.size() != ex.num_intervals + ex.num_covariates)
    throw std::invalid_argument("poisson_loglik: gamma must have length K + p");
  if (frailties.size() != ex.num_clusters)
    throw std::invalid_argument("poisson_loglik: one frailty per cluster required");
  const Vector eta = ex.design * gamma;
  std::vector<double> terms(ex.rows.size());
  for (std::size_t i = 0; i < ex.rows.size(); ++i) {
    const auto& row = ex.rows[i];
    const double lp = eta[static_cast<Eigen::Index>(i)] + frailties[row.cluster];
    terms[i] = row.response * lp - std::exp(lp + row.log_exposure);
  }
  return pairwise_sum(terms);
}

std::string format_expansion(const PoissonExpansion& ex, char delim) {
  std::ostringstream os;
  os.precision(17);
  os << "cluster" << delim << "record" << delim << "interval" << delim << "y" << delim
     << "log_offset";
  for (int k = 0; k < ex.design.cols(); ++k) os << delim << "z" << (k + 1);
  os << "\n";
  for (std::size_t i = 0; i < ex.rows.size(); ++i) {
    const auto& r = ex.rows[i];
    os << r.cluster + 1 << delim << r.record + 1 << delim << r.interval + 1 << delim << r.response
       << delim << r.log_exposure;
    for (int k = 0; k < ex.design.cols(); ++k)
      os << delim << ex.design(static_cast<Eigen::Index>(i), k);
    os << "\n";
  }
  return os.str();
}

PhLikelihood::PhLikelihood(const Dataset& data, const CutPoints& cuts) : cuts_(cuts) {
  const int n = data.num_records();
  std::vector<int> sorted(static_cast<std::size_t>(n));
  std::iota(sorted.begin(), sorted.end(), 0);
  std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
    return data.records[a].cluster < data.records[b].cluster;
  });
  design_.resize(n, data.num_covariates());
  events_.resize(n);
  partial_.resize(n);
  interval_.resize(static_cast<std::size_t>(n));
  cluster_.resize(static_cast<std::size_t>(n));
  order_.resize(static_cast<std::size_t>(n));
  cluster_begin_.assign(static_cast<std::size_t>(data.num_clusters()) + 1, 0);
  cluster_events_ = Vector::Zero(data.num_clusters());
  for (int s = 0; s < n; ++s) {
    const int r = sorted[s];
    const auto& rec = data.records[r];
    order_[r] = s;
    design_.row(s) = data.design_row(r).transpose();
    events_[s] = rec.event;
    interval_[s] = cuts.interval_of(rec.time);
    partial_[s] = cuts.exposure(interval_[s], rec.time);
    cluster_[s] = rec.cluster;
    cluster_begin_[rec.cluster + 1] += 1;
    cluster_events_[rec.cluster] += rec.event;
  }
  for (std::size_t c = 1; c < cluster_begin_.size(); ++c) cluster_begin_[c] += cluster_begin_[c - 1];
}

Vector PhLikelihood::baseline_cumulative(const Vector& log_heights) const {
  const int k_count = cuts_.size();
  Vector full(k_count + 1);  // hazard accumulated over complete intervals
  full[0] = 0.0;
  for (int k = 0; k < k_count; ++k) full[k + 1] = full[k] + std::exp(log_heights[k]) * cuts_.width(k);
  Vector out(num_records());
  for (int s = 0; s < num_records(); ++s) {
    const int k = interval_[s];
    out[s] = full[k] + std::exp(log_heights[k]) * partial_[s];
  }
  return out;
}

double PhLikelihood::loglik(const Vector& gamma, const Vector& frailties) const {
  const int k_count = num_intervals();
  const Vector log_heights = gamma.head(k_count);
  const Vector eta = design_ * gamma.tail(num_covariates());
  const Vector base = baseline_cumulative(log_heights);
  double total = 0.0;
  for (int s = 0; s < num_records(); ++s) {
    const double lp = eta[s] + frailties[cluster_[s]];
    total += events_[s] * (log_heights[interval_[s]] + lp) - base[s] * std::exp(lp);
  }
  return total;
}

Vector PhLikelihood::record_loglik(const Vector& gamma, const Vector& frailties) const {
  const int k_count = num_intervals();
  const Vector log_heights = gamma.head(k_count);
  const Vector eta = design_ * gamma.tail(num_covariates());
  const Vector base = baseline_cumulative(log_heights);
  Vector out(num_records());
  for (int r = 0; r < num_records(); ++r) {
    const int s = order_[r];
    const double lp = eta[s] + frailties[cluster_[s]];
    out[r] = events_[s] * (log_heights[interval_[s]] + lp) - base[s] * std::exp(lp);
  }
  return out;
}

void PhLikelihood::cluster_statistics(const Vector& gamma, Vector& events, Vector& exposure,
                                      Vector& constant) const {
  const int k_count = num_intervals();
  const Vector log_heights = gamma.head(k_count);
  const Vector eta = design_ * gamma.tail(num_covariates());
  const Vector base = baseline_cumulative(log_heights);
  events = cluster_events_;
  exposure = Vector::Zero(num_clusters());
  constant = Vector::Zero(num_clusters());
  for (int s = 0; s < num_records(); ++s) {
    exposure[cluster_[s]] += base[s] * std::exp(eta[s]);
    constant[cluster_[s]] += events_[s] * (log_heights[interval_[s]] + eta[s]);
  }
}

}  // namespace frailty
