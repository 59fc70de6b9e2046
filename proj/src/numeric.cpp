#include "frailty/numeric.hpp"

#include <limits>
#include <map>
#include <mutex>
#include <numeric>

namespace frailty {

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 64;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double shifted_mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double origin = values.front();
  std::vector<double> shifted(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) shifted[k] = values[k] - origin;
  return origin + pairwise_sum(shifted) / static_cast<double>(values.size());
}

namespace {

// Legendre polynomial P_n(x) and its derivative.
std::pair<double, double> legendre(int order, double x) {
  double p0 = 1.0;
  double p1 = x;
  for (int k = 2; k <= order; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  const double dp = order * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

QuadratureRule compute_gauss_legendre(int order) {
  QuadratureRule rule{Vector(order), Vector(order)};
  if (order == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 2.0;
    return rule;
  }
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(order, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(order, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_gauss_legendre(order)).first;
  return it->second;
}

double sorted_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("sorted_quantile: empty input");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, 0.5);
}

double batch_means_se(std::span<const double> series, int batches) {
  const std::size_t n = series.size();
  if (n < 2) return std::numeric_limits<double>::infinity();
  const std::size_t b = std::max<std::size_t>(1, n / static_cast<std::size_t>(batches));
  const std::size_t count = n / b;
  if (count < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> means(count);
  for (std::size_t k = 0; k < count; ++k) {
    double s = 0.0;
    for (std::size_t i = k * b; i < (k + 1) * b; ++i) s += series[i];
    means[k] = s / static_cast<double>(b);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / count;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double batch_var = ss / static_cast<double>(count - 1);
  return std::sqrt(batch_var / static_cast<double>(count));
}

}  // namespace frailty
