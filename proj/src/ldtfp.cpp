#include "frailty/ldtfp.hpp"

#include "frailty/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace frailty {

std::string to_string(FrailtyLawKind kind) {
  switch (kind) {
    case FrailtyLawKind::ldtfp:
      return "ldtfp";
    case FrailtyLawKind::exchangeable_tailfree:
      return "exchangeable";
    case FrailtyLawKind::gaussian:
      return "gaussian";
  }
  return "unknown";
}

FrailtyLawKind parse_frailty_kind(const std::string& text) {
  if (text == "ldtfp") return FrailtyLawKind::ldtfp;
  if (text == "exchangeable" || text == "exchangeable_tailfree" || text == "tailfree")
    return FrailtyLawKind::exchangeable_tailfree;
  if (text == "gaussian" || text == "normal") return FrailtyLawKind::gaussian;
  throw ConfigError("unknown frailty law '" + text + "' (expected ldtfp, exchangeable, gaussian)");
}

PartitionTree::PartitionTree(int depth, double theta)
    : depth_(depth), theta_(theta), scale_(std::sqrt(theta)) {
  if (depth < 1) throw std::invalid_argument("PartitionTree: depth must be >= 1");
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw std::invalid_argument("PartitionTree: theta must be positive");
  const int leaves = num_leaves();
  leaf_bounds_.resize(static_cast<std::size_t>(leaves) + 1);
  leaf_bounds_.front() = -std::numeric_limits<double>::infinity();
  leaf_bounds_.back() = std::numeric_limits<double>::infinity();
  for (int m = 1; m < leaves; ++m)
    leaf_bounds_[m] = scale_ * normal_quantile(static_cast<double>(m) / leaves);
}

Vector PartitionTree::boundaries(int level) const {
  if (level < 1 || level > depth_) throw std::out_of_range("PartitionTree: bad level");
  const int count = (1 << level) - 1;
  const int stride = 1 << (depth_ - level);
  Vector out(count);
  for (int m = 1; m <= count; ++m) out[m - 1] = leaf_bounds_[static_cast<std::size_t>(m * stride)];
  return out;
}

int PartitionTree::locate(double e) const {
  // First interior boundary >= e; sets are (b_m, b_{m+1}].
  const auto begin = leaf_bounds_.begin() + 1;
  const auto end = leaf_bounds_.end() - 1;
  return static_cast<int>(std::lower_bound(begin, end, e) - begin);
}

double PartitionTree::within_leaf(double e, int leaf) const {
  const double z = e / scale_;
  const int leaves = num_leaves();
  double u;
  if (z > 0.0) {
    // Phi(z) = 1 - Q(z); keeps resolution in the right tail.
    u = static_cast<double>(leaves - leaf) - leaves * normal_ccdf(z);
  } else {
    u = leaves * normal_cdf(z) - static_cast<double>(leaf);
  }
  return std::clamp(u, 0.0, 1.0);
}

double LevelWeight::operator()(int level) const {
  return std::pow(static_cast<double>(level), exponent);
}

TailfreeForest::TailfreeForest(FrailtyLawKind kind, int depth, double theta,
                               int num_cluster_covariates, int num_clusters, double precision,
                               LevelWeight rho)
    : kind_(kind),
      tree_(depth, theta),
      precision_(precision),
      rho_(rho),
      q_(num_cluster_covariates),
      num_clusters_(num_clusters) {
  int dim = 0;
  switch (kind) {
    case FrailtyLawKind::ldtfp:
      dim = num_cluster_covariates + 1;
      break;
    case FrailtyLawKind::exchangeable_tailfree:
      dim = 1;
      break;
    case FrailtyLawKind::gaussian:
      dim = 0;
      break;
  }
  coefficients_ = Matrix::Zero(num_nodes(depth), dim);
}

int TailfreeForest::node_level(int node) {
  int level = 1;
  while (node >= (1 << (level + 1)) - 2) ++level;
  return level;
}

std::string TailfreeForest::node_path(int node) {
  const int level = node_level(node);
  const int position = node_position(node);
  std::string path;
  for (int j = level - 1; j >= 0; --j) path.push_back(((position >> j) & 1) ? 'R' : 'L');
  return path;
}

double TailfreeForest::coefficient_variance(int level) const {
  return 2.0 * num_clusters_ / (precision_ * rho_(level));
}

Vector TailfreeForest::node_design(const Vector& x) const {
  const int dim = coefficient_dim();
  Vector d(dim);
  if (dim == 0) return d;
  d[0] = 1.0;
  for (int k = 1; k < dim; ++k) d[k] = x[k - 1];
  return d;
}

double TailfreeForest::log_path_probability(int leaf, Eigen::Ref<const Vector> design) const {
  const int depth = tree_.depth();
  double total = -std::numbers::ln2;  // root split
  for (int level = 1; level < depth; ++level) {
    const int position = leaf >> (depth - level);
    const bool right = (leaf >> (depth - level - 1)) & 1;
    const double logit = split_logit(node_index(level, position), design);
    total += right ? log_one_minus_logistic(logit) : log_logistic(logit);
  }
  return total;
}

double TailfreeForest::log_density(double e, const Vector& x) const {
  const int leaf = tree_.locate(e);
  return log_normal_pdf(e, 0.0, tree_.theta()) + tree_.depth() * std::numbers::ln2 +
         log_path_probability(leaf, node_design(x));
}

double TailfreeForest::density(double e, const Vector& x) const {
  return std::exp(log_density(e, x));
}

double TailfreeForest::cdf(double e, const Vector& x) const {
  if (e == std::numeric_limits<double>::infinity()) return 1.0;
  if (e == -std::numeric_limits<double>::infinity()) return 0.0;
  const int depth = tree_.depth();
  const Vector design = node_design(x);
  // Left-closed location keeps G(boundary) equal to the exact sum of the
  // masses on the left.
  int leaf = tree_.locate(e);
  if (leaf + 1 < tree_.num_leaves() && tree_.leaf_upper(leaf) == e) ++leaf;
  double total = 0.0;
  double path = 0.5;
  if ((leaf >> (depth - 1)) & 1) total += 0.5;
  for (int level = 1; level < depth; ++level) {
    const int position = leaf >> (depth - level);
    const bool right = (leaf >> (depth - level - 1)) & 1;
    const double left_prob = logistic(split_logit(node_index(level, position), design));
    if (right) {
      total += path * left_prob;
      path *= 1.0 - left_prob;
    } else {
      path *= left_prob;
    }
  }
  total += path * tree_.within_leaf(e, leaf);
  return std::clamp(total, 0.0, 1.0);
}

Vector TailfreeForest::leaf_masses(const Vector& x) const {
  const int depth = tree_.depth();
  const Vector design = node_design(x);
  Vector mass = Vector::Constant(1, 1.0);
  for (int level = 0; level < depth; ++level) {
    Vector next(mass.size() * 2);
    for (Eigen::Index m = 0; m < mass.size(); ++m) {
      const double left =
          level == 0 ? 0.5
                     : logistic(split_logit(node_index(level, static_cast<int>(m)), design));
      next[2 * m] = mass[m] * left;
      next[2 * m + 1] = mass[m] * (1.0 - left);
    }
    mass = std::move(next);
  }
  return mass;
}

TailfreeForest::Quadrature TailfreeForest::quadrature(const Vector& x, int order,
                                                      double tail) const {
  const QuadratureRule& rule = gauss_legendre(order);
  const Vector masses = leaf_masses(x);
  const double lo_cut = -tail * tree_.scale();
  const double hi_cut = tail * tree_.scale();
  const int leaves = tree_.num_leaves();
  Quadrature q{Vector(leaves * order + 2), Vector(leaves * order + 2)};
  Eigen::Index at = 0;
  // Mass of N(0, theta) below -tail sqrt(theta), as a fraction of leaf 0.
  const double tail_fraction = normal_cdf(-tail) * leaves;
  q.nodes[at] = lo_cut;
  q.weights[at++] = masses[0] * tail_fraction;
  for (int m = 0; m < leaves; ++m) {
    const double a = std::max(tree_.leaf_lower(m), lo_cut);
    const double b = std::min(tree_.leaf_upper(m), hi_cut);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const double factor = masses[m] * leaves;  // g / phi_theta within leaf m
    for (int k = 0; k < order; ++k) {
      const double e = mid + half * rule.nodes[k];
      q.nodes[at] = e;
      q.weights[at++] = rule.weights[k] * half * factor * normal_pdf(e, 0.0, tree_.theta());
    }
  }
  q.nodes[at] = hi_cut;
  q.weights[at++] = masses[leaves - 1] * tail_fraction;
  return q;
}

TailfreeForest sample_prior(FrailtyLawKind kind, int depth, const ForestHyper& hyper,
                            const LevelWeight& rho, int num_clusters, int q, Rng& rng) {
  if (!(hyper.tau1 > 0 && hyper.tau2 > 0 && hyper.a_c > 0 && hyper.b_c > 0))
    throw ConfigError("frailty prior hyperparameters must be positive");
  if (depth < 1) throw ConfigError("partition depth J must be >= 1");
  const double inv_theta_sq = rng.gamma(hyper.tau1, hyper.tau2);
  const double theta = 1.0 / std::sqrt(inv_theta_sq);
  const double c = hyper.c_infinite ? std::numeric_limits<double>::infinity()
                                    : rng.gamma(hyper.a_c, hyper.b_c);
  TailfreeForest forest(kind, depth, theta, q, num_clusters, c, rho);
  auto& beta = forest.coefficients();
  for (Eigen::Index node = 0; node < beta.rows(); ++node) {
    const double sd =
        std::sqrt(forest.coefficient_variance(TailfreeForest::node_level(static_cast<int>(node))));
    for (Eigen::Index k = 0; k < beta.cols(); ++k) beta(node, k) = hyper.c_infinite ? 0.0 : sd * rng.normal();
  }
  return forest;
}

GammaParameters precision_full_conditional(const TailfreeForest& forest, const ForestHyper& hyper) {
  const Matrix& beta = forest.coefficients();
  GammaParameters g{hyper.a_c + 0.5 * static_cast<double>(beta.size()), hyper.b_c};
  for (Eigen::Index node = 0; node < beta.rows(); ++node)
    g.rate += forest.rho()(TailfreeForest::node_level(static_cast<int>(node))) *
              beta.row(node).squaredNorm() / (4.0 * forest.num_clusters());
  return g;
}

double log_coefficient_prior(const TailfreeForest& forest) {
  const Matrix& beta = forest.coefficients();
  double total = 0.0;
  for (Eigen::Index node = 0; node < beta.rows(); ++node) {
    const double var = forest.coefficient_variance(TailfreeForest::node_level(static_cast<int>(node)));
    for (Eigen::Index k = 0; k < beta.cols(); ++k) total += log_normal_pdf(beta(node, k), 0.0, var);
  }
  return total;
}

double log_prior_density(const TailfreeForest& forest, const ForestHyper& hyper) {
  const double theta = forest.theta();
  double total = log_coefficient_prior(forest);
  total += log_gamma_pdf(1.0 / (theta * theta), hyper.tau1, hyper.tau2);
  if (!hyper.c_infinite) total += log_gamma_pdf(forest.precision(), hyper.a_c, hyper.b_c);
  return total;
}

}  // namespace frailty
