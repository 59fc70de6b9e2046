#pragma once

#include "frailty/common.hpp"

#include <string>
#include <vector>

namespace frailty {

enum class FrailtyLawKind { ldtfp, exchangeable_tailfree, gaussian };

std::string to_string(FrailtyLawKind kind);
FrailtyLawKind parse_frailty_kind(const std::string& text);

/// Dyadic partition of the real line by N(0, theta) quantiles.
///
/// Level j (1..depth) has 2^j sets; set m of level j is
/// (sqrt(theta) Phi^-1(m / 2^j), sqrt(theta) Phi^-1((m + 1) / 2^j)].
class PartitionTree {
 public:
  PartitionTree() = default;
  PartitionTree(int depth, double theta);

  int depth() const { return depth_; }
  double theta() const { return theta_; }
  double scale() const { return scale_; }
  int num_leaves() const { return 1 << depth_; }

  /// The 2^j - 1 interior boundaries of level j.
  Vector boundaries(int level) const;

  /// Index of the finest-level set containing e (sets are right-closed).
  int locate(double e) const;

  double leaf_lower(int leaf) const { return leaf_bounds_[leaf]; }
  double leaf_upper(int leaf) const { return leaf_bounds_[leaf + 1]; }

  /// N(0, theta) probability of (-inf, e] rescaled to leaf-local position:
  /// returns 2^J * Phi(e / sqrt(theta)) - leaf, in [0, 1] for e in leaf.
  double within_leaf(double e, int leaf) const;

 private:
  int depth_ = 1;
  double theta_ = 1.0;
  double scale_ = 1.0;
  std::vector<double> leaf_bounds_;  // 2^J + 1 values incl. +-inf
};

/// rho(j) = j^exponent, the level weight of the coefficient prior.
struct LevelWeight {
  double exponent = 2.0;
  double operator()(int level) const;
};

/// Hyperparameters of the frailty-law block:
/// theta^-2 ~ Gamma(tau1, tau2), c ~ Gamma(a_c, b_c) (shape, rate).
struct ForestHyper {
  double tau1 = 1.001;
  double tau2 = 1.001;
  double a_c = 1.0;
  double b_c = 1.0;
  /// Degenerate c prior at +infinity: every node coefficient is zero.
  bool c_infinite = false;
};

/// Covariate-indexed median-zero frailty law G_x.
///
/// Every internal node below the root carries a coefficient vector beta;
/// the probability of moving to the left child is h((1, x')beta) with h the
/// logistic function. The root split is fixed at 1/2, so G_x(0) = 1/2 for
/// all x. Within finest sets the law follows N(0, theta).
class TailfreeForest {
 public:
  TailfreeForest() = default;
  TailfreeForest(FrailtyLawKind kind, int depth, double theta, int num_cluster_covariates,
                 int num_clusters, double precision = 1.0, LevelWeight rho = {});

  static int num_nodes(int depth) { return (1 << depth) - 2; }
  static int node_index(int level, int position) { return (1 << level) - 2 + position; }
  static int node_level(int node);
  static int node_position(int node) { return node + 2 - (1 << node_level(node)); }
  /// Root-to-node path, e.g. "LRL" for level 3.
  static std::string node_path(int node);

  FrailtyLawKind kind() const { return kind_; }
  const PartitionTree& tree() const { return tree_; }
  int depth() const { return tree_.depth(); }
  double theta() const { return tree_.theta(); }
  void set_theta(double theta) { tree_ = PartitionTree(tree_.depth(), theta); }
  double precision() const { return precision_; }
  void set_precision(double c) { precision_ = c; }
  const LevelWeight& rho() const { return rho_; }
  int num_clusters() const { return num_clusters_; }
  int num_cluster_covariates() const { return q_; }

  /// Length of each node's coefficient vector: q + 1, 1 or 0.
  int coefficient_dim() const { return static_cast<int>(coefficients_.cols()); }
  /// One row per node.
  const Matrix& coefficients() const { return coefficients_; }
  Matrix& coefficients() { return coefficients_; }

  /// Prior variance 2n / (c rho(level)) of each coefficient at this level.
  double coefficient_variance(int level) const;

  /// Node design (1, x')' truncated to the coefficient dimension.
  Vector node_design(const Vector& x) const;

  /// Logit of the left-child probability at node given the node design.
  double split_logit(int node, Eigen::Ref<const Vector> design) const {
    return coefficient_dim() == 0 ? 0.0 : coefficients_.row(node).dot(design);
  }

  double log_density(double e, const Vector& x) const;
  double density(double e, const Vector& x) const;
  double cdf(double e, const Vector& x) const;

  /// Log of the path probability factor: sum over levels 2..J of
  /// log P(child | parent, x), for the given leaf.
  double log_path_probability(int leaf, Eigen::Ref<const Vector> design) const;

  /// Masses of the 2^J finest sets under G_x.
  Vector leaf_masses(const Vector& x) const;

  /// Nodes/weights such that sum_q w_q f(e_q) approximates
  /// integral f(e) dG_x(e): `order`-point Gauss-Legendre inside every finest
  /// set truncated to +-tail*sqrt(theta), plus point masses for the tails.
  struct Quadrature {
    Vector nodes;
    Vector weights;
  };
  Quadrature quadrature(const Vector& x, int order = 32, double tail = 8.0) const;

 private:
  FrailtyLawKind kind_ = FrailtyLawKind::gaussian;
  PartitionTree tree_;
  Matrix coefficients_;
  double precision_ = 1.0;
  LevelWeight rho_;
  int q_ = 0;
  int num_clusters_ = 1;
};

/// Draws theta^-2 ~ Gamma(tau1, tau2), c ~ Gamma(a_c, b_c) and node
/// coefficients beta ~ N(0, 2n/(c rho(j)) I).
TailfreeForest sample_prior(FrailtyLawKind kind, int depth, const ForestHyper& hyper,
                            const LevelWeight& rho, int num_clusters,
                            int num_cluster_covariates, Rng& rng);

/// Sum of Gaussian log densities of all coefficients plus the Gamma log
/// densities of theta^-2 and c.
double log_prior_density(const TailfreeForest& forest, const ForestHyper& hyper);

struct GammaParameters {
  double shape = 1.0;
  double rate = 1.0;
};

/// Full conditional of c given the coefficients:
/// Gamma(a_c + d/2, b_c + sum_nodes rho(j) |beta|^2 / (4n)), d = number of coefficients.
GammaParameters precision_full_conditional(const TailfreeForest& forest, const ForestHyper& hyper);

/// Only the coefficient part of log_prior_density.
double log_coefficient_prior(const TailfreeForest& forest);

}  // namespace frailty
