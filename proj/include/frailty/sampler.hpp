#pragma once

#include "frailty/common.hpp"
#include "frailty/data.hpp"
#include "frailty/hazard.hpp"
#include "frailty/ldtfp.hpp"
#include "frailty/mcmc.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace frailty {

/// gamma ~ N(gamma_mean, gamma_covariance) plus the frailty-law block.
/// Empty gamma_mean / gamma_covariance resolve to 0 and 10^3 I.
struct ModelHyper {
  ForestHyper forest;
  Vector gamma_mean;
  Matrix gamma_covariance;
};

/// Maps cluster covariates x to the vector entering the node regressions.
using DesignExpansion = std::function<Vector(const Vector&)>;

struct ModelSpec {
  Dataset dataset;
  CutPoints cuts;
  FrailtyLawKind frailty = FrailtyLawKind::ldtfp;
  int depth = 4;
  ModelHyper hyper;
  LevelWeight rho;
  /// Optional basis expansion of x for the node regressions (identity if empty).
  DesignExpansion frailty_design;

  int num_gamma() const { return cuts.size() + dataset.num_covariates(); }
  Vector gamma_mean() const;
  Matrix gamma_covariance() const;
  /// Rows are the (possibly expanded) cluster covariates seen by the forest.
  Matrix forest_covariates() const;

  /// Throws ConfigError on inconsistent dimensions or hyperparameters.
  void validate() const;
};

struct ChainControls {
  long iterations = 55000;
  long burn_in = 5000;
  long thin = 10;
  std::uint64_t seed = 1;
  /// Keep the n_obs-column per-observation log-likelihood matrix.
  bool store_record_loglik = true;
  /// Fixed frailty random-walk scale (disables its adaptation).
  std::optional<double> frailty_proposal_scale;

  long retained() const { return thin > 0 && iterations > burn_in ? (iterations - burn_in) / thin : 0; }
  void validate() const;
};

/// Blocks switched off stay at their initial values.
struct UpdateMask {
  bool gamma = true;
  bool frailties = true;
  bool coefficients = true;
  bool theta = true;
  bool precision = true;
};

struct BlockAcceptance {
  double gamma = 0.0;
  double frailties = 0.0;     // mean over clusters
  double coefficients = 0.0;  // mean over nodes
  double theta = 0.0;
};

/// Proposal scales, recorded to check that adaptation stops after burn-in.
struct AdaptationSnapshot {
  double gamma_scale = 0.0;
  Matrix gamma_covariance;
  Vector frailty_scales;
  Vector coefficient_scales;
  double theta_scale = 0.0;

  bool operator==(const AdaptationSnapshot& other) const;
};

/// Retained draws of one chain.
struct PosteriorChain {
  FrailtyLawKind frailty = FrailtyLawKind::ldtfp;
  int depth = 4;
  LevelWeight rho;
  CutPoints cuts;
  std::vector<std::string> covariate_names;
  int num_clusters = 0;
  /// Raw cluster covariates q: the trailing q entries of each design row.
  int num_cluster_covariates = 0;
  std::optional<std::vector<ColumnTransform>> standardization;
  /// Cluster covariates as seen by the forest (after any expansion).
  Matrix forest_covariates;
  DesignExpansion frailty_design;
  ChainControls controls;

  Matrix gamma;         // M x (K + p)
  Matrix frailties;     // M x n
  Vector theta;         // M
  Vector precision;     // M
  Matrix coefficients;  // M x (nodes * dim), node-major
  Vector loglik;        // M, conditional log-likelihood log L(gamma, e)
  Matrix record_loglik; // M x n_obs (empty unless stored)

  BlockAcceptance acceptance;
  AdaptationSnapshot adaptation_at_burn_in;
  AdaptationSnapshot adaptation_at_end;

  int retained() const { return static_cast<int>(gamma.rows()); }
  int num_intervals() const { return cuts.size(); }
  int num_covariates() const { return static_cast<int>(gamma.cols()) - cuts.size(); }
  int coefficient_dim() const;

  Vector xi(int draw) const { return gamma.row(draw).tail(num_covariates()).transpose(); }
  PiecewiseHazard hazard(int draw) const;
  TailfreeForest forest(int draw) const;
  /// Applies frailty_design (if any) to raw cluster covariates.
  Vector forest_input(const Vector& x) const;
};

/// Metropolis-within-Gibbs sampler for (gamma, e, beta, theta, c).
///
/// One sweep updates gamma, then every frailty, then the node coefficients
/// in level order, then theta, then c.
class Sampler {
 public:
  Sampler(const ModelSpec& spec, std::uint64_t seed, UpdateMask mask = {},
          std::optional<double> frailty_proposal_scale = std::nullopt);

  void sweep();
  void update_gamma();
  void update_frailties();
  void update_coefficients();
  void update_theta();
  void update_precision();

  /// Stops all proposal adaptation (end of burn-in).
  void freeze_adaptation();
  void reset_acceptance();

  const Vector& gamma() const { return gamma_; }
  const Vector& frailties() const { return frailties_; }
  const TailfreeForest& forest() const { return forest_; }
  long iteration() const { return iteration_; }

  void set_gamma(const Vector& gamma);
  void set_frailties(const Vector& frailties);
  void set_forest(const TailfreeForest& forest);

  /// Conditional log-likelihood log L(gamma, e).
  double loglik() const;
  Vector record_loglik() const { return likelihood_.record_loglik(gamma_, frailties_); }
  /// log g(e | x_i) under the current forest.
  double log_frailty_density(int cluster, double e) const;

  BlockAcceptance acceptance() const;
  AdaptationSnapshot adaptation() const;
  const PhLikelihood& likelihood() const { return likelihood_; }

 private:
  double log_gamma_prior(const Vector& gamma) const;
  double frailty_path_loglik() const;
  void refresh_cluster_statistics();
  void initialize_gamma(const PoissonExpansion& expansion);
  void check_finite(const char* block) const;

  ForestHyper hyper_;
  UpdateMask mask_;
  Rng rng_;
  PhLikelihood likelihood_;
  Vector gamma_mean_;
  Matrix gamma_precision_;
  Matrix node_designs_;  // dim x n, column i = (1, x_i')
  int n_ = 0;

  Vector gamma_;
  Vector frailties_;
  TailfreeForest forest_;
  std::vector<int> leaves_;
  std::vector<std::vector<int>> members_;  // signed 1-based cluster ids per node

  Vector events_;
  Vector exposure_;
  Vector constant_;

  AdaptiveRandomWalk gamma_kernel_;
  std::vector<AdaptiveScalarWalk> frailty_kernels_;
  std::vector<AdaptiveRandomWalk> node_kernels_;
  AdaptiveScalarWalk theta_kernel_{0.3};
  long iteration_ = 0;
};

/// Runs burn-in (with adaptation), then thinned retained sweeps.
/// Throws SamplerError when the log posterior becomes non-finite.
PosteriorChain run_chain(const ModelSpec& spec, const ChainControls& controls,
                         UpdateMask mask = {});

/// Prior-only run: n clusters without records. Compares the retained
/// theta^-2, c and scaled coefficient draws with their prior moments.
struct PriorCheckItem {
  std::string name;
  double estimate = 0.0;
  double expected = 0.0;
  double standard_error = 0.0;
  double lower = 0.0;  // acceptance band
  double upper = 0.0;
  bool pass = false;
};

struct PriorCheckReport {
  std::vector<PriorCheckItem> items;
  bool pass() const;
};

PriorCheckReport prior_replication_check(FrailtyLawKind kind, int depth, const ForestHyper& hyper,
                                         const LevelWeight& rho, int num_clusters,
                                         int num_cluster_covariates, const ChainControls& controls);

}  // namespace frailty
