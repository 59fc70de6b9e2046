#include "frailty/sampler.hpp"

#include "frailty/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace frailty {

namespace {

constexpr double kInitRidge = 1e-2;

Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw ConfigError("matrix is not positive definite");
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelSpec

Vector ModelSpec::gamma_mean() const {
  return hyper.gamma_mean.size() == 0 ? Vector::Zero(num_gamma()) : hyper.gamma_mean;
}

Matrix ModelSpec::gamma_covariance() const {
  if (hyper.gamma_covariance.size() == 0) return 1e3 * Matrix::Identity(num_gamma(), num_gamma());
  return hyper.gamma_covariance;
}

Matrix ModelSpec::forest_covariates() const {
  const Matrix x = dataset.cluster_matrix();
  if (!frailty_design) return x;
  Matrix out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector row = frailty_design(x.row(i).transpose());
    if (i == 0) out.resize(x.rows(), row.size());
    if (row.size() != out.cols()) throw ConfigError("frailty design expansion changed dimension");
    out.row(i) = row.transpose();
  }
  return out;
}

void ModelSpec::validate() const {
  dataset.validate();
  if (cuts.size() < 1) throw ConfigError("at least one cut-point is required");
  if (cuts.upper(cuts.size() - 1) < dataset.max_time())
    throw ConfigError("last cut-point lies below the largest follow-up time");
  if (depth < 1 || depth > 16) throw ConfigError("partition depth J must be in 1..16");
  const auto& f = hyper.forest;
  if (!(f.tau1 > 0 && f.tau2 > 0 && f.a_c > 0 && f.b_c > 0))
    throw ConfigError("tau1, tau2, a_c and b_c must be positive");
  if (!(rho.exponent >= 0) || !std::isfinite(rho.exponent))
    throw ConfigError("level-weight exponent must be finite and non-negative");
  const int d = num_gamma();
  if (hyper.gamma_mean.size() != 0 && hyper.gamma_mean.size() != d)
    throw ConfigError("gamma prior mean must have length K + p = " + std::to_string(d));
  if (hyper.gamma_covariance.size() != 0) {
    const Matrix& s = hyper.gamma_covariance;
    if (s.rows() != d || s.cols() != d)
      throw ConfigError("gamma prior covariance must be (K + p) x (K + p)");
    if (!s.isApprox(s.transpose(), 1e-12)) throw ConfigError("gamma prior covariance is not symmetric");
    if (Eigen::LLT<Matrix>(s).info() != Eigen::Success)
      throw ConfigError("gamma prior covariance is not positive definite");
  }
}

void ChainControls::validate() const {
  if (burn_in < 0) throw ConfigError("burn-in must be non-negative");
  if (iterations <= burn_in) throw ConfigError("iterations must exceed burn-in");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (frailty_proposal_scale && !(*frailty_proposal_scale >= 0))
    throw ConfigError("frailty proposal scale must be non-negative");
}

bool AdaptationSnapshot::operator==(const AdaptationSnapshot& o) const {
  return gamma_scale == o.gamma_scale && gamma_covariance == o.gamma_covariance &&
         frailty_scales == o.frailty_scales && coefficient_scales == o.coefficient_scales &&
         theta_scale == o.theta_scale;
}

// ---------------------------------------------------------------------------
// PosteriorChain

int PosteriorChain::coefficient_dim() const {
  const int nodes = TailfreeForest::num_nodes(depth);
  return nodes == 0 ? 0 : static_cast<int>(coefficients.cols()) / nodes;
}

PiecewiseHazard PosteriorChain::hazard(int draw) const {
  return {cuts, gamma.row(draw).head(num_intervals()).transpose()};
}

TailfreeForest PosteriorChain::forest(int draw) const {
  TailfreeForest f(frailty, depth, theta[draw], static_cast<int>(forest_covariates.cols()),
                   num_clusters, precision[draw], rho);
  Matrix& beta = f.coefficients();
  const int dim = static_cast<int>(beta.cols());
  for (Eigen::Index node = 0; node < beta.rows(); ++node)
    for (int k = 0; k < dim; ++k) beta(node, k) = coefficients(draw, node * dim + k);
  return f;
}

Vector PosteriorChain::forest_input(const Vector& x) const {
  return frailty_design ? frailty_design(x) : x;
}

// ---------------------------------------------------------------------------
// Sampler

Sampler::Sampler(const ModelSpec& spec, std::uint64_t seed, UpdateMask mask,
                 std::optional<double> frailty_proposal_scale)
    : hyper_(spec.hyper.forest),
      mask_(mask),
      rng_(seed),
      likelihood_((spec.validate(), PhLikelihood(spec.dataset, spec.cuts))) {
  n_ = spec.dataset.num_clusters();
  gamma_mean_ = spec.gamma_mean();
  gamma_precision_ = spd_inverse(spec.gamma_covariance());

  const Matrix x = spec.forest_covariates();
  const double precision = hyper_.c_infinite ? std::numeric_limits<double>::infinity()
                                             : hyper_.a_c / hyper_.b_c;
  forest_ = TailfreeForest(spec.frailty, spec.depth, hyper_.tau2 / hyper_.tau1,
                           static_cast<int>(x.cols()), n_, precision, spec.rho);
  if (hyper_.c_infinite) {
    mask_.coefficients = false;
    mask_.precision = false;
  }
  const int dim = forest_.coefficient_dim();
  if (dim == 0) {
    mask_.coefficients = false;
    mask_.precision = false;
  }
  node_designs_.resize(dim, n_);
  for (int i = 0; i < n_; ++i) node_designs_.col(i) = forest_.node_design(x.row(i).transpose());

  frailties_ = Vector::Zero(n_);
  leaves_.assign(static_cast<std::size_t>(n_), forest_.tree().locate(0.0));

  initialize_gamma(expand_poisson(spec.dataset, spec.cuts));
  refresh_cluster_statistics();

  frailty_kernels_.reserve(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) {
    if (frailty_proposal_scale) {
      frailty_kernels_.emplace_back(*frailty_proposal_scale);
      frailty_kernels_.back().freeze();
    } else {
      frailty_kernels_.emplace_back(1.0 / std::sqrt(1.0 + events_[i]));
    }
  }

  // Node kernels start from the Fisher information at beta = 0, assuming
  // about n / 2^level clusters reach a level-j node.
  const int nodes = TailfreeForest::num_nodes(forest_.depth());
  node_kernels_.reserve(static_cast<std::size_t>(nodes));
  if (dim > 0) {
    const Matrix gram = node_designs_ * node_designs_.transpose();
    for (int node = 0; node < nodes; ++node) {
      const int level = TailfreeForest::node_level(node);
      Matrix info = (0.25 / std::ldexp(1.0, level)) * gram;
      const double v = hyper_.c_infinite ? 1.0 : forest_.coefficient_variance(level);
      info.diagonal().array() += 1.0 / v;
      node_kernels_.emplace_back(spd_inverse(info));
    }
  }
  check_finite("initialization");
}

void Sampler::initialize_gamma(const PoissonExpansion& ex) {
  const int d = static_cast<int>(gamma_mean_.size());
  const int k_count = likelihood_.num_intervals();
  const Matrix penalty = gamma_precision_ + kInitRidge * Matrix::Identity(d, d);
  Vector gamma = gamma_mean_;
  const Vector zero = Vector::Zero(n_);

  if (ex.num_rows() > 0) {
    double events = 0.0, exposure = 0.0;
    for (const auto& row : ex.rows) {
      events += row.response;
      exposure += std::exp(row.log_exposure);
    }
    gamma.head(k_count).setConstant(std::log(std::max(events, 0.5) / exposure));
  }

  Vector y(ex.num_rows()), offset(ex.num_rows());
  for (int r = 0; r < ex.num_rows(); ++r) {
    y[r] = ex.rows[r].response;
    offset[r] = ex.rows[r].log_exposure;
  }
  auto objective = [&](const Vector& g) {
    const Vector diff = g - gamma_mean_;
    return poisson_loglik(ex, g, zero) - 0.5 * diff.dot(penalty * diff);
  };
  Matrix hessian = penalty;
  double current = objective(gamma);
  for (int iter = 0; iter < 100; ++iter) {
    const Vector mu = (ex.design * gamma + offset).array().exp().matrix();
    const Vector grad = ex.design.transpose() * (y - mu) - penalty * (gamma - gamma_mean_);
    hessian = ex.design.transpose() * mu.asDiagonal() * ex.design + penalty;
    const Vector step = hessian.llt().solve(grad);
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      const Vector trial = gamma + t * step;
      const double value = objective(trial);
      if (std::isfinite(value) && value >= current) {
        gamma = trial;
        current = value;
        improved = true;
        break;
      }
    }
    if (!improved || t * step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  const Vector mu = (ex.design * gamma + offset).array().exp().matrix();
  hessian = ex.design.transpose() * mu.asDiagonal() * ex.design + gamma_precision_;
  gamma_ = gamma;
  gamma_kernel_ = AdaptiveRandomWalk(spd_inverse(hessian), 0.234);
}

void Sampler::refresh_cluster_statistics() {
  likelihood_.cluster_statistics(gamma_, events_, exposure_, constant_);
}

double Sampler::log_gamma_prior(const Vector& gamma) const {
  const Vector diff = gamma - gamma_mean_;
  return -0.5 * diff.dot(gamma_precision_ * diff);
}

double Sampler::loglik() const {
  double total = 0.0;
  for (int i = 0; i < n_; ++i)
    total += constant_[i] + events_[i] * frailties_[i] - exposure_[i] * std::exp(frailties_[i]);
  return total;
}

double Sampler::log_frailty_density(int cluster, double e) const {
  const int leaf = forest_.tree().locate(e);
  return log_normal_pdf(e, 0.0, forest_.theta()) + forest_.depth() * std::numbers::ln2 +
         forest_.log_path_probability(leaf, node_designs_.col(cluster));
}

double Sampler::frailty_path_loglik() const {
  double total = 0.0;
  for (int i = 0; i < n_; ++i) total += log_frailty_density(i, frailties_[i]);
  return total;
}

void Sampler::update_gamma() {
  Vector proposal = gamma_kernel_.propose(gamma_, rng_);
  Vector events, exposure, constant;
  likelihood_.cluster_statistics(proposal, events, exposure, constant);
  double proposed_ll = 0.0;
  for (int i = 0; i < n_; ++i)
    proposed_ll += constant[i] + events[i] * frailties_[i] - exposure[i] * std::exp(frailties_[i]);
  const double log_ratio =
      proposed_ll + log_gamma_prior(proposal) - loglik() - log_gamma_prior(gamma_);
  const bool accepted = std::isfinite(proposed_ll) && metropolis_accept(log_ratio, rng_);
  if (accepted) {
    gamma_ = std::move(proposal);
    exposure_ = std::move(exposure);
    constant_ = std::move(constant);
  }
  gamma_kernel_.observe(gamma_, accepted);
}

void Sampler::update_frailties() {
  for (int i = 0; i < n_; ++i) {
    auto& kernel = frailty_kernels_[static_cast<std::size_t>(i)];
    const double e = frailties_[i];
    const double proposal = kernel.propose(e, rng_);
    const double log_ratio =
        events_[i] * (proposal - e) - exposure_[i] * (std::exp(proposal) - std::exp(e)) +
        log_frailty_density(i, proposal) - log_frailty_density(i, e);
    const bool accepted = metropolis_accept(log_ratio, rng_);
    if (accepted) {
      frailties_[i] = proposal;
      leaves_[static_cast<std::size_t>(i)] = forest_.tree().locate(proposal);
    }
    kernel.observe(accepted);
  }
}

void Sampler::update_coefficients() {
  const int depth = forest_.depth();
  const int nodes = TailfreeForest::num_nodes(depth);
  if (nodes == 0) return;
  members_.resize(static_cast<std::size_t>(nodes));
  for (auto& m : members_) m.clear();
  // Each cluster's leaf fixes the child taken at every node on its path.
  for (int i = 0; i < n_; ++i) {
    const int leaf = leaves_[static_cast<std::size_t>(i)];
    for (int level = 1; level < depth; ++level) {
      const int node = TailfreeForest::node_index(level, leaf >> (depth - level));
      const bool right = (leaf >> (depth - level - 1)) & 1;
      members_[static_cast<std::size_t>(node)].push_back(right ? -(i + 1) : (i + 1));
    }
  }
  Matrix& beta = forest_.coefficients();
  for (int node = 0; node < nodes; ++node) {
    const auto& members = members_[static_cast<std::size_t>(node)];
    const double v = forest_.coefficient_variance(TailfreeForest::node_level(node));
    auto target = [&](const Vector& b) {
      double total = -0.5 * b.squaredNorm() / v;
      for (int signed_index : members) {
        const int i = std::abs(signed_index) - 1;
        const double eta = b.dot(node_designs_.col(i));
        total += signed_index > 0 ? log_logistic(eta) : log_one_minus_logistic(eta);
      }
      return total;
    };
    auto& kernel = node_kernels_[static_cast<std::size_t>(node)];
    const Vector current = beta.row(node).transpose();
    const Vector proposal = kernel.propose(current, rng_);
    const bool accepted = metropolis_accept(target(proposal) - target(current), rng_);
    if (accepted) beta.row(node) = proposal.transpose();
    kernel.observe(beta.row(node).transpose(), accepted);
  }
}

void Sampler::update_theta() {
  auto log_prior = [&](double log_theta) {
    const double v = std::exp(-2.0 * log_theta);  // theta^-2
    return log_gamma_pdf(v, hyper_.tau1, hyper_.tau2) + std::log(2.0 * v);
  };
  const double log_theta = std::log(forest_.theta());
  const double current = frailty_path_loglik() + log_prior(log_theta);
  const double proposal = theta_kernel_.propose(log_theta, rng_);
  const double old_theta = forest_.theta();
  bool accepted = false;
  if (std::isfinite(proposal) && std::exp(proposal) > 0.0 && std::isfinite(std::exp(proposal))) {
    forest_.set_theta(std::exp(proposal));
    const double value = frailty_path_loglik() + log_prior(proposal);
    accepted = metropolis_accept(value - current, rng_);
    if (!accepted) forest_.set_theta(old_theta);
  }
  if (accepted) {
    for (int i = 0; i < n_; ++i)
      leaves_[static_cast<std::size_t>(i)] = forest_.tree().locate(frailties_[i]);
  }
  theta_kernel_.observe(accepted);
}

void Sampler::update_precision() {
  const GammaParameters g = precision_full_conditional(forest_, hyper_);
  forest_.set_precision(rng_.gamma(g.shape, g.rate));
}

void Sampler::sweep() {
  ++iteration_;
  if (mask_.gamma) update_gamma();
  if (mask_.frailties) update_frailties();
  if (mask_.coefficients) update_coefficients();
  if (mask_.theta) update_theta();
  if (mask_.precision) update_precision();
  check_finite("sweep");
}

void Sampler::check_finite(const char* block) const {
  const double ll = loglik();
  if (!std::isfinite(ll) || !gamma_.allFinite() || !frailties_.allFinite()) {
    if (iteration_ == 0)
      throw SamplerError(-1,
                         "non-finite log posterior at initialization; consider standardizing "
                         "covariates");
    throw SamplerError(iteration_, std::string("non-finite log-likelihood after ") + block +
                                       " at iteration " + std::to_string(iteration_));
  }
}

void Sampler::freeze_adaptation() {
  gamma_kernel_.freeze();
  for (auto& k : frailty_kernels_) k.freeze();
  for (auto& k : node_kernels_) k.freeze();
  theta_kernel_.freeze();
}

void Sampler::reset_acceptance() {
  gamma_kernel_.reset_counter();
  for (auto& k : frailty_kernels_) k.reset_counter();
  for (auto& k : node_kernels_) k.reset_counter();
  theta_kernel_.reset_counter();
}

void Sampler::set_gamma(const Vector& gamma) {
  if (gamma.size() != gamma_.size()) throw std::invalid_argument("set_gamma: wrong length");
  gamma_ = gamma;
  refresh_cluster_statistics();
}

void Sampler::set_frailties(const Vector& frailties) {
  if (frailties.size() != n_) throw std::invalid_argument("set_frailties: wrong length");
  frailties_ = frailties;
  for (int i = 0; i < n_; ++i)
    leaves_[static_cast<std::size_t>(i)] = forest_.tree().locate(frailties_[i]);
}

void Sampler::set_forest(const TailfreeForest& forest) {
  if (forest.coefficient_dim() != forest_.coefficient_dim() || forest.depth() != forest_.depth())
    throw std::invalid_argument("set_forest: shape mismatch");
  forest_ = forest;
  for (int i = 0; i < n_; ++i)
    leaves_[static_cast<std::size_t>(i)] = forest_.tree().locate(frailties_[i]);
}

BlockAcceptance Sampler::acceptance() const {
  BlockAcceptance a;
  a.gamma = gamma_kernel_.counter().rate();
  double sum = 0.0;
  for (const auto& k : frailty_kernels_) sum += k.counter().rate();
  a.frailties = frailty_kernels_.empty() ? 0.0 : sum / static_cast<double>(frailty_kernels_.size());
  sum = 0.0;
  for (const auto& k : node_kernels_) sum += k.counter().rate();
  a.coefficients = node_kernels_.empty() ? 0.0 : sum / static_cast<double>(node_kernels_.size());
  a.theta = theta_kernel_.counter().rate();
  return a;
}

AdaptationSnapshot Sampler::adaptation() const {
  AdaptationSnapshot s;
  s.gamma_scale = gamma_kernel_.scale();
  s.gamma_covariance = gamma_kernel_.proposal_covariance();
  s.frailty_scales.resize(n_);
  for (int i = 0; i < n_; ++i) s.frailty_scales[i] = frailty_kernels_[static_cast<std::size_t>(i)].scale();
  s.coefficient_scales.resize(static_cast<Eigen::Index>(node_kernels_.size()));
  for (std::size_t k = 0; k < node_kernels_.size(); ++k)
    s.coefficient_scales[static_cast<Eigen::Index>(k)] = node_kernels_[k].scale();
  s.theta_scale = theta_kernel_.scale();
  return s;
}

// ---------------------------------------------------------------------------

PosteriorChain run_chain(const ModelSpec& spec, const ChainControls& controls, UpdateMask mask) {
  controls.validate();
  Sampler sampler(spec, controls.seed, mask, controls.frailty_proposal_scale);

  PosteriorChain chain;
  chain.frailty = spec.frailty;
  chain.depth = spec.depth;
  chain.rho = spec.rho;
  chain.cuts = spec.cuts;
  chain.covariate_names = spec.dataset.covariate_names;
  chain.num_clusters = spec.dataset.num_clusters();
  chain.num_cluster_covariates = spec.dataset.num_cluster_covariates();
  chain.standardization = spec.dataset.standardization;
  chain.forest_covariates = spec.forest_covariates();
  chain.frailty_design = spec.frailty_design;
  chain.controls = controls;

  const long m = controls.retained();
  const int n = chain.num_clusters;
  const int nodes = TailfreeForest::num_nodes(spec.depth);
  const int dim = sampler.forest().coefficient_dim();
  chain.gamma.resize(m, spec.num_gamma());
  chain.frailties.resize(m, n);
  chain.theta.resize(m);
  chain.precision.resize(m);
  chain.coefficients.resize(m, static_cast<Eigen::Index>(nodes) * dim);
  chain.loglik.resize(m);
  if (controls.store_record_loglik) chain.record_loglik.resize(m, spec.dataset.num_records());

  if (controls.burn_in == 0) {
    chain.adaptation_at_burn_in = sampler.adaptation();
    sampler.freeze_adaptation();
  }
  long kept = 0;
  for (long it = 1; it <= controls.iterations; ++it) {
    sampler.sweep();
    if (it == controls.burn_in) {
      sampler.freeze_adaptation();
      sampler.reset_acceptance();
      chain.adaptation_at_burn_in = sampler.adaptation();
    }
    if (it > controls.burn_in && (it - controls.burn_in) % controls.thin == 0 && kept < m) {
      chain.gamma.row(kept) = sampler.gamma().transpose();
      chain.frailties.row(kept) = sampler.frailties().transpose();
      chain.theta[kept] = sampler.forest().theta();
      chain.precision[kept] = sampler.forest().precision();
      const Matrix& beta = sampler.forest().coefficients();
      for (int node = 0; node < nodes; ++node)
        for (int k = 0; k < dim; ++k) chain.coefficients(kept, node * dim + k) = beta(node, k);
      chain.loglik[kept] = sampler.loglik();
      if (controls.store_record_loglik) chain.record_loglik.row(kept) = sampler.record_loglik().transpose();
      ++kept;
    }
  }
  chain.acceptance = sampler.acceptance();
  chain.adaptation_at_end = sampler.adaptation();
  return chain;
}

// ---------------------------------------------------------------------------

bool PriorCheckReport::pass() const {
  return std::all_of(items.begin(), items.end(), [](const PriorCheckItem& i) { return i.pass; });
}

PriorCheckReport prior_replication_check(FrailtyLawKind kind, int depth, const ForestHyper& hyper,
                                         const LevelWeight& rho, int num_clusters,
                                         int num_cluster_covariates, const ChainControls& controls) {
  ModelSpec spec;
  spec.frailty = kind;
  spec.depth = depth;
  spec.rho = rho;
  spec.hyper.forest = hyper;
  spec.cuts = CutPoints(Vector::Constant(1, 1.0));
  for (int i = 0; i < num_clusters; ++i) {
    ClusterInfo info;
    info.cluster_id = std::to_string(i);
    info.cluster_covariates.resize(num_cluster_covariates);
    // Spread the covariates over [-1, 1]; their values do not affect the prior.
    for (int k = 0; k < num_cluster_covariates; ++k)
      info.cluster_covariates[k] =
          num_clusters == 1 ? 0.0 : -1.0 + 2.0 * ((i * (k + 1)) % num_clusters) / (num_clusters - 1.0);
    spec.dataset.clusters.push_back(std::move(info));
  }
  ChainControls c = controls;
  c.store_record_loglik = false;
  const PosteriorChain chain = run_chain(spec, c);

  PriorCheckReport report;
  auto add_mean_check = [&](const std::string& name, const std::vector<double>& series,
                            double expected) {
    PriorCheckItem item;
    item.name = name;
    item.estimate = pairwise_sum(series) / static_cast<double>(series.size());
    item.expected = expected;
    item.standard_error = batch_means_se(series);
    item.lower = expected - 3.0 * item.standard_error;
    item.upper = expected + 3.0 * item.standard_error;
    item.pass = item.estimate >= item.lower && item.estimate <= item.upper;
    report.items.push_back(item);
  };

  std::vector<double> inv_theta_sq(static_cast<std::size_t>(chain.retained()));
  for (int m = 0; m < chain.retained(); ++m)
    inv_theta_sq[static_cast<std::size_t>(m)] = 1.0 / (chain.theta[m] * chain.theta[m]);
  add_mean_check("theta^-2 mean", inv_theta_sq, hyper.tau1 / hyper.tau2);

  const int dim = chain.coefficient_dim();
  if (dim > 0 && !hyper.c_infinite) {
    std::vector<double> precision(chain.precision.data(), chain.precision.data() + chain.retained());
    add_mean_check("c mean", precision, hyper.a_c / hyper.b_c);

    // E[beta^2 c rho(j) / (2n)] = 1 for every component.
    std::vector<double> scaled(static_cast<std::size_t>(chain.retained()));
    const int nodes = TailfreeForest::num_nodes(depth);
    for (int m = 0; m < chain.retained(); ++m) {
      double sum = 0.0;
      for (int node = 0; node < nodes; ++node) {
        const double factor =
            chain.precision[m] * rho(TailfreeForest::node_level(node)) / (2.0 * num_clusters);
        for (int k = 0; k < dim; ++k) {
          const double b = chain.coefficients(m, node * dim + k);
          sum += b * b * factor;
        }
      }
      scaled[static_cast<std::size_t>(m)] = sum / (nodes * dim);
    }
    PriorCheckItem item;
    item.name = "beta variance ratio";
    item.estimate = pairwise_sum(scaled) / static_cast<double>(scaled.size());
    item.expected = 1.0;
    item.standard_error = batch_means_se(scaled);
    item.lower = 0.9;
    item.upper = 1.1;
    item.pass = item.estimate >= item.lower && item.estimate <= item.upper;
    report.items.push_back(item);
  }
  return report;
}

}  // namespace frailty
