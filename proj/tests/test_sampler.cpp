#include "frailty/numeric.hpp"
#include "frailty/sampler.hpp"
#include "frailty/simulate.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace frailty;

namespace {

ModelSpec scenario_spec(FrailtyLawKind kind, int clusters = 20, std::uint64_t seed = 3) {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::I);
  s.num_clusters = clusters;
  s.cluster_size = 8;
  Rng rng(seed);
  ModelSpec spec;
  spec.dataset = generate_scenario(s, rng).dataset;
  spec.cuts = quantile_cutpoints(spec.dataset, 5);
  spec.frailty = kind;
  spec.depth = 3;
  return spec;
}

ChainControls short_controls(long iterations = 1200, long burn_in = 400, long thin = 4) {
  ChainControls c;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.thin = thin;
  c.seed = 21;
  return c;
}

/// Posterior mean of a scalar with log density `logp` by a fine grid.
double grid_mean(const std::function<double(double)>& logp, double lo, double hi) {
  const int n = 40000;
  double peak = -INFINITY;
  std::vector<double> v(n + 1);
  for (int k = 0; k <= n; ++k) peak = std::max(peak, v[k] = logp(lo + (hi - lo) * k / n));
  double z = 0.0, m = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = std::exp(v[k] - peak) * (k == 0 || k == n ? 0.5 : 1.0);
    z += w;
    m += w * (lo + (hi - lo) * k / n);
  }
  return m / z;
}

double series_mean(const Vector& v) { return v.mean(); }

double series_se(const Vector& v) {
  return batch_means_se(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace

TEST_CASE("chain controls and model validation") {
  ChainControls c = short_controls();
  CHECK(c.retained() == 200);
  c.iterations = 100;
  c.burn_in = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = short_controls();
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  ModelSpec spec = scenario_spec(FrailtyLawKind::ldtfp);
  spec.hyper.gamma_mean = Vector::Zero(2);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = scenario_spec(FrailtyLawKind::ldtfp);
  spec.hyper.forest.tau1 = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("retained draws, seed determinism and adaptation freeze") {
  const ModelSpec spec = scenario_spec(FrailtyLawKind::ldtfp);
  const PosteriorChain a = run_chain(spec, short_controls());
  const PosteriorChain b = run_chain(spec, short_controls());
  CHECK(a.retained() == 200);
  CHECK(a.record_loglik.rows() == 200);
  CHECK(a.record_loglik.cols() == spec.dataset.num_records());
  CHECK(a.gamma == b.gamma);
  CHECK(a.frailties == b.frailties);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.theta == b.theta);
  CHECK(a.precision == b.precision);
  CHECK(a.record_loglik == b.record_loglik);
  CHECK(a.adaptation_at_burn_in == a.adaptation_at_end);

  ChainControls other = short_controls();
  other.seed = 22;
  CHECK(run_chain(spec, other).gamma != a.gamma);
}

TEST_CASE("stored per-observation log-likelihood matches fresh evaluation") {
  const ModelSpec spec = scenario_spec(FrailtyLawKind::ldtfp);
  const PosteriorChain chain = run_chain(spec, short_controls());
  Rng pick(4);
  for (int k = 0; k < 5; ++k) {
    const int m = static_cast<int>(pick.uniform() * chain.retained());
    const Vector g = chain.gamma.row(m).transpose();
    const Vector e = chain.frailties.row(m).transpose();
    const double direct = oracle::ph_loglik(spec.dataset, spec.cuts.points(), g, e);
    CHECK(std::abs(chain.record_loglik.row(m).sum() - direct) < 1e-9);
    CHECK(std::abs(chain.loglik[m] - direct) < 1e-9);
    const PhLikelihood fresh(spec.dataset, spec.cuts);
    const Vector rec = fresh.record_loglik(g, e);
    CHECK((chain.record_loglik.row(m).transpose() - rec).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("gamma acceptance lands in the usual range after burn-in") {
  const ModelSpec spec = scenario_spec(FrailtyLawKind::gaussian, 30);
  const PosteriorChain chain = run_chain(spec, short_controls(6000, 3000, 5));
  CHECK(chain.acceptance.gamma > 0.15);
  CHECK(chain.acceptance.gamma < 0.40);
  CHECK(chain.acceptance.frailties > 0.2);
  CHECK(chain.acceptance.frailties < 0.7);
}

TEST_CASE("frailty proposal scale zero keeps every frailty fixed") {
  const ModelSpec spec = scenario_spec(FrailtyLawKind::ldtfp);
  ChainControls c = short_controls();
  c.frailty_proposal_scale = 0.0;
  const PosteriorChain chain = run_chain(spec, c);
  CHECK(chain.frailties.isZero(0.0));
  CHECK(chain.acceptance.frailties == 1.0);
}

TEST_CASE("degenerate gamma prior pins gamma") {
  ModelSpec spec = scenario_spec(FrailtyLawKind::gaussian);
  const int d = spec.num_gamma();
  spec.hyper.gamma_mean = Vector::LinSpaced(d, -1.0, 1.0);
  spec.hyper.gamma_covariance = 1e-12 * Matrix::Identity(d, d);
  const PosteriorChain chain = run_chain(spec, short_controls());
  for (int m = 0; m < chain.retained(); ++m)
    CHECK((chain.gamma.row(m).transpose() - spec.hyper.gamma_mean).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("single-parameter posterior mean against quadrature") {
  Dataset d;
  d.clusters.push_back({"1", Vector(0)});
  const double times[] = {0.3, 1.1, 0.7, 2.4, 0.2, 1.6, 0.9, 3.0};
  const int events[] = {1, 1, 0, 1, 1, 0, 1, 1};
  for (int k = 0; k < 8; ++k) d.records.push_back({times[k], events[k], Vector(0), 0});
  ModelSpec spec;
  spec.dataset = d;
  spec.cuts = CutPoints(Vector::Constant(1, 3.0));
  spec.frailty = FrailtyLawKind::gaussian;
  spec.hyper.gamma_mean = Vector::Constant(1, 0.5);
  spec.hyper.gamma_covariance = Matrix::Constant(1, 1, 0.4);
  ChainControls c = short_controls(42000, 2000, 1);
  const PosteriorChain chain = run_chain(spec, c, UpdateMask{true, false, false, false, false});

  double sum_t = 0.0;
  for (double t : times) sum_t += t;
  const double truth = grid_mean(
      [&](double g) { return 6.0 * g - std::exp(g) * sum_t - 0.5 * (g - 0.5) * (g - 0.5) / 0.4; }, -6, 4);
  const Vector draws = chain.gamma.col(0);
  CHECK(std::abs(series_mean(draws) - truth) < 3 * series_se(draws));
}

TEST_CASE("censored heavy-exposure cluster pulls its frailty negative") {
  Dataset d;
  d.clusters.push_back({"1", Vector(0)});
  for (int k = 0; k < 5; ++k) d.records.push_back({10.0, 0, Vector(0), 0});
  ModelSpec spec;
  spec.dataset = d;
  spec.cuts = CutPoints(Vector::Constant(1, 10.0));
  spec.frailty = FrailtyLawKind::gaussian;
  spec.hyper.gamma_mean = Vector::Zero(1);
  spec.hyper.gamma_covariance = 1e-14 * Matrix::Identity(1, 1);
  ChainControls c = short_controls(42000, 2000, 1);
  const PosteriorChain chain = run_chain(spec, c, UpdateMask{false, true, false, false, false});
  const double theta = chain.theta[0];
  const double truth = grid_mean(
      [&](double e) { return -50.0 * std::exp(e) - 0.5 * e * e / theta; }, -12, 6);
  const Vector draws = chain.frailties.col(0);
  CHECK(truth < -1.0);
  CHECK(series_mean(draws) < 0.0);
  CHECK(std::abs(series_mean(draws) - truth) < 3 * series_se(draws));
}

TEST_CASE("gaussian law reduces the frailty target to the normal density") {
  const ModelSpec spec = scenario_spec(FrailtyLawKind::gaussian);
  Sampler s(spec, 5);
  const double theta = s.forest().theta();
  for (double e : {-1.2, 0.0, 0.9})
    CHECK(s.log_frailty_density(3, e) == doctest::Approx(std::log(oracle::normal_pdf(e, theta))).epsilon(1e-13));
}

TEST_CASE("sampler state setters and likelihood") {
  const ModelSpec spec = scenario_spec(FrailtyLawKind::ldtfp);
  Sampler s(spec, 7);
  Vector e = Vector::LinSpaced(spec.dataset.num_clusters(), -1.0, 1.0);
  s.set_frailties(e);
  const double direct = oracle::ph_loglik(spec.dataset, spec.cuts.points(), s.gamma(), e);
  CHECK(s.loglik() == doctest::Approx(direct).epsilon(1e-12));
  s.sweep();
  CHECK(s.iteration() == 1);
  CHECK(std::isfinite(s.loglik()));
}

TEST_CASE("non-finite start is reported as an initialization error") {
  ModelSpec spec = scenario_spec(FrailtyLawKind::gaussian);
  for (auto& r : spec.dataset.records) r.subject_covariates[0] = 1e300;
  const int d = spec.num_gamma();
  spec.hyper.gamma_mean = Vector::Ones(d);
  spec.hyper.gamma_covariance = 1e-12 * Matrix::Identity(d, d);
  try {
    run_chain(spec, short_controls());
    FAIL("expected SamplerError");
  } catch (const SamplerError& e) {
    CHECK(e.iteration == -1);
    CHECK(std::string(e.what()).find("standardiz") != std::string::npos);
  }
}

TEST_CASE("degenerate precision prior fixes every coefficient at zero") {
  ModelSpec spec = scenario_spec(FrailtyLawKind::ldtfp);
  spec.hyper.forest.c_infinite = true;
  const PosteriorChain chain = run_chain(spec, short_controls());
  CHECK(chain.coefficients.isZero(0.0));
}

TEST_CASE("design expansion feeds the node regressions") {
  ModelSpec spec = scenario_spec(FrailtyLawKind::ldtfp);
  spec.frailty_design = [](const Vector& x) {
    Vector out(2);
    out << x[0], x[0] * x[0];
    return out;
  };
  CHECK(spec.forest_covariates().cols() == 2);
  const PosteriorChain chain = run_chain(spec, short_controls(600, 200, 4));
  CHECK(chain.coefficient_dim() == 3);
  Vector x(1);
  x << 1.5;
  CHECK(chain.forest_input(x)[1] == 2.25);
}

TEST_CASE("prior replication at small scale") {
  ChainControls c;
  c.iterations = 22000;
  c.burn_in = 2000;
  c.thin = 1;
  c.seed = 5;
  const PriorCheckReport r = prior_replication_check(FrailtyLawKind::ldtfp, 3, ForestHyper{}, LevelWeight{},
                                                     10, 1, c);
  for (const auto& item : r.items) {
    INFO(item.name << " estimate " << item.estimate << " expected " << item.expected);
    CHECK(item.pass);
  }
  CHECK(r.pass());
}
