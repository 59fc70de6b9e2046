#include "frailty/simulate.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace frailty;

namespace {

struct LaplaceCheck {
  double estimate;
  double standard_error;
};

LaplaceCheck laplace(double alpha, double s, int n, std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = std::exp(-s * sample_positive_stable(alpha, rng));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  return {mean, std::sqrt((sum_sq / n - mean * mean) / n)};
}

}  // namespace

TEST_CASE("positive stable Laplace transform") {
  const LaplaceCheck a = laplace(0.5, 1.0, 100000, 1);
  CHECK(std::abs(a.estimate - std::exp(-1.0)) < 3 * a.standard_error);
  const LaplaceCheck b = laplace(0.3, 2.0, 100000, 2);
  CHECK(std::abs(b.estimate - std::exp(-std::pow(2.0, 0.3))) < 3 * b.standard_error);
  Rng rng(3);
  CHECK_THROWS(sample_positive_stable(1.0, rng));
  CHECK_THROWS(sample_positive_stable(0.0, rng));
}

TEST_CASE("positive stable concentrates near one as alpha approaches one") {
  Rng rng(4);
  std::vector<double> v(20001);
  for (auto& x : v) x = sample_positive_stable(0.99, rng);
  std::nth_element(v.begin(), v.begin() + 10000, v.end());
  CHECK(v[10000] > 0.5);
  CHECK(v[10000] < 2.0);
}

TEST_CASE("scenario defaults and validation") {
  const ScenarioSpec one = ScenarioSpec::defaults(Scenario::I);
  CHECK(one.num_clusters == 100);
  CHECK(one.cluster_size == 10);
  CHECK(one.xi[0] == 1.0);
  CHECK(one.xi[1] == 0.5);
  CHECK(one.xi[2] == 1.0);
  CHECK(one.x_lower == -3.0);
  CHECK(one.censor_lower == 0.25);
  CHECK(one.censor_upper == 4.0);
  const ScenarioSpec two = ScenarioSpec::defaults(Scenario::II);
  CHECK(two.eta[0] == 1.0);
  CHECK(two.eta[1] == 0.5);
  CHECK(two.x_lower == 0.0);
  CHECK(two.x_upper == 2.0);
  CHECK(two.evaluation_profiles()[1] == (Vector(3) << 0.0, 1.0, 1.5).finished());
  ScenarioSpec bad = one;
  bad.censor_upper = 0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("scenario JSON round trip and unknown keys") {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::II);
  s.num_clusters = 33;
  s.alpha_slope = 0.7;
  const ScenarioSpec back = scenario_from_json(scenario_to_json(s));
  CHECK(back.scenario == Scenario::II);
  CHECK(back.num_clusters == 33);
  CHECK(back.alpha_slope == 0.7);
  CHECK(back.eta == s.eta);
  CHECK_THROWS_AS(scenario_from_json(R"({"scenario": "I", "clusterz": 4})"), ConfigError);
  CHECK_THROWS_AS(scenario_from_json("not json"), ConfigError);
}

TEST_CASE("scenario I frailties at x = 0 have the mixture moments") {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::I);
  s.num_clusters = 20000;
  s.cluster_size = 1;
  s.x_lower = s.x_upper = 0.0;
  Rng rng(5);
  const Vector e = generate_scenario_I(s, rng).frailties;
  const double n = static_cast<double>(e.size());
  const double mean = e.mean();
  const double var = (e.array() - mean).square().sum() / (n - 1);
  // 0.5 N(-1, 1) + 0.5 N(1, 1): variance 1 + e^{0.8 x} = 2, fourth central moment 3 + 6 + 1 = 10.
  CHECK(std::abs(mean) < 3 * std::sqrt(2.0 / n));
  CHECK(std::abs(var - 2.0) < 3 * std::sqrt((10.0 - 4.0) / n));
}

namespace {

/// E exp(-a C) for C ~ U(0.25, 4).
double censor_survival(double a) {
  if (a < 1e-300) return 1.0;
  return std::exp(-0.25 * a) * -std::expm1(-3.75 * a) / (3.75 * a);
}

/// Exact censoring probability P(C < T) = E S(C | w, e).
double exact_censoring(Scenario scenario) {
  double total = 0.0;
  for (double w2 : {0.0, 1.0}) {
    if (scenario == Scenario::II) {
      total += 0.5 * oracle::integrate_real_line(
                         [&](double w1) { return oracle::normal_pdf(w1) * censor_survival(std::exp(w1 + 0.5 * w2)); },
                         {0.0});
      continue;
    }
    // w1 + e given x is 0.5 N(-m, 2) + 0.5 N(m, 2) with m = exp(0.4 x).
    total += 0.5 * oracle::integrate(
                       [&](double x) {
                         const double m = std::exp(0.4 * x);
                         return oracle::integrate_real_line(
                                    [&](double z) {
                                      const double g = 0.5 * oracle::normal_pdf(z - m, 2.0) +
                                                       0.5 * oracle::normal_pdf(z + m, 2.0);
                                      return g * censor_survival(std::exp(z + 0.5 * w2 + x));
                                    },
                                    {-m, m}) /
                                6.0;
                       },
                       -3.0, 3.0, 1e-10);
  }
  return total;
}

struct CensoringRun {
  double mean;
  double standard_error;
};

CensoringRun censoring_over_replicates(Scenario scenario, int replicates) {
  const ScenarioSpec s = ScenarioSpec::defaults(scenario);
  Rng rng(6);
  std::vector<double> f;
  for (int r = 0; r < replicates; ++r) f.push_back(generate_scenario(s, rng).censoring_fraction);
  double mean = 0.0, ss = 0.0;
  for (double v : f) mean += v / replicates;
  for (double v : f) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (replicates - 1) / replicates)};
}

}  // namespace

TEST_CASE("censoring fractions match their exact values") {
  for (Scenario scenario : {Scenario::I, Scenario::II}) {
    const CensoringRun run = censoring_over_replicates(scenario, 200);
    const double exact = exact_censoring(scenario);
    INFO("scenario " << to_string(scenario) << " empirical " << run.mean << " exact " << exact);
    CHECK(std::abs(run.mean - exact) < 3.0 * run.standard_error);
  }
}

TEST_CASE("scenario I censoring is about 35 percent") {
  CHECK(std::abs(censoring_over_replicates(Scenario::I, 200).mean - 0.35) < 0.03);
}

// The stated scenario II design censors about 21.3% (exact value above), so
// the nominal 25% +- 3% cannot be met; this case documents the gap.
TEST_CASE("scenario II censoring is about 25 percent" * doctest::should_fail()) {
  CHECK(std::abs(censoring_over_replicates(Scenario::II, 200).mean - 0.25) < 0.03);
}

TEST_CASE("generators are deterministic and well formed") {
  for (Scenario sc : {Scenario::I, Scenario::II}) {
    ScenarioSpec s = ScenarioSpec::defaults(sc);
    s.num_clusters = 15;
    Rng a(9), b(9);
    const SimulatedData da = generate_scenario(s, a);
    const SimulatedData db = generate_scenario(s, b);
    REQUIRE(da.dataset.num_records() == 150);
    CHECK(da.dataset.num_clusters() == 15);
    CHECK(da.dataset.covariate_names == std::vector<std::string>{"w1", "w2", "x"});
    CHECK(da.dataset.categorical[1]);
    for (int r = 0; r < 150; ++r) {
      CHECK(da.dataset.records[r].time == db.dataset.records[r].time);
      CHECK(da.dataset.records[r].time > 0.0);
      CHECK(da.dataset.records[r].time <= 4.0);
    }
    CHECK(da.frailties == db.frailties);
    const double x = da.dataset.clusters[0].cluster_covariates[0];
    CHECK(x >= s.x_lower);
    CHECK(x <= s.x_upper);
  }
}

TEST_CASE("scenario I truth survival against adaptive quadrature") {
  const ScenarioTruth truth(ScenarioSpec::defaults(Scenario::I));
  const Vector w = (Vector(3) << 0.0, 1.0, 2.0).finished();
  const double m = std::exp(0.4 * 2.0);
  for (double t : {0.05, 0.3, 1.0, 3.0}) {
    const double exact = oracle::integrate_real_line(
        [&](double e) {
          const double g = 0.5 * oracle::normal_pdf(e + m) + 0.5 * oracle::normal_pdf(e - m);
          return std::exp(-t * std::exp(0.5 + 2.0 + e)) * g;
        },
        {-m, m});
    CHECK(std::abs(truth.survival(t, w) - exact) < 1e-8);
  }
  CHECK(truth.frailty_density(0.3, 0.0) ==
        doctest::Approx(0.5 * oracle::normal_pdf(1.3) + 0.5 * oracle::normal_pdf(-0.7)).epsilon(1e-14));
  CHECK(truth.coefficients().size() == 3);
}

TEST_CASE("scenario II marginal truth and its Kaplan-Meier check") {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::II);
  const ScenarioTruth truth(s);
  const Vector w = (Vector(3) << 0.4, 1.0, 1.0).finished();
  CHECK(truth.survival(0.7, w) == doctest::Approx(std::exp(-0.7 * std::exp(0.4 + 0.5))).epsilon(1e-14));
  CHECK(truth.coefficients().size() == 0);

  // With eta = 0 every subject has marginal survival exp(-t).
  s.eta = Vector::Zero(2);
  s.num_clusters = 4000;
  s.cluster_size = 1;
  Rng rng(10);
  const Dataset d = generate_scenario_II(s, rng).dataset;
  std::vector<std::pair<double, int>> obs;
  for (const auto& r : d.records) obs.emplace_back(r.time, r.event);
  const Vector at = Vector::LinSpaced(8, 0.2, 2.0);
  const auto km = oracle::kaplan_meier(obs, at);
  for (Eigen::Index k = 0; k < at.size(); ++k)
    CHECK(std::abs(km.survival[k] - std::exp(-at[k])) < 3.0 * km.standard_error[k]);
}

TEST_CASE("weighted ISE") {
  auto s = [](double t) { return std::exp(-t); };
  auto exact_fit = [&](const Vector& g) { return Vector(g.unaryExpr(s)); };
  auto squared = [&](const Vector& g) { return Vector(g.unaryExpr([&](double t) { return s(t) * s(t); })); };
  CHECK(weighted_ise(exact_fit, s) < 1e-20);
  // int (e^{-2t} - e^{-t})^2 e^{-t} dt = 1/5 - 2/4 + 1/3.
  CHECK(std::abs(weighted_ise(squared, s) - 1.0 / 30.0) < 1e-10);
  auto bumpy = [&](const Vector& g) {
    Vector v = g.unaryExpr(s);
    v[v.size() / 2] = 1.0;
    return v;
  };
  CHECK_THROWS(weighted_ise(bumpy, s));
  const Vector nodes = ise_time_nodes(s, 10);
  for (Eigen::Index k = 1; k < nodes.size(); ++k) CHECK(nodes[k] > nodes[k - 1]);
}

TEST_CASE("study with zero replicates is empty") {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::I);
  s.replicates = 0;
  StudyControls c;
  const StudyResult r = run_study(s, default_study_methods(), c);
  CHECK(r.replicates.empty());
  CHECK(format_replicates(r).find('\n') == format_replicates(r).size() - 1);
  CHECK(format_ise_table(r).find('\n') == format_ise_table(r).size() - 1);
}

TEST_CASE("study results do not depend on the number of workers") {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::I);
  s.num_clusters = 12;
  s.cluster_size = 5;
  s.replicates = 2;
  s.seed = 8;
  StudyControls c;
  c.chain.iterations = 500;
  c.chain.burn_in = 200;
  c.chain.thin = 3;
  c.ise_draws = 20;
  c.jobs = 1;
  const StudyResult one = run_study(s, default_study_methods(), c);
  c.jobs = 3;
  const StudyResult three = run_study(s, default_study_methods(), c);
  CHECK(format_replicates(one) == format_replicates(three));
  CHECK(study_to_json(one) == study_to_json(three));
  REQUIRE(one.replicates.size() == 4);
  CHECK(one.replicates[0].method == "ldtfp");
  CHECK(one.replicates[1].method == "gaussian");
  for (const auto& r : one.replicates) {
    CHECK_FALSE(r.failed);
    CHECK(r.ise.size() == 2);
    CHECK(r.lower[0] <= r.upper[0]);
  }
  CHECK(one.aggregates.size() == 2);
  CHECK(one.aggregates[0].succeeded == 2);
}

TEST_CASE("aggregation of replicate rows") {
  std::vector<ReplicateResult> rows(3);
  for (int r = 0; r < 3; ++r) {
    rows[r].replicate = r;
    rows[r].method = "ldtfp";
    rows[r].estimate = Vector::Constant(1, 1.0 + 0.1 * (r - 1));
    rows[r].sd = Vector::Constant(1, 0.2);
    rows[r].lower = Vector::Constant(1, 0.9 + 0.05 * r);
    rows[r].upper = Vector::Constant(1, 1.2);
    rows[r].ise = Vector::Constant(1, 0.001 * (r + 1));
  }
  rows[2].failed = true;
  StudyMethod m;
  m.name = "ldtfp";
  const auto agg = aggregate_study(rows, {m}, Vector::Constant(1, 1.0), 1);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].succeeded == 2);
  CHECK(agg[0].failed == 1);
  CHECK(agg[0].bias[0] == doctest::Approx(-0.05));
  CHECK(agg[0].mean_sd[0] == doctest::Approx(0.2));
  CHECK(agg[0].sd_mean[0] == doctest::Approx(std::sqrt(0.005)));
  CHECK(agg[0].coverage[0] == 1.0);
  CHECK(agg[0].ise_mean[0] == doctest::Approx(0.0015));
}
