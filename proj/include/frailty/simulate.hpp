#pragma once

#include "frailty/common.hpp"
#include "frailty/data.hpp"
#include "frailty/inference.hpp"
#include "frailty/ldtfp.hpp"
#include "frailty/sampler.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace frailty {

/// Positive stable PS(alpha) draw with Laplace transform exp(-s^alpha)
/// (Kanter / Chambers-Mallows-Stuck representation).
double sample_positive_stable(double alpha, Rng& rng);

enum class Scenario { I, II };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& text);

/// Declarative simulation design. Scenario I: e_i | x_i ~ 0.5 N(-exp(m x_i), 1)
/// + 0.5 N(exp(m x_i), 1) with m = mixture_slope, PH with lambda_0 = 1 and
/// coefficients `xi`. Scenario II: exp(e_i) ~ PS(alpha_i) with
/// alpha_i = 1 / (1 + exp(-a0 - a1 x_i)), marginal survival exp(-t exp(w~'eta)).
struct ScenarioSpec {
  Scenario scenario = Scenario::I;
  int num_clusters = 100;
  int cluster_size = 10;
  Vector xi;   // (w1, w2, x) effects, scenario I
  Vector eta;  // (w1, w2) effects, scenario II
  double x_lower = -3.0;
  double x_upper = 3.0;
  double mixture_slope = 0.4;
  double alpha_intercept = 0.5;
  double alpha_slope = 0.5;
  double censor_lower = 0.25;
  double censor_upper = 4.0;
  int replicates = 20;
  std::uint64_t seed = 1;

  static ScenarioSpec defaults(Scenario scenario);
  void validate() const;
  /// Covariate profiles (w1, w2, x) at which ISE is scored.
  std::vector<Vector> evaluation_profiles() const;
};

/// Loads a scenario from JSON; keys mirror the field names. Missing keys keep
/// the scenario defaults.
ScenarioSpec scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioSpec& spec);

/// Exact data-generating law of a scenario for a full covariate vector
/// w = (w1, w2, x).
class ScenarioTruth {
 public:
  explicit ScenarioTruth(const ScenarioSpec& spec) : spec_(spec) {}

  double survival(double t, const Vector& w) const;
  /// Frailty density of e given x (scenario I only).
  double frailty_density(double e, double x) const;
  /// Regression coefficients with a PH interpretation (scenario I only;
  /// empty for scenario II).
  Vector coefficients() const;

 private:
  ScenarioSpec spec_;
};

struct SimulatedData {
  Dataset dataset;
  Vector frailties;  // e_i (log of the PS draw in scenario II)
  double censoring_fraction = 0.0;
};

SimulatedData generate_scenario_I(const ScenarioSpec& spec, Rng& rng);
SimulatedData generate_scenario_II(const ScenarioSpec& spec, Rng& rng);
SimulatedData generate_scenario(const ScenarioSpec& spec, Rng& rng);

/// int_0^inf (S_hat(t) - S(t))^2 f_T(t) dt via u = 1 - S(t):
/// int_0^1 (S_hat(t(u)) - (1 - u))^2 du with 200-point Gauss-Legendre in u.
/// `fitted` maps an increasing time grid to survival values and must be
/// nonincreasing; `truth` must be continuous and decreasing from 1 to 0.
double weighted_ise(const std::function<Vector(const Vector&)>& fitted,
                    const std::function<double(double)>& truth, int order = 200);

/// Time points t(u_k) at the quadrature nodes for a given truth.
Vector ise_time_nodes(const std::function<double(double)>& truth, int order = 200);

struct StudyMethod {
  std::string name;
  FrailtyLawKind frailty = FrailtyLawKind::ldtfp;
  int depth = 4;
  int num_intervals = 10;
  ForestHyper hyper;
};

/// The two methods compared in the study: LDTFP and the Gaussian variant.
std::vector<StudyMethod> default_study_methods();

struct StudyControls {
  ChainControls chain;
  int jobs = 1;
  /// Draws used for the predictive survival curves inside the ISE.
  int ise_draws = 250;
  double level = 0.95;
};

struct ReplicateResult {
  int replicate = 0;
  std::string method;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double censoring_fraction = 0.0;
  Vector estimate;  // posterior means of xi
  Vector sd;        // posterior standard deviations
  Vector lower;
  Vector upper;
  Vector ise;  // one per evaluation profile
};

struct MethodAggregate {
  std::string method;
  int succeeded = 0;
  int failed = 0;
  Vector truth;
  Vector bias;
  Vector mean_sd;
  Vector sd_mean;
  Vector coverage;
  Vector ise_mean;
  Vector ise_sd;
};

struct StudyResult {
  ScenarioSpec spec;
  std::vector<Vector> profiles;
  std::vector<ReplicateResult> replicates;  // sorted by (replicate, method order)
  std::vector<MethodAggregate> aggregates;
};

/// Replicate r uses data seed derive_seed(spec.seed, 2r) and chain seed
/// derive_seed(spec.seed, 2r + 1), so results do not depend on `jobs`.
StudyResult run_study(const ScenarioSpec& spec, const std::vector<StudyMethod>& methods,
                      const StudyControls& controls);

std::vector<MethodAggregate> aggregate_study(const std::vector<ReplicateResult>& rows,
                                             const std::vector<StudyMethod>& methods,
                                             const Vector& truth, int num_profiles);

/// Per-replicate table (one row per replicate and method).
std::string format_replicates(const StudyResult& result, char delimiter = ',');
/// Coefficient table: parameter, true value, then BIAS / MEAN-SD / SD-MEAN / CP per method.
std::string format_coefficient_table(const StudyResult& result, char delimiter = ',');
/// ISE table: profile, then mean (sd) x 10^3 per method.
std::string format_ise_table(const StudyResult& result, char delimiter = ',');
std::string study_to_json(const StudyResult& result);

}  // namespace frailty
