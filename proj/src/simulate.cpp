#include "frailty/simulate.hpp"

#include "frailty/hazard.hpp"
#include "frailty/numeric.hpp"

#include <json.hpp>

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

namespace frailty {

using nlohmann::json;

double sample_positive_stable(double alpha, Rng& rng) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("positive stable index must lie in (0, 1)");
  const double pi = std::numbers::pi;
  const double u = rng.uniform();
  const double w = rng.exponential();
  const double log_x = std::log(std::sin(alpha * pi * u)) +
                       (1.0 - alpha) / alpha * std::log(std::sin((1.0 - alpha) * pi * u)) -
                       std::log(std::sin(pi * u)) / alpha - (1.0 - alpha) / alpha * std::log(w);
  return std::exp(log_x);
}

std::string to_string(Scenario s) { return s == Scenario::I ? "I" : "II"; }

Scenario parse_scenario(const std::string& text) {
  if (text == "I" || text == "1" || text == "i") return Scenario::I;
  if (text == "II" || text == "2" || text == "ii") return Scenario::II;
  throw ConfigError("unknown scenario '" + text + "' (expected I or II)");
}

ScenarioSpec ScenarioSpec::defaults(Scenario scenario) {
  ScenarioSpec s;
  s.scenario = scenario;
  if (scenario == Scenario::I) {
    s.xi = Vector(3);
    s.xi << 1.0, 0.5, 1.0;
    s.x_lower = -3.0;
    s.x_upper = 3.0;
  } else {
    s.eta = Vector(2);
    s.eta << 1.0, 0.5;
    s.x_lower = 0.0;
    s.x_upper = 2.0;
  }
  return s;
}

void ScenarioSpec::validate() const {
  if (num_clusters < 1) throw ConfigError("num_clusters must be positive");
  if (cluster_size < 1) throw ConfigError("cluster_size must be positive");
  if (!(censor_lower > 0.0 && censor_upper > censor_lower))
    throw ConfigError("censoring law needs 0 < censor_lower < censor_upper");
  if (!(x_upper >= x_lower)) throw ConfigError("x_upper must not be below x_lower");
  if (replicates < 0) throw ConfigError("replicates must be non-negative");
  if (scenario == Scenario::I && xi.size() != 3) throw ConfigError("scenario I needs xi of length 3");
  if (scenario == Scenario::II && eta.size() != 2) throw ConfigError("scenario II needs eta of length 2");
}

std::vector<Vector> ScenarioSpec::evaluation_profiles() const {
  Vector a(3), b(3);
  if (scenario == Scenario::I) {
    a << 2.0, 1.0, -2.0;
    b << 0.0, 1.0, 2.0;
  } else {
    a << 2.0, 1.0, 0.5;
    b << 0.0, 1.0, 1.5;
  }
  return {a, b};
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ScenarioSpec scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
  const Scenario scenario =
      j.contains("scenario") ? parse_scenario(j.at("scenario").get<std::string>()) : Scenario::I;
  ScenarioSpec s = ScenarioSpec::defaults(scenario);
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const json& v = it.value();
      if (key == "scenario") continue;
      else if (key == "num_clusters") s.num_clusters = v.get<int>();
      else if (key == "cluster_size") s.cluster_size = v.get<int>();
      else if (key == "xi") s.xi = to_eigen(v.get<std::vector<double>>());
      else if (key == "eta") s.eta = to_eigen(v.get<std::vector<double>>());
      else if (key == "x_lower") s.x_lower = v.get<double>();
      else if (key == "x_upper") s.x_upper = v.get<double>();
      else if (key == "mixture_slope") s.mixture_slope = v.get<double>();
      else if (key == "alpha_intercept") s.alpha_intercept = v.get<double>();
      else if (key == "alpha_slope") s.alpha_slope = v.get<double>();
      else if (key == "censor_lower") s.censor_lower = v.get<double>();
      else if (key == "censor_upper") s.censor_upper = v.get<double>();
      else if (key == "replicates") s.replicates = v.get<int>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown scenario key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value in scenario config: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["scenario"] = to_string(s.scenario);
  j["num_clusters"] = s.num_clusters;
  j["cluster_size"] = s.cluster_size;
  if (s.xi.size() > 0) j["xi"] = to_std(s.xi);
  if (s.eta.size() > 0) j["eta"] = to_std(s.eta);
  j["x_lower"] = s.x_lower;
  j["x_upper"] = s.x_upper;
  if (s.scenario == Scenario::I) {
    j["mixture_slope"] = s.mixture_slope;
  } else {
    j["alpha_intercept"] = s.alpha_intercept;
    j["alpha_slope"] = s.alpha_slope;
  }
  j["censor_lower"] = s.censor_lower;
  j["censor_upper"] = s.censor_upper;
  j["replicates"] = s.replicates;
  j["seed"] = s.seed;
  return j.dump(2);
}

// ---------------------------------------------------------------------------

double ScenarioTruth::survival(double t, const Vector& w) const {
  if (t <= 0.0) return 1.0;
  if (spec_.scenario == Scenario::II) return std::exp(-t * std::exp(w.head(2).dot(spec_.eta)));
  // Mixture of two unit-variance normals: integrate each component over
  // +-10 standard deviations with 200-point Gauss-Legendre.
  const QuadratureRule& rule = gauss_legendre(200);
  const double lp = w.dot(spec_.xi);
  const double m = std::exp(spec_.mixture_slope * w[2]);
  double total = 0.0;
  for (double centre : {-m, m}) {
    for (Eigen::Index k = 0; k < rule.nodes.size(); ++k) {
      const double z = 10.0 * rule.nodes[k];
      total += 0.5 * 10.0 * rule.weights[k] * normal_pdf(z, 0.0, 1.0) *
               std::exp(-t * std::exp(lp + centre + z));
    }
  }
  return std::clamp(total, 0.0, 1.0);
}

double ScenarioTruth::frailty_density(double e, double x) const {
  if (spec_.scenario != Scenario::I)
    throw std::logic_error("frailty density is available for scenario I only");
  const double m = std::exp(spec_.mixture_slope * x);
  return 0.5 * normal_pdf(e, -m, 1.0) + 0.5 * normal_pdf(e, m, 1.0);
}

Vector ScenarioTruth::coefficients() const {
  return spec_.scenario == Scenario::I ? spec_.xi : Vector();
}

// ---------------------------------------------------------------------------

namespace {

Dataset empty_design(const ScenarioSpec& spec) {
  Dataset d;
  d.covariate_names = {"w1", "w2", "x"};
  d.categorical = {false, true, false};
  d.clusters.reserve(static_cast<std::size_t>(spec.num_clusters));
  d.records.reserve(static_cast<std::size_t>(spec.num_clusters) * spec.cluster_size);
  return d;
}

void add_record(Dataset& d, int cluster, double w1, double w2, double t, double c, long& censored) {
  SurvivalRecord r;
  r.cluster = cluster;
  r.subject_covariates = Vector(2);
  r.subject_covariates << w1, w2;
  r.time = std::min(t, c);
  r.event = t <= c ? 1 : 0;
  if (r.event == 0) ++censored;
  d.records.push_back(std::move(r));
}

}  // namespace

SimulatedData generate_scenario_I(const ScenarioSpec& spec, Rng& rng) {
  if (spec.scenario != Scenario::I) throw ConfigError("spec is not scenario I");
  spec.validate();
  SimulatedData out;
  out.dataset = empty_design(spec);
  out.frailties.resize(spec.num_clusters);
  long censored = 0;
  for (int i = 0; i < spec.num_clusters; ++i) {
    const double x = rng.uniform(spec.x_lower, spec.x_upper);
    const double m = std::exp(spec.mixture_slope * x);
    const double centre = rng.bernoulli(0.5) ? m : -m;
    const double e = centre + rng.normal();
    out.frailties[i] = e;
    out.dataset.clusters.push_back({std::to_string(i + 1), Vector::Constant(1, x)});
    for (int j = 0; j < spec.cluster_size; ++j) {
      const double w1 = rng.normal();
      const double w2 = rng.bernoulli(0.5) ? 1.0 : 0.0;
      const double lp = spec.xi[0] * w1 + spec.xi[1] * w2 + spec.xi[2] * x;
      const double t = rng.exponential() / std::exp(lp + e);
      const double c = rng.uniform(spec.censor_lower, spec.censor_upper);
      add_record(out.dataset, i, w1, w2, t, c, censored);
    }
  }
  out.censoring_fraction = static_cast<double>(censored) / out.dataset.num_records();
  return out;
}

SimulatedData generate_scenario_II(const ScenarioSpec& spec, Rng& rng) {
  if (spec.scenario != Scenario::II) throw ConfigError("spec is not scenario II");
  spec.validate();
  SimulatedData out;
  out.dataset = empty_design(spec);
  out.frailties.resize(spec.num_clusters);
  long censored = 0;
  for (int i = 0; i < spec.num_clusters; ++i) {
    const double x = rng.uniform(spec.x_lower, spec.x_upper);
    const double alpha = logistic(spec.alpha_intercept + spec.alpha_slope * x);
    const double stable = sample_positive_stable(alpha, rng);
    out.frailties[i] = std::log(stable);
    out.dataset.clusters.push_back({std::to_string(i + 1), Vector::Constant(1, x)});
    for (int j = 0; j < spec.cluster_size; ++j) {
      const double w1 = rng.normal();
      const double w2 = rng.bernoulli(0.5) ? 1.0 : 0.0;
      const double lp = spec.eta[0] * w1 + spec.eta[1] * w2;
      const double t = std::pow(rng.exponential() / (stable * std::exp(lp / alpha)), alpha);
      const double c = rng.uniform(spec.censor_lower, spec.censor_upper);
      add_record(out.dataset, i, w1, w2, t, c, censored);
    }
  }
  out.censoring_fraction = static_cast<double>(censored) / out.dataset.num_records();
  return out;
}

SimulatedData generate_scenario(const ScenarioSpec& spec, Rng& rng) {
  return spec.scenario == Scenario::I ? generate_scenario_I(spec, rng)
                                      : generate_scenario_II(spec, rng);
}

// ---------------------------------------------------------------------------

Vector ise_time_nodes(const std::function<double(double)>& truth, int order) {
  const QuadratureRule& rule = gauss_legendre(order);
  Vector t(order);
  for (int k = 0; k < order; ++k) {
    const double target = 1.0 - 0.5 * (rule.nodes[k] + 1.0);  // S(t) = 1 - u
    double hi = 1.0;
    int guard = 0;
    while (truth(hi) > target) {
      hi *= 2.0;
      if (++guard > 2000) throw std::runtime_error("survival function does not decay to 0");
    }
    auto f = [&](double s) { return truth(s) - target; };
    boost::uintmax_t iterations = 200;
    const auto bracket = boost::math::tools::toms748_solve(
        f, 0.0, hi, 1.0 - target, truth(hi) - target, boost::math::tools::eps_tolerance<double>(52),
        iterations);
    t[k] = 0.5 * (bracket.first + bracket.second);
  }
  return t;
}

double weighted_ise(const std::function<Vector(const Vector&)>& fitted,
                    const std::function<double(double)>& truth, int order) {
  const QuadratureRule& rule = gauss_legendre(order);
  const Vector t = ise_time_nodes(truth, order);
  const Vector s_hat = fitted(t);
  if (s_hat.size() != t.size()) throw std::invalid_argument("fitted curve has the wrong length");
  for (Eigen::Index k = 1; k < s_hat.size(); ++k)
    if (s_hat[k] > s_hat[k - 1] + 1e-12)
      throw std::invalid_argument("fitted survival curve is not monotone");
  double total = 0.0;
  for (int k = 0; k < order; ++k) {
    const double u = 0.5 * (rule.nodes[k] + 1.0);
    const double d = s_hat[k] - (1.0 - u);
    total += 0.5 * rule.weights[k] * d * d;
  }
  return total;
}

// ---------------------------------------------------------------------------

std::vector<StudyMethod> default_study_methods() {
  StudyMethod ldtfp;
  ldtfp.name = "ldtfp";
  ldtfp.frailty = FrailtyLawKind::ldtfp;
  StudyMethod gauss;
  gauss.name = "gaussian";
  gauss.frailty = FrailtyLawKind::gaussian;
  return {ldtfp, gauss};
}

namespace {

ReplicateResult fit_replicate(const ScenarioSpec& spec, const StudyMethod& method, int method_index,
                              int replicate, const StudyControls& controls) {
  ReplicateResult row;
  row.replicate = replicate;
  row.method = method.name;
  row.seed = Rng::derive_seed(Rng::derive_seed(spec.seed, 2ULL * replicate + 1),
                              static_cast<std::uint64_t>(method_index));
  try {
    Rng data_rng(Rng::derive_seed(spec.seed, 2ULL * replicate));
    const SimulatedData sim = generate_scenario(spec, data_rng);
    row.censoring_fraction = sim.censoring_fraction;

    ModelSpec model;
    model.dataset = sim.dataset;
    model.cuts = quantile_cutpoints(sim.dataset, method.num_intervals);
    model.frailty = method.frailty;
    model.depth = method.depth;
    model.hyper.forest = method.hyper;

    ChainControls chain_controls = controls.chain;
    chain_controls.seed = row.seed;
    chain_controls.store_record_loglik = false;
    const PosteriorChain chain = run_chain(model, chain_controls);

    const int p = chain.num_covariates();
    row.estimate.resize(p);
    row.sd.resize(p);
    row.lower.resize(p);
    row.upper.resize(p);
    for (int j = 0; j < p; ++j) {
      const Vector col = chain.gamma.col(chain.num_intervals() + j);
      const ParameterSummary s =
          summarize_draws("xi", std::vector<double>(col.data(), col.data() + col.size()), controls.level);
      row.estimate[j] = s.mean;
      row.sd[j] = s.sd;
      row.lower[j] = s.lower;
      row.upper[j] = s.upper;
    }

    const ScenarioTruth truth(spec);
    const auto profiles = spec.evaluation_profiles();
    row.ise.resize(static_cast<Eigen::Index>(profiles.size()));
    PredictiveOptions options;
    options.max_draws = controls.ise_draws;
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      const Vector& w = profiles[k];
      row.ise[static_cast<Eigen::Index>(k)] = weighted_ise(
          [&](const Vector& t) { return predictive_survival(chain, w, t, options).mean; },
          [&](double t) { return truth.survival(t, w); });
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace

std::vector<MethodAggregate> aggregate_study(const std::vector<ReplicateResult>& rows,
                                             const std::vector<StudyMethod>& methods,
                                             const Vector& truth, int num_profiles) {
  std::vector<MethodAggregate> out;
  for (const auto& method : methods) {
    MethodAggregate agg;
    agg.method = method.name;
    std::vector<const ReplicateResult*> ok;
    for (const auto& r : rows) {
      if (r.method != method.name) continue;
      if (r.failed) ++agg.failed;
      else ok.push_back(&r);
    }
    agg.succeeded = static_cast<int>(ok.size());
    const Eigen::Index p = ok.empty() ? truth.size() : ok.front()->estimate.size();
    agg.truth = truth.size() == p ? truth : Vector::Constant(p, std::nan(""));
    agg.bias.resize(p);
    agg.mean_sd.resize(p);
    agg.sd_mean.resize(p);
    agg.coverage.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      std::vector<double> est, sds;
      double covered = 0.0;
      for (const auto* r : ok) {
        est.push_back(r->estimate[j]);
        sds.push_back(r->sd[j]);
        if (r->lower[j] <= agg.truth[j] && agg.truth[j] <= r->upper[j]) covered += 1.0;
      }
      const double m = mean_of(est);
      agg.bias[j] = m - agg.truth[j];
      agg.mean_sd[j] = mean_of(sds);
      agg.sd_mean[j] = ok.empty() ? std::nan("") : sample_sd(est, m);
      agg.coverage[j] = ok.empty() || std::isnan(agg.truth[j]) ? std::nan("") : covered / ok.size();
    }
    agg.ise_mean.resize(num_profiles);
    agg.ise_sd.resize(num_profiles);
    for (int k = 0; k < num_profiles; ++k) {
      std::vector<double> v;
      for (const auto* r : ok) v.push_back(r->ise[k]);
      agg.ise_mean[k] = mean_of(v);
      agg.ise_sd[k] = ok.empty() ? std::nan("") : sample_sd(v, agg.ise_mean[k]);
    }
    out.push_back(std::move(agg));
  }
  return out;
}

StudyResult run_study(const ScenarioSpec& spec, const std::vector<StudyMethod>& methods,
                      const StudyControls& controls) {
  spec.validate();
  controls.chain.validate();
  StudyResult result;
  result.spec = spec;
  result.profiles = spec.evaluation_profiles();
  const int tasks = spec.replicates * static_cast<int>(methods.size());
  result.replicates.resize(static_cast<std::size_t>(tasks));

  // Task k = (replicate k / M, method k % M); each writes its own slot.
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int k = next.fetch_add(1); k < tasks; k = next.fetch_add(1)) {
      const int method = k % static_cast<int>(methods.size());
      result.replicates[static_cast<std::size_t>(k)] =
          fit_replicate(spec, methods[static_cast<std::size_t>(method)], method,
                        k / static_cast<int>(methods.size()), controls);
    }
  };
  const int jobs = std::max(1, std::min(controls.jobs, std::max(1, tasks)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  const ScenarioTruth truth(spec);
  result.aggregates = aggregate_study(result.replicates, methods, truth.coefficients(),
                                      static_cast<int>(result.profiles.size()));
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string profile_label(const Vector& w) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index k = 0; k < w.size(); ++k) os << (k ? " " : "") << w[k];
  os << ")";
  return os.str();
}

const char* kCoefficientNames[] = {"xi_w1", "xi_w2", "xi_x"};

}  // namespace

std::string format_replicates(const StudyResult& result, char d) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "replicate" << d << "method" << d << "seed" << d << "status" << d << "censoring";
  for (const char* name : kCoefficientNames)
    os << d << name << "_mean" << d << name << "_sd" << d << name << "_lower" << d << name << "_upper";
  for (std::size_t k = 0; k < result.profiles.size(); ++k) os << d << "ise_profile" << k + 1;
  os << '\n';
  for (const auto& r : result.replicates) {
    os << r.replicate << d << r.method << d << r.seed << d << (r.failed ? "failed" : "ok") << d
       << r.censoring_fraction;
    for (int j = 0; j < 3; ++j) {
      if (r.failed || j >= r.estimate.size()) os << d << d << d << d;
      else os << d << r.estimate[j] << d << r.sd[j] << d << r.lower[j] << d << r.upper[j];
    }
    for (std::size_t k = 0; k < result.profiles.size(); ++k) {
      os << d;
      if (!r.failed) os << r.ise[static_cast<Eigen::Index>(k)];
    }
    os << '\n';
  }
  return os.str();
}

std::string format_coefficient_table(const StudyResult& result, char d) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "parameter" << d << "true";
  for (const auto& a : result.aggregates)
    os << d << a.method << "_bias" << d << a.method << "_mean_sd" << d << a.method << "_sd_mean" << d
       << a.method << "_cp";
  os << '\n';
  const Eigen::Index p = result.aggregates.empty() || result.replicates.empty()
                             ? 0
                             : result.aggregates.front().bias.size();
  for (Eigen::Index j = 0; j < p; ++j) {
    os << (j < 3 ? kCoefficientNames[j] : "xi") << d << result.aggregates.front().truth[j];
    for (const auto& a : result.aggregates)
      os << d << a.bias[j] << d << a.mean_sd[j] << d << a.sd_mean[j] << d << a.coverage[j];
    os << '\n';
  }
  return os.str();
}

std::string format_ise_table(const StudyResult& result, char d) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "profile";
  for (const auto& a : result.aggregates) os << d << a.method << "_ise_x1000";
  os << '\n';
  if (result.replicates.empty()) return os.str();
  for (std::size_t k = 0; k < result.profiles.size(); ++k) {
    os << profile_label(result.profiles[k]);
    for (const auto& a : result.aggregates)
      os << d << 1e3 * a.ise_mean[static_cast<Eigen::Index>(k)] << " ("
         << 1e3 * a.ise_sd[static_cast<Eigen::Index>(k)] << ")";
    os << '\n';
  }
  return os.str();
}

std::string study_to_json(const StudyResult& result) {
  json j;
  j["scenario"] = json::parse(scenario_to_json(result.spec));
  json profiles = json::array();
  for (const auto& w : result.profiles) profiles.push_back(to_std(w));
  j["profiles"] = profiles;
  json methods = json::array();
  for (const auto& a : result.aggregates) {
    json m;
    m["method"] = a.method;
    m["succeeded"] = a.succeeded;
    m["failed"] = a.failed;
    m["truth"] = to_std(a.truth);
    m["bias"] = to_std(a.bias);
    m["mean_sd"] = to_std(a.mean_sd);
    m["sd_mean"] = to_std(a.sd_mean);
    m["coverage"] = to_std(a.coverage);
    m["ise_mean"] = to_std(a.ise_mean);
    m["ise_sd"] = to_std(a.ise_sd);
    methods.push_back(m);
  }
  j["methods"] = methods;
  return j.dump(2);
}

}  // namespace frailty
