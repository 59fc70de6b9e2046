#include "frailty/cli.hpp"

#include "frailty/chain_io.hpp"
#include "frailty/data.hpp"
#include "frailty/hazard.hpp"
#include "frailty/inference.hpp"
#include "frailty/numeric.hpp"
#include "frailty/sampler.hpp"
#include "frailty/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

namespace frailty {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "frailtyph 1.0.0";

int default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct DataOptions {
  std::string data;
  std::string clusters;
  std::string time = "time";
  std::string event = "event";
  std::string cluster = "cluster";
  std::string cluster_id;
  std::vector<std::string> subject_covariates;
  std::vector<std::string> cluster_covariates;
  std::vector<std::string> categorical;
  bool tab = false;
  bool standardize = false;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Subject file (one row per subject, header required)")->required();
    app->add_option("--clusters", clusters, "Cluster file with cluster-level covariates");
    app->add_option("--time", time, "Follow-up time column")->capture_default_str();
    app->add_option("--event", event, "Event indicator column (1 = event, 0 = censored)")->capture_default_str();
    app->add_option("--cluster", cluster, "Cluster id column of the subject file")->capture_default_str();
    app->add_option("--cluster-id", cluster_id, "Cluster id column of the cluster file (default: --cluster)");
    app->add_option("--subject-covariates", subject_covariates, "Subject covariate columns")->delimiter(',');
    app->add_option("--cluster-covariates", cluster_covariates, "Cluster covariate columns")->delimiter(',');
    app->add_option("--categorical", categorical, "Covariates summarized as categorical")->delimiter(',');
    app->add_flag("--tab", tab, "Tab-delimited input");
    app->add_flag("--standardize", standardize, "Standardize continuous covariates");
  }

  Schema schema() const {
    Schema s;
    s.time = time;
    s.event = event;
    s.cluster = cluster;
    s.cluster_file_id = cluster_id;
    s.subject_covariates = subject_covariates;
    s.cluster_covariates = cluster_covariates;
    s.categorical = categorical;
    s.delimiter = tab ? '\t' : ',';
    s.standardize = standardize;
    return s;
  }

  Dataset load() const { return load_dataset(data, clusters, schema()); }

  json inputs() const {
    json j;
    j[data] = file_digest(data);
    if (!clusters.empty()) j[clusters] = file_digest(clusters);
    return j;
  }

  std::string data_digest() const {
    std::string bytes = read_text(data);
    bytes.push_back('\0');
    if (!clusters.empty()) bytes += read_text(clusters);
    return hex_digest(fnv1a64(bytes));
  }

  json config() const {
    return {{"time", time},
            {"event", event},
            {"cluster", cluster},
            {"cluster_id", cluster_id},
            {"subject_covariates", subject_covariates},
            {"cluster_covariates", cluster_covariates},
            {"categorical", categorical},
            {"tab", tab},
            {"standardize", standardize}};
  }
};

/// Manifest written before the heavy work and finalized afterwards.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command, json config, std::uint64_t seed)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["version"] = kVersion;
    doc_["config"] = std::move(config);
    doc_["config_hash"] = hex_digest(fnv1a64(doc_["config"].dump()));
    doc_["seed"] = seed;
    doc_["status"] = "running";
  }

  json& doc() { return doc_; }

  void write() {
    fs::create_directories(dir_);
    write_text(dir_ / "manifest.json", doc_.dump(2) + "\n");
  }

  void finalize(const std::vector<std::string>& outputs) {
    json files = json::object();
    for (const auto& name : outputs) files[name] = file_digest(dir_ / name);
    doc_["outputs"] = files;
    doc_["output_digest"] = hex_digest(fnv1a64(files.dump()));
    doc_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    doc_["status"] = "complete";
    write();
  }

 private:
  fs::path dir_;
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

/// "start:stop:count" or a comma list.
Vector parse_grid(const std::string& text, const std::string& what) {
  std::vector<double> values;
  try {
    if (text.find(':') != std::string::npos) {
      std::stringstream ss(text);
      std::string a, b, n;
      std::getline(ss, a, ':');
      std::getline(ss, b, ':');
      std::getline(ss, n, ':');
      const double lo = std::stod(a), hi = std::stod(b);
      const int count = std::stoi(n);
      if (count < 2 || !(hi > lo)) throw ConfigError(what + ": need start < stop and count >= 2");
      for (int k = 0; k < count; ++k) values.push_back(lo + (hi - lo) * k / (count - 1));
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse '" + text + "'");
  }
  if (values.empty()) throw ConfigError(what + ": empty grid");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// "name=value,name=value" into a full covariate vector (unnamed entries 0).
Vector parse_profile(const std::string& text, const std::vector<std::string>& names, Vector base) {
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("profile entry '" + item + "' is not name=value");
    const std::string name = item.substr(0, eq);
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ConfigError("unknown covariate '" + name + "' in profile");
    try {
      base[it - names.begin()] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad value in profile entry '" + item + "'");
    }
  }
  return base;
}

std::string profile_text(const Vector& w, const std::vector<std::string>& names) {
  std::string s;
  for (Eigen::Index k = 0; k < w.size(); ++k)
    s += (k ? "," : "") + names[static_cast<std::size_t>(k)] + "=" + format_double(w[k]);
  return s;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  DataOptions data;
  std::string frailty = "ldtfp";
  std::string cuts = "quantile:10";
  bool events_only = false;
  int depth = 4;
  long iterations = 55000;
  long burn_in = 5000;
  long thin = 10;
  std::uint64_t seed = 1;
  double tau1 = 1.001;
  double tau2 = 1.001;
  double a_c = 1.0;
  double b_c = 1.0;
  double rho_exponent = 2.0;
  double gamma_prior_variance = 1e3;
  int chains = 1;
  int jobs = default_jobs();
  std::string loglik_format = "csv";
  std::string dump_expansion;
  std::string out = "fit_output";
};

void add_fit(CLI::App* app, FitOptions& o) {
  o.data.add(app);
  app->add_option("--frailty", o.frailty, "Frailty law: ldtfp, exchangeable or gaussian")->capture_default_str();
  app->add_option("--cuts", o.cuts, "Cut-points: quantile:K or a comma-separated list")->capture_default_str();
  app->add_flag("--events-only", o.events_only, "Quantile cut-points from event times only");
  app->add_option("--depth", o.depth, "Partition depth J")->capture_default_str();
  app->add_option("--iters", o.iterations, "Total iterations")->capture_default_str();
  app->add_option("--burnin", o.burn_in, "Burn-in iterations (adaptation only here)")->capture_default_str();
  app->add_option("--thin", o.thin, "Thinning interval")->capture_default_str();
  app->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  app->add_option("--tau1", o.tau1, "Shape of the Gamma prior on theta^-2")->capture_default_str();
  app->add_option("--tau2", o.tau2, "Rate of the Gamma prior on theta^-2")->capture_default_str();
  app->add_option("--ac", o.a_c, "Shape of the Gamma prior on c")->capture_default_str();
  app->add_option("--bc", o.b_c, "Rate of the Gamma prior on c")->capture_default_str();
  app->add_option("--rho-exponent", o.rho_exponent, "Level weight rho(j) = j^exponent")->capture_default_str();
  app->add_option("--gamma-prior-variance", o.gamma_prior_variance, "S0 = v I for gamma")->capture_default_str();
  app->add_option("--chains", o.chains, "Independent chains (draws are pooled)")->capture_default_str();
  app->add_option("--jobs", o.jobs, "Worker threads");
  app->add_option("--loglik-format", o.loglik_format, "Per-observation log-likelihood: csv or binary")->capture_default_str();
  app->add_option("--dump-expansion", o.dump_expansion, "Write the Poisson expansion to this file");
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
}

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  if (o.chains < 1) throw ConfigError("--chains must be at least 1");
  if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");
  const LoglikFormat format = parse_loglik_format(o.loglik_format);
  const Dataset data = o.data.load();
  const CutPointSelection cuts = parse_cutpoints(o.cuts, data, o.events_only);
  for (const auto& w : cuts.warnings) err << "warning: " << w << "\n";

  ModelSpec spec;
  spec.dataset = data;
  spec.cuts = cuts.cuts;
  spec.frailty = parse_frailty_kind(o.frailty);
  spec.depth = o.depth;
  spec.hyper.forest = {o.tau1, o.tau2, o.a_c, o.b_c, false};
  spec.rho.exponent = o.rho_exponent;
  if (!(o.gamma_prior_variance > 0)) throw ConfigError("--gamma-prior-variance must be positive");
  spec.hyper.gamma_covariance = o.gamma_prior_variance * Matrix::Identity(spec.num_gamma(), spec.num_gamma());
  spec.validate();

  ChainControls controls;
  controls.iterations = o.iterations;
  controls.burn_in = o.burn_in;
  controls.thin = o.thin;
  controls.seed = o.seed;
  controls.validate();

  json config = {{"data", o.data.config()},
                 {"frailty", to_string(spec.frailty)},
                 {"cuts", std::vector<double>(spec.cuts.points().data(),
                                              spec.cuts.points().data() + spec.cuts.size())},
                 {"depth", o.depth},
                 {"iterations", o.iterations},
                 {"burn_in", o.burn_in},
                 {"thin", o.thin},
                 {"tau1", o.tau1},
                 {"tau2", o.tau2},
                 {"a_c", o.a_c},
                 {"b_c", o.b_c},
                 {"rho_exponent", o.rho_exponent},
                 {"gamma_prior_variance", o.gamma_prior_variance},
                 {"chains", o.chains},
                 {"loglik_format", o.loglik_format}};
  const fs::path dir = o.out;
  Manifest manifest(dir, "fit", config, o.seed);
  manifest.doc()["inputs"] = o.data.inputs();
  manifest.doc()["data_digest"] = o.data.data_digest();
  manifest.write();

  if (!o.dump_expansion.empty())
    write_text(o.dump_expansion, format_expansion(expand_poisson(data, spec.cuts)));

  std::vector<PosteriorChain> chains(static_cast<std::size_t>(o.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(o.chains));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int k = next.fetch_add(1); k < o.chains; k = next.fetch_add(1)) {
      try {
        ChainControls c = controls;
        c.seed = o.chains == 1 ? o.seed : Rng::derive_seed(o.seed, static_cast<std::uint64_t>(k));
        chains[static_cast<std::size_t>(k)] = run_chain(spec, c);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  const int jobs = std::min(o.jobs, o.chains);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  PosteriorChain chain = concatenate_chains(chains);

  std::vector<std::string> outputs = write_chain(chain, dir, format);
  write_text(dir / "summary.csv", format_parameter_table(summarize_posterior(chain)));
  outputs.push_back("summary.csv");

  const LpmlResult lpml = compute_lpml(chain);
  for (const auto& w : lpml.warnings) err << "warning: " << w << "\n";
  const DicResult dic = compute_dic(chain, data);
  json report = {{"frailty", to_string(spec.frailty)},
                 {"num_observations", data.num_records()},
                 {"retained", chain.retained()},
                 {"lpml", std::isfinite(lpml.lpml) ? json(lpml.lpml) : json(nullptr)},
                 {"dic", dic.dic},
                 {"p_d", dic.p_d},
                 {"d_bar", dic.d_bar},
                 {"d_hat", dic.d_hat},
                 {"acceptance",
                  {{"gamma", chain.acceptance.gamma},
                   {"frailties", chain.acceptance.frailties},
                   {"coefficients", chain.acceptance.coefficients},
                   {"theta", chain.acceptance.theta}}}};
  write_text(dir / "comparison.json", report.dump(2) + "\n");
  outputs.push_back("comparison.json");
  std::string cpo = "observation,log_cpo\n";
  for (Eigen::Index j = 0; j < lpml.log_cpo.size(); ++j)
    cpo += std::to_string(j + 1) + "," + format_double(lpml.log_cpo[j]) + "\n";
  write_text(dir / "cpo.csv", cpo);
  outputs.push_back("cpo.csv");
  manifest.finalize(outputs);

  out << "fitted " << to_string(spec.frailty) << " model: " << chain.retained() << " draws, K = "
      << spec.cuts.size() << "\n";
  out << std::setprecision(6) << "LPML " << lpml.lpml << "  DIC " << dic.dic << "  pD " << dic.p_d
      << "\n";
  out << "output: " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOptions {
  std::vector<std::string> runs;
  std::string out;
};

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

int cmd_compare(const CompareOptions& o, std::ostream& out, std::ostream&) {
  if (o.runs.size() < 2) throw ConfigError("compare needs at least two run directories");
  struct Run {
    std::string name;
    std::string digest;
    std::string frailty;
    double lpml, dic, p_d, d_bar;
  };
  std::vector<Run> runs;
  for (const auto& dir : o.runs) {
    const json manifest = read_json(fs::path(dir) / "manifest.json");
    const json report = read_json(fs::path(dir) / "comparison.json");
    if (manifest.value("status", "") != "complete") throw DataError(dir + ": run is not complete");
    Run r;
    r.name = dir;
    r.digest = manifest.value("data_digest", "");
    r.frailty = report.value("frailty", "");
    r.lpml = report.at("lpml").is_null() ? -std::numeric_limits<double>::infinity()
                                         : report.at("lpml").get<double>();
    r.dic = report.at("dic").get<double>();
    r.p_d = report.at("p_d").get<double>();
    r.d_bar = report.at("d_bar").get<double>();
    runs.push_back(r);
  }
  for (const auto& r : runs)
    if (r.digest != runs.front().digest)
      throw DigestMismatch("runs " + runs.front().name + " and " + r.name +
                           " were fitted to different data (digest " + runs.front().digest +
                           " vs " + r.digest + ")");

  std::ostringstream table;
  table << std::fixed << std::setprecision(2);
  table << "run,frailty,lpml,dic,p_d,d_bar\n";
  for (const auto& r : runs)
    table << r.name << "," << r.frailty << "," << r.lpml << "," << r.dic << "," << r.p_d << ","
          << r.d_bar << "\n";
  table << "\nrun_a,run_b,pbf\n";
  table << std::setprecision(4);
  for (std::size_t a = 0; a < runs.size(); ++a)
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      double pbf = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(runs[a].lpml) && std::isfinite(runs[b].lpml))
        pbf = pseudo_bayes_factor(runs[a].lpml, runs[b].lpml);
      table << runs[a].name << "," << runs[b].name << "," << pbf << "\n";
    }
  out << table.str();
  if (!o.out.empty()) write_text(o.out, table.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string scenario = "I";
  std::string scenario_config;
  int replicates = -1;
  int clusters = -1;
  int cluster_size = -1;
  std::uint64_t seed = 1;
  long iterations = 55000;
  long burn_in = 5000;
  long thin = 10;
  int jobs = default_jobs();
  int ise_draws = 250;
  std::vector<std::string> methods{"ldtfp", "gaussian"};
  std::string out = "simulation_output";
};

void add_simulate(CLI::App* app, SimulateOptions& o) {
  app->add_option("--scenario", o.scenario, "Scenario I or II")->capture_default_str();
  app->add_option("--scenario-config", o.scenario_config, "JSON scenario description");
  app->add_option("--replicates", o.replicates, "Number of replicates (default 20)");
  app->add_option("--clusters", o.clusters, "Clusters per data set (default 100)");
  app->add_option("--cluster-size", o.cluster_size, "Subjects per cluster (default 10)");
  app->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  app->add_option("--iters", o.iterations, "Iterations per chain")->capture_default_str();
  app->add_option("--burnin", o.burn_in, "Burn-in per chain")->capture_default_str();
  app->add_option("--thin", o.thin, "Thinning interval")->capture_default_str();
  app->add_option("--jobs", o.jobs, "Worker threads");
  app->add_option("--ise-draws", o.ise_draws, "Posterior draws used for ISE curves")->capture_default_str();
  app->add_option("--methods", o.methods, "Frailty laws to fit")->delimiter(',')->capture_default_str();
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  ScenarioSpec spec = o.scenario_config.empty() ? ScenarioSpec::defaults(parse_scenario(o.scenario))
                                                : scenario_from_json(read_text(o.scenario_config));
  if (o.replicates >= 0) spec.replicates = o.replicates;
  if (o.clusters >= 0) spec.num_clusters = o.clusters;
  if (o.cluster_size >= 0) spec.cluster_size = o.cluster_size;
  spec.seed = o.seed;
  spec.validate();
  if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");

  std::vector<StudyMethod> methods;
  for (const auto& m : o.methods) {
    StudyMethod method;
    method.frailty = parse_frailty_kind(m);
    method.name = to_string(method.frailty);
    methods.push_back(method);
  }
  if (methods.empty()) throw ConfigError("--methods is empty");

  StudyControls controls;
  controls.chain.iterations = o.iterations;
  controls.chain.burn_in = o.burn_in;
  controls.chain.thin = o.thin;
  controls.chain.validate();
  controls.jobs = o.jobs;
  controls.ise_draws = o.ise_draws;

  json config = {{"scenario", json::parse(scenario_to_json(spec))},
                 {"iterations", o.iterations},
                 {"burn_in", o.burn_in},
                 {"thin", o.thin},
                 {"ise_draws", o.ise_draws},
                 {"methods", o.methods}};
  const fs::path dir = o.out;
  Manifest manifest(dir, "simulate", config, spec.seed);
  if (!o.scenario_config.empty()) manifest.doc()["inputs"] = {{o.scenario_config, file_digest(o.scenario_config)}};
  manifest.write();

  const StudyResult result = run_study(spec, methods, controls);
  std::vector<std::string> outputs;
  write_text(dir / "scenario.json", scenario_to_json(spec) + "\n");
  outputs.push_back("scenario.json");
  write_text(dir / "replicates.csv", format_replicates(result));
  outputs.push_back("replicates.csv");
  write_text(dir / "coefficients.csv", format_coefficient_table(result));
  outputs.push_back("coefficients.csv");
  write_text(dir / "ise.csv", format_ise_table(result));
  outputs.push_back("ise.csv");
  write_text(dir / "aggregate.json", study_to_json(result) + "\n");
  outputs.push_back("aggregate.json");
  manifest.finalize(outputs);

  int failed = 0;
  for (const auto& r : result.replicates)
    if (r.failed) {
      ++failed;
      err << "replicate " << r.replicate << " (" << r.method << ") failed: " << r.error << "\n";
    }
  out << "scenario " << to_string(spec.scenario) << ": " << spec.replicates << " replicates, "
      << failed << " failed fits\n";
  if (spec.replicates > 0) out << format_coefficient_table(result) << "\n" << format_ise_table(result);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// curves

struct CurvesOptions {
  std::string run;
  std::vector<std::string> profiles;
  std::string base;
  std::string quantiles;
  std::string times;
  std::string frailty_grid = "-6:6:241";
  bool shifted = false;
  int max_draws = 500;
  double level = 0.95;
  std::string out;
};

void add_curves(CLI::App* app, CurvesOptions& o) {
  app->add_option("--run", o.run, "Directory of a completed fit")->required();
  app->add_option("--profile", o.profiles, "Covariate profile name=value,... (repeatable)");
  app->add_option("--base", o.base, "Base profile used with --quantiles");
  app->add_option("--quantiles", o.quantiles,
                  "Profiles at quantiles of a cluster covariate, e.g. x=0.05,0.5,0.95");
  app->add_option("--times", o.times, "Time grid start:stop:count (default 0:a_K:101)");
  app->add_option("--frailty-grid", o.frailty_grid, "Frailty grid start:stop:count")->capture_default_str();
  app->add_flag("--shifted", o.shifted, "Also write densities of e + x'xi_x");
  app->add_option("--max-draws", o.max_draws, "Posterior draws averaged (0 = all)")->capture_default_str();
  app->add_option("--level", o.level, "Credible level of the bands")->capture_default_str();
  app->add_option("--out", o.out, "Output directory (default RUN/curves)");
}

int cmd_curves(const CurvesOptions& o, std::ostream& out, std::ostream&) {
  const PosteriorChain chain = read_chain(o.run);
  const auto& names = chain.covariate_names;
  const int p = chain.num_covariates();
  if (static_cast<int>(names.size()) != p) throw DataError("run has no covariate names");

  std::vector<Vector> profiles;
  for (const auto& text : o.profiles) profiles.push_back(parse_profile(text, names, Vector::Zero(p)));
  if (!o.quantiles.empty()) {
    const auto eq = o.quantiles.find('=');
    if (eq == std::string::npos) throw ConfigError("--quantiles must look like name=q1,q2,...");
    const std::string name = o.quantiles.substr(0, eq);
    const auto it = std::find(names.begin(), names.end(), name);
    const int col = static_cast<int>(it - names.begin()) - (p - chain.num_cluster_covariates);
    if (it == names.end() || col < 0)
      throw ConfigError("'" + name + "' is not a cluster covariate of this run");
    std::vector<double> values(static_cast<std::size_t>(chain.forest_covariates.rows()));
    for (Eigen::Index i = 0; i < chain.forest_covariates.rows(); ++i)
      values[static_cast<std::size_t>(i)] = chain.forest_covariates(i, col);
    std::sort(values.begin(), values.end());
    const Vector probs = parse_grid(o.quantiles.substr(eq + 1), "--quantiles");
    const Vector base = parse_profile(o.base, names, Vector::Zero(p));
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      Vector w = base;
      w[it - names.begin()] = sorted_quantile(values, probs[k]);
      profiles.push_back(w);
    }
  }
  if (profiles.empty()) {
    out << "no profiles requested\n";
    return kExitOk;
  }

  const Vector times = o.times.empty()
                           ? parse_grid("0:" + format_double(chain.cuts.upper(chain.cuts.size() - 1)) + ":101", "--times")
                           : parse_grid(o.times, "--times");
  const Vector egrid = parse_grid(o.frailty_grid, "--frailty-grid");
  PredictiveOptions options;
  options.max_draws = o.max_draws;
  options.level = o.level;

  const fs::path dir = o.out.empty() ? fs::path(o.run) / "curves" : fs::path(o.out);
  json config = {{"run", o.run},
                 {"profiles", json::array()},
                 {"times", std::vector<double>(times.data(), times.data() + times.size())},
                 {"frailty_grid", std::vector<double>(egrid.data(), egrid.data() + egrid.size())},
                 {"shifted", o.shifted},
                 {"max_draws", o.max_draws},
                 {"level", o.level}};
  for (const auto& w : profiles) config["profiles"].push_back(profile_text(w, names));
  Manifest manifest(dir, "curves", config, chain.controls.seed);
  manifest.doc()["inputs"] = {{"chain.json", file_digest(fs::path(o.run) / "chain.json")},
                              {"gamma.csv", file_digest(fs::path(o.run) / "gamma.csv")}};
  manifest.write();

  std::vector<std::string> outputs;
  std::string index = "profile," + std::string("covariates\n");
  const int q = chain.num_cluster_covariates;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const Vector& w = profiles[k];
    const std::string id = std::to_string(k + 1);
    index += id + ",\"" + profile_text(w, names) + "\"\n";
    const PredictiveCurve s = predictive_survival(chain, w, times, options);
    write_text(dir / ("survival_" + id + ".csv"), format_curve(s));
    outputs.push_back("survival_" + id + ".csv");
    const Vector x = w.tail(q);
    write_text(dir / ("frailty_" + id + ".csv"),
               format_curve(predictive_frailty_density(chain, x, egrid, false, options)));
    outputs.push_back("frailty_" + id + ".csv");
    if (o.shifted) {
      write_text(dir / ("frailty_shifted_" + id + ".csv"),
                 format_curve(predictive_frailty_density(chain, x, egrid, true, options)));
      outputs.push_back("frailty_shifted_" + id + ".csv");
    }
  }
  write_text(dir / "profiles.csv", index);
  outputs.push_back("profiles.csv");
  manifest.finalize(outputs);
  out << "wrote curves for " << profiles.size() << " profiles to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeOptions {
  DataOptions data;
  std::string json_out;
  std::vector<std::string> gamma_pair;
};

int cmd_summarize(const SummarizeOptions& o, std::ostream& out, std::ostream&) {
  const Dataset data = o.data.load();
  const DatasetSummary s = summarize(data);
  out << format_summary(s);

  json j;
  j["num_records"] = s.num_records;
  j["num_clusters"] = s.num_clusters;
  j["events"] = s.events;
  j["censored"] = s.censored;
  j["event_proportion"] = static_cast<double>(s.events) / s.num_records;
  j["continuous"] = json::array();
  for (const auto& c : s.continuous)
    j["continuous"].push_back({{"name", c.name}, {"min", c.min}, {"median", c.median}, {"max", c.max}});
  j["categorical"] = json::array();
  for (const auto& c : s.categorical) {
    json levels = json::array();
    for (const auto& l : c.levels)
      levels.push_back({{"level", l.level}, {"count", l.count}, {"proportion", l.proportion}});
    j["categorical"].push_back({{"name", c.name}, {"levels", levels}});
  }

  if (!o.gamma_pair.empty()) {
    if (o.gamma_pair.size() != 2) throw ConfigError("--gamma needs exactly two covariate names");
    const auto& names = data.covariate_names;
    auto column = [&](const std::string& name) {
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ConfigError("unknown covariate '" + name + "' for --gamma");
      const Matrix w = data.design_matrix();
      const Vector c = w.col(it - names.begin());
      return std::vector<double>(c.data(), c.data() + c.size());
    };
    const GammaStatistic g = goodman_kruskal_gamma(column(o.gamma_pair[0]), column(o.gamma_pair[1]));
    out << std::setprecision(4) << "\nGoodman-Kruskal gamma(" << o.gamma_pair[0] << ", "
        << o.gamma_pair[1] << ") = " << g.gamma << "  95% CI (" << g.ci_lower << ", " << g.ci_upper
        << ")\n";
    j["gamma"] = {{"row", o.gamma_pair[0]}, {"col", o.gamma_pair[1]}, {"gamma", g.gamma},
                  {"ase", g.ase}, {"ci95", {g.ci_lower, g.ci_upper}}};
  }
  if (!o.json_out.empty()) write_text(o.json_out, j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian covariate-adjusted frailty proportional hazards models", "frailtyph"};
  app.set_config("--config", "",
                 "TOML file with one section per command, e.g. [fit]; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  FitOptions fit;
  add_fit(app.add_subcommand("fit", "Fit a frailty PH model by MCMC"), fit);

  CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "LPML / DIC grid and pseudo Bayes factors");
  compare_cmd->add_option("runs", compare.runs, "Fit output directories")->required();
  compare_cmd->add_option("--out", compare.out, "Also write the table to this file");

  SimulateOptions simulate;
  add_simulate(app.add_subcommand("simulate", "Simulation study under scenario I or II"), simulate);

  CurvesOptions curves;
  add_curves(app.add_subcommand("curves", "Predictive survival and frailty density curves"), curves);

  SummarizeOptions summarize_opts;
  auto* summarize_cmd = app.add_subcommand("summarize", "Descriptive summary of a data set");
  summarize_opts.data.add(summarize_cmd);
  summarize_cmd->add_option("--json", summarize_opts.json_out, "Write the summary as JSON");
  summarize_cmd->add_option("--gamma", summarize_opts.gamma_pair, "Goodman-Kruskal gamma of two covariates")
      ->delimiter(',');

  // Config is handled by the top-level app, so pull it in front of the
  // subcommand wherever it was written.
  std::vector<std::string> ordered;
  std::vector<std::string> rest;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      ordered.push_back(args[k]);
      ordered.push_back(args[++k]);
    } else if (args[k].rfind("--config=", 0) == 0) {
      ordered.push_back(args[k]);
    } else {
      rest.push_back(args[k]);
    }
  }
  ordered.insert(ordered.end(), rest.begin(), rest.end());
  std::vector<std::string> reversed(ordered.rbegin(), ordered.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand("fit")) return cmd_fit(fit, out, err);
    if (app.got_subcommand("compare")) return cmd_compare(compare, out, err);
    if (app.got_subcommand("simulate")) return cmd_simulate(simulate, out, err);
    if (app.got_subcommand("curves")) return cmd_curves(curves, out, err);
    if (app.got_subcommand("summarize")) return cmd_summarize(summarize_opts, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SamplerError& e) {
    err << "sampler error (iteration " << e.iteration << "): " << e.what() << "\n";
    return kExitSampler;
  } catch (const DigestMismatch& e) {
    err << "digest mismatch: " << e.what() << "\n";
    return kExitDigest;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace frailty
