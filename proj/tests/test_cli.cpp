#include "frailty/chain_io.hpp"
#include "frailty/cli.hpp"
#include "frailty/simulate.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace frailty;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

/// Writes a small scenario I data set as a subject file and a cluster file.
void write_data(const fs::path& dir, std::uint64_t seed = 2, int clusters = 12) {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::I);
  s.num_clusters = clusters;
  s.cluster_size = 5;
  Rng rng(seed);
  const Dataset d = generate_scenario_I(s, rng).dataset;
  std::ofstream subjects(dir / "subjects.csv"), cl(dir / "clusters.csv");
  subjects << std::setprecision(17) << "cluster,time,event,w1,w2\n";
  for (const auto& r : d.records)
    subjects << d.clusters[static_cast<std::size_t>(r.cluster)].cluster_id << "," << r.time << "," << r.event
             << "," << r.subject_covariates[0] << "," << r.subject_covariates[1] << "\n";
  cl << std::setprecision(17) << "cluster,x\n";
  for (const auto& c : d.clusters) cl << c.cluster_id << "," << c.cluster_covariates[0] << "\n";
}

std::vector<std::string> fit_args(const fs::path& dir, const std::string& out, const std::string& frailty) {
  return {"fit",
          "--data", (dir / "subjects.csv").string(),
          "--clusters", (dir / "clusters.csv").string(),
          "--subject-covariates", "w1,w2",
          "--cluster-covariates", "x",
          "--frailty", frailty,
          "--cuts", "quantile:4",
          "--depth", "2",
          "--iters", "400",
          "--burnin", "100",
          "--thin", "2",
          "--seed", "5",
          "--out", (dir / out).string()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text(p)); }

}  // namespace

TEST_CASE("fit then compare a run with itself") {
  const fs::path dir = oracle::scratch_dir("cli_fit");
  write_data(dir);
  const Result fit = run(fit_args(dir, "a", "ldtfp"));
  INFO(fit.err);
  REQUIRE(fit.code == kExitOk);
  for (const char* f : {"manifest.json", "gamma.csv", "summary.csv", "comparison.json", "cpo.csv"})
    CHECK(fs::exists(dir / "a" / f));
  const auto manifest = read_json(dir / "a" / "manifest.json");
  CHECK(manifest["status"] == "complete");
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["command"] == "fit");

  REQUIRE(run(fit_args(dir, "b", "ldtfp")).code == kExitOk);
  CHECK(read_text(dir / "a" / "gamma.csv") == read_text(dir / "b" / "gamma.csv"));
  CHECK(read_json(dir / "b" / "manifest.json")["output_digest"] == manifest["output_digest"]);

  const Result cmp = run({"compare", (dir / "a").string(), (dir / "b").string()});
  REQUIRE(cmp.code == kExitOk);
  CHECK(cmp.out.find(",1.0000\n") != std::string::npos);

  REQUIRE(run(fit_args(dir, "g", "gaussian")).code == kExitOk);
  CHECK(run({"compare", (dir / "a").string(), (dir / "g").string()}).code == kExitOk);
}

TEST_CASE("runs on different data cannot be compared") {
  const fs::path one = oracle::scratch_dir("cli_digest_one");
  const fs::path two = oracle::scratch_dir("cli_digest_two");
  write_data(one, 2);
  write_data(two, 3);
  REQUIRE(run(fit_args(one, "r", "gaussian")).code == kExitOk);
  REQUIRE(run(fit_args(two, "r", "gaussian")).code == kExitOk);
  const Result cmp = run({"compare", (one / "r").string(), (two / "r").string()});
  CHECK(cmp.code == kExitDigest);
  CHECK(cmp.err.find("digest") != std::string::npos);
}

TEST_CASE("exit codes for bad input") {
  const fs::path dir = oracle::scratch_dir("cli_errors");
  write_data(dir);
  auto missing = fit_args(dir, "m", "ldtfp");
  missing[2] = (dir / "nope.csv").string();
  CHECK(run(missing).code == kExitData);

  CHECK(run({"fit", "--bogus"}).code == kExitConfig);
  auto bad_law = fit_args(dir, "m", "lognormal");
  CHECK(run(bad_law).code == kExitConfig);
  auto bad_column = fit_args(dir, "m", "ldtfp");
  bad_column[6] = "w1,w9";
  CHECK(run(bad_column).code == kExitData);
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"compare", (dir / "m").string()}).code == kExitConfig);
}

TEST_CASE("configuration file precedence") {
  const fs::path dir = oracle::scratch_dir("cli_config");
  write_data(dir);
  std::ofstream(dir / "cfg.toml") << "[fit]\niters = 300\nburnin = 100\nthin = 1\nseed = 9\n";
  auto args = fit_args(dir, "c", "gaussian");
  // Drop --iters and --seed from the command line so the file supplies them.
  for (const char* flag : {"--iters", "--seed"}) {
    const auto it = std::find(args.begin(), args.end(), flag);
    args.erase(it, it + 2);
  }
  args.push_back("--config");
  args.push_back((dir / "cfg.toml").string());
  const Result r = run(args);
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto m = read_json(dir / "c" / "manifest.json");
  CHECK(m["seed"] == 9);
  CHECK(m["config"]["iterations"] == 300);
  CHECK(m["config"]["thin"] == 2);  // the flag wins over the file

  std::ofstream(dir / "bad.toml") << "[fit]\nitters = 3\n";
  args.back() = (dir / "bad.toml").string();
  CHECK(run(args).code == kExitConfig);
}

TEST_CASE("curves command") {
  const fs::path dir = oracle::scratch_dir("cli_curves");
  write_data(dir);
  REQUIRE(run(fit_args(dir, "r", "ldtfp")).code == kExitOk);
  const std::string r = (dir / "r").string();
  const Result none = run({"curves", "--run", r});
  CHECK(none.code == kExitOk);
  CHECK(none.out.find("no profiles requested") != std::string::npos);

  const Result some = run({"curves", "--run", r, "--profile", "w1=0,w2=1,x=0.5", "--max-draws", "50",
                           "--times", "0:2:11", "--frailty-grid", "-3:3:13", "--shifted"});
  INFO(some.err);
  REQUIRE(some.code == kExitOk);
  for (const char* f : {"survival_1.csv", "frailty_1.csv", "frailty_shifted_1.csv", "profiles.csv"})
    CHECK(fs::exists(dir / "r" / "curves" / f));
  const std::string survival = read_text(dir / "r" / "curves" / "survival_1.csv");
  CHECK(std::count(survival.begin(), survival.end(), '\n') == 12);

  CHECK(run({"curves", "--run", r, "--profile", "w1=0,w7=1"}).code == kExitConfig);
  const Result q = run({"curves", "--run", r, "--base", "w1=0,w2=0", "--quantiles", "x=0.25,0.75",
                        "--max-draws", "20", "--out", (dir / "q").string()});
  CHECK(q.code == kExitOk);
  CHECK(fs::exists(dir / "q" / "survival_2.csv"));
}

TEST_CASE("simulate with zero replicates writes header-only tables") {
  const fs::path dir = oracle::scratch_dir("cli_simulate");
  const Result r = run({"simulate", "--replicates", "0", "--out", (dir / "s").string()});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const std::string reps = read_text(dir / "s" / "replicates.csv");
  CHECK(std::count(reps.begin(), reps.end(), '\n') == 1);
  CHECK(read_json(dir / "s" / "manifest.json")["status"] == "complete");

  std::ofstream(dir / "bad.json") << R"({"scenario": "I", "clusterz": 3})";
  CHECK(run({"simulate", "--scenario-config", (dir / "bad.json").string(), "--replicates", "0", "--out",
             (dir / "t").string()})
            .code == kExitConfig);
}

TEST_CASE("summarize command") {
  const fs::path dir = oracle::scratch_dir("cli_summarize");
  write_data(dir);
  const Result r = run({"summarize", "--data", (dir / "subjects.csv").string(), "--clusters",
                        (dir / "clusters.csv").string(), "--subject-covariates", "w1,w2",
                        "--cluster-covariates", "x", "--categorical", "w2", "--gamma", "w2,x", "--json",
                        (dir / "s.json").string()});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("Goodman-Kruskal") != std::string::npos);
  CHECK(fs::exists(dir / "s.json"));
}
