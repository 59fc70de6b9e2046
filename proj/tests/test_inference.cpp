#include "frailty/inference.hpp"
#include "frailty/simulate.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace frailty;

namespace {

/// Chain with one cluster covariate and the given draws.
PosteriorChain manual_chain(FrailtyLawKind kind, const Vector& cuts, const Matrix& gamma,
                            const Vector& theta, int depth = 3) {
  PosteriorChain c;
  c.frailty = kind;
  c.depth = depth;
  c.cuts = CutPoints(cuts);
  const int p = static_cast<int>(gamma.cols()) - static_cast<int>(cuts.size());
  for (int k = 0; k < p; ++k) c.covariate_names.push_back("v" + std::to_string(k));
  c.num_clusters = 10;
  c.num_cluster_covariates = 1;
  c.forest_covariates = Matrix::Zero(10, 1);
  c.gamma = gamma;
  c.theta = theta;
  c.precision = Vector::Ones(gamma.rows());
  const int dim = kind == FrailtyLawKind::ldtfp ? 2 : kind == FrailtyLawKind::gaussian ? 0 : 1;
  c.coefficients = Matrix::Zero(gamma.rows(), TailfreeForest::num_nodes(depth) * dim);
  c.frailties = Matrix::Zero(gamma.rows(), 10);
  c.loglik = Vector::Zero(gamma.rows());
  return c;
}

Vector row(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

}  // namespace

TEST_CASE("predictive survival under a gaussian law matches adaptive quadrature") {
  Matrix g(1, 3);
  g << std::log(0.4), 0.6, -0.8;
  const PosteriorChain c = manual_chain(FrailtyLawKind::gaussian, row({10.0}), g, row({1.7}));
  const Vector w = row({1.2, 0.5});
  const Vector grid = row({0.0, 0.1, 0.5, 1.0, 2.5, 6.0});
  const Vector s = draw_survival(c, 0, w, grid);
  CHECK(s[0] == 1.0);
  const double lp = 0.6 * 1.2 - 0.8 * 0.5;
  for (Eigen::Index k = 1; k < grid.size(); ++k) {
    const double t = grid[k];
    const double exact = oracle::integrate_real_line(
        [&](double e) { return std::exp(-0.4 * t * std::exp(lp + e)) * oracle::normal_pdf(e, 1.7); }, {0.0});
    CHECK(std::abs(s[k] - exact) < 1e-8);
  }
}

TEST_CASE("predictive survival is monotone and ordered in a hazard coefficient") {
  Rng rng(3);
  Matrix g(4, 5);
  for (int m = 0; m < 4; ++m) g.row(m) << -1.0 + 0.1 * m, -0.5, 0.3, 0.2 + 0.05 * m, 0.4;
  PosteriorChain c = manual_chain(FrailtyLawKind::ldtfp, row({1.0, 3.0}), g, row({0.8, 1.0, 1.2, 0.9}));
  for (Eigen::Index k = 0; k < c.coefficients.size(); ++k) c.coefficients.data()[k] = rng.normal(0, 0.8);
  const Vector w = row({0.0, 1.0, 0.5});
  const Vector grid = Vector::LinSpaced(40, 0.0, 6.0);
  const PredictiveCurve base = predictive_survival(c, w, grid);
  CHECK(base.mean[0] == 1.0);
  for (Eigen::Index k = 1; k < grid.size(); ++k) {
    CHECK(base.mean[k] <= base.mean[k - 1]);
    CHECK(base.lower[k] <= base.mean[k]);
    CHECK(base.mean[k] <= base.upper[k]);
  }
  PosteriorChain worse = c;
  worse.gamma.col(3).array() += 0.5;
  const PredictiveCurve shifted = predictive_survival(worse, w, grid);
  for (Eigen::Index k = 1; k < grid.size(); ++k) CHECK(shifted.mean[k] < base.mean[k]);
}

TEST_CASE("empty chains are rejected") {
  PosteriorChain c = manual_chain(FrailtyLawKind::gaussian, row({1.0}), Matrix(0, 2), Vector(0));
  CHECK_THROWS(predictive_survival(c, row({0.0}), row({0.0, 1.0})));
  CHECK_THROWS(predictive_frailty_density(c, row({0.0}), row({0.0, 1.0})));
  CHECK_THROWS(compute_dic(c, [](const Vector&, const Vector&) { return 0.0; }));
}

TEST_CASE("gaussian predictive frailty density is a mixture of normals") {
  Matrix g = Matrix::Zero(3, 2);
  g.col(1) << 0.2, 0.4, 0.6;
  const Vector theta = row({0.5, 1.0, 2.0});
  const PosteriorChain c = manual_chain(FrailtyLawKind::gaussian, row({1.0}), g, theta);
  const Vector grid = Vector::LinSpaced(21, -3, 3);
  const PredictiveCurve d = predictive_frailty_density(c, row({1.0}), grid);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    double expected = 0.0;
    for (int m = 0; m < 3; ++m) expected += oracle::normal_pdf(grid[k], theta[m]) / 3.0;
    CHECK(d.mean[k] == doctest::Approx(expected).epsilon(1e-13));
  }
  const PredictiveCurve s = predictive_frailty_density(c, row({2.0}), grid, true);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    double expected = 0.0;
    for (int m = 0; m < 3; ++m) expected += oracle::normal_pdf(grid[k] - 2.0 * g(m, 1), theta[m]) / 3.0;
    CHECK(s.mean[k] == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("predictive frailty density integrates to one with median zero") {
  Rng rng(9);
  Matrix g = Matrix::Zero(5, 2);
  PosteriorChain c = manual_chain(FrailtyLawKind::ldtfp, row({1.0}), g, row({0.7, 1.0, 1.3, 0.9, 1.1}), 4);
  for (Eigen::Index k = 0; k < c.coefficients.size(); ++k) c.coefficients.data()[k] = rng.normal(0, 1.0);
  const Vector grid = Vector::LinSpaced(401, -10, 10);
  const PredictiveCurve d = predictive_frailty_density(c, row({0.4}), grid);
  CHECK(d.mean.minCoeff() >= 0.0);
  // The density jumps at every leaf boundary of every draw, so integrate piecewise.
  std::vector<double> kinks;
  for (int m = 0; m < c.retained(); ++m) {
    const Vector b = c.forest(m).tree().boundaries(4);
    kinks.insert(kinks.end(), b.data(), b.data() + b.size());
  }
  std::vector<TailfreeForest> forests;
  for (int m = 0; m < c.retained(); ++m) forests.push_back(c.forest(m));
  const Vector x = row({0.4});
  auto density = [&](double e) {
    double sum = 0.0;
    for (const auto& f : forests) sum += f.density(e, x);
    return sum / static_cast<double>(forests.size());
  };
  for (Eigen::Index k = 0; k < grid.size(); k += 50) CHECK(d.mean[k] == doctest::Approx(density(grid[k])).epsilon(1e-14));
  CHECK(std::abs(oracle::integrate_real_line(density, kinks) - 1.0) < 1e-8);
  std::vector<double> left;
  std::copy_if(kinks.begin(), kinks.end(), std::back_inserter(left), [](double k) { return k < 0.0; });
  std::sort(left.begin(), left.end());
  double below = oracle::integrate(density, -INFINITY, left.front());
  for (std::size_t k = 0; k + 1 < left.size(); ++k) below += oracle::integrate(density, left[k], left[k + 1]);
  below += oracle::integrate(density, left.back(), 0.0);
  CHECK(std::abs(below - 0.5) < 1e-8);
}

TEST_CASE("CPO with a single draw is the likelihood itself") {
  Matrix ll(1, 4);
  ll << -0.3, -1.2, -2.0, -0.7;
  const LpmlResult r = compute_lpml(ll);
  CHECK(r.log_cpo == ll.row(0).transpose());
  CHECK(r.lpml == doctest::Approx(-4.2).epsilon(1e-15));
}

TEST_CASE("CPO respects the harmonic-mean bound") {
  Rng rng(4);
  Matrix ll(50, 6);
  for (Eigen::Index k = 0; k < ll.size(); ++k) ll.data()[k] = rng.normal(-1, 0.5);
  const LpmlResult r = compute_lpml(ll);
  for (int j = 0; j < 6; ++j) CHECK(r.log_cpo[j] <= ll.col(j).maxCoeff());
  CHECK(r.lpml == doctest::Approx(r.log_cpo.sum()).epsilon(1e-14));
}

TEST_CASE("infinite misfit gives zero CPO and a named warning") {
  Matrix ll(3, 2);
  ll << -1, -1, -1, -INFINITY, -1, -2;
  const LpmlResult r = compute_lpml(ll);
  CHECK(r.log_cpo[1] == -INFINITY);
  CHECK(r.lpml == -INFINITY);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("2") != std::string::npos);
}

TEST_CASE("CPO of the conjugate exponential-gamma model") {
  // lambda ~ Gamma(a, b); t_i ~ Exp(lambda). Posterior draws are exact.
  Rng rng(12);
  const double a = 2.0, b = 1.5;
  std::vector<double> t(25);
  double sum = 0.0;
  for (auto& v : t) sum += (v = rng.exponential() / 0.8);
  const int m = 20000;
  Matrix ll(m, 25);
  for (int k = 0; k < m; ++k) {
    const double lambda = rng.gamma(a + 25, b + sum);
    for (int i = 0; i < 25; ++i) ll(k, i) = std::log(lambda) - lambda * t[i];
  }
  const LpmlResult r = compute_lpml(ll);
  for (int i = 0; i < 25; ++i) {
    const double shape = a + 24, rate = b + sum - t[i];
    const double loo = shape * std::pow(rate, shape) / std::pow(rate + t[i], shape + 1);
    CHECK(std::abs(std::exp(r.log_cpo[i]) / loo - 1.0) < 0.05);
  }
}

TEST_CASE("pseudo Bayes factor") {
  CHECK(pseudo_bayes_factor(-2222, -2226) == doctest::Approx(std::exp(4.0)).epsilon(1e-14));
  CHECK(pseudo_bayes_factor(-2222, -2226) == doctest::Approx(54.6).epsilon(1e-3));
  CHECK(pseudo_bayes_factor(-10, -10) == 1.0);
  CHECK(pseudo_bayes_factor(-3, -5) * pseudo_bayes_factor(-5, -3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS(pseudo_bayes_factor(-INFINITY, -2));
}

TEST_CASE("DIC arithmetic") {
  const DicResult r = dic_from_deviance(Vector::Constant(4, 4440.0), 4436.0);
  CHECK(r.p_d == 4.0);
  CHECK(r.dic == 4444.0);
  CHECK(r.d_bar == 4440.0);
}

TEST_CASE("DIC of a degenerate chain and of a duplicated data set") {
  ScenarioSpec s = ScenarioSpec::defaults(Scenario::I);
  s.num_clusters = 10;
  Rng rng(2);
  const Dataset data = generate_scenario(s, rng).dataset;
  const Vector cuts = quantile_cutpoints(data, 3).points();
  // Seven identical draws of values that are not binary fractions.
  Matrix g(7, 6);
  for (int m = 0; m < 7; ++m) g.row(m) << 0.1 + 0.2, 0.2, 0.3, 0.9, 0.45, 1.1;
  PosteriorChain c = manual_chain(FrailtyLawKind::gaussian, cuts, g, Vector::Ones(7));
  for (int m = 0; m < 7; ++m) c.frailties.row(m) = Vector::LinSpaced(10, -0.7, 0.3 + 0.1).transpose();
  const DicResult r = compute_dic(c, data);
  CHECK(r.p_d == 0.0);
  CHECK(r.dic == r.d_bar);

  Dataset doubled = data;
  doubled.records.insert(doubled.records.end(), data.records.begin(), data.records.end());
  const DicResult r2 = compute_dic(c, doubled);
  CHECK(r2.d_bar == doctest::Approx(2.0 * r.d_bar).epsilon(1e-13));
}

TEST_CASE("draw summaries") {
  const ParameterSummary s = summarize_draws("a", {1.0, 2.0, 3.0});
  CHECK(s.median == 2.0);
  CHECK(s.mean == 2.0);
  CHECK(s.sd == 1.0);
  std::vector<double> sym;
  for (int k = -50; k <= 50; ++k) sym.push_back(5.0 + 0.1 * k);
  const ParameterSummary t = summarize_draws("b", sym);
  CHECK(t.median == doctest::Approx(5.0));
  CHECK(t.median - t.lower == doctest::Approx(t.upper - t.median).epsilon(1e-12));
}

TEST_CASE("posterior table, curve formatting and draw selection") {
  Matrix g(2, 3);
  g << 0.1, 0.5, -0.2, 0.3, 0.7, 0.0;
  const PosteriorChain c = manual_chain(FrailtyLawKind::ldtfp, row({1.0}), g, row({1.0, 2.0}));
  const auto rows = summarize_posterior(c);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.name);
  CHECK(std::find(names.begin(), names.end(), "lambda[1]") != names.end());
  CHECK(std::find(names.begin(), names.end(), "log_lambda[1]") != names.end());
  CHECK(std::find(names.begin(), names.end(), "theta") != names.end());
  CHECK(std::find(names.begin(), names.end(), "c") != names.end());
  for (const auto& r : rows)
    if (r.name == "lambda[1]") CHECK(r.median == doctest::Approx(0.5 * (std::exp(0.1) + std::exp(0.3))).epsilon(1e-12));
  CHECK(format_parameter_table(rows).rfind("parameter,", 0) == 0);

  PredictiveCurve curve{row({0, 1}), row({1, 0.5}), row({1, 0.4}), row({1, 0.6})};
  CHECK(format_curve(curve).rfind("grid,mean,lower,upper\n", 0) == 0);

  CHECK(selected_draws(10, 0).size() == 10);
  const auto picked = selected_draws(1000, 7);
  CHECK(picked.size() == 7);
  CHECK(std::is_sorted(picked.begin(), picked.end()));
}
