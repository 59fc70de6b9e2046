#include "frailty/inference.hpp"

#include "frailty/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace frailty {

namespace {

void require_draws(const PosteriorChain& chain) {
  if (chain.retained() == 0) throw std::invalid_argument("posterior chain has no retained draws");
}

/// Pointwise mean and percentile band over the rows of `values` (draws x grid).
PredictiveCurve band(const Vector& grid, const Matrix& values, double level) {
  PredictiveCurve curve{grid, Vector(grid.size()), Vector(grid.size()), Vector(grid.size())};
  const double alpha = 1.0 - level;
  std::vector<double> column(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    for (Eigen::Index m = 0; m < values.rows(); ++m) column[static_cast<std::size_t>(m)] = values(m, g);
    curve.mean[g] = pairwise_sum(column) / static_cast<double>(column.size());
    std::sort(column.begin(), column.end());
    curve.lower[g] = sorted_quantile(column, 0.5 * alpha);
    curve.upper[g] = sorted_quantile(column, 1.0 - 0.5 * alpha);
  }
  return curve;
}

}  // namespace

std::vector<int> selected_draws(int retained, int max_draws) {
  std::vector<int> out;
  if (retained <= 0) return out;
  if (max_draws <= 0 || max_draws >= retained) {
    out.resize(static_cast<std::size_t>(retained));
    for (int m = 0; m < retained; ++m) out[static_cast<std::size_t>(m)] = m;
    return out;
  }
  out.resize(static_cast<std::size_t>(max_draws));
  for (int k = 0; k < max_draws; ++k)
    out[static_cast<std::size_t>(k)] =
        static_cast<int>((static_cast<long>(k) * retained) / max_draws);
  return out;
}

Vector draw_survival(const PosteriorChain& chain, int draw, const Vector& profile,
                     const Vector& grid, const PredictiveOptions& options) {
  const int p = chain.num_covariates();
  if (profile.size() != p)
    throw std::invalid_argument("profile must have " + std::to_string(p) + " covariates");
  const TailfreeForest forest = chain.forest(draw);
  const Vector x = chain.forest_input(profile.tail(chain.num_cluster_covariates));
  const auto quad = forest.quadrature(x, options.order, options.tail);
  const double lp = profile.dot(chain.xi(draw));
  const Eigen::ArrayXd weights = quad.weights.array() / quad.weights.sum();
  const Eigen::ArrayXd risk = (lp + quad.nodes.array()).exp();
  const PiecewiseHazard h = chain.hazard(draw);
  Vector s(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    if (!(grid[g] >= 0.0)) throw std::invalid_argument("survival grid must be non-negative");
    const double cum = cumulative_hazard(h, grid[g]);
    s[g] = cum == 0.0 ? 1.0 : (weights * (-cum * risk).exp()).sum();
  }
  return s;
}

PredictiveCurve predictive_survival(const PosteriorChain& chain, const Vector& profile,
                                    const Vector& grid, const PredictiveOptions& options) {
  require_draws(chain);
  for (Eigen::Index g = 1; g < grid.size(); ++g)
    if (!(grid[g] > grid[g - 1])) throw std::invalid_argument("survival grid must be increasing");
  const auto draws = selected_draws(chain.retained(), options.max_draws);
  Matrix values(static_cast<Eigen::Index>(draws.size()), grid.size());
  for (std::size_t k = 0; k < draws.size(); ++k)
    values.row(static_cast<Eigen::Index>(k)) =
        draw_survival(chain, draws[k], profile, grid, options).transpose();
  PredictiveCurve curve = band(grid, values, options.level);
  for (Eigen::Index g = 1; g < grid.size(); ++g)
    if (curve.mean[g] > curve.mean[g - 1] + 1e-12)
      throw std::logic_error("predictive survival curve is not monotone");
  return curve;
}

PredictiveCurve predictive_frailty_density(const PosteriorChain& chain, const Vector& x,
                                           const Vector& grid, bool shifted,
                                           const PredictiveOptions& options) {
  require_draws(chain);
  if (x.size() != chain.num_cluster_covariates)
    throw std::invalid_argument("cluster covariate vector has the wrong length");
  const Vector fx = chain.forest_input(x);
  const auto draws = selected_draws(chain.retained(), options.max_draws);
  Matrix values(static_cast<Eigen::Index>(draws.size()), grid.size());
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const int m = draws[k];
    const TailfreeForest forest = chain.forest(m);
    const double shift = shifted ? x.dot(chain.xi(m).tail(chain.num_cluster_covariates)) : 0.0;
    for (Eigen::Index g = 0; g < grid.size(); ++g)
      values(static_cast<Eigen::Index>(k), g) = forest.density(grid[g] - shift, fx);
  }
  return band(grid, values, options.level);
}

LpmlResult compute_lpml(const Matrix& record_loglik) {
  if (record_loglik.rows() == 0)
    throw std::invalid_argument("per-observation log-likelihood matrix is empty");
  LpmlResult out;
  const double log_m = std::log(static_cast<double>(record_loglik.rows()));
  out.log_cpo.resize(record_loglik.cols());
  for (Eigen::Index j = 0; j < record_loglik.cols(); ++j) {
    const Vector neg = -record_loglik.col(j);
    double value = -(log_sum_exp(neg) - log_m);
    if (std::isnan(value) || neg.maxCoeff() == std::numeric_limits<double>::infinity()) {
      value = -std::numeric_limits<double>::infinity();
      out.warnings.push_back("observation " + std::to_string(j + 1) +
                             " has zero likelihood under some draw; CPO set to 0");
    }
    out.log_cpo[j] = value;
  }
  std::vector<double> terms(out.log_cpo.data(), out.log_cpo.data() + out.log_cpo.size());
  out.lpml = pairwise_sum(terms);
  return out;
}

LpmlResult compute_lpml(const PosteriorChain& chain) { return compute_lpml(chain.record_loglik); }

DicResult dic_from_deviance(const Vector& deviance, double deviance_at_mean) {
  if (deviance.size() == 0) throw std::invalid_argument("no deviance draws");
  DicResult r;
  r.d_bar = shifted_mean(std::span<const double>(deviance.data(), deviance.size()));
  r.d_hat = deviance_at_mean;
  r.p_d = r.d_bar - r.d_hat;
  r.dic = r.d_bar + r.p_d;
  return r;
}

DicResult compute_dic(const PosteriorChain& chain, const LoglikEvaluator& evaluator) {
  require_draws(chain);
  const int m = chain.retained();
  Vector deviance(m);
  for (int k = 0; k < m; ++k)
    deviance[k] = -2.0 * evaluator(chain.gamma.row(k).transpose(), chain.frailties.row(k).transpose());
  auto column_means = [](const Matrix& draws) {
    Vector means(draws.cols());
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
      const Vector col = draws.col(j);
      means[j] = shifted_mean(std::span<const double>(col.data(), col.size()));
    }
    return means;
  };
  const Vector gamma_mean = column_means(chain.gamma);
  const Vector frailty_mean = column_means(chain.frailties);
  return dic_from_deviance(deviance, -2.0 * evaluator(gamma_mean, frailty_mean));
}

DicResult compute_dic(const PosteriorChain& chain, const Dataset& data) {
  const PhLikelihood lik(data, chain.cuts);
  return compute_dic(chain, [&](const Vector& g, const Vector& e) { return lik.loglik(g, e); });
}

double pseudo_bayes_factor(double lpml_a, double lpml_b) {
  if (!std::isfinite(lpml_a) || !std::isfinite(lpml_b))
    throw std::invalid_argument("pseudo Bayes factor needs finite LPML values");
  return std::exp(lpml_a - lpml_b);
}

ComparisonReport compare_report(const PosteriorChain& chain, const Dataset& data) {
  ComparisonReport r;
  const LpmlResult lpml = compute_lpml(chain);
  const DicResult dic = compute_dic(chain, data);
  r.lpml = lpml.lpml;
  r.log_cpo = lpml.log_cpo;
  r.dic = dic.dic;
  r.p_d = dic.p_d;
  r.d_bar = dic.d_bar;
  return r;
}

ParameterSummary summarize_draws(const std::string& name, std::vector<double> draws, double level) {
  if (draws.empty()) throw std::invalid_argument("no draws for " + name);
  ParameterSummary s;
  s.name = name;
  const double n = static_cast<double>(draws.size());
  s.mean = pairwise_sum(draws) / n;
  double ss = 0.0;
  for (double d : draws) ss += (d - s.mean) * (d - s.mean);
  s.sd = draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(draws.begin(), draws.end());
  const double alpha = 1.0 - level;
  s.median = sorted_quantile(draws, 0.5);
  s.lower = sorted_quantile(draws, 0.5 * alpha);
  s.upper = sorted_quantile(draws, 1.0 - 0.5 * alpha);
  return s;
}

std::vector<ParameterSummary> summarize_posterior(const PosteriorChain& chain, double level) {
  require_draws(chain);
  const int m = chain.retained();
  std::vector<ParameterSummary> out;
  auto column = [&](const Matrix& mat, int c) {
    std::vector<double> v(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) v[static_cast<std::size_t>(k)] = mat(k, c);
    return v;
  };
  const int k_count = chain.num_intervals();
  for (int k = 0; k < k_count; ++k)
    out.push_back(summarize_draws("log_lambda[" + std::to_string(k + 1) + "]", column(chain.gamma, k), level));
  for (int k = 0; k < k_count; ++k) {
    auto v = column(chain.gamma, k);
    for (double& x : v) x = std::exp(x);
    out.push_back(summarize_draws("lambda[" + std::to_string(k + 1) + "]", std::move(v), level));
  }
  const int p = chain.num_covariates();
  auto name_of = [&](int j) {
    return j < static_cast<int>(chain.covariate_names.size()) ? chain.covariate_names[j]
                                                              : "w" + std::to_string(j + 1);
  };
  for (int j = 0; j < p; ++j)
    out.push_back(summarize_draws("xi[" + name_of(j) + "]", column(chain.gamma, k_count + j), level));
  if (chain.standardization && static_cast<int>(chain.standardization->size()) == p) {
    const auto& map = *chain.standardization;
    for (int j = 0; j < p; ++j) {
      auto v = column(chain.gamma, k_count + j);
      for (double& x : v) x /= map[j].scale;
      out.push_back(summarize_draws("xi_raw[" + name_of(j) + "]", std::move(v), level));
    }
  }
  out.push_back(summarize_draws("theta", std::vector<double>(chain.theta.data(), chain.theta.data() + m), level));
  if (chain.coefficient_dim() > 0 && std::isfinite(chain.precision[0]))
    out.push_back(summarize_draws("c", std::vector<double>(chain.precision.data(), chain.precision.data() + m), level));
  return out;
}

std::string format_curve(const PredictiveCurve& curve, char delimiter) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "grid" << delimiter << "mean" << delimiter << "lower" << delimiter << "upper\n";
  for (Eigen::Index g = 0; g < curve.grid.size(); ++g)
    os << curve.grid[g] << delimiter << curve.mean[g] << delimiter << curve.lower[g] << delimiter
       << curve.upper[g] << '\n';
  return os.str();
}

std::string format_parameter_table(const std::vector<ParameterSummary>& rows, char delimiter) {
  std::ostringstream os;
  os << std::setprecision(8);
  os << "parameter" << delimiter << "mean" << delimiter << "sd" << delimiter << "median" << delimiter
     << "lower" << delimiter << "upper\n";
  for (const auto& r : rows)
    os << r.name << delimiter << r.mean << delimiter << r.sd << delimiter << r.median << delimiter
       << r.lower << delimiter << r.upper << '\n';
  return os.str();
}

}  // namespace frailty
