#pragma once

#include "frailty/common.hpp"
#include "frailty/hazard.hpp"
#include "frailty/sampler.hpp"

#include <functional>
#include <string>
#include <vector>

namespace frailty {

/// Draw-averaged curve with pointwise equal-tailed bands.
struct PredictiveCurve {
  Vector grid;
  Vector mean;
  Vector lower;
  Vector upper;
};

struct PredictiveOptions {
  double level = 0.95;
  /// Use at most this many evenly spaced retained draws (0 = all).
  int max_draws = 0;
  int order = 32;     // Gauss-Legendre points per finest set
  double tail = 8.0;  // truncation in units of sqrt(theta)
};

/// Indices of the draws used under `max_draws`.
std::vector<int> selected_draws(int retained, int max_draws);

/// S(t | w) for one draw: integral of exp(-Lambda_0(t) exp(w'xi + e)) dG_x(e).
Vector draw_survival(const PosteriorChain& chain, int draw, const Vector& profile,
                     const Vector& grid, const PredictiveOptions& options = {});

/// Posterior predictive survival for the full covariate vector w.
PredictiveCurve predictive_survival(const PosteriorChain& chain, const Vector& profile,
                                    const Vector& grid, const PredictiveOptions& options = {});

/// Posterior predictive frailty density g(e | x). With `shifted`, the
/// density of e + x'xi_x, where xi_x are the cluster-covariate effects.
PredictiveCurve predictive_frailty_density(const PosteriorChain& chain, const Vector& x,
                                           const Vector& grid, bool shifted = false,
                                           const PredictiveOptions& options = {});

struct LpmlResult {
  double lpml = 0.0;
  Vector log_cpo;
  std::vector<std::string> warnings;
};

/// Harmonic-mean CPO from an M x n_obs matrix of log f(D_ij | Omega^(m)).
LpmlResult compute_lpml(const Matrix& record_loglik);
LpmlResult compute_lpml(const PosteriorChain& chain);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double d_bar = 0.0;
  double d_hat = 0.0;  // deviance at the posterior mean
};

/// From per-draw deviances and the deviance at the posterior mean.
DicResult dic_from_deviance(const Vector& deviance, double deviance_at_mean);

/// Evaluates log L(gamma, e); used at every draw and at the posterior mean.
using LoglikEvaluator = std::function<double(const Vector& gamma, const Vector& frailties)>;

DicResult compute_dic(const PosteriorChain& chain, const LoglikEvaluator& evaluator);
/// Convenience overload using the exact PH likelihood of `data`.
DicResult compute_dic(const PosteriorChain& chain, const Dataset& data);

double pseudo_bayes_factor(double lpml_a, double lpml_b);

struct ComparisonReport {
  double lpml = 0.0;
  double dic = 0.0;
  double p_d = 0.0;
  double d_bar = 0.0;
  Vector log_cpo;
};

ComparisonReport compare_report(const PosteriorChain& chain, const Dataset& data);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Quantile summary of a sample.
ParameterSummary summarize_draws(const std::string& name, std::vector<double> draws,
                                 double level = 0.95);

/// Medians and equal-tailed intervals of every scalar parameter: log and
/// natural-scale hazard heights, xi (and raw-scale xi if the data were
/// standardized), theta and c.
std::vector<ParameterSummary> summarize_posterior(const PosteriorChain& chain, double level = 0.95);

std::string format_curve(const PredictiveCurve& curve, char delimiter = ',');
std::string format_parameter_table(const std::vector<ParameterSummary>& rows, char delimiter = ',');

}  // namespace frailty
