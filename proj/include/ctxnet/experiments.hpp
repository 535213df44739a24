#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxnet/models.hpp"
#include "ctxnet/simulate.hpp"
#include "ctxnet/solver.hpp"

namespace ctxnet {

enum class ScalingKind { Multinomial, LnConstQ, LnJoint };

// MSE scaling study: simulate -> fit with lambda = c*K*sqrt(log M / T) ->
// record ||Ahat - A||_F^2 per (M, s, T) cell.
struct ScalingConfig {
  ScalingKind kind = ScalingKind::LnConstQ;
  std::vector<int> Ms{10, 20};
  std::vector<int> s_multipliers{1, 2};  // s = multiplier * M
  std::vector<int> Ts{500, 1000, 2000, 4000};
  int trials = 10;
  int K = 2;
  double lambda_coeff = 0.13;
  double alpha = 0.4;    // joint kind only
  double sigma2 = 1.0;   // joint noise level
  double q0 = 0.8;       // const-q occurrence probability
  std::uint64_t seed = 1;
};

struct ScalingCell {
  int M = 0, s = 0, T = 0, trials = 0;
  double mean_mse_A = 0.0, se_mse_A = 0.0, normalized_A = 0.0;
  double mean_mse_B = 0.0, se_mse_B = 0.0, normalized_B = 0.0;  // joint only
};

struct ScalingCurve {
  int M = 0, s = 0;
  double slope_A = 0.0;
  double slope_B = 0.0;  // joint only
};

struct ScalingResult {
  ScalingConfig cfg;
  std::vector<ScalingCell> cells;
  std::vector<ScalingCurve> curves;  // log-log slope of mean MSE vs T
};

ScalingResult run_scaling(const ScalingConfig& cfg, int threads = 0);
std::string scaling_to_csv(const ScalingResult& res);

// Estimation error against alpha with CV-selected lambda per trial; dashed
// references are the separate estimations at alpha = 1 (A) and alpha = 0 (B).
struct AlphaSweepConfig {
  int T = 1000, M = 20, s = 20, K = 2;
  std::vector<double> sigma2s{1.0, 2.0};
  std::vector<double> alpha_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> lambda_coeff_grid{0.02, 0.05, 0.12, 0.3};
  int trials = 20;
  double entry_lo = -1.0, entry_hi = 1.0;
  std::uint64_t seed = 1;
};

struct AlphaSweepResult {
  AlphaSweepConfig cfg;
  // indexed [sigma2][alpha][trial]
  std::vector<std::vector<std::vector<double>>> mse_A;
  std::vector<std::vector<std::vector<double>>> mse_B;

  double mean_A(int is, int ia) const;
  double mean_B(int is, int ia) const;
  // per-trial alpha minimizing the A-block error
  double best_alpha_for_A(int is, int trial) const;
};

AlphaSweepResult run_alpha_sweep(const AlphaSweepConfig& cfg, int threads = 0);
std::string alpha_sweep_to_csv(const AlphaSweepResult& res);

// Mixture benchmark: joint fit on the raw panel vs multinomial fit on the
// rounded panel, compared on thresholded relative-network edges per target
// group.
struct MixtureStudyConfig {
  int T = 10000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double threshold = 0.1;
  double lambda_coeff_joint = 0.08;
  double lambda_coeff_mn = 0.12;
  double alpha = 0.4;
  MixtureSpec spec = MixtureSpec::benchmark_default();
};

struct EdgeScore {
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Thresholded support of `estimate` (normalized by its max |entry|) against
// the exact nonzero support of `truth`, restricted to target nodes.
EdgeScore score_edges(const InfluenceTensor& estimate, const InfluenceTensor& truth,
                      double threshold, const std::vector<int>& target_nodes);

struct MixtureSeedReport {
  std::uint64_t seed = 0;
  EdgeScore ln_group1, ln_group2;  // logistic-normal estimate
  EdgeScore mn_group1, mn_group2;  // multinomial estimate (relative transform)
};

struct MixtureStudyResult {
  MixtureStudyConfig cfg;
  InfluenceTensor truth_relative;  // combined ground-truth relative network
  std::vector<MixtureSeedReport> reports;
};

MixtureStudyResult run_mixture_study(const MixtureStudyConfig& cfg, int threads = 0);
std::string mixture_to_csv(const MixtureStudyResult& res);

// OLS slope of log(y) against log(x); requires >= 3 points, all positive.
double fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

double sample_mean(const std::vector<double>& xs);
// sample standard deviation / sqrt(n)
double standard_error(const std::vector<double>& xs);

}  // namespace ctxnet
