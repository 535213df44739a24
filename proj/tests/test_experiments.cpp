#include <doctest.h>

#include <cmath>

#include "ctxnet/experiments.hpp"
#include "ctxnet/inference.hpp"
#include "ctxnet/rng.hpp"

using namespace ctxnet;

TEST_CASE("fit_loglog_slope") {
  std::vector<std::pair<double, double>> inv_t;
  for (double T : {500.0, 1000.0, 2000.0, 4000.0}) inv_t.emplace_back(T, 3.7 / T);
  CHECK(fit_loglog_slope(inv_t) == doctest::Approx(-1.0).epsilon(1e-12));

  std::vector<std::pair<double, double>> pow_t;
  for (double T : {500.0, 1000.0, 2000.0, 4000.0}) {
    pow_t.emplace_back(T, 2.0 / std::pow(T, 1.2));
  }
  CHECK(fit_loglog_slope(pow_t) == doctest::Approx(-1.2).epsilon(1e-12));

  // hand-computed least squares on 4 points
  std::vector<std::pair<double, double>> pts = {{1.0, 2.0}, {2.0, 3.0}, {4.0, 5.0}, {8.0, 6.0}};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sx += std::log(x);
    sy += std::log(y);
    sxx += std::log(x) * std::log(x);
    sxy += std::log(x) * std::log(y);
  }
  double expected = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
  CHECK(fit_loglog_slope(pts) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, 0.0}, {3.0, 2.0}}),
                  std::invalid_argument);
}

TEST_CASE("standard_error equals sample standard deviation over sqrt(n)") {
  std::vector<double> xs = {1.0, 2.0, 4.0, 8.0, 16.0};
  double mean = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / (xs.size() - 1));
  CHECK(standard_error(xs) == doctest::Approx(sd / std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("score_edges equals a brute-force support comparison") {
  CounterRng rng(3);
  InfluenceTensor est(4, 2, 3), truth(4, 2, 3);
  for (double& v : est.data()) v = rng.next_double() < 0.3 ? rng.next_uniform(-1, 1) : 0.0;
  for (double& v : truth.data()) v = rng.next_double() < 0.3 ? rng.next_uniform(-1, 1) : 0.0;
  std::vector<int> targets = {0, 2};
  const double threshold = 0.25;
  EdgeScore score = score_edges(est, truth, threshold, targets);

  double mx = 0.0;
  for (double v : est.data()) mx = std::max(mx, std::abs(v));
  int tp = 0, fp = 0, fn = 0;
  for (int m : targets) {
    for (int k = 0; k < 2; ++k) {
      for (int mp = 0; mp < 4; ++mp) {
        for (int kp = 0; kp < 3; ++kp) {
          bool e = std::abs(est.at(m, k, mp, kp)) > threshold * mx;
          bool t = truth.at(m, k, mp, kp) != 0.0;
          tp += e && t;
          fp += e && !t;
          fn += !e && t;
        }
      }
    }
  }
  CHECK(score.tp == tp);
  CHECK(score.fp == fp);
  CHECK(score.fn == fn);
  if (tp + fp > 0) CHECK(score.precision == doctest::Approx(double(tp) / (tp + fp)));
  if (tp + fn > 0) CHECK(score.recall == doctest::Approx(double(tp) / (tp + fn)));

  // the truth as its own estimate scores perfectly
  EdgeScore perfect = score_edges(truth, truth, 1e-9, targets);
  if (perfect.tp > 0) {
    CHECK(perfect.precision == doctest::Approx(1.0));
    CHECK(perfect.recall == doctest::Approx(1.0));
    CHECK(perfect.f1 == doctest::Approx(1.0));
  }
}

TEST_CASE("run_scaling: determinism, error decay, and the empty-network floor") {
  ScalingConfig cfg;
  cfg.kind = ScalingKind::LnConstQ;
  cfg.Ms = {8};
  cfg.s_multipliers = {1};
  cfg.Ts = {300, 1200};
  cfg.trials = 4;
  cfg.lambda_coeff = 0.13;
  cfg.seed = 5;

  ScalingResult a = run_scaling(cfg, 1);
  ScalingResult b = run_scaling(cfg, 4);  // worker count must not change results
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].mean_mse_A == b.cells[i].mean_mse_A);
    CHECK(a.cells[i].se_mse_A == b.cells[i].se_mse_A);
  }

  // more data, lower error
  REQUIRE(a.cells.size() == 2);
  CHECK(a.cells[1].mean_mse_A < a.cells[0].mean_mse_A);
  CHECK(a.cells[0].se_mse_A >= 0.0);

  // empty network: the estimate stays within the aggregate soft-threshold
  // bias budget, lambda^2 per parameter
  ScalingConfig empty = cfg;
  empty.Ms = {10};
  empty.s_multipliers = {0};
  empty.trials = 3;
  ScalingResult e = run_scaling(empty, 2);
  for (const ScalingCell& cell : e.cells) {
    double lambda = 0.13 * cfg.K * std::sqrt(std::log(10.0) / cell.T);
    double n_params = 10.0 * (cfg.K - 1) * 10.0 * cfg.K;
    CHECK(cell.mean_mse_A <= 10.0 * n_params * lambda * lambda);
  }

  std::string csv = scaling_to_csv(a);
  CHECK(csv.find("M,s,T,trials,mean_mse_A") == 0);
  CHECK(csv.find("\n8,8,300,4,") != std::string::npos);
}

TEST_CASE("run_alpha_sweep: the unfitted block stays at the zero initializer") {
  AlphaSweepConfig cfg;
  cfg.T = 300;
  cfg.M = 6;
  cfg.s = 6;
  cfg.sigma2s = {1.0};
  cfg.alpha_grid = {0.0, 0.4, 1.0};
  cfg.lambda_coeff_grid = {0.08};
  cfg.trials = 2;
  cfg.seed = 9;
  AlphaSweepResult res = run_alpha_sweep(cfg, 2);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    CounterRng sub = CounterRng(cfg.seed).substream(0xA1u, trial);
    std::uint64_t net_seed = sub.next_u64();
    SparseNetworkConfig net{cfg.M, cfg.K, cfg.s, cfg.entry_lo, cfg.entry_hi};
    LogisticNormalModel model = make_scaling_ln_joint(net, 1.0, net_seed);
    const auto& occ = std::get<DynamicOccurrence>(model.occurrence);
    InfluenceTensor zeroA(cfg.M, cfg.K - 1, cfg.K), zeroB(cfg.M, 1, cfg.K);
    // alpha = 0: A never moves; alpha = 1: B never moves
    CHECK(res.mse_A[0][0][trial] ==
          doctest::Approx(frobenius_sq_diff(zeroA, model.A)).epsilon(1e-12));
    CHECK(res.mse_B[0][2][trial] ==
          doctest::Approx(frobenius_sq_diff(zeroB, occ.B)).epsilon(1e-12));
    // fitted blocks do better than the zero initializer
    CHECK(res.mse_A[0][2][trial] < res.mse_A[0][0][trial]);
    CHECK(res.mse_B[0][0][trial] < res.mse_B[0][2][trial]);
  }

  std::string csv = alpha_sweep_to_csv(res);
  CHECK(csv.find("sigma2,alpha,mean_mse_A") == 0);
}

TEST_CASE("run_mixture_study: ground truth layout and perfect self-score") {
  MixtureStudyConfig cfg;
  cfg.T = 400;
  cfg.seeds = {3};
  MixtureStudyResult res = run_mixture_study(cfg, 2);

  // group-1 rows carry the relative network, group-2 rows the transformed
  // absolute one (whose baseline slice is empty, so values pass through)
  const MixtureSpec& spec = cfg.spec;
  CHECK(res.truth_relative.at(0, 0, 5, 0) == 0.5);
  CHECK(res.truth_relative.at(1, 0, 0, 0) == 1.0);
  CHECK(res.truth_relative.at(5, 0, 0, 0) == 2.0);
  CHECK(res.truth_relative.at(6, 0, 5, 0) == 0.7);

  EdgeScore self1 = score_edges(res.truth_relative, res.truth_relative, cfg.threshold,
                                spec.group1);
  EdgeScore self2 = score_edges(res.truth_relative, res.truth_relative, cfg.threshold,
                                spec.group2);
  CHECK(self1.precision == doctest::Approx(1.0));
  CHECK(self1.recall == doctest::Approx(1.0));
  CHECK(self2.precision == doctest::Approx(1.0));
  CHECK(self2.recall == doctest::Approx(1.0));

  REQUIRE(res.reports.size() == 1);
  CHECK(res.reports[0].seed == 3);
  std::string csv = mixture_to_csv(res);
  CHECK(csv.find("seed,method,target_group") == 0);
  CHECK(csv.find("logistic-normal,group1") != std::string::npos);
}

TEST_CASE("scaling decay holds for all three model kinds") {
  for (ScalingKind kind : {ScalingKind::Multinomial, ScalingKind::LnConstQ,
                           ScalingKind::LnJoint}) {
    ScalingConfig cfg;
    cfg.kind = kind;
    cfg.Ms = {8};
    cfg.s_multipliers = {1};
    cfg.Ts = {300, 2400};
    cfg.trials = 4;
    cfg.lambda_coeff = kind == ScalingKind::Multinomial ? 0.12
                       : kind == ScalingKind::LnConstQ  ? 0.13
                                                        : 0.08;
    cfg.seed = 31;
    ScalingResult res = run_scaling(cfg, 4);
    REQUIRE(res.cells.size() == 2);
    CHECK(res.cells[1].mean_mse_A < res.cells[0].mean_mse_A);
    if (kind == ScalingKind::LnJoint) {
      CHECK(res.cells[1].mean_mse_B < res.cells[0].mean_mse_B);
    }
  }
}
