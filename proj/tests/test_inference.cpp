#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "ctxnet/inference.hpp"
#include "ctxnet/objective.hpp"
#include "ctxnet/rng.hpp"
#include "ctxnet/simulate.hpp"
#include "ctxnet/solver.hpp"

using namespace ctxnet;

namespace {

InfluenceTensor random_tensor(int M, int K_out, int K_in, std::uint64_t seed, double scale = 1.0) {
  InfluenceTensor A(M, K_out, K_in);
  CounterRng rng(seed);
  for (double& v : A.data()) v = rng.next_uniform(-scale, scale);
  return A;
}

}  // namespace

TEST_CASE("predict_multinomial: tie rules, limits, enumeration") {
  const int M = 2, K = 3;
  MultinomialModel model{InfluenceTensor(M, K, K), Eigen::MatrixXd::Zero(M, K)};
  Eigen::RowVectorXd x_prev = Eigen::RowVectorXd::Zero(M * K);

  // uniform over K+1 slots: the tie goes to no-event
  MnPrediction uni = predict_multinomial(model, x_prev, 0);
  CHECK(uni.p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 0; k <= K; ++k) CHECK(uni.p[k] == doctest::Approx(1.0 / (K + 1)));
  CHECK(uni.x_hat.norm() == 0.0);

  // dominant intercept forces category 1
  MultinomialModel strong = model;
  strong.nu(0, 0) = 30.0;
  MnPrediction e1 = predict_multinomial(strong, x_prev, 0);
  CHECK(e1.x_hat[0] == 1.0);

  // probabilities match a direct enumeration of the transition law
  CounterRng rng(9);
  MultinomialModel rnd{random_tensor(M, K, K, 10, 1.0), Eigen::MatrixXd::Zero(M, K)};
  rnd.nu(1, 2) = 0.3;
  Eigen::RowVectorXd x(M * K);
  for (int i = 0; i < M * K; ++i) x[i] = rng.next_double() * 0.5;
  for (int m = 0; m < M; ++m) {
    MnPrediction pred = predict_multinomial(rnd, x, m);
    Eigen::VectorXd u = rnd.A.node_matrix(m) * x.transpose() + rnd.nu.row(m).transpose();
    double denom = 1.0;
    for (int k = 0; k < K; ++k) denom += std::exp(u[k]);
    for (int k = 0; k < K; ++k) {
      CHECK(pred.p[k] == doctest::Approx(std::exp(u[k]) / denom).epsilon(1e-10));
    }
    CHECK(pred.p[K] == doctest::Approx(1.0 / denom).epsilon(1e-10));
  }
}

TEST_CASE("predict_multinomial: event-row category ranking is shift-invariant") {
  const int M = 1, K = 4;
  MultinomialModel model{random_tensor(M, K, K, 11, 1.0), Eigen::MatrixXd::Zero(M, K)};
  CounterRng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::RowVectorXd x(M * K);
    for (int i = 0; i < M * K; ++i) x[i] = rng.next_double();
    MnPrediction base = predict_multinomial(model, x, 0);
    MultinomialModel shifted = model;
    shifted.nu.row(0).array() += rng.next_uniform(-2.0, 2.0);
    MnPrediction shift = predict_multinomial(shifted, x, 0);
    // among categories the ranking is unchanged; only the no-event slot moves
    int base_best = 0, shift_best = 0;
    for (int k = 1; k < K; ++k) {
      if (base.p[k] > base.p[base_best]) base_best = k;
      if (shift.p[k] > shift.p[shift_best]) shift_best = k;
    }
    CHECK(base_best == shift_best);
  }
}

TEST_CASE("predict_logistic_normal: limits and squared-error optimality of q-scaling") {
  const int M = 1, K = 2;
  LogisticNormalModel model;
  model.A = InfluenceTensor(M, K - 1, K);
  model.nu = Eigen::MatrixXd::Zero(M, K - 1);
  model.Sigma = Eigen::MatrixXd::Identity(K - 1, K - 1);
  model.occurrence = ConstantQ{Eigen::VectorXd::Constant(M, 1.0)};
  Eigen::RowVectorXd x_prev = Eigen::RowVectorXd::Zero(M * K);

  Eigen::VectorXd x_hat = predict_logistic_normal(model, x_prev, 0);
  CHECK(x_hat[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(x_hat[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(x_hat.sum() == doctest::Approx(1.0));  // sums to q

  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(M);
  Eigen::VectorXd zero_hat = predict_logistic_normal(model, x_prev, 0, &q0);
  CHECK(zero_hat.norm() == 0.0);

  // among predictions c*Zhat, the expected squared error is minimized near
  // c = q at the symmetric configuration
  const double q = 0.7;
  const int n = 200000;
  CounterRng rng(13);
  Eigen::VectorXd zhat(2);
  zhat << 0.5, 0.5;
  std::vector<double> cs = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> err(cs.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    if (rng.next_double() < q) {
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
      x = sample_logistic_normal(mu, model.Sigma, rng);
    }
    for (std::size_t c = 0; c < cs.size(); ++c) {
      err[c] += (x - cs[c] * zhat).squaredNorm();
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < cs.size(); ++c) {
    if (err[c] < err[best]) best = c;
  }
  CHECK(cs[best] == doctest::Approx(q).epsilon(0.16));  // within one grid step
}

TEST_CASE("prediction_error: trivial values") {
  const int M = 3, K = 2, T = 50;
  // near-deterministic chain: every step is category 1 for every node
  MultinomialModel det{InfluenceTensor(M, K, K), Eigen::MatrixXd::Zero(M, K)};
  det.nu.col(0).setConstant(50.0);
  det.nu.col(1).setConstant(-50.0);
  EventPanel panel = simulate_multinomial(det, T, InitSpec{1.0}, 17);
  CHECK(prediction_error(panel, det, 10) == doctest::Approx(0.0));

  // a category-vs-category miss contributes ||e1 - e2||^2 = 2 per node-step
  MultinomialModel wrong = det;
  wrong.nu.col(0).setConstant(-50.0);
  wrong.nu.col(1).setConstant(50.0);
  CHECK(prediction_error(panel, wrong, T) == doctest::Approx(2.0));

  // one of three nodes wrong on a single step: 2/M
  EventPanel one(2, M, K, PanelKind::Categorical);
  one.at(1, 0, 0) = 1.0;
  MultinomialModel mixed{InfluenceTensor(M, K, K), Eigen::MatrixXd::Zero(M, K)};
  mixed.nu(0, 1) = 50.0;   // predicts e2 while the panel has e1
  mixed.nu(1, 0) = -50.0;  // others predict no-event, matching zero rows
  mixed.nu(1, 1) = -50.0;
  mixed.nu(2, 0) = -50.0;
  mixed.nu(2, 1) = -50.0;
  CHECK(prediction_error(one, mixed, 1) == doctest::Approx(2.0 / M).epsilon(1e-12));
}

TEST_CASE("fit_baseline: constant-process MLEs") {
  const int M = 2, K = 3, T = 10;
  EventPanel panel(T + 1, M, K, PanelKind::Categorical);
  for (int t = 1; t <= T; ++t) panel.at(t, 0, 0) = 1.0;  // node 0 always category 1
  for (int t = 1; t <= 4; ++t) panel.at(t, 1, 2) = 1.0;  // node 1: 4 events of cat 3

  BaselineModel bl = fit_baseline(panel, BaselineKind::ConstantProcess,
                                  MetricKind::Multinomial);
  CHECK(bl.cat_probs(0, 0) == doctest::Approx(1.0));
  CHECK(bl.cat_probs(0, K) == doctest::Approx(0.0));
  CHECK(bl.cat_probs(1, 2) == doctest::Approx(0.4));
  CHECK(bl.cat_probs(1, K) == doctest::Approx(0.6));

  // logistic-normal family: mean log-ratio equals the masked sample mean
  LogisticNormalModel gen;
  gen.A = InfluenceTensor(M, K - 1, K);
  gen.nu = Eigen::MatrixXd::Constant(M, K - 1, 0.4);
  gen.Sigma = Eigen::MatrixXd::Identity(K - 1, K - 1);
  gen.occurrence = ConstantQ{Eigen::VectorXd::Constant(M, 0.8)};
  EventPanel comp = simulate_logistic_normal(gen, 400, InitSpec{}, 19);
  BaselineModel cl = fit_baseline(comp, BaselineKind::ConstantProcess,
                                  MetricKind::LogisticNormal);
  LogRatioPanel lr = log_ratio_transform(comp);
  for (int m = 0; m < M; ++m) {
    double mean = 0.0;
    int n = 0;
    for (int t = 1; t <= comp.T(); ++t) {
      if (!lr.event(t, m)) continue;
      mean += lr.at(t, m, 0);
      ++n;
    }
    CHECK(cl.mean_logratio(m, 0) == doctest::Approx(mean / n).epsilon(1e-12));
    CHECK(cl.q_const[m] == doctest::Approx(static_cast<double>(n) / comp.T()));
  }
}

TEST_CASE("fit_baseline: BAR recovers the sign pattern of the occurrence network") {
  const int M = 4, K = 1, T = 5000;
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SparseNetworkConfig net{M, K, M};
    MultinomialModel truth = make_scaling_multinomial(net, seed * 97);
    truth.nu.setZero();
    EventPanel panel = simulate_multinomial(truth, T, InitSpec{0.5}, seed * 97 + 1);
    BaselineModel bl = fit_baseline(panel, BaselineKind::ContextIndependent,
                                    MetricKind::Multinomial, 0.01);
    bool all_signs = true;
    for (int m = 0; m < M; ++m) {
      for (int mp = 0; mp < M; ++mp) {
        double tv = truth.A.at(m, 0, mp, 0);
        if (tv == 0.0) continue;
        double ev = bl.bar_B.at(m, 0, mp, 0);
        if (tv * ev <= 0.0) all_signs = false;
      }
    }
    if (all_signs) ++recovered;
  }
  CHECK(recovered >= 2);
}

TEST_CASE("absolute_to_relative") {
  const int M = 2, K = 3;
  // identical slices across the output category: relative network is zero
  InfluenceTensor flat(M, K, K);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K; ++k) {
      for (int mp = 0; mp < M; ++mp) {
        for (int kp = 0; kp < K; ++kp) flat.at(m, k, mp, kp) = 0.3 * (mp + 1) + kp;
      }
    }
  }
  InfluenceTensor rel = absolute_to_relative(flat);
  for (double v : rel.data()) CHECK(v == doctest::Approx(0.0));

  // zero baseline slice: the relative network equals the first K-1 slices
  InfluenceTensor nob = random_tensor(M, K, K, 23, 1.0);
  for (int m = 0; m < M; ++m) {
    for (int mp = 0; mp < M; ++mp) {
      for (int kp = 0; kp < K; ++kp) nob.at(m, K - 1, mp, kp) = 0.0;
    }
  }
  InfluenceTensor rel2 = absolute_to_relative(nob);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K - 1; ++k) {
      for (int mp = 0; mp < M; ++mp) {
        for (int kp = 0; kp < K; ++kp) {
          CHECK(rel2.at(m, k, mp, kp) == nob.at(m, k, mp, kp));
        }
      }
    }
  }

  // invariant to adding any per-(m, m', k') constant across output categories
  InfluenceTensor base = random_tensor(M, K, K, 24, 1.0);
  InfluenceTensor shifted = base;
  CounterRng rng(25);
  for (int m = 0; m < M; ++m) {
    for (int mp = 0; mp < M; ++mp) {
      for (int kp = 0; kp < K; ++kp) {
        double c = rng.next_uniform(-2.0, 2.0);
        for (int k = 0; k < K; ++k) shifted.at(m, k, mp, kp) += c;
      }
    }
  }
  CHECK(frobenius_sq_diff(absolute_to_relative(base), absolute_to_relative(shifted)) <
        1e-20);
}

TEST_CASE("rebase: relabeling, round trip, likelihood invariance") {
  const int M = 2, K = 4, Km1 = K - 1;
  InfluenceTensor A = random_tensor(M, Km1, K, 31, 1.0);
  Eigen::MatrixXd nu(M, Km1);
  CounterRng rng(32);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < Km1; ++k) nu(m, k) = rng.next_uniform(-1.0, 1.0);
  }

  CHECK_THROWS_AS(rebase(A, nu, K), std::invalid_argument);
  CHECK_THROWS_AS(rebase(A, nu, 0), std::invalid_argument);

  // zero chosen-slot slices: rebasing is a pure relabeling
  InfluenceTensor zl = A;
  Eigen::MatrixXd nu_zl = nu;
  for (int m = 0; m < M; ++m) {
    nu_zl(m, 0) = 0.0;
    for (int mp = 0; mp < M; ++mp) {
      for (int kp = 0; kp < K; ++kp) zl.at(m, 0, mp, kp) = 0.0;
    }
  }
  auto [rl, nu_rl] = rebase(zl, nu_zl, 1);
  // slots after rebasing at 1: old slots 2,3 then the old baseline (zeros)
  for (int m = 0; m < M; ++m) {
    for (int mp = 0; mp < M; ++mp) {
      for (int kp = 0; kp < K; ++kp) {
        CHECK(rl.at(m, 0, mp, kp) == zl.at(m, 1, mp, kp));
        CHECK(rl.at(m, 1, mp, kp) == zl.at(m, 2, mp, kp));
        CHECK(rl.at(m, 2, mp, kp) == doctest::Approx(0.0));
      }
    }
  }

  // rebasing at the last non-baseline slot twice is an exact involution
  auto [once, nu_once] = rebase(A, nu, Km1);
  auto [twice, nu_twice] = rebase(once, nu_once, Km1);
  CHECK(frobenius_sq_diff(twice, A) < 1e-22);
  CHECK((nu_twice - nu).norm() < 1e-12);

  // Gaussian log-likelihood is invariant once Y and Sigma are transformed
  const int l = 2, lb = l - 1;
  LogisticNormalModel gen;
  gen.A = A;
  gen.nu = nu;
  gen.Sigma = Eigen::MatrixXd::Identity(Km1, Km1) * 0.7;
  gen.Sigma(0, 1) = gen.Sigma(1, 0) = 0.2;
  gen.occurrence = ConstantQ{Eigen::VectorXd::Constant(M, 0.9)};
  EventPanel panel = simulate_logistic_normal(gen, 200, InitSpec{}, 33);
  LogRatioPanel lr = log_ratio_transform(panel);

  // L maps Y (vs baseline K) to log-ratios vs category l
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(Km1, Km1);
  int slot = 0;
  for (int k = 0; k < Km1; ++k) {
    if (k == lb) continue;
    L(slot, k) = 1.0;
    L(slot, lb) = -1.0;
    ++slot;
  }
  L(Km1 - 1, lb) = -1.0;
  auto [At, nut] = rebase(A, nu, l);
  Eigen::MatrixXd Sigma_t = L * gen.Sigma * L.transpose();

  auto gaussian_nll = [&](const InfluenceTensor& W, const Eigen::MatrixXd& inter,
                          const Eigen::MatrixXd& Sig, const Eigen::MatrixXd* Lmap) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Sig);
    double logdet = 0.0;
    for (int i = 0; i < Km1; ++i) logdet += std::log(ldlt.vectorD()[i]);
    double nll = 0.0;
    for (int t = 0; t < panel.T(); ++t) {
      for (int m = 0; m < M; ++m) {
        if (!lr.event(t + 1, m)) continue;
        Eigen::VectorXd y(Km1);
        for (int k = 0; k < Km1; ++k) y[k] = lr.at(t + 1, m, k);
        if (Lmap) y = (*Lmap) * y;
        Eigen::VectorXd mu = W.node_matrix(m) * panel.step(t).transpose() +
                             inter.row(m).transpose();
        Eigen::VectorXd r = y - mu;
        nll += 0.5 * r.dot(ldlt.solve(r)) + 0.5 * logdet;
      }
    }
    return nll;
  };
  double orig = gaussian_nll(A, nu, gen.Sigma, nullptr);
  double reb = gaussian_nll(At, nut, Sigma_t, &L);
  CHECK(orig == doctest::Approx(reb).epsilon(1e-9));
}

TEST_CASE("extract_edges") {
  const int M = 3, K = 2;
  InfluenceTensor zero(M, K, K);
  EdgeList empty = extract_edges(zero, 0.1, EdgeMode::Absolute);
  CHECK(empty.edges.empty());

  InfluenceTensor one(M, K, K);
  one.at(1, 0, 2, 1) = 2.0;
  EdgeList single = extract_edges(one, 0.5, EdgeMode::Absolute);
  REQUIRE(single.edges.size() == 1);
  CHECK(single.edges[0].source == 2);
  CHECK(single.edges[0].target == 1);
  CHECK(single.edges[0].k_in == 1);
  CHECK(single.edges[0].k_out == 0);
  CHECK(single.edges[0].weight == doctest::Approx(1.0));
  CHECK(single.edges[0].raw == doctest::Approx(2.0));
  CHECK(single.edges[0].stimulatory);

  InfluenceTensor net = random_tensor(M, K, K, 41, 1.0);
  int nonzero = 0;
  for (double v : net.data()) nonzero += v != 0.0 ? 1 : 0;
  EdgeList all = extract_edges(net, 0.0, EdgeMode::Absolute);
  CHECK(static_cast<int>(all.edges.size()) == nonzero);

  // scale invariance of the normalized weights
  InfluenceTensor scaled = net;
  for (double& v : scaled.data()) v *= 7.5;
  EdgeList a = extract_edges(net, 0.3, EdgeMode::Absolute);
  EdgeList b = extract_edges(scaled, 0.3, EdgeMode::Absolute);
  REQUIRE(a.edges.size() == b.edges.size());
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    CHECK(a.edges[i].weight == doctest::Approx(b.edges[i].weight).epsilon(1e-12));
    CHECK(a.edges[i].source == b.edges[i].source);
  }

  // max |weight| is 1 whenever the list is nonempty
  double mx = 0.0;
  for (const Edge& e : a.edges) mx = std::max(mx, std::abs(e.weight));
  CHECK(mx == doctest::Approx(1.0));

  CHECK_THROWS_AS(extract_edges(net, 1.0, EdgeMode::Absolute), std::invalid_argument);
}

TEST_CASE("relative support matches direct extraction when the baseline is silent") {
  const int M = 2, K = 3;
  InfluenceTensor abs = random_tensor(M, K, K, 43, 1.0);
  for (int m = 0; m < M; ++m) {
    for (int mp = 0; mp < M; ++mp) {
      for (int kp = 0; kp < K; ++kp) abs.at(m, K - 1, mp, kp) = 0.0;
    }
  }
  InfluenceTensor rel = absolute_to_relative(abs);
  InfluenceTensor first(M, K - 1, K);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K - 1; ++k) {
      for (int mp = 0; mp < M; ++mp) {
        for (int kp = 0; kp < K; ++kp) first.at(m, k, mp, kp) = abs.at(m, k, mp, kp);
      }
    }
  }
  EdgeList from_rel = extract_edges(rel, 0.2, EdgeMode::Relative);
  EdgeList from_first = extract_edges(first, 0.2, EdgeMode::Relative);
  REQUIRE(from_rel.edges.size() == from_first.edges.size());
  for (std::size_t i = 0; i < from_rel.edges.size(); ++i) {
    CHECK(from_rel.edges[i].source == from_first.edges[i].source);
    CHECK(from_rel.edges[i].target == from_first.edges[i].target);
    CHECK(from_rel.edges[i].k_in == from_first.edges[i].k_in);
    CHECK(from_rel.edges[i].k_out == from_first.edges[i].k_out);
  }
}

TEST_CASE("edge exports carry raw and normalized weights") {
  InfluenceTensor net(2, 1, 2);
  net.at(0, 0, 1, 0) = -0.5;
  net.at(1, 0, 0, 1) = 1.0;
  EdgeList edges = extract_edges(net, 0.1, EdgeMode::Occurrence);
  std::string js = edges_to_json(edges);
  CHECK(js.find("\"occurrence\"") != std::string::npos);
  CHECK(js.find("\"inhibitory\"") != std::string::npos);
  CHECK(js.find("\"raw\"") != std::string::npos);
  std::string dot = edges_to_dot(edges);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("style=dashed") != std::string::npos);
  CHECK(dot.find("n1 -> n0") != std::string::npos);
}

TEST_CASE("prediction-error ordering: full model beats baselines on joint data") {
  const int M = 5, K = 2, T = 2000;
  int wins_ci = 0, wins_cp = 0;
  const int seeds = 3;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    SparseNetworkConfig net{M, K, M};
    LogisticNormalModel truth = make_scaling_ln_joint(net, 1.0, 1000 + seed);
    EventPanel panel = simulate_logistic_normal(truth, T, InitSpec{}, 2000 + seed);
    const auto& occ = std::get<DynamicOccurrence>(truth.occurrence);
    int split = (T * 7) / 10;

    EventPanel train = panel.window(0, split + 1);
    FitConfig cfg;
    cfg.lambda = 0.08 * K * std::sqrt(std::log(static_cast<double>(M)) / split);
    cfg.alpha = 0.4;
    JointFitResult fit = fit_joint(train, truth.nu, occ.eta, cfg);
    LogisticNormalModel fitted;
    fitted.A = fit.A;
    fitted.nu = truth.nu;
    fitted.Sigma = truth.Sigma;
    fitted.occurrence = DynamicOccurrence{fit.B, occ.eta};
    double full = prediction_error(panel, fitted, split + 1);

    BaselineModel ci = fit_baseline(train, BaselineKind::ContextIndependent,
                                    MetricKind::LogisticNormal, 0.01);
    BaselineModel cp = fit_baseline(train, BaselineKind::ConstantProcess,
                                    MetricKind::LogisticNormal);
    double e_ci = prediction_error(panel, ci, split + 1);
    double e_cp = prediction_error(panel, cp, split + 1);
    if (full <= e_ci) ++wins_ci;
    if (e_ci <= e_cp) ++wins_cp;
  }
  CHECK(wins_ci >= 2);
  CHECK(wins_cp >= 2);
}
