#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "ctxnet/models.hpp"
#include "ctxnet/panel.hpp"
#include "ctxnet/rng.hpp"

namespace ctxnet {

// Initial step X^0: independent per node, one-hot e_k with probability
// event_prob / K for each category, zero otherwise.
struct InitSpec {
  double event_prob = 0.8;
};

// Additive-logistic map of log-ratios g in R^{K-1} onto the K-simplex:
// Z_k = exp(g_k) / (1 + sum_j exp(g_j)), Z_K = 1 / (1 + sum_j exp(g_j)).
Eigen::VectorXd additive_logistic(const Eigen::VectorXd& g);

// Draw from the logistic-normal distribution with log-ratio mean mu and
// covariance Sigma (PSD; a zero matrix gives the deterministic map image).
Eigen::VectorXd sample_logistic_normal(const Eigen::VectorXd& mu,
                                       const Eigen::MatrixXd& Sigma,
                                       CounterRng& rng);
Eigen::VectorXd sample_logistic_normal(const Eigen::VectorXd& mu,
                                       const Eigen::MatrixXd& Sigma,
                                       std::uint64_t seed);

EventPanel simulate_multinomial(const MultinomialModel& model, int T,
                                InitSpec init, std::uint64_t seed);

EventPanel simulate_logistic_normal(const LogisticNormalModel& model, int T,
                                    InitSpec init, std::uint64_t seed);

// group1 nodes follow the dynamic logistic-normal model (noise covariance
// I_{K-1}); group2 nodes draw a multinomial outcome whose observation is
// logistic-normal noise around log-ratio mean e_k (or (-1,...,-1) for the
// baseline category) with scale sigma_contam.
EventPanel simulate_mixture(const MixtureSpec& spec, int T, std::uint64_t seed);

// Zero rows stay zero; event rows become one-hot at the argmax, ties broken
// toward the lowest index.
EventPanel round_to_categorical(const EventPanel& panel);

// Random sparse networks for the scaling studies: each node receives
// floor(s/M) (+1 for the first s mod M nodes) influencer groups sampled
// without replacement, nonzero entries i.i.d. U(lo, hi).
struct SparseNetworkConfig {
  int M = 10;
  int K = 2;
  int s = 10;
  double lo = -2.0;
  double hi = 2.0;
};

MultinomialModel make_scaling_multinomial(const SparseNetworkConfig& cfg, std::uint64_t seed);
LogisticNormalModel make_scaling_ln_constq(const SparseNetworkConfig& cfg, double q0,
                                           std::uint64_t seed);
// A and B share one support draw per node; Sigma = sigma2 * I, eta = log 4.
LogisticNormalModel make_scaling_ln_joint(const SparseNetworkConfig& cfg, double sigma2,
                                          std::uint64_t seed);

}  // namespace ctxnet
