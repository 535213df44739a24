#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ctxnet/models.hpp"
#include "ctxnet/panel.hpp"
#include "ctxnet/tensor.hpp"

namespace ctxnet {

// ---- network post-processing ----

// A_rel[m, k] = A_abs[m, k] - A_abs[m, K] for k < K
InfluenceTensor absolute_to_relative(const InfluenceTensor& A_abs);

// Reparameterize a relative network to baseline category l (1-based,
// 1 <= l <= K-1): slot k of the result is the influence on category k
// relative to l, with the old baseline K taking l's slot.
std::pair<InfluenceTensor, Eigen::MatrixXd> rebase(const InfluenceTensor& A,
                                                   const Eigen::MatrixXd& nu, int l);

enum class EdgeMode { Absolute, Relative, Occurrence };

struct Edge {
  int source = 0;      // m'
  int target = 0;      // m
  int k_in = 0;        // source category
  int k_out = 0;       // target category slot; -1 for occurrence edges
  double weight = 0.0; // normalized, in [-1, 1]
  double raw = 0.0;
  bool stimulatory = true;
};

struct EdgeList {
  EdgeMode mode = EdgeMode::Absolute;
  double normalizer = 0.0;  // max |entry| of the source network
  std::vector<Edge> edges;
};

// Normalizes by the global max |entry| and keeps entries with normalized
// magnitude strictly above threshold; empty for an all-zero network.
EdgeList extract_edges(const InfluenceTensor& net, double threshold, EdgeMode mode);

std::string edges_to_json(const EdgeList& list);
std::string edges_to_dot(const EdgeList& list);

// ---- prediction ----

struct MnPrediction {
  Eigen::VectorXd p;      // K+1 probabilities, last slot = no event
  Eigen::VectorXd x_hat;  // one-hot or zero
};

// x_prev is the flattened observed step X^t (length M*K).
MnPrediction predict_multinomial(const MultinomialModel& model,
                                 const Eigen::RowVectorXd& x_prev, int m);

// q_hat_const supplies the per-node occurrence estimate for constant-q
// models (the estimator never produces one; T_m/T is the MLE).
Eigen::VectorXd predict_logistic_normal(const LogisticNormalModel& model,
                                        const Eigen::RowVectorXd& x_prev, int m,
                                        const Eigen::VectorXd* q_hat_const = nullptr);

// Empirical per-node event frequency over outcome steps 1..t_end-1.
Eigen::VectorXd empirical_q(const EventPanel& panel, int t_end = -1);

enum class MetricKind { Multinomial, LogisticNormal };

// ---- baselines ----

enum class BaselineKind { ConstantProcess, ContextIndependent };

struct BaselineModel {
  BaselineKind kind = BaselineKind::ConstantProcess;
  MetricKind family = MetricKind::Multinomial;
  // multinomial family: per-node (p_1..p_K, p_noevent) frequencies
  Eigen::MatrixXd cat_probs;
  // logistic-normal family: per-node mean log-ratio and event frequency
  Eigen::MatrixXd mean_logratio;
  Eigen::VectorXd q_const;
  // context-independent occurrence: Bernoulli autoregression on indicators
  InfluenceTensor bar_B;  // (M, 1, M, 1)
  Eigen::VectorXd bar_eta;
};

// ConstantProcess: zero network, intercept-only MLE. ContextIndependent:
// lasso-penalized Bernoulli autoregression on the event indicators plus a
// constant per-node category distribution.
BaselineModel fit_baseline(const EventPanel& panel, BaselineKind kind,
                           MetricKind family, double bar_lambda = 0.0,
                           int threads = 0);

Eigen::VectorXd predict_baseline(const BaselineModel& model, const EventPanel& panel,
                                 int t, int m);

// ---- prediction error (one-step-ahead on observed history) ----

// Mean of ||X^t_m - Xhat^t_m||^2 over t in [holdout_start, T] and all nodes.
double prediction_error(const EventPanel& panel, const MultinomialModel& model,
                        int holdout_start);
double prediction_error(const EventPanel& panel, const LogisticNormalModel& model,
                        int holdout_start, const Eigen::VectorXd* q_hat_const = nullptr);
double prediction_error(const EventPanel& panel, const BaselineModel& model,
                        int holdout_start);

}  // namespace ctxnet
