#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "ctxnet/panel.hpp"
#include "ctxnet/tensor.hpp"

namespace ctxnet {

// Log-ratio view of a compositional panel: Y[t, m, k] = log(X[t,m,k]/X[t,m,K])
// for event rows (mask true), zero elsewhere.
struct LogRatioPanel {
  int T_plus_1 = 0, M = 0, Km1 = 0;
  std::vector<double> Y;          // row-major [t, m, k], k in 0..K-2
  std::vector<std::uint8_t> mask; // [t, m]

  double at(int t, int m, int k) const {
    return Y[(static_cast<std::size_t>(t) * M + m) * Km1 + k];
  }
  bool event(int t, int m) const {
    return mask[static_cast<std::size_t>(t) * M + m] != 0;
  }
  ConstMapRowMat matrix() const { return {Y.data(), T_plus_1, M * Km1}; }
};

// clip_eps > 0 raises entries below clip_eps in event rows and renormalizes
// before transforming; clip_eps == 0 requires strictly positive event rows.
LogRatioPanel log_ratio_transform(const EventPanel& panel, double clip_eps = 0.0);

// log(1 + sum_i exp(x_i)), stable against overflow.
double multinomial_link(std::span<const double> x);
// gradient component i: exp(x_i) / (1 + sum_j exp(x_j))
Eigen::VectorXd multinomial_link_grad(std::span<const double> x);

double softplus(double x);
double logistic(double x);

struct LossResult {
  double value = 0.0;
  InfluenceTensor grad;        // same dims as the network argument
  Eigen::MatrixXd grad_nu;     // filled when want_intercept_grad
};

struct CombinedLossResult {
  double value = 0.0;
  InfluenceTensor grad_A;
  InfluenceTensor grad_B;
  Eigen::MatrixXd grad_nu;
  Eigen::VectorXd grad_eta;
};

// Per-node terms of each loss; the full losses below are their sums. All are
// averaged over the T transitions of the panel.
double multinomial_loss_node(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                             const EventPanel& panel, int m);
double ln_squared_loss_node(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                            const LogRatioPanel& lr, const EventPanel& panel, int m);
double bernoulli_loss_node(const InfluenceTensor& B, const Eigen::VectorXd& eta,
                           const EventPanel& panel, int m);

LossResult multinomial_loss(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                            const EventPanel& panel, bool want_intercept_grad = false);

LossResult ln_squared_loss(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                           const LogRatioPanel& lr, const EventPanel& panel,
                           bool want_intercept_grad = false);

LossResult bernoulli_loss(const InfluenceTensor& B, const Eigen::VectorXd& eta,
                          const EventPanel& panel, bool want_intercept_grad = false);

// alpha * L_LN(A) + (1 - alpha) * L_Bern(B)
CombinedLossResult combined_objective(const InfluenceTensor& A, const InfluenceTensor& B,
                                      double alpha, const Eigen::MatrixXd& nu,
                                      const Eigen::VectorXd& eta, const EventPanel& panel,
                                      const LogRatioPanel& lr,
                                      bool want_intercept_grad = false);

}  // namespace ctxnet
