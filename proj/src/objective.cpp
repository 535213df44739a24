#include "ctxnet/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctxnet {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double multinomial_link(std::span<const double> x) {
  // log-sum-exp over {0, x_1, ..., x_K} with max subtraction
  double mx = 0.0;
  for (double v : x) mx = std::max(mx, v);
  double s = std::exp(-mx);
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

Eigen::VectorXd multinomial_link_grad(std::span<const double> x) {
  double mx = 0.0;
  for (double v : x) mx = std::max(mx, v);
  double denom = std::exp(-mx);
  Eigen::VectorXd g(static_cast<int>(x.size()));
  for (int i = 0; i < g.size(); ++i) {
    g[i] = std::exp(x[i] - mx);
    denom += g[i];
  }
  g /= denom;
  return g;
}

LogRatioPanel log_ratio_transform(const EventPanel& panel, double clip_eps) {
  if (clip_eps < 0.0) throw std::invalid_argument("log_ratio_transform: clip_eps < 0");
  const int T1 = panel.T_plus_1(), M = panel.M(), K = panel.K();
  if (K < 2) throw std::invalid_argument("log_ratio_transform: needs K >= 2");
  LogRatioPanel lr;
  lr.T_plus_1 = T1;
  lr.M = M;
  lr.Km1 = K - 1;
  lr.Y.assign(static_cast<std::size_t>(T1) * M * (K - 1), 0.0);
  lr.mask.assign(static_cast<std::size_t>(T1) * M, 0);

  std::vector<double> row(K);
  for (int t = 0; t < T1; ++t) {
    for (int m = 0; m < M; ++m) {
      if (panel.row_is_zero(t, m)) continue;
      double sum = 0.0;
      double min_entry = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        double v = panel.at(t, m, k);
        if (clip_eps > 0.0 && v < clip_eps) v = clip_eps;
        row[k] = v;
        sum += v;
        min_entry = std::min(min_entry, v);
      }
      if (min_entry <= 0.0) {
        // initial rows are covariates only, never regression targets, so
        // vertex rows at t = 0 are masked out rather than rejected
        if (t == 0) continue;
        throw std::runtime_error("log_ratio_transform: zero entry in event row at (t=" +
                                 std::to_string(t) + ", node=" + std::to_string(m) + ")");
      }
      lr.mask[static_cast<std::size_t>(t) * M + m] = 1;
      if (clip_eps > 0.0) {
        for (int k = 0; k < K; ++k) row[k] /= sum;
      }
      double log_base = std::log(row[K - 1]);
      for (int k = 0; k < K - 1; ++k) {
        lr.Y[(static_cast<std::size_t>(t) * M + m) * (K - 1) + k] = std::log(row[k]) - log_base;
      }
    }
  }
  return lr;
}

namespace {

void check_mn_dims(const InfluenceTensor& A, const Eigen::MatrixXd& nu, const EventPanel& panel) {
  if (A.M() != panel.M() || A.K_in() != panel.K() || A.K_out() != panel.K()) {
    throw std::invalid_argument("multinomial loss: dimension mismatch between A and panel");
  }
  if (nu.rows() != panel.M() || nu.cols() != panel.K()) {
    throw std::invalid_argument("multinomial loss: nu shape");
  }
  if (panel.T() < 1) throw std::invalid_argument("multinomial loss: panel has no transitions");
}

void check_ln_dims(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                   const LogRatioPanel& lr, const EventPanel& panel) {
  if (A.M() != panel.M() || A.K_in() != panel.K() || A.K_out() != panel.K() - 1) {
    throw std::invalid_argument("ln loss: dimension mismatch between A and panel");
  }
  if (nu.rows() != panel.M() || nu.cols() != panel.K() - 1) {
    throw std::invalid_argument("ln loss: nu shape");
  }
  if (lr.T_plus_1 != panel.T_plus_1() || lr.M != panel.M() || lr.Km1 != panel.K() - 1) {
    throw std::invalid_argument("ln loss: log-ratio panel does not match panel");
  }
}

void check_bern_dims(const InfluenceTensor& B, const Eigen::VectorXd& eta, const EventPanel& panel) {
  if (B.M() != panel.M() || B.K_in() != panel.K() || B.K_out() != 1) {
    throw std::invalid_argument("bernoulli loss: dimension mismatch between B and panel");
  }
  if (eta.size() != panel.M()) throw std::invalid_argument("bernoulli loss: eta length");
}

// One-hot/weight outcomes for node m: rows t = 0..T-1 hold X^{t+1}_m.
RowMat node_outcomes(const EventPanel& panel, int m) {
  const int T = panel.T(), K = panel.K();
  RowMat X(T, K);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) X(t, k) = panel.at(t + 1, m, k);
  }
  return X;
}

}  // namespace

double multinomial_loss_node(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                             const EventPanel& panel, int m) {
  const int T = panel.T(), K = panel.K();
  auto X = panel.matrix();
  auto W = A.node_matrix(m);
  RowMat U = X.topRows(T) * W.transpose();  // T x K intensities
  U.rowwise() += nu.row(m);
  double value = 0.0;
  for (int t = 0; t < T; ++t) {
    value += multinomial_link({U.row(t).data(), static_cast<std::size_t>(K)});
    for (int k = 0; k < K; ++k) {
      double x = panel.at(t + 1, m, k);
      if (x != 0.0) value -= U(t, k) * x;
    }
  }
  return value / T;
}

LossResult multinomial_loss(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                            const EventPanel& panel, bool want_intercept_grad) {
  check_mn_dims(A, nu, panel);
  const int T = panel.T(), K = panel.K(), M = panel.M();
  auto X = panel.matrix();
  LossResult out;
  out.grad = InfluenceTensor(M, K, K);
  if (want_intercept_grad) out.grad_nu = Eigen::MatrixXd::Zero(M, K);
  for (int m = 0; m < M; ++m) {
    auto W = A.node_matrix(m);
    RowMat U = X.topRows(T) * W.transpose();
    U.rowwise() += nu.row(m);
    RowMat P(T, K);
    for (int t = 0; t < T; ++t) {
      out.value += multinomial_link({U.row(t).data(), static_cast<std::size_t>(K)});
      P.row(t) = multinomial_link_grad({U.row(t).data(), static_cast<std::size_t>(K)});
      for (int k = 0; k < K; ++k) {
        double x = panel.at(t + 1, m, k);
        if (x != 0.0) out.value -= U(t, k) * x;
      }
    }
    RowMat R = P - node_outcomes(panel, m);  // T x K
    out.grad.node_matrix(m) = (R.transpose() * X.topRows(T)) / T;
    if (want_intercept_grad) out.grad_nu.row(m) = R.colwise().sum() / T;
  }
  out.value /= T;
  return out;
}

double ln_squared_loss_node(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                            const LogRatioPanel& lr, const EventPanel& panel, int m) {
  const int T = panel.T(), Km1 = panel.K() - 1;
  auto X = panel.matrix();
  auto W = A.node_matrix(m);
  RowMat Mu = X.topRows(T) * W.transpose();
  Mu.rowwise() += nu.row(m);
  double value = 0.0;
  for (int t = 0; t < T; ++t) {
    if (!lr.event(t + 1, m)) continue;
    for (int k = 0; k < Km1; ++k) {
      double r = lr.at(t + 1, m, k) - Mu(t, k);
      value += r * r;
    }
  }
  return value / (2.0 * T);
}

LossResult ln_squared_loss(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                           const LogRatioPanel& lr, const EventPanel& panel,
                           bool want_intercept_grad) {
  check_ln_dims(A, nu, lr, panel);
  const int T = panel.T(), Km1 = panel.K() - 1, M = panel.M();
  auto X = panel.matrix();
  LossResult out;
  out.grad = InfluenceTensor(M, Km1, panel.K());
  if (want_intercept_grad) out.grad_nu = Eigen::MatrixXd::Zero(M, Km1);
  for (int m = 0; m < M; ++m) {
    auto W = A.node_matrix(m);
    RowMat Mu = X.topRows(T) * W.transpose();
    Mu.rowwise() += nu.row(m);
    RowMat R = RowMat::Zero(T, Km1);  // masked residuals Y - Mu
    for (int t = 0; t < T; ++t) {
      if (!lr.event(t + 1, m)) continue;
      for (int k = 0; k < Km1; ++k) {
        R(t, k) = lr.at(t + 1, m, k) - Mu(t, k);
      }
    }
    out.value += R.squaredNorm() / (2.0 * T);
    out.grad.node_matrix(m) = -(R.transpose() * X.topRows(T)) / T;
    if (want_intercept_grad) out.grad_nu.row(m) = -R.colwise().sum() / T;
  }
  return out;
}

double bernoulli_loss_node(const InfluenceTensor& B, const Eigen::VectorXd& eta,
                           const EventPanel& panel, int m) {
  const int T = panel.T();
  auto X = panel.matrix();
  auto W = B.node_matrix(m);
  Eigen::VectorXd Z = X.topRows(T) * W.transpose();
  Z.array() += eta[m];
  double value = 0.0;
  for (int t = 0; t < T; ++t) {
    value += softplus(Z[t]);
    if (!panel.row_is_zero(t + 1, m)) value -= Z[t];
  }
  return value / T;
}

LossResult bernoulli_loss(const InfluenceTensor& B, const Eigen::VectorXd& eta,
                          const EventPanel& panel, bool want_intercept_grad) {
  check_bern_dims(B, eta, panel);
  const int T = panel.T(), M = panel.M();
  auto X = panel.matrix();
  LossResult out;
  out.grad = InfluenceTensor(M, 1, panel.K());
  if (want_intercept_grad) out.grad_nu = Eigen::MatrixXd::Zero(M, 1);
  for (int m = 0; m < M; ++m) {
    auto W = B.node_matrix(m);
    Eigen::VectorXd Z = X.topRows(T) * W.transpose();
    Z.array() += eta[m];
    Eigen::VectorXd R(T);  // logistic(z) - indicator
    for (int t = 0; t < T; ++t) {
      double ind = panel.row_is_zero(t + 1, m) ? 0.0 : 1.0;
      out.value += softplus(Z[t]) - Z[t] * ind;
      R[t] = logistic(Z[t]) - ind;
    }
    out.grad.node_matrix(m) = (R.transpose() * X.topRows(T)) / T;
    if (want_intercept_grad) out.grad_nu(m, 0) = R.sum() / T;
  }
  out.value /= T;
  return out;
}

CombinedLossResult combined_objective(const InfluenceTensor& A, const InfluenceTensor& B,
                                      double alpha, const Eigen::MatrixXd& nu,
                                      const Eigen::VectorXd& eta, const EventPanel& panel,
                                      const LogRatioPanel& lr, bool want_intercept_grad) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("combined_objective: alpha outside [0,1]");
  LossResult ln = ln_squared_loss(A, nu, lr, panel, want_intercept_grad);
  LossResult bern = bernoulli_loss(B, eta, panel, want_intercept_grad);
  CombinedLossResult out;
  out.value = alpha * ln.value + (1.0 - alpha) * bern.value;
  out.grad_A = std::move(ln.grad);
  for (double& v : out.grad_A.data()) v *= alpha;
  out.grad_B = std::move(bern.grad);
  for (double& v : out.grad_B.data()) v *= 1.0 - alpha;
  if (want_intercept_grad) {
    out.grad_nu = alpha * ln.grad_nu;
    out.grad_eta = (1.0 - alpha) * bern.grad_nu.col(0);
  }
  return out;
}

}  // namespace ctxnet
