#include "ctxnet/solver.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>

#include "ctxnet/parallel.hpp"
#include "ctxnet/simulate.hpp"

namespace ctxnet {

Eigen::VectorXd prox_group(const Eigen::VectorXd& v, double tau) {
  if (tau < 0.0) throw std::invalid_argument("prox_group: tau < 0");
  double n = v.norm();
  if (n <= tau) return Eigen::VectorXd::Zero(v.size());
  return (1.0 - tau / n) * v;
}

namespace {

double group_penalty(const RowMat& W, int n_groups, int width) {
  double p = 0.0;
  for (int g = 0; g < n_groups; ++g) p += W.middleCols(g * width, width).norm();
  return p;
}

void apply_group_prox(RowMat& W, int n_groups, int width, double tau) {
  for (int g = 0; g < n_groups; ++g) {
    auto block = W.middleCols(g * width, width);
    double n = block.norm();
    if (n <= tau) {
      block.setZero();
    } else {
      block *= 1.0 - tau / n;
    }
  }
}

// Smooth part of one node's composite objective, on a K_out x D variable
// matrix whose first n_groups*width columns are penalized.
struct SmoothObjective {
  std::function<double(const RowMat&)> value;
  std::function<double(const RowMat&, RowMat&)> value_and_grad;
};

struct ProxResult {
  RowMat W;
  NodeDiagnostics diag;
};

ProxResult prox_gradient(const SmoothObjective& obj, RowMat W0, int n_groups,
                         int width, double lambda, const FitConfig& cfg) {
  const bool backtracking = cfg.step.kind == StepRule::Kind::Backtracking;
  ProxResult res;
  res.W = std::move(W0);
  RowMat G(res.W.rows(), res.W.cols());
  RowMat Wc(res.W.rows(), res.W.cols());
  double F = obj.value(res.W) + lambda * group_penalty(res.W, n_groups, width);
  double eta = backtracking ? cfg.step.init : cfg.step.fixed;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    double l = obj.value_and_grad(res.W, G);
    double lc = 0.0;
    if (backtracking) {
      for (;;) {
        Wc = res.W - eta * G;
        apply_group_prox(Wc, n_groups, width, eta * lambda);
        lc = obj.value(Wc);
        double gd = (G.array() * (Wc - res.W).array()).sum();
        double dd = (Wc - res.W).squaredNorm();
        if (lc <= l + gd + dd / (2.0 * eta) + 1e-12 * (1.0 + std::abs(l))) break;
        eta *= cfg.step.shrink;
        if (eta < cfg.step.min) {
          eta = cfg.step.min;
          break;
        }
      }
    } else {
      Wc = res.W - eta * G;
      apply_group_prox(Wc, n_groups, width, eta * lambda);
      lc = obj.value(Wc);
    }
    double Fc = lc + lambda * group_penalty(Wc, n_groups, width);
    if (backtracking && Fc > F + 1e-9 * (1.0 + std::abs(F))) {
      // sufficient decrease guarantees monotone composite descent
      throw std::logic_error("prox_gradient: objective increased under backtracking");
    }
    double rel = std::abs(F - Fc) / std::max(1.0, std::abs(F));
    res.W.swap(Wc);
    F = Fc;
    res.diag.iterations = it;
    if (rel < cfg.tol) {
      res.diag.converged = true;
      break;
    }
    if (backtracking) eta = std::min(cfg.step.init, eta * 2.0);
  }
  res.diag.objective = F;
  return res;
}

// Covariate matrix: transitions 0..T-1 of the panel, plus a trailing ones
// column when intercepts are being fitted.
RowMat build_covariates(const EventPanel& panel, bool intercept_col) {
  const int T = panel.T(), D = panel.M() * panel.K();
  RowMat X(T, D + (intercept_col ? 1 : 0));
  X.leftCols(D) = panel.matrix().topRows(T);
  if (intercept_col) X.col(D).setOnes();
  return X;
}

struct MnNodeData {
  const RowMat& X;
  RowMat Xnext;                 // T x K outcomes for the node
  Eigen::RowVectorXd nu_fixed;  // empty when the intercept column is in use
  double T;
  int K;
  mutable RowMat U, P;

  MnNodeData(const RowMat& X_, const EventPanel& panel, int m, bool intercept_col,
             const Eigen::MatrixXd& nu)
      : X(X_), T(panel.T()), K(panel.K()) {
    const int Ti = panel.T();
    Xnext.resize(Ti, K);
    for (int t = 0; t < Ti; ++t) {
      for (int k = 0; k < K; ++k) Xnext(t, k) = panel.at(t + 1, m, k);
    }
    if (!intercept_col) nu_fixed = nu.row(m);
    U.resize(Ti, K);
    P.resize(Ti, K);
  }

  double value(const RowMat& W) const {
    U.noalias() = X * W.transpose();
    if (nu_fixed.size() > 0) U.rowwise() += nu_fixed;
    double v = 0.0;
    for (int t = 0; t < static_cast<int>(T); ++t) {
      v += multinomial_link({U.row(t).data(), static_cast<std::size_t>(K)});
      v -= U.row(t).dot(Xnext.row(t));
    }
    return v / T;
  }

  double value_and_grad(const RowMat& W, RowMat& G) const {
    U.noalias() = X * W.transpose();
    if (nu_fixed.size() > 0) U.rowwise() += nu_fixed;
    double v = 0.0;
    for (int t = 0; t < static_cast<int>(T); ++t) {
      v += multinomial_link({U.row(t).data(), static_cast<std::size_t>(K)});
      v -= U.row(t).dot(Xnext.row(t));
      P.row(t) = multinomial_link_grad({U.row(t).data(), static_cast<std::size_t>(K)});
    }
    G.noalias() = (P - Xnext).transpose() * X;
    G /= T;
    return v / T;
  }
};

// The squared loss is quadratic, so the node objective reduces to Gram
// matrices of the masked covariates.
struct LnNodeData {
  Eigen::MatrixXd Gxx;  // D x D
  RowMat C;             // Km1 x D
  double sq = 0.0;
  double T;
  mutable RowMat WG;

  LnNodeData(const RowMat& X, const LogRatioPanel& lr, const EventPanel& panel, int m,
             bool intercept_col, const Eigen::MatrixXd& nu)
      : T(panel.T()) {
    const int Ti = panel.T(), Km1 = panel.K() - 1;
    const int D = static_cast<int>(X.cols());
    int n = 0;
    for (int t = 0; t < Ti; ++t) n += lr.event(t + 1, m) ? 1 : 0;
    RowMat Xm(n, D), Ym(n, Km1);
    int r = 0;
    for (int t = 0; t < Ti; ++t) {
      if (!lr.event(t + 1, m)) continue;
      Xm.row(r) = X.row(t);
      for (int k = 0; k < Km1; ++k) {
        Ym(r, k) = lr.at(t + 1, m, k) - (intercept_col ? 0.0 : nu(m, k));
      }
      ++r;
    }
    Gxx.noalias() = Xm.transpose() * Xm;
    C.noalias() = Ym.transpose() * Xm;
    sq = Ym.squaredNorm();
    WG.resize(Km1, D);
  }

  double value(const RowMat& W) const {
    WG.noalias() = W * Gxx;
    return (sq - 2.0 * (W.array() * C.array()).sum() +
            (W.array() * WG.array()).sum()) /
           (2.0 * T);
  }

  double value_and_grad(const RowMat& W, RowMat& G) const {
    WG.noalias() = W * Gxx;
    G = (WG - C) / T;
    return (sq - 2.0 * (W.array() * C.array()).sum() +
            (W.array() * WG.array()).sum()) /
           (2.0 * T);
  }
};

struct BernNodeData {
  const RowMat& X;
  Eigen::VectorXd ind;  // event indicators of the node at t+1
  double eta_fixed = 0.0;
  double T;
  mutable Eigen::VectorXd Z, R;

  BernNodeData(const RowMat& X_, const EventPanel& panel, int m, bool intercept_col,
               const Eigen::VectorXd& eta)
      : X(X_), T(panel.T()) {
    const int Ti = panel.T();
    ind.resize(Ti);
    for (int t = 0; t < Ti; ++t) ind[t] = panel.row_is_zero(t + 1, m) ? 0.0 : 1.0;
    if (!intercept_col) eta_fixed = eta[m];
    Z.resize(Ti);
    R.resize(Ti);
  }

  double value(const Eigen::RowVectorXd& w) const {
    Z.noalias() = X * w.transpose();
    Z.array() += eta_fixed;
    double v = 0.0;
    for (int t = 0; t < static_cast<int>(T); ++t) v += softplus(Z[t]) - Z[t] * ind[t];
    return v / T;
  }

  double value_and_grad(const Eigen::RowVectorXd& w, Eigen::RowVectorXd& g) const {
    Z.noalias() = X * w.transpose();
    Z.array() += eta_fixed;
    double v = 0.0;
    for (int t = 0; t < static_cast<int>(T); ++t) {
      v += softplus(Z[t]) - Z[t] * ind[t];
      R[t] = logistic(Z[t]) - ind[t];
    }
    g.noalias() = R.transpose() * X;
    g /= T;
    return v / T;
  }
};

SmoothObjective wrap_mn(const MnNodeData& d) {
  return {[&d](const RowMat& W) { return d.value(W); },
          [&d](const RowMat& W, RowMat& G) { return d.value_and_grad(W, G); }};
}

SmoothObjective wrap_ln(const LnNodeData& d) {
  return {[&d](const RowMat& W) { return d.value(W); },
          [&d](const RowMat& W, RowMat& G) { return d.value_and_grad(W, G); }};
}

SmoothObjective wrap_bern(const BernNodeData& d) {
  return {[&d](const RowMat& W) {
            return d.value(Eigen::RowVectorXd(W.row(0)));
          },
          [&d](const RowMat& W, RowMat& G) {
            Eigen::RowVectorXd g(W.cols());
            double v = d.value_and_grad(Eigen::RowVectorXd(W.row(0)), g);
            G.row(0) = g;
            return v;
          }};
}

// alpha L_LN(A) + (1-alpha) L_Bern(b) on the stacked reparameterized matrix
// V = [sqrt(alpha) A; sqrt(1-alpha) b].
struct JointNodeData {
  const LnNodeData& ln;
  const BernNodeData& bern;
  double alpha, sa, sb;
  int Km1;
  mutable RowMat Abuf, Gbuf;
  mutable Eigen::RowVectorXd bbuf, gb;

  JointNodeData(const LnNodeData& ln_, const BernNodeData& bern_, double alpha_, int Km1_,
                int D)
      : ln(ln_), bern(bern_), alpha(alpha_), sa(std::sqrt(alpha_)),
        sb(std::sqrt(1.0 - alpha_)), Km1(Km1_) {
    Abuf.resize(Km1, D);
    Gbuf.resize(Km1, D);
    bbuf.resize(D);
    gb.resize(D);
  }

  double value(const RowMat& V) const {
    Abuf = V.topRows(Km1) / sa;
    bbuf = V.row(Km1) / sb;
    return alpha * ln.value(Abuf) + (1.0 - alpha) * bern.value(bbuf);
  }

  double value_and_grad(const RowMat& V, RowMat& G) const {
    Abuf = V.topRows(Km1) / sa;
    bbuf = V.row(Km1) / sb;
    double v = alpha * ln.value_and_grad(Abuf, Gbuf) +
               (1.0 - alpha) * bern.value_and_grad(bbuf, gb);
    G.topRows(Km1) = sa * Gbuf;
    G.row(Km1) = sb * gb;
    return v;
  }
};

SmoothObjective wrap_joint(const JointNodeData& d) {
  return {[&d](const RowMat& W) { return d.value(W); },
          [&d](const RowMat& W, RowMat& G) { return d.value_and_grad(W, G); }};
}

void check_fit_inputs(const EventPanel& panel, const Eigen::MatrixXd& nu, int nu_cols,
                      const FitConfig& cfg) {
  if (panel.T() < 1) throw std::invalid_argument("fit: panel has no transitions");
  if (nu.rows() != panel.M() || nu.cols() != nu_cols) {
    throw std::invalid_argument("fit: intercept shape does not match panel (nu must be " +
                                std::to_string(panel.M()) + "x" + std::to_string(nu_cols) + ")");
  }
  if (cfg.lambda < 0.0) throw std::invalid_argument("fit: lambda < 0");
  if (cfg.tol <= 0.0) throw std::invalid_argument("fit: tol must be positive");
}

}  // namespace

NodeDiagnostics fit_multinomial_node(const EventPanel& panel, const Eigen::MatrixXd& nu,
                                     const FitConfig& cfg, int m, InfluenceTensor& A,
                                     Eigen::MatrixXd* nu_out) {
  check_fit_inputs(panel, nu, panel.K(), cfg);
  const int K = panel.K(), D = panel.M() * K;
  RowMat X = build_covariates(panel, cfg.fit_intercepts);
  MnNodeData data(X, panel, m, cfg.fit_intercepts, nu);
  RowMat W0 = RowMat::Zero(K, X.cols());
  if (cfg.fit_intercepts) W0.col(D) = nu.row(m).transpose();
  auto res = prox_gradient(wrap_mn(data), std::move(W0), panel.M(), K, cfg.lambda, cfg);
  A.node_matrix(m) = res.W.leftCols(D);
  if (nu_out && cfg.fit_intercepts) nu_out->row(m) = res.W.col(D).transpose();
  return res.diag;
}

NodeDiagnostics fit_logistic_normal_const_q_node(const EventPanel& panel,
                                                 const Eigen::MatrixXd& nu,
                                                 const FitConfig& cfg, int m,
                                                 InfluenceTensor& A,
                                                 Eigen::MatrixXd* nu_out) {
  check_fit_inputs(panel, nu, panel.K() - 1, cfg);
  const int K = panel.K(), Km1 = K - 1, D = panel.M() * K;
  RowMat X = build_covariates(panel, cfg.fit_intercepts);
  LogRatioPanel lr = log_ratio_transform(panel, cfg.clip_eps);
  LnNodeData data(X, lr, panel, m, cfg.fit_intercepts, nu);
  RowMat W0 = RowMat::Zero(Km1, X.cols());
  if (cfg.fit_intercepts) W0.col(D) = nu.row(m).transpose();
  auto res = prox_gradient(wrap_ln(data), std::move(W0), panel.M(), K, cfg.lambda, cfg);
  A.node_matrix(m) = res.W.leftCols(D);
  if (nu_out && cfg.fit_intercepts) nu_out->row(m) = res.W.col(D).transpose();
  return res.diag;
}

namespace {

// `warm` seeds the solver with a previous solution (used by the descending
// penalty path in cross-validation); a null pointer starts at zero.
FitResult fit_multinomial_warm(const EventPanel& panel, const Eigen::MatrixXd& nu,
                               const FitConfig& cfg, int threads,
                               const FitResult* warm) {
  check_fit_inputs(panel, nu, panel.K(), cfg);
  const int M = panel.M(), K = panel.K(), D = M * K;
  FitResult out;
  out.A = InfluenceTensor(M, K, K);
  out.nu = nu;
  out.nodes.resize(M);
  RowMat X = build_covariates(panel, cfg.fit_intercepts);
  parallel_for(M, threads, [&](int m) {
    MnNodeData data(X, panel, m, cfg.fit_intercepts, nu);
    RowMat W0 = RowMat::Zero(K, X.cols());
    if (warm) W0.leftCols(D) = warm->A.node_matrix(m);
    if (cfg.fit_intercepts) {
      W0.col(D) = (warm ? warm->nu : nu).row(m).transpose();
    }
    auto res = prox_gradient(wrap_mn(data), std::move(W0), M, K, cfg.lambda, cfg);
    out.A.node_matrix(m) = res.W.leftCols(D);
    if (cfg.fit_intercepts) out.nu.row(m) = res.W.col(D).transpose();
    out.nodes[m] = res.diag;
  });
  for (const auto& d : out.nodes) out.all_converged = out.all_converged && d.converged;
  return out;
}

FitResult fit_logistic_normal_const_q_warm(const EventPanel& panel,
                                           const Eigen::MatrixXd& nu,
                                           const FitConfig& cfg, int threads,
                                           const FitResult* warm) {
  check_fit_inputs(panel, nu, panel.K() - 1, cfg);
  const int M = panel.M(), K = panel.K(), Km1 = K - 1, D = M * K;
  FitResult out;
  out.A = InfluenceTensor(M, Km1, K);
  out.nu = nu;
  out.nodes.resize(M);
  RowMat X = build_covariates(panel, cfg.fit_intercepts);
  LogRatioPanel lr = log_ratio_transform(panel, cfg.clip_eps);
  parallel_for(M, threads, [&](int m) {
    LnNodeData data(X, lr, panel, m, cfg.fit_intercepts, nu);
    RowMat W0 = RowMat::Zero(Km1, X.cols());
    if (warm) W0.leftCols(D) = warm->A.node_matrix(m);
    if (cfg.fit_intercepts) {
      W0.col(D) = (warm ? warm->nu : nu).row(m).transpose();
    }
    auto res = prox_gradient(wrap_ln(data), std::move(W0), M, K, cfg.lambda, cfg);
    out.A.node_matrix(m) = res.W.leftCols(D);
    if (cfg.fit_intercepts) out.nu.row(m) = res.W.col(D).transpose();
    out.nodes[m] = res.diag;
  });
  for (const auto& d : out.nodes) out.all_converged = out.all_converged && d.converged;
  return out;
}

JointFitResult fit_joint_warm(const EventPanel& panel, const Eigen::MatrixXd& nu,
                              const Eigen::VectorXd& eta, const FitConfig& cfg,
                              int threads, const JointFitResult* warm) {
  check_fit_inputs(panel, nu, panel.K() - 1, cfg);
  if (eta.size() != panel.M()) throw std::invalid_argument("fit_joint: eta length");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) {
    throw std::invalid_argument("fit_joint: alpha outside [0,1]");
  }
  const int M = panel.M(), K = panel.K(), Km1 = K - 1, D = M * K;
  JointFitResult out;
  out.A = InfluenceTensor(M, Km1, K);
  out.B = InfluenceTensor(M, 1, K);
  out.nu = nu;
  out.eta = eta;
  out.nodes.resize(M);
  RowMat X = build_covariates(panel, cfg.fit_intercepts);
  LogRatioPanel lr = log_ratio_transform(panel, cfg.clip_eps);

  if (cfg.alpha == 1.0) {
    // A-only problem with penalty lambda ||A||_R; B stays at its initializer
    FitResult warm_a;
    if (warm) {
      warm_a.A = warm->A;
      warm_a.nu = warm->nu;
    }
    FitResult a = fit_logistic_normal_const_q_warm(panel, nu, cfg, threads,
                                                   warm ? &warm_a : nullptr);
    out.A = std::move(a.A);
    out.nu = std::move(a.nu);
    out.nodes = std::move(a.nodes);
    out.all_converged = a.all_converged;
    return out;
  }
  if (cfg.alpha == 0.0) {
    parallel_for(M, threads, [&](int m) {
      BernNodeData bern(X, panel, m, cfg.fit_intercepts, eta);
      RowMat W0 = RowMat::Zero(1, X.cols());
      if (warm) W0.leftCols(D) = warm->B.node_matrix(m);
      if (cfg.fit_intercepts) W0(0, D) = warm ? warm->eta[m] : eta[m];
      auto res = prox_gradient(wrap_bern(bern), std::move(W0), M, K, cfg.lambda, cfg);
      out.B.node_matrix(m) = res.W.leftCols(D);
      if (cfg.fit_intercepts) out.eta[m] = res.W(0, D);
      out.nodes[m] = res.diag;
    });
    for (const auto& d : out.nodes) out.all_converged = out.all_converged && d.converged;
    return out;
  }

  const double sa = std::sqrt(cfg.alpha), sb = std::sqrt(1.0 - cfg.alpha);
  parallel_for(M, threads, [&](int m) {
    LnNodeData ln(X, lr, panel, m, cfg.fit_intercepts, nu);
    BernNodeData bern(X, panel, m, cfg.fit_intercepts, eta);
    JointNodeData joint(ln, bern, cfg.alpha, Km1, static_cast<int>(X.cols()));
    RowMat W0 = RowMat::Zero(K, X.cols());
    if (warm) {
      W0.topRows(Km1).leftCols(D) = sa * warm->A.node_matrix(m);
      W0.row(Km1).head(D) = sb * warm->B.node_matrix(m);
    }
    if (cfg.fit_intercepts) {
      W0.col(D).head(Km1) = sa * (warm ? warm->nu : nu).row(m).transpose();
      W0(Km1, D) = sb * (warm ? warm->eta[m] : eta[m]);
    }
    auto res = prox_gradient(wrap_joint(joint), std::move(W0), M, K, cfg.lambda, cfg);
    out.A.node_matrix(m) = res.W.topRows(Km1).leftCols(D) / sa;
    out.B.node_matrix(m) = res.W.row(Km1).head(D) / sb;
    if (cfg.fit_intercepts) {
      out.nu.row(m) = res.W.col(D).head(Km1).transpose() / sa;
      out.eta[m] = res.W(Km1, D) / sb;
    }
    out.nodes[m] = res.diag;
  });
  for (const auto& d : out.nodes) out.all_converged = out.all_converged && d.converged;
  return out;
}

}  // namespace

FitResult fit_multinomial(const EventPanel& panel, const Eigen::MatrixXd& nu,
                          const FitConfig& cfg, int threads) {
  return fit_multinomial_warm(panel, nu, cfg, threads, nullptr);
}

FitResult fit_logistic_normal_const_q(const EventPanel& panel, const Eigen::MatrixXd& nu,
                                      const FitConfig& cfg, int threads) {
  return fit_logistic_normal_const_q_warm(panel, nu, cfg, threads, nullptr);
}

JointFitResult fit_joint(const EventPanel& panel, const Eigen::MatrixXd& nu,
                         const Eigen::VectorXd& eta, const FitConfig& cfg, int threads) {
  return fit_joint_warm(panel, nu, eta, cfg, threads, nullptr);
}

namespace {

void audit_group(double wn, double gn_sq, double cross, double lambda, KktReport& rep) {
  // wn = ||W_g||, gn_sq = ||G_g||^2, cross = <G_g, W_g>
  if (lambda <= 0.0) throw std::invalid_argument("kkt_audit: lambda must be positive");
  if (wn == 0.0) {
    ++rep.zero_groups;
    double v = std::max(0.0, std::sqrt(gn_sq) / lambda - 1.0);
    rep.max_zero_violation = std::max(rep.max_zero_violation, v);
  } else {
    ++rep.active_groups;
    // ||G + lambda W/||W|| ||^2 = ||G||^2 + 2 lambda <G,W>/||W|| + lambda^2
    double n_sq = gn_sq + 2.0 * lambda * cross / wn + lambda * lambda;
    double v = std::sqrt(std::max(0.0, n_sq)) / lambda;
    rep.max_active_violation = std::max(rep.max_active_violation, v);
  }
}

}  // namespace

KktReport kkt_audit(const InfluenceTensor& A_hat, const InfluenceTensor& grad,
                    double lambda) {
  if (!A_hat.same_dims(grad)) throw std::invalid_argument("kkt_audit: dimension mismatch");
  KktReport rep;
  GroupIndex groups(A_hat.M());
  const int width = A_hat.K_in();
  for (int i = 0; i < groups.size(); ++i) {
    GroupRef g = groups.group(i);
    auto Wb = A_hat.node_matrix(g.m).middleCols(g.mp * width, width);
    auto Gb = grad.node_matrix(g.m).middleCols(g.mp * width, width);
    audit_group(Wb.norm(), Gb.squaredNorm(), (Gb.array() * Wb.array()).sum(), lambda, rep);
  }
  return rep;
}

KktReport kkt_audit_joint(const InfluenceTensor& A_hat, const InfluenceTensor& B_hat,
                          const InfluenceTensor& grad_A, const InfluenceTensor& grad_B,
                          double alpha, double lambda) {
  if (alpha <= 0.0 || alpha >= 1.0) {
    throw std::invalid_argument("kkt_audit_joint: alpha must be interior; use kkt_audit");
  }
  KktReport rep;
  GroupIndex groups(A_hat.M());
  const int width = A_hat.K_in();
  const double sa = std::sqrt(alpha), sb = std::sqrt(1.0 - alpha);
  for (int i = 0; i < groups.size(); ++i) {
    GroupRef g = groups.group(i);
    auto Wa = A_hat.node_matrix(g.m).middleCols(g.mp * width, width);
    auto Wb = B_hat.node_matrix(g.m).middleCols(g.mp * width, width);
    auto Ga = grad_A.node_matrix(g.m).middleCols(g.mp * width, width);
    auto Gb = grad_B.node_matrix(g.m).middleCols(g.mp * width, width);
    // reparameterized variables V = (sa*A, sb*B); gradients of the weighted
    // losses divide by the same scales
    double wn = std::sqrt(alpha * Wa.squaredNorm() + (1.0 - alpha) * Wb.squaredNorm());
    double gn_sq = Ga.squaredNorm() / (sa * sa) + Gb.squaredNorm() / (sb * sb);
    double cross = (Ga.array() * Wa.array()).sum() + (Gb.array() * Wb.array()).sum();
    audit_group(wn, gn_sq, cross, lambda, rep);
  }
  return rep;
}

std::vector<CvFold> cv_folds(int T, const CvConfig& cv) {
  if (cv.folds < 1) throw std::invalid_argument("cv_folds: folds < 1");
  if (cv.window_frac <= 0.0 ||
      cv.window_frac + (cv.folds - 1) * cv.offset_frac > 1.0 + 1e-12) {
    throw std::invalid_argument("cv_folds: window/offset fractions exceed the series");
  }
  std::vector<CvFold> folds;
  int w = static_cast<int>(std::llround(cv.window_frac * T));
  for (int i = 0; i < cv.folds; ++i) {
    int begin = static_cast<int>(std::llround(cv.offset_frac * T * i));
    folds.push_back({begin, std::min(begin + w, T)});
  }
  return folds;
}

namespace {

// squared prediction error of one transition under a multinomial model,
// following the argmax rule with ties toward no-event then lowest category
double mn_transition_sq_error(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                              const EventPanel& panel, int t, int m) {
  const int K = panel.K();
  Eigen::VectorXd u = A.node_matrix(m) * panel.step(t).transpose() +
                      nu.row(m).transpose();
  Eigen::VectorXd p = multinomial_link_grad({u.data(), static_cast<std::size_t>(K)});
  double p_none = 1.0 - p.sum();
  int best = -1;  // -1 encodes no-event
  double best_p = p_none;
  for (int k = 0; k < K; ++k) {
    if (p[k] > best_p) {
      best_p = p[k];
      best = k;
    }
  }
  double err = 0.0;
  for (int k = 0; k < K; ++k) {
    double x = panel.at(t + 1, m, k);
    double xh = (k == best) ? 1.0 : 0.0;
    err += (x - xh) * (x - xh);
  }
  return err;
}

double ln_transition_sq_error(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                              double q_hat, const EventPanel& panel, int t, int m) {
  const int K = panel.K();
  Eigen::VectorXd mu = A.node_matrix(m) * panel.step(t).transpose() +
                       nu.row(m).transpose();
  Eigen::VectorXd z = additive_logistic(mu);
  double err = 0.0;
  for (int k = 0; k < K; ++k) {
    double d = panel.at(t + 1, m, k) - q_hat * z[k];
    err += d * d;
  }
  return err;
}

double bern_heldout_loss(const InfluenceTensor& B, const Eigen::VectorXd& eta,
                         const EventPanel& panel, const std::vector<int>& ts) {
  double v = 0.0;
  for (int t : ts) {
    for (int m = 0; m < panel.M(); ++m) {
      double z = B.node_matrix(m).row(0).dot(panel.step(t)) + eta[m];
      v += softplus(z) - (panel.row_is_zero(t + 1, m) ? 0.0 : z);
    }
  }
  return v / ts.size();
}

double mn_heldout_loss(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                       const EventPanel& panel, const std::vector<int>& ts) {
  const int K = panel.K();
  double v = 0.0;
  for (int t : ts) {
    for (int m = 0; m < panel.M(); ++m) {
      Eigen::VectorXd u = A.node_matrix(m) * panel.step(t).transpose() +
                          nu.row(m).transpose();
      v += multinomial_link({u.data(), static_cast<std::size_t>(K)});
      for (int k = 0; k < K; ++k) {
        double x = panel.at(t + 1, m, k);
        if (x != 0.0) v -= u[k] * x;
      }
    }
  }
  return v / ts.size();
}

double ln_heldout_loss(const InfluenceTensor& A, const Eigen::MatrixXd& nu,
                       const EventPanel& panel, const LogRatioPanel& lr,
                       const std::vector<int>& ts) {
  const int Km1 = panel.K() - 1;
  double v = 0.0;
  for (int t : ts) {
    for (int m = 0; m < panel.M(); ++m) {
      if (!lr.event(t + 1, m)) continue;
      Eigen::VectorXd mu = A.node_matrix(m) * panel.step(t).transpose() +
                           nu.row(m).transpose();
      for (int k = 0; k < Km1; ++k) {
        double r = lr.at(t + 1, m, k) - mu[k];
        v += r * r;
      }
    }
  }
  return v / (2.0 * ts.size());
}

Eigen::VectorXd window_event_frequency(const EventPanel& panel, const CvFold& fold) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(panel.M());
  for (int t = fold.t_begin + 1; t <= fold.t_end; ++t) {
    for (int m = 0; m < panel.M(); ++m) {
      if (!panel.row_is_zero(t, m)) q[m] += 1.0;
    }
  }
  q /= std::max(1, fold.t_end - fold.t_begin);
  return q;
}

}  // namespace

CvResult cross_validate(ModelKindId kind, const EventPanel& panel,
                        const Eigen::MatrixXd& nu, const Eigen::VectorXd* eta,
                        const CvConfig& cv, const FitConfig& tmpl, int threads) {
  if (cv.lambda_grid.empty()) throw std::invalid_argument("cross_validate: empty lambda grid");
  if (kind == ModelKindId::LnJoint && !eta) {
    throw std::invalid_argument("cross_validate: joint fit needs eta");
  }
  std::vector<double> alphas;
  if (kind == ModelKindId::LnJoint && cv.alpha_grid && !cv.alpha_grid->empty()) {
    alphas = *cv.alpha_grid;
  } else if (kind == ModelKindId::LnJoint) {
    alphas = {tmpl.alpha};
  } else {
    alphas = {1.0};
  }
  // descending penalty path: each fit warm-starts from the sparser one
  std::vector<double> lambdas = cv.lambda_grid;
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

  const int T = panel.T();
  std::vector<CvFold> folds = cv_folds(T, cv);
  LogRatioPanel lr;
  if (kind != ModelKindId::Multinomial) lr = log_ratio_transform(panel, tmpl.clip_eps);

  // folds with no training events carry no information and are skipped
  std::vector<int> usable;
  for (int f = 0; f < static_cast<int>(folds.size()); ++f) {
    EventPanel sub = panel.window(folds[f].t_begin, folds[f].t_end - folds[f].t_begin + 1);
    if (sub.event_counts().sum() == 0.0) {
      if (!cv.quiet) {
        std::fprintf(stderr, "warning: cv fold %d has no events; skipped\n", f + 1);
      }
      continue;
    }
    usable.push_back(f);
  }
  if (usable.empty()) throw std::runtime_error("cross_validate: all folds degenerate");

  // scores indexed [alpha][lambda][fold]
  const int na = static_cast<int>(alphas.size());
  const int nl = static_cast<int>(lambdas.size());
  const int nf = static_cast<int>(usable.size());
  std::vector<double> scores(static_cast<std::size_t>(na) * nl * nf, 0.0);

  parallel_for(na * nf, threads, [&](int task) {
    const double alpha = alphas[task / nf];
    const CvFold& fold = folds[usable[task % nf]];
    EventPanel sub = panel.window(fold.t_begin, fold.t_end - fold.t_begin + 1);
    std::vector<int> ts;
    for (int t = 0; t < T; ++t) {
      if (t < fold.t_begin || t >= fold.t_end) ts.push_back(t);
    }
    FitResult warm;
    JointFitResult warm_joint;
    bool have_warm = false;
    for (int li = 0; li < nl; ++li) {
      FitConfig cfg = tmpl;
      cfg.lambda = lambdas[li];
      cfg.alpha = alpha;
      double score = 0.0;
      switch (kind) {
        case ModelKindId::Multinomial: {
          FitResult fit =
              fit_multinomial_warm(sub, nu, cfg, 1, have_warm ? &warm : nullptr);
          if (cv.criterion == CvCriterion::HeldOutLoss) {
            score = mn_heldout_loss(fit.A, fit.nu, panel, ts);
          } else {
            double err = 0.0;
            for (int t : ts) {
              for (int m = 0; m < panel.M(); ++m) {
                err += mn_transition_sq_error(fit.A, fit.nu, panel, t, m);
              }
            }
            score = err / (static_cast<double>(ts.size()) * panel.M());
          }
          warm = std::move(fit);
          break;
        }
        case ModelKindId::LnConstQ: {
          FitResult fit = fit_logistic_normal_const_q_warm(sub, nu, cfg, 1,
                                                           have_warm ? &warm : nullptr);
          if (cv.criterion == CvCriterion::HeldOutLoss) {
            score = ln_heldout_loss(fit.A, fit.nu, panel, lr, ts);
          } else {
            Eigen::VectorXd q_hat = window_event_frequency(panel, fold);
            double err = 0.0;
            for (int t : ts) {
              for (int m = 0; m < panel.M(); ++m) {
                err += ln_transition_sq_error(fit.A, fit.nu, q_hat[m], panel, t, m);
              }
            }
            score = err / (static_cast<double>(ts.size()) * panel.M());
          }
          warm = std::move(fit);
          break;
        }
        case ModelKindId::LnJoint: {
          JointFitResult fit =
              fit_joint_warm(sub, nu, *eta, cfg, 1, have_warm ? &warm_joint : nullptr);
          if (cv.criterion == CvCriterion::HeldOutLoss) {
            score = alpha * ln_heldout_loss(fit.A, fit.nu, panel, lr, ts) +
                    (1.0 - alpha) * bern_heldout_loss(fit.B, fit.eta, panel, ts);
          } else {
            double err = 0.0;
            for (int t : ts) {
              for (int m = 0; m < panel.M(); ++m) {
                double z = fit.B.node_matrix(m).row(0).dot(panel.step(t)) + fit.eta[m];
                err += ln_transition_sq_error(fit.A, fit.nu, logistic(z), panel, t, m);
              }
            }
            score = err / (static_cast<double>(ts.size()) * panel.M());
          }
          warm_joint = std::move(fit);
          break;
        }
      }
      have_warm = true;
      scores[(static_cast<std::size_t>(task / nf) * nl + li) * nf + task % nf] = score;
    }
  });

  CvResult out;
  double best = std::numeric_limits<double>::infinity();
  for (int ia = 0; ia < na; ++ia) {
    for (int li = 0; li < nl; ++li) {
      double mean = 0.0;
      for (int f = 0; f < nf; ++f) {
        mean += scores[(static_cast<std::size_t>(ia) * nl + li) * nf + f];
      }
      mean /= nf;
      out.table.push_back({lambdas[li], alphas[ia], mean, nf});
      // ties broken toward larger lambda, then larger alpha
      bool better = mean < best ||
                    (mean == best && (lambdas[li] > out.best_lambda ||
                                      (lambdas[li] == out.best_lambda && out.best_alpha &&
                                       alphas[ia] > *out.best_alpha)));
      if (better) {
        best = mean;
        out.best_lambda = lambdas[li];
        if (kind == ModelKindId::LnJoint) out.best_alpha = alphas[ia];
      }
    }
  }
  return out;
}

}  // namespace ctxnet
