#pragma once

// Test-only reference implementations, kept independent of the library's
// analytic gradients and solver path.

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "ctxnet/panel.hpp"
#include "ctxnet/rng.hpp"

namespace oracles {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

inline Eigen::VectorXd central_difference_gradient(const ScalarFn& f,
                                                   const Eigen::VectorXd& x,
                                                   double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    double orig = xp[i];
    xp[i] = orig + h;
    double fp = f(xp);
    xp[i] = orig - h;
    double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// BFGS with numeric gradients and backtracking line search; enough accuracy
// for tiny smooth convex problems.
inline Eigen::VectorXd bfgs_minimize(const ScalarFn& f, Eigen::VectorXd x,
                                     int max_iters = 500, double gtol = 1e-9,
                                     double fd_h = 1e-6) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = central_difference_gradient(f, x, fd_h);
  double fx = f(x);
  for (int it = 0; it < max_iters; ++it) {
    if (g.norm() < gtol) break;
    Eigen::VectorXd d = -H * g;
    if (d.dot(g) > 0.0) {
      H = Eigen::MatrixXd::Identity(n, n);
      d = -g;
    }
    double step = 1.0;
    double f_new = 0.0;
    Eigen::VectorXd x_new;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * d;
      f_new = f(x_new);
      if (f_new <= fx + 1e-4 * step * g.dot(d)) break;
      step *= 0.5;
    }
    Eigen::VectorXd g_new = central_difference_gradient(f, x_new, fd_h);
    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-12) {
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd V = I - s * y.transpose() / sy;
      H = V * H * V.transpose() + s * s.transpose() / sy;
    }
    x = x_new;
    g = g_new;
    fx = f_new;
  }
  return x;
}

// Closed-form per-node masked least squares for the log-ratio regression:
// rows of W solve (sum_masked x x^T) w_k = sum_masked x (y_k - nu_k).
inline Eigen::MatrixXd masked_least_squares(const ctxnet::EventPanel& panel,
                                            const std::vector<Eigen::VectorXd>& y,
                                            const std::vector<bool>& mask,
                                            const Eigen::VectorXd& nu_row) {
  const int T = panel.T();
  const int D = panel.M() * panel.K();
  const int Km1 = static_cast<int>(nu_row.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(D, D);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(Km1, D);
  for (int t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    Eigen::VectorXd x = panel.step(t).transpose();
    G += x * x.transpose();
    C += (y[t] - nu_row) * x.transpose();
  }
  Eigen::MatrixXd W(Km1, D);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  for (int k = 0; k < Km1; ++k) {
    W.row(k) = ldlt.solve(C.row(k).transpose()).transpose();
  }
  return W;
}

inline double uniform(ctxnet::CounterRng& rng, double lo, double hi) {
  return rng.next_uniform(lo, hi);
}

}  // namespace oracles
