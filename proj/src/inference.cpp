#include "ctxnet/inference.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ctxnet/objective.hpp"
#include "ctxnet/simulate.hpp"
#include "ctxnet/solver.hpp"

namespace ctxnet {

InfluenceTensor absolute_to_relative(const InfluenceTensor& A_abs) {
  const int M = A_abs.M(), K = A_abs.K_in();
  if (K < 2) throw std::invalid_argument("absolute_to_relative: needs K >= 2");
  if (A_abs.K_out() != K) throw std::invalid_argument("absolute_to_relative: not an absolute network");
  InfluenceTensor rel(M, K - 1, K);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K - 1; ++k) {
      for (int mp = 0; mp < M; ++mp) {
        for (int kp = 0; kp < K; ++kp) {
          rel.at(m, k, mp, kp) = A_abs.at(m, k, mp, kp) - A_abs.at(m, K - 1, mp, kp);
        }
      }
    }
  }
  return rel;
}

std::pair<InfluenceTensor, Eigen::MatrixXd> rebase(const InfluenceTensor& A,
                                                   const Eigen::MatrixXd& nu, int l) {
  const int M = A.M(), K = A.K_in(), Km1 = K - 1;
  if (A.K_out() != Km1) throw std::invalid_argument("rebase: not a relative network");
  if (l < 1 || l > Km1) {
    throw std::invalid_argument("rebase: baseline slot must be in 1..K-1 (K is already the baseline)");
  }
  const int lb = l - 1;
  // output slot order: remaining non-baseline slots in order, old baseline last
  InfluenceTensor out(M, Km1, K);
  Eigen::MatrixXd nu_out(M, Km1);
  for (int m = 0; m < M; ++m) {
    int slot = 0;
    for (int k = 0; k < Km1; ++k) {
      if (k == lb) continue;
      for (int mp = 0; mp < M; ++mp) {
        for (int kp = 0; kp < K; ++kp) {
          out.at(m, slot, mp, kp) = A.at(m, k, mp, kp) - A.at(m, lb, mp, kp);
        }
      }
      nu_out(m, slot) = nu(m, k) - nu(m, lb);
      ++slot;
    }
    for (int mp = 0; mp < M; ++mp) {
      for (int kp = 0; kp < K; ++kp) {
        out.at(m, slot, mp, kp) = -A.at(m, lb, mp, kp);
      }
    }
    nu_out(m, slot) = -nu(m, lb);
  }
  return {std::move(out), std::move(nu_out)};
}

EdgeList extract_edges(const InfluenceTensor& net, double threshold, EdgeMode mode) {
  if (threshold < 0.0 || threshold >= 1.0) {
    throw std::invalid_argument("extract_edges: threshold must be in [0, 1)");
  }
  EdgeList list;
  list.mode = mode;
  double mx = 0.0;
  for (double v : net.data()) mx = std::max(mx, std::abs(v));
  list.normalizer = mx;
  if (mx == 0.0) return list;
  for (int m = 0; m < net.M(); ++m) {
    for (int k = 0; k < net.K_out(); ++k) {
      for (int mp = 0; mp < net.M(); ++mp) {
        for (int kp = 0; kp < net.K_in(); ++kp) {
          double raw = net.at(m, k, mp, kp);
          double w = raw / mx;
          if (std::abs(w) <= threshold) continue;
          Edge e;
          e.source = mp;
          e.target = m;
          e.k_in = kp;
          e.k_out = mode == EdgeMode::Occurrence ? -1 : k;
          e.weight = w;
          e.raw = raw;
          e.stimulatory = raw > 0.0;
          list.edges.push_back(e);
        }
      }
    }
  }
  return list;
}

std::string edges_to_json(const EdgeList& list) {
  nlohmann::json j;
  switch (list.mode) {
    case EdgeMode::Absolute: j["mode"] = "absolute"; break;
    case EdgeMode::Relative: j["mode"] = "relative"; break;
    case EdgeMode::Occurrence: j["mode"] = "occurrence"; break;
  }
  j["normalizer"] = list.normalizer;
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : list.edges) {
    nlohmann::json je;
    je["source"] = e.source;
    je["target"] = e.target;
    je["k_in"] = e.k_in;
    if (e.k_out >= 0) {
      je["k_out"] = e.k_out;
    } else {
      je["k_out"] = nullptr;
    }
    je["weight"] = e.weight;
    je["raw"] = e.raw;
    je["sign"] = e.stimulatory ? "stimulatory" : "inhibitory";
    j["edges"].push_back(je);
  }
  return j.dump(2);
}

std::string edges_to_dot(const EdgeList& list) {
  std::ostringstream out;
  out << "digraph influence {\n";
  out << "  rankdir=LR;\n";
  for (const Edge& e : list.edges) {
    out << "  n" << e.source << " -> n" << e.target << " [";
    if (e.k_out >= 0) {
      out << "label=\"k" << e.k_in + 1 << "->k" << e.k_out + 1 << "\"";
    } else {
      out << "label=\"k" << e.k_in + 1 << "->occ\"";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", std::abs(e.weight));
    out << ", penwidth=" << 0.5 + 4.0 * std::abs(e.weight);
    out << ", style=" << (e.stimulatory ? "solid" : "dashed");
    out << ", tooltip=\"" << buf << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

MnPrediction predict_multinomial(const MultinomialModel& model,
                                 const Eigen::RowVectorXd& x_prev, int m) {
  const int K = model.K();
  if (x_prev.size() != model.M() * K) {
    throw std::invalid_argument("predict_multinomial: covariate length");
  }
  Eigen::VectorXd u = model.A.node_matrix(m) * x_prev.transpose() +
                      model.nu.row(m).transpose();
  Eigen::VectorXd pk = multinomial_link_grad({u.data(), static_cast<std::size_t>(K)});
  MnPrediction pred;
  pred.p.resize(K + 1);
  pred.p.head(K) = pk;
  pred.p[K] = std::max(0.0, 1.0 - pk.sum());
  // ties toward no-event first, then the lowest category index
  int best = -1;
  double best_p = pred.p[K];
  for (int k = 0; k < K; ++k) {
    if (pred.p[k] > best_p) {
      best_p = pred.p[k];
      best = k;
    }
  }
  pred.x_hat = Eigen::VectorXd::Zero(K);
  if (best >= 0) pred.x_hat[best] = 1.0;
  return pred;
}

Eigen::VectorXd predict_logistic_normal(const LogisticNormalModel& model,
                                        const Eigen::RowVectorXd& x_prev, int m,
                                        const Eigen::VectorXd* q_hat_const) {
  if (x_prev.size() != model.M() * model.K()) {
    throw std::invalid_argument("predict_logistic_normal: covariate length");
  }
  double q_hat;
  if (const auto* dyn = std::get_if<DynamicOccurrence>(&model.occurrence)) {
    q_hat = logistic(dyn->B.node_matrix(m).row(0).dot(x_prev) + dyn->eta[m]);
  } else {
    q_hat = q_hat_const ? (*q_hat_const)[m] : std::get<ConstantQ>(model.occurrence).q[m];
  }
  Eigen::VectorXd mu = model.A.node_matrix(m) * x_prev.transpose() +
                       model.nu.row(m).transpose();
  return q_hat * additive_logistic(mu);
}

Eigen::VectorXd empirical_q(const EventPanel& panel, int t_end) {
  if (t_end < 0) t_end = panel.T_plus_1();
  if (t_end < 2) throw std::invalid_argument("empirical_q: needs at least one transition");
  Eigen::VectorXd q = Eigen::VectorXd::Zero(panel.M());
  for (int t = 1; t < t_end; ++t) {
    for (int m = 0; m < panel.M(); ++m) {
      if (!panel.row_is_zero(t, m)) q[m] += 1.0;
    }
  }
  return q / (t_end - 1);
}

BaselineModel fit_baseline(const EventPanel& panel, BaselineKind kind,
                           MetricKind family, double bar_lambda, int threads) {
  if (panel.T() < 1) throw std::invalid_argument("fit_baseline: panel has no transitions");
  const int M = panel.M(), K = panel.K(), T = panel.T();
  BaselineModel out;
  out.kind = kind;
  out.family = family;

  if (family == MetricKind::Multinomial) {
    out.cat_probs = Eigen::MatrixXd::Zero(M, K + 1);
    for (int t = 1; t <= T; ++t) {
      for (int m = 0; m < M; ++m) {
        if (panel.row_is_zero(t, m)) continue;
        out.cat_probs(m, panel.row_argmax(t, m)) += 1.0;
      }
    }
    for (int m = 0; m < M; ++m) {
      double events = out.cat_probs.row(m).sum();
      if (kind == BaselineKind::ConstantProcess) {
        out.cat_probs.row(m) /= T;
        out.cat_probs(m, K) = 1.0 - events / T;
      } else {
        // conditional category distribution given an event
        if (events > 0.0) {
          out.cat_probs.row(m) /= events;
        } else {
          out.cat_probs.row(m).head(K).setConstant(1.0 / K);
        }
        out.cat_probs(m, K) = 0.0;
      }
    }
  } else {
    LogRatioPanel lr = log_ratio_transform(panel);
    out.mean_logratio = Eigen::MatrixXd::Zero(M, K - 1);
    for (int m = 0; m < M; ++m) {
      int n = 0;
      for (int t = 1; t <= T; ++t) {
        if (!lr.event(t, m)) continue;
        ++n;
        for (int k = 0; k < K - 1; ++k) out.mean_logratio(m, k) += lr.at(t, m, k);
      }
      if (n > 0) out.mean_logratio.row(m) /= n;
    }
    out.q_const = empirical_q(panel);
  }

  if (kind == BaselineKind::ContextIndependent) {
    // occurrence network on the K = 1 indicator panel (lasso groups)
    EventPanel ind(panel.T_plus_1(), M, 1, PanelKind::Categorical);
    for (int t = 0; t < panel.T_plus_1(); ++t) {
      for (int m = 0; m < M; ++m) {
        if (!panel.row_is_zero(t, m)) ind.at(t, m, 0) = 1.0;
      }
    }
    FitConfig cfg;
    cfg.lambda = bar_lambda;
    cfg.fit_intercepts = true;
    FitResult bar = fit_multinomial(ind, Eigen::MatrixXd::Zero(M, 1), cfg, threads);
    out.bar_B = std::move(bar.A);
    out.bar_eta = bar.nu.col(0);
  }
  return out;
}

Eigen::VectorXd predict_baseline(const BaselineModel& model, const EventPanel& panel,
                                 int t, int m) {
  if (t < 1 || t > panel.T()) throw std::invalid_argument("predict_baseline: t outside 1..T");
  const int K = panel.K(), M = panel.M();
  double q_hat = 0.0;
  if (model.kind == BaselineKind::ContextIndependent) {
    double z = model.bar_eta[m];
    for (int mp = 0; mp < M; ++mp) {
      if (!panel.row_is_zero(t - 1, mp)) z += model.bar_B.at(m, 0, mp, 0);
    }
    q_hat = logistic(z);
  }

  if (model.family == MetricKind::Multinomial) {
    Eigen::VectorXd p(K + 1);
    if (model.kind == BaselineKind::ConstantProcess) {
      p = model.cat_probs.row(m).transpose();
    } else {
      p.head(K) = q_hat * model.cat_probs.row(m).head(K).transpose();
      p[K] = 1.0 - q_hat;
    }
    int best = -1;
    double best_p = p[K];
    for (int k = 0; k < K; ++k) {
      if (p[k] > best_p) {
        best_p = p[k];
        best = k;
      }
    }
    Eigen::VectorXd x_hat = Eigen::VectorXd::Zero(K);
    if (best >= 0) x_hat[best] = 1.0;
    return x_hat;
  }

  if (model.kind == BaselineKind::ConstantProcess) q_hat = model.q_const[m];
  return q_hat * additive_logistic(model.mean_logratio.row(m).transpose());
}

namespace {

void check_holdout(const EventPanel& panel, int holdout_start) {
  if (holdout_start < 1 || holdout_start > panel.T()) {
    throw std::invalid_argument("prediction_error: holdout_start outside 1..T");
  }
}

}  // namespace

double prediction_error(const EventPanel& panel, const MultinomialModel& model,
                        int holdout_start) {
  check_holdout(panel, holdout_start);
  if (panel.M() != model.M() || panel.K() != model.K()) {
    throw std::invalid_argument("prediction_error: model/panel dimension mismatch");
  }
  const int K = panel.K();
  double err = 0.0;
  int n = 0;
  for (int t = holdout_start; t <= panel.T(); ++t, ++n) {
    for (int m = 0; m < panel.M(); ++m) {
      MnPrediction pred = predict_multinomial(model, panel.step(t - 1), m);
      for (int k = 0; k < K; ++k) {
        double d = panel.at(t, m, k) - pred.x_hat[k];
        err += d * d;
      }
    }
  }
  return err / (static_cast<double>(n) * panel.M());
}

double prediction_error(const EventPanel& panel, const LogisticNormalModel& model,
                        int holdout_start, const Eigen::VectorXd* q_hat_const) {
  check_holdout(panel, holdout_start);
  if (panel.M() != model.M() || panel.K() != model.K()) {
    throw std::invalid_argument("prediction_error: model/panel dimension mismatch");
  }
  const int K = panel.K();
  double err = 0.0;
  int n = 0;
  for (int t = holdout_start; t <= panel.T(); ++t, ++n) {
    for (int m = 0; m < panel.M(); ++m) {
      Eigen::VectorXd x_hat = predict_logistic_normal(model, panel.step(t - 1), m, q_hat_const);
      for (int k = 0; k < K; ++k) {
        double d = panel.at(t, m, k) - x_hat[k];
        err += d * d;
      }
    }
  }
  return err / (static_cast<double>(n) * panel.M());
}

double prediction_error(const EventPanel& panel, const BaselineModel& model,
                        int holdout_start) {
  check_holdout(panel, holdout_start);
  const int K = panel.K();
  double err = 0.0;
  int n = 0;
  for (int t = holdout_start; t <= panel.T(); ++t, ++n) {
    for (int m = 0; m < panel.M(); ++m) {
      Eigen::VectorXd x_hat = predict_baseline(model, panel, t, m);
      for (int k = 0; k < K; ++k) {
        double d = panel.at(t, m, k) - x_hat[k];
        err += d * d;
      }
    }
  }
  return err / (static_cast<double>(n) * panel.M());
}

}  // namespace ctxnet
