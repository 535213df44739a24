#include "ctxnet/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ctxnet/objective.hpp"

namespace ctxnet {

namespace {

// Symmetric square root of a PSD matrix; tolerates zero and semi-definite
// covariances used in tests.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& Sigma) {
  if (!Sigma.isApprox(Sigma.transpose(), 1e-12)) {
    throw std::invalid_argument("Sigma must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("Sigma must be positive semi-definite");
  }
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

void draw_initial(EventPanel& panel, const InitSpec& init, const CounterRng& root) {
  const int M = panel.M(), K = panel.K();
  for (int m = 0; m < M; ++m) {
    CounterRng r = root.substream(0, m);
    if (r.next_double() < init.event_prob) {
      int k = static_cast<int>(r.next_index(K));
      panel.at(0, m, k) = 1.0;
    }
  }
}

Eigen::VectorXd gaussian_vector(CounterRng& r, int n) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = r.next_gaussian();
  return z;
}

}  // namespace

Eigen::VectorXd additive_logistic(const Eigen::VectorXd& g) {
  const int Km1 = static_cast<int>(g.size());
  double mx = std::max(0.0, g.maxCoeff());
  Eigen::VectorXd out(Km1 + 1);
  double denom = std::exp(-mx);
  for (int k = 0; k < Km1; ++k) {
    out[k] = std::exp(g[k] - mx);
    denom += out[k];
  }
  out[Km1] = std::exp(-mx);
  out /= denom;
  return out;
}

Eigen::VectorXd sample_logistic_normal(const Eigen::VectorXd& mu,
                                       const Eigen::MatrixXd& Sigma,
                                       CounterRng& rng) {
  if (Sigma.rows() != mu.size() || Sigma.cols() != mu.size()) {
    throw std::invalid_argument("sample_logistic_normal: Sigma/mu size mismatch");
  }
  Eigen::MatrixXd root = psd_sqrt(Sigma);
  Eigen::VectorXd g = mu + root * gaussian_vector(rng, static_cast<int>(mu.size()));
  return additive_logistic(g);
}

Eigen::VectorXd sample_logistic_normal(const Eigen::VectorXd& mu,
                                       const Eigen::MatrixXd& Sigma,
                                       std::uint64_t seed) {
  CounterRng rng(seed);
  return sample_logistic_normal(mu, Sigma, rng);
}

EventPanel simulate_multinomial(const MultinomialModel& model, int T,
                                InitSpec init, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("simulate_multinomial: T >= 1 required");
  const int M = model.M(), K = model.K();
  EventPanel panel(T + 1, M, K, PanelKind::Categorical);
  CounterRng root(seed);
  draw_initial(panel, init, root);
  Eigen::VectorXd u(K);
  for (int t = 1; t <= T; ++t) {
    auto x_prev = panel.step(t - 1);
    for (int m = 0; m < M; ++m) {
      auto W = model.A.node_matrix(m);
      u = W * x_prev.transpose() + model.nu.row(m).transpose();
      Eigen::VectorXd p = multinomial_link_grad({u.data(), static_cast<std::size_t>(K)});
      CounterRng r = root.substream(t, m);
      double draw = r.next_double();
      double cum = 0.0;
      for (int k = 0; k < K; ++k) {
        cum += p[k];
        if (draw < cum) {
          panel.at(t, m, k) = 1.0;
          break;
        }
      }
    }
  }
  return panel;
}

EventPanel simulate_logistic_normal(const LogisticNormalModel& model, int T,
                                    InitSpec init, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("simulate_logistic_normal: T >= 1 required");
  model.validate();
  const int M = model.M(), K = model.K(), Km1 = K - 1;
  EventPanel panel(T + 1, M, K, PanelKind::Compositional);
  CounterRng root(seed);
  draw_initial(panel, init, root);
  Eigen::MatrixXd noise_root = psd_sqrt(model.Sigma);
  const auto* cq = std::get_if<ConstantQ>(&model.occurrence);
  const auto* dyn = std::get_if<DynamicOccurrence>(&model.occurrence);
  for (int t = 1; t <= T; ++t) {
    auto x_prev = panel.step(t - 1);
    for (int m = 0; m < M; ++m) {
      CounterRng r = root.substream(t, m);
      double q;
      if (cq) {
        q = cq->q[m];
      } else {
        double z = dyn->B.node_matrix(m).row(0).dot(x_prev) + dyn->eta[m];
        q = logistic(z);
      }
      if (r.next_double() >= q) continue;
      Eigen::VectorXd mu = model.A.node_matrix(m) * x_prev.transpose() +
                           model.nu.row(m).transpose();
      Eigen::VectorXd g = mu + noise_root * gaussian_vector(r, Km1);
      Eigen::VectorXd z = additive_logistic(g);
      for (int k = 0; k < K; ++k) panel.at(t, m, k) = z[k];
    }
  }
  return panel;
}

EventPanel simulate_mixture(const MixtureSpec& spec, int T, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("simulate_mixture: T >= 1 required");
  spec.validate();
  const int M = spec.M(), K = spec.K(), Km1 = K - 1;
  std::vector<bool> in_group1(M, false);
  for (int m : spec.group1) in_group1[m] = true;

  EventPanel panel(T + 1, M, K, PanelKind::Compositional);
  CounterRng root(seed);
  draw_initial(panel, InitSpec{}, root);
  Eigen::VectorXd u(K);
  for (int t = 1; t <= T; ++t) {
    auto x_prev = panel.step(t - 1);
    for (int m = 0; m < M; ++m) {
      CounterRng r = root.substream(t, m);
      if (in_group1[m]) {
        double z = spec.B_bern.node_matrix(m).row(0).dot(x_prev) + spec.eta_bern[m];
        if (r.next_double() >= logistic(z)) continue;
        Eigen::VectorXd mu = spec.A_ln.node_matrix(m) * x_prev.transpose() +
                             spec.nu_ln.row(m).transpose();
        Eigen::VectorXd g = mu + gaussian_vector(r, Km1);
        Eigen::VectorXd zv = additive_logistic(g);
        for (int k = 0; k < K; ++k) panel.at(t, m, k) = zv[k];
      } else {
        u = spec.A_mn.node_matrix(m) * x_prev.transpose() + spec.nu_mn.row(m).transpose();
        Eigen::VectorXd p = multinomial_link_grad({u.data(), static_cast<std::size_t>(K)});
        double draw = r.next_double();
        double cum = 0.0;
        int cat = -1;
        for (int k = 0; k < K; ++k) {
          cum += p[k];
          if (draw < cum) {
            cat = k;
            break;
          }
        }
        if (cat < 0) continue;
        // contaminate: log-ratio mean e_cat, or (-1,...,-1) for the baseline
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(Km1);
        if (cat == K - 1) {
          mu.setConstant(-1.0);
        } else {
          mu[cat] = 1.0;
        }
        Eigen::VectorXd g = mu + spec.sigma_contam * gaussian_vector(r, Km1);
        Eigen::VectorXd zv = additive_logistic(g);
        for (int k = 0; k < K; ++k) panel.at(t, m, k) = zv[k];
      }
    }
  }
  return panel;
}

EventPanel round_to_categorical(const EventPanel& panel) {
  EventPanel out(panel.T_plus_1(), panel.M(), panel.K(), PanelKind::Categorical);
  for (int t = 0; t < panel.T_plus_1(); ++t) {
    for (int m = 0; m < panel.M(); ++m) {
      if (panel.row_is_zero(t, m)) continue;
      out.at(t, m, panel.row_argmax(t, m)) = 1.0;
    }
  }
  return out;
}

namespace {

// floor(s/M) groups per node, first s mod M nodes get one more; distinct
// influencers via partial Fisher-Yates on the node's substream.
std::vector<std::vector<int>> draw_supports(int M, int s, const CounterRng& root) {
  if (s < 0 || s > M * M) throw std::invalid_argument("sparse network: s outside [0, M^2]");
  std::vector<std::vector<int>> supports(M);
  for (int m = 0; m < M; ++m) {
    int rho = s / M + (m < s % M ? 1 : 0);
    CounterRng r = root.substream(m, 0x5u);
    std::vector<int> pool(M);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < rho; ++i) {
      int j = i + static_cast<int>(r.next_index(M - i));
      std::swap(pool[i], pool[j]);
      supports[m].push_back(pool[i]);
    }
  }
  return supports;
}

void fill_fiber(InfluenceTensor& A, int m, int mp, double lo, double hi, CounterRng& r) {
  for (int k = 0; k < A.K_out(); ++k) {
    for (int kp = 0; kp < A.K_in(); ++kp) {
      A.at(m, k, mp, kp) = r.next_uniform(lo, hi);
    }
  }
}

}  // namespace

MultinomialModel make_scaling_multinomial(const SparseNetworkConfig& cfg, std::uint64_t seed) {
  CounterRng root(seed);
  MultinomialModel model;
  model.A = InfluenceTensor(cfg.M, cfg.K, cfg.K);
  model.nu = Eigen::MatrixXd::Constant(cfg.M, cfg.K, std::log(4.0 / cfg.K));
  auto supports = draw_supports(cfg.M, cfg.s, root);
  for (int m = 0; m < cfg.M; ++m) {
    CounterRng r = root.substream(m, 0x7u);
    for (int mp : supports[m]) fill_fiber(model.A, m, mp, cfg.lo, cfg.hi, r);
  }
  return model;
}

LogisticNormalModel make_scaling_ln_constq(const SparseNetworkConfig& cfg, double q0,
                                           std::uint64_t seed) {
  CounterRng root(seed);
  LogisticNormalModel model;
  model.A = InfluenceTensor(cfg.M, cfg.K - 1, cfg.K);
  model.nu = Eigen::MatrixXd::Zero(cfg.M, cfg.K - 1);
  model.Sigma = Eigen::MatrixXd::Identity(cfg.K - 1, cfg.K - 1);
  model.occurrence = ConstantQ{Eigen::VectorXd::Constant(cfg.M, q0)};
  auto supports = draw_supports(cfg.M, cfg.s, root);
  for (int m = 0; m < cfg.M; ++m) {
    CounterRng r = root.substream(m, 0x7u);
    for (int mp : supports[m]) fill_fiber(model.A, m, mp, cfg.lo, cfg.hi, r);
  }
  return model;
}

LogisticNormalModel make_scaling_ln_joint(const SparseNetworkConfig& cfg, double sigma2,
                                          std::uint64_t seed) {
  CounterRng root(seed);
  LogisticNormalModel model;
  model.A = InfluenceTensor(cfg.M, cfg.K - 1, cfg.K);
  model.nu = Eigen::MatrixXd::Zero(cfg.M, cfg.K - 1);
  model.Sigma = sigma2 * Eigen::MatrixXd::Identity(cfg.K - 1, cfg.K - 1);
  DynamicOccurrence occ;
  occ.B = InfluenceTensor(cfg.M, 1, cfg.K);
  occ.eta = Eigen::VectorXd::Constant(cfg.M, std::log(4.0));
  auto supports = draw_supports(cfg.M, cfg.s, root);
  for (int m = 0; m < cfg.M; ++m) {
    CounterRng r = root.substream(m, 0x7u);
    for (int mp : supports[m]) {
      fill_fiber(model.A, m, mp, cfg.lo, cfg.hi, r);
      fill_fiber(occ.B, m, mp, cfg.lo, cfg.hi, r);
    }
  }
  model.occurrence = std::move(occ);
  return model;
}

}  // namespace ctxnet
