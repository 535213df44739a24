#include "ctxnet/experiments.hpp"

#include <cmath>
#include <limits>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ctxnet/inference.hpp"
#include "ctxnet/parallel.hpp"
#include "ctxnet/rng.hpp"

namespace ctxnet {

double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("sample_mean: empty");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / xs.size();
}

double standard_error(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mu = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / (xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("fit_loglog_slope: needs >= 3 points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : points) {
    if (x <= 0.0 || y <= 0.0) throw std::invalid_argument("fit_loglog_slope: nonpositive input");
    double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = static_cast<double>(points.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double lambda_rule(double coeff, int K, int M, int T) {
  return coeff * K * std::sqrt(std::log(static_cast<double>(M)) / T);
}

}  // namespace

ScalingResult run_scaling(const ScalingConfig& cfg, int threads) {
  if (cfg.trials < 1) throw std::invalid_argument("run_scaling: trials < 1");
  ScalingResult res;
  res.cfg = cfg;

  struct Cell {
    int M, s, T;
  };
  std::vector<Cell> grid;
  for (int M : cfg.Ms) {
    for (int mult : cfg.s_multipliers) {
      for (int T : cfg.Ts) {
        if (M < 1 || T < 1 || mult * M > M * M) {
          throw std::invalid_argument("run_scaling: invalid grid cell");
        }
        grid.push_back({M, mult * M, T});
      }
    }
  }

  const int n_tasks = static_cast<int>(grid.size()) * cfg.trials;
  std::vector<double> mse_A(n_tasks, 0.0), mse_B(n_tasks, 0.0);
  CounterRng root(cfg.seed);
  parallel_for(n_tasks, threads, [&](int task) {
    const Cell& cell = grid[task / cfg.trials];
    const int trial = task % cfg.trials;
    CounterRng sub = root.substream(task / cfg.trials, trial);
    std::uint64_t net_seed = sub.next_u64();
    std::uint64_t panel_seed = sub.next_u64();
    SparseNetworkConfig net{cell.M, cfg.K, cell.s, -2.0, 2.0};
    FitConfig fit;
    fit.lambda = lambda_rule(cfg.lambda_coeff, cfg.K, cell.M, cell.T);
    switch (cfg.kind) {
      case ScalingKind::Multinomial: {
        MultinomialModel model = make_scaling_multinomial(net, net_seed);
        EventPanel panel = simulate_multinomial(model, cell.T, InitSpec{}, panel_seed);
        FitResult f = fit_multinomial(panel, model.nu, fit, 1);
        mse_A[task] = frobenius_sq_diff(f.A, model.A);
        break;
      }
      case ScalingKind::LnConstQ: {
        LogisticNormalModel model = make_scaling_ln_constq(net, cfg.q0, net_seed);
        EventPanel panel = simulate_logistic_normal(model, cell.T, InitSpec{}, panel_seed);
        FitResult f = fit_logistic_normal_const_q(panel, model.nu, fit, 1);
        mse_A[task] = frobenius_sq_diff(f.A, model.A);
        break;
      }
      case ScalingKind::LnJoint: {
        LogisticNormalModel model = make_scaling_ln_joint(net, cfg.sigma2, net_seed);
        EventPanel panel = simulate_logistic_normal(model, cell.T, InitSpec{}, panel_seed);
        fit.alpha = cfg.alpha;
        const auto& occ = std::get<DynamicOccurrence>(model.occurrence);
        JointFitResult f = fit_joint(panel, model.nu, occ.eta, fit, 1);
        mse_A[task] = frobenius_sq_diff(f.A, model.A);
        mse_B[task] = frobenius_sq_diff(f.B, occ.B);
        break;
      }
    }
  });

  for (std::size_t c = 0; c < grid.size(); ++c) {
    std::vector<double> a, b;
    for (int trial = 0; trial < cfg.trials; ++trial) {
      a.push_back(mse_A[c * cfg.trials + trial]);
      b.push_back(mse_B[c * cfg.trials + trial]);
    }
    ScalingCell cell;
    cell.M = grid[c].M;
    cell.s = grid[c].s;
    cell.T = grid[c].T;
    cell.trials = cfg.trials;
    const double denom = grid[c].s > 0 ? grid[c].s * std::log(grid[c].M)
                                       : std::numeric_limits<double>::quiet_NaN();
    cell.mean_mse_A = sample_mean(a);
    cell.se_mse_A = standard_error(a);
    cell.normalized_A = cell.mean_mse_A / denom;
    if (cfg.kind == ScalingKind::LnJoint) {
      cell.mean_mse_B = sample_mean(b);
      cell.se_mse_B = standard_error(b);
      cell.normalized_B = cell.mean_mse_B / denom;
    }
    res.cells.push_back(cell);
  }

  for (int M : cfg.Ms) {
    for (int mult : cfg.s_multipliers) {
      ScalingCurve curve;
      curve.M = M;
      curve.s = mult * M;
      std::vector<std::pair<double, double>> pa, pb;
      for (const ScalingCell& cell : res.cells) {
        if (cell.M != M || cell.s != curve.s) continue;
        pa.emplace_back(cell.T, cell.mean_mse_A);
        if (cfg.kind == ScalingKind::LnJoint) pb.emplace_back(cell.T, cell.mean_mse_B);
      }
      if (pa.size() >= 3) curve.slope_A = fit_loglog_slope(pa);
      if (pb.size() >= 3) curve.slope_B = fit_loglog_slope(pb);
      res.curves.push_back(curve);
    }
  }
  return res;
}

std::string scaling_to_csv(const ScalingResult& res) {
  std::ostringstream out;
  out << "M,s,T,trials,mean_mse_A,se_mse_A,normalized_A";
  bool joint = res.cfg.kind == ScalingKind::LnJoint;
  if (joint) out << ",mean_mse_B,se_mse_B,normalized_B";
  out << "\n";
  for (const ScalingCell& c : res.cells) {
    out << c.M << ',' << c.s << ',' << c.T << ',' << c.trials << ','
        << fmt(c.mean_mse_A) << ',' << fmt(c.se_mse_A) << ',' << fmt(c.normalized_A);
    if (joint) {
      out << ',' << fmt(c.mean_mse_B) << ',' << fmt(c.se_mse_B) << ',' << fmt(c.normalized_B);
    }
    out << "\n";
  }
  return out.str();
}

double AlphaSweepResult::mean_A(int is, int ia) const { return sample_mean(mse_A[is][ia]); }
double AlphaSweepResult::mean_B(int is, int ia) const { return sample_mean(mse_B[is][ia]); }

double AlphaSweepResult::best_alpha_for_A(int is, int trial) const {
  int best = 0;
  for (int ia = 1; ia < static_cast<int>(cfg.alpha_grid.size()); ++ia) {
    if (mse_A[is][ia][trial] < mse_A[is][best][trial]) best = ia;
  }
  return cfg.alpha_grid[best];
}

AlphaSweepResult run_alpha_sweep(const AlphaSweepConfig& cfg, int threads) {
  for (double a : cfg.alpha_grid) {
    if (a < 0.0 || a > 1.0) throw std::invalid_argument("run_alpha_sweep: alpha outside [0,1]");
  }
  AlphaSweepResult res;
  res.cfg = cfg;
  const int ns = static_cast<int>(cfg.sigma2s.size());
  const int na = static_cast<int>(cfg.alpha_grid.size());
  res.mse_A.assign(ns, std::vector<std::vector<double>>(na, std::vector<double>(cfg.trials, 0.0)));
  res.mse_B = res.mse_A;

  std::vector<double> lambda_grid;
  for (double c : cfg.lambda_coeff_grid) {
    lambda_grid.push_back(lambda_rule(c, cfg.K, cfg.M, cfg.T));
  }

  // a trial shares its network and noise stream across sigma2 values, so
  // sigma2 comparisons are paired
  const int n_tasks = ns * na * cfg.trials;
  CounterRng root(cfg.seed);
  parallel_for(n_tasks, threads, [&](int task) {
    const int is = task / (na * cfg.trials);
    const int ia = (task / cfg.trials) % na;
    const int trial = task % cfg.trials;
    CounterRng sub = root.substream(0xA1u, trial);
    std::uint64_t net_seed = sub.next_u64();
    std::uint64_t panel_seed = sub.next_u64();
    SparseNetworkConfig net{cfg.M, cfg.K, cfg.s, cfg.entry_lo, cfg.entry_hi};
    LogisticNormalModel model = make_scaling_ln_joint(net, cfg.sigma2s[is], net_seed);
    EventPanel panel = simulate_logistic_normal(model, cfg.T, InitSpec{}, panel_seed);
    const auto& occ = std::get<DynamicOccurrence>(model.occurrence);

    FitConfig tmpl;
    tmpl.alpha = cfg.alpha_grid[ia];
    CvConfig cv;
    cv.lambda_grid = lambda_grid;
    cv.quiet = true;
    // fold fits only rank penalties; a looser stop keeps the sweep cheap
    FitConfig cv_tmpl = tmpl;
    cv_tmpl.tol = 1e-7;
    CvResult sel =
        cross_validate(ModelKindId::LnJoint, panel, model.nu, &occ.eta, cv, cv_tmpl, 1);
    FitConfig fit = tmpl;
    fit.lambda = sel.best_lambda;
    JointFitResult f = fit_joint(panel, model.nu, occ.eta, fit, 1);
    res.mse_A[is][ia][trial] = frobenius_sq_diff(f.A, model.A);
    res.mse_B[is][ia][trial] = frobenius_sq_diff(f.B, occ.B);
  });
  return res;
}

std::string alpha_sweep_to_csv(const AlphaSweepResult& res) {
  std::ostringstream out;
  out << "sigma2,alpha,mean_mse_A,se_mse_A,mean_mse_B,se_mse_B,ref_A,ref_B\n";
  const auto& grid = res.cfg.alpha_grid;
  int ia_one = -1, ia_zero = -1;
  for (int ia = 0; ia < static_cast<int>(grid.size()); ++ia) {
    if (grid[ia] == 1.0) ia_one = ia;
    if (grid[ia] == 0.0) ia_zero = ia;
  }
  for (int is = 0; is < static_cast<int>(res.cfg.sigma2s.size()); ++is) {
    double ref_A = ia_one >= 0 ? res.mean_A(is, ia_one) : std::nan("");
    double ref_B = ia_zero >= 0 ? res.mean_B(is, ia_zero) : std::nan("");
    for (int ia = 0; ia < static_cast<int>(grid.size()); ++ia) {
      out << fmt(res.cfg.sigma2s[is]) << ',' << fmt(grid[ia]) << ','
          << fmt(res.mean_A(is, ia)) << ',' << fmt(standard_error(res.mse_A[is][ia])) << ','
          << fmt(res.mean_B(is, ia)) << ',' << fmt(standard_error(res.mse_B[is][ia])) << ','
          << fmt(ref_A) << ',' << fmt(ref_B) << "\n";
    }
  }
  return out.str();
}

EdgeScore score_edges(const InfluenceTensor& estimate, const InfluenceTensor& truth,
                      double threshold, const std::vector<int>& target_nodes) {
  if (!estimate.same_dims(truth)) throw std::invalid_argument("score_edges: dimension mismatch");
  std::vector<bool> is_target(estimate.M(), false);
  for (int m : target_nodes) is_target[m] = true;
  double mx = 0.0;
  for (double v : estimate.data()) mx = std::max(mx, std::abs(v));
  EdgeScore score;
  for (int m = 0; m < estimate.M(); ++m) {
    if (!is_target[m]) continue;
    for (int k = 0; k < estimate.K_out(); ++k) {
      for (int mp = 0; mp < estimate.M(); ++mp) {
        for (int kp = 0; kp < estimate.K_in(); ++kp) {
          bool est = mx > 0.0 && std::abs(estimate.at(m, k, mp, kp)) / mx > threshold;
          bool tru = truth.at(m, k, mp, kp) != 0.0;
          if (est && tru) ++score.tp;
          if (est && !tru) ++score.fp;
          if (!est && tru) ++score.fn;
        }
      }
    }
  }
  score.precision = score.tp + score.fp > 0 ? static_cast<double>(score.tp) / (score.tp + score.fp) : 0.0;
  score.recall = score.tp + score.fn > 0 ? static_cast<double>(score.tp) / (score.tp + score.fn) : 0.0;
  score.f1 = score.precision + score.recall > 0.0
                 ? 2.0 * score.precision * score.recall / (score.precision + score.recall)
                 : 0.0;
  return score;
}

MixtureStudyResult run_mixture_study(const MixtureStudyConfig& cfg, int threads) {
  MixtureStudyResult res;
  res.cfg = cfg;
  const MixtureSpec& spec = cfg.spec;
  spec.validate();
  const int M = spec.M(), K = spec.K();

  // ground truth in relative coordinates: group1 rows from A_ln, group2 rows
  // from the relative transform of A_mn
  InfluenceTensor mn_rel = absolute_to_relative(spec.A_mn);
  res.truth_relative = InfluenceTensor(M, K - 1, K);
  for (int m : spec.group1) {
    res.truth_relative.node_matrix(m) = spec.A_ln.node_matrix(m);
  }
  for (int m : spec.group2) {
    res.truth_relative.node_matrix(m) = mn_rel.node_matrix(m);
  }

  const double lambda_joint = lambda_rule(cfg.lambda_coeff_joint, K, M, cfg.T);
  const double lambda_mn = lambda_rule(cfg.lambda_coeff_mn, K, M, cfg.T);

  res.reports.resize(cfg.seeds.size());
  parallel_for(static_cast<int>(cfg.seeds.size()), threads, [&](int i) {
    std::uint64_t seed = cfg.seeds[i];
    EventPanel panel = simulate_mixture(spec, cfg.T, seed);
    EventPanel rounded = round_to_categorical(panel);

    FitConfig joint_cfg;
    joint_cfg.lambda = lambda_joint;
    joint_cfg.alpha = cfg.alpha;
    JointFitResult ln_fit = fit_joint(panel, spec.nu_ln, spec.eta_bern, joint_cfg, 1);

    FitConfig mn_cfg;
    mn_cfg.lambda = lambda_mn;
    FitResult mn_fit = fit_multinomial(rounded, spec.nu_mn, mn_cfg, 1);
    InfluenceTensor mn_fit_rel = absolute_to_relative(mn_fit.A);

    MixtureSeedReport rep;
    rep.seed = seed;
    rep.ln_group1 = score_edges(ln_fit.A, res.truth_relative, cfg.threshold, spec.group1);
    rep.ln_group2 = score_edges(ln_fit.A, res.truth_relative, cfg.threshold, spec.group2);
    rep.mn_group1 = score_edges(mn_fit_rel, res.truth_relative, cfg.threshold, spec.group1);
    rep.mn_group2 = score_edges(mn_fit_rel, res.truth_relative, cfg.threshold, spec.group2);
    res.reports[i] = rep;
  });
  return res;
}

std::string mixture_to_csv(const MixtureStudyResult& res) {
  std::ostringstream out;
  out << "seed,method,target_group,tp,fp,fn,precision,recall,f1\n";
  auto row = [&](std::uint64_t seed, const char* method, const char* group,
                 const EdgeScore& s) {
    out << seed << ',' << method << ',' << group << ',' << s.tp << ',' << s.fp << ','
        << s.fn << ',' << fmt(s.precision) << ',' << fmt(s.recall) << ',' << fmt(s.f1)
        << "\n";
  };
  for (const MixtureSeedReport& rep : res.reports) {
    row(rep.seed, "logistic-normal", "group1", rep.ln_group1);
    row(rep.seed, "logistic-normal", "group2", rep.ln_group2);
    row(rep.seed, "multinomial", "group1", rep.mn_group1);
    row(rep.seed, "multinomial", "group2", rep.mn_group2);
  }
  return out.str();
}

}  // namespace ctxnet
