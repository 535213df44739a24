#include "ctxnet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ctxnet/experiments.hpp"
#include "ctxnet/inference.hpp"
#include "ctxnet/manifest.hpp"
#include "ctxnet/models.hpp"
#include "ctxnet/panel.hpp"
#include "ctxnet/simulate.hpp"
#include "ctxnet/solver.hpp"

namespace ctxnet {

namespace {

using nlohmann::json;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return j;
}

// Intercepts can come as a bare flat array or as any JSON object carrying the
// named key (a model file works).
Eigen::MatrixXd load_matrix_arg(const std::string& path, const char* key, int rows, int cols) {
  json j = load_json_file(path);
  json arr;
  if (j.is_array()) {
    arr = j;
  } else if (j.is_object() && j.contains(key) && !j[key].is_null()) {
    arr = j[key];
  } else {
    throw std::runtime_error(path + ": expected an array or an object with \"" +
                             key + "\"");
  }
  if (static_cast<int>(arr.size()) != rows * cols) {
    throw std::runtime_error(path + ": \"" + key + "\" must have " +
                             std::to_string(rows * cols) + " entries (got " +
                             std::to_string(arr.size()) + ")");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = arr[r * cols + c].get<double>();
  }
  return m;
}

std::string stem_of(const std::string& path) {
  std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / p.stem();
  return out.string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

json mixture_spec_to_json(const MixtureSpec& spec) {
  json j;
  j["M"] = spec.M();
  j["K"] = spec.K();
  j["group1"] = spec.group1;
  j["group2"] = spec.group2;
  j["A_ln"] = spec.A_ln.data();
  j["B_bern"] = spec.B_bern.data();
  j["A_mn"] = spec.A_mn.data();
  std::vector<double> nu_ln(spec.nu_ln.size());
  for (int m = 0; m < spec.nu_ln.rows(); ++m) {
    for (int k = 0; k < spec.nu_ln.cols(); ++k) nu_ln[m * spec.nu_ln.cols() + k] = spec.nu_ln(m, k);
  }
  j["nu_ln"] = nu_ln;
  std::vector<double> nu_mn(spec.nu_mn.size());
  for (int m = 0; m < spec.nu_mn.rows(); ++m) {
    for (int k = 0; k < spec.nu_mn.cols(); ++k) nu_mn[m * spec.nu_mn.cols() + k] = spec.nu_mn(m, k);
  }
  j["nu_mn"] = nu_mn;
  j["eta_bern"] = std::vector<double>(spec.eta_bern.data(), spec.eta_bern.data() + spec.eta_bern.size());
  j["sigma_contam"] = spec.sigma_contam;
  return j;
}

// --config <json> provides defaults for the active subcommand; explicit
// flags override via the take-last policy.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string cfg_path;
  std::size_t sub_pos = std::string::npos;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub_pos == std::string::npos && !args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
    }
    if (args[i] == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) cfg_path = args[i].substr(9);
  }
  if (cfg_path.empty() || sub_pos == std::string::npos) return args;
  json cfg = load_json_file(cfg_path);
  if (!cfg.is_object()) throw std::runtime_error(cfg_path + ": config must be a JSON object");
  std::vector<std::string> tokens;
  for (auto& [key, value] : cfg.items()) {
    std::string tok = "--" + key + "=";
    if (value.is_string()) {
      tok += value.get<std::string>();
    } else if (value.is_boolean()) {
      if (!value.get<bool>()) continue;
      tok = "--" + key;
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ",";
        joined += v.dump();
      }
      tok += joined;
    } else {
      tok += value.dump();
    }
    tokens.push_back(tok);
  }
  args.insert(args.begin() + sub_pos + 1, tokens.begin(), tokens.end());
  return args;
}

struct CommonOpts {
  int threads = 0;
  bool quiet = false;
  std::string config;
};

void add_common(CLI::App* cmd, CommonOpts& common) {
  cmd->add_option("--threads", common.threads, "Worker threads (0 = machine parallelism)");
  cmd->add_flag("--quiet", common.quiet, "Suppress progress output");
  cmd->add_option("--config", common.config, "JSON file with option defaults");
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    if (!field.empty()) out.push_back(std::stod(field));
  }
  if (out.empty()) throw std::runtime_error("empty grid: " + csv);
  return out;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Context-dependent influence networks: simulate, fit, evaluate"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Draw a panel from a model or preset");
  struct {
    std::string model, preset, out;
    int T = 0, M = 10, s = 10, K = 2;
    std::uint64_t seed = 1;
    double init_event_prob = 0.8;
    CommonOpts common;
  } sim_opts;
  sim->add_option("--model", sim_opts.model, "Ground-truth model JSON");
  sim->add_option("--preset", sim_opts.preset,
                  "One of mn-4.1.1|ln-constq-4.1.2|ln-dyn-4.1.3|mixture-appB "
                  "(aliases: mn, ln-constq, ln-dyn, mixture)");
  sim->add_option("--T", sim_opts.T, "Number of transitions")->required();
  sim->add_option("--M", sim_opts.M, "Nodes (presets)");
  sim->add_option("--s", sim_opts.s, "Total group sparsity (presets)");
  sim->add_option("--K", sim_opts.K, "Categories (presets)");
  sim->add_option("--seed", sim_opts.seed, "RNG seed");
  sim->add_option("--init-event-prob", sim_opts.init_event_prob, "Initial event probability");
  sim->add_option("--out", sim_opts.out, "Panel CSV path")->required();
  add_common(sim, sim_opts.common);

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "Fit a penalized model to a panel");
  struct {
    std::string kind, panel, nu, eta, out;
    double lambda = 0.0, alpha = 0.4, tol = 1e-8, clip_eps = 1e-6;
    int max_iters = 5000, T_override = -1;
    bool fit_intercepts = false;
    CommonOpts common;
  } fit_opts;
  fit->add_option("--model-kind", fit_opts.kind, "mn | ln-constq | ln-joint")->required();
  fit->add_option("--panel", fit_opts.panel, "Panel CSV")->required();
  fit->add_option("--nu", fit_opts.nu, "Intercept JSON (array or object with \"nu\")");
  fit->add_option("--eta", fit_opts.eta, "Occurrence offsets JSON (ln-joint)");
  fit->add_option("--lambda", fit_opts.lambda, "Group penalty")->required();
  fit->add_option("--alpha", fit_opts.alpha, "Loss mixing weight (ln-joint)");
  fit->add_option("--max-iters", fit_opts.max_iters, "Iteration cap");
  fit->add_option("--tol", fit_opts.tol, "Relative objective-change stop");
  fit->add_option("--clip-eps", fit_opts.clip_eps, "Simplex clipping for ingested panels");
  fit->add_option("--T", fit_opts.T_override, "Panel length override (trailing zero steps)");
  fit->add_flag("--fit-intercepts", fit_opts.fit_intercepts, "Optimize unpenalized intercepts");
  fit->add_option("--out", fit_opts.out, "Fitted model JSON")->required();
  add_common(fit, fit_opts.common);

  // ---- cv ----
  auto* cv = app.add_subcommand("cv", "Rolling-window cross-validation");
  struct {
    std::string kind, panel, nu, eta, out, lambda_grid, alpha_grid, criterion = "loss";
    double tol = 1e-8, clip_eps = 1e-6;
    int max_iters = 5000, T_override = -1;
    CommonOpts common;
  } cv_opts;
  cv->add_option("--model-kind", cv_opts.kind, "mn | ln-constq | ln-joint")->required();
  cv->add_option("--panel", cv_opts.panel, "Panel CSV")->required();
  cv->add_option("--nu", cv_opts.nu, "Intercept JSON");
  cv->add_option("--eta", cv_opts.eta, "Occurrence offsets JSON (ln-joint)");
  cv->add_option("--lambda-grid", cv_opts.lambda_grid, "Comma-separated penalties")->required();
  cv->add_option("--alpha-grid", cv_opts.alpha_grid, "Comma-separated alphas (ln-joint)");
  cv->add_option("--criterion", cv_opts.criterion, "loss | pred");
  cv->add_option("--max-iters", cv_opts.max_iters, "Iteration cap");
  cv->add_option("--tol", cv_opts.tol, "Relative objective-change stop");
  cv->add_option("--clip-eps", cv_opts.clip_eps, "Simplex clipping for ingested panels");
  cv->add_option("--T", cv_opts.T_override, "Panel length override");
  cv->add_option("--out", cv_opts.out, "Score table JSON")->required();
  add_common(cv, cv_opts.common);

  // ---- predict ----
  auto* pred = app.add_subcommand("predict", "One-step-ahead holdout prediction error");
  struct {
    std::string model, panel, metric, out;
    int holdout_start = 0, T_override = -1;
    CommonOpts common;
  } pred_opts;
  pred->add_option("--model", pred_opts.model, "Model JSON")->required();
  pred->add_option("--panel", pred_opts.panel, "Panel CSV")->required();
  pred->add_option("--holdout-start", pred_opts.holdout_start, "First holdout step")->required();
  pred->add_option("--metric", pred_opts.metric, "mn | ln")->required();
  pred->add_option("--T", pred_opts.T_override, "Panel length override");
  pred->add_option("--out", pred_opts.out, "Report JSON (default: stdout only)");
  add_common(pred, pred_opts.common);

  // ---- export ----
  auto* exp = app.add_subcommand("export", "Thresholded edge list from a model");
  struct {
    std::string model, mode = "rel", format = "json", out;
    double threshold = 0.1;
    CommonOpts common;
  } exp_opts;
  exp->add_option("--model", exp_opts.model, "Model JSON")->required();
  exp->add_option("--mode", exp_opts.mode, "abs | rel | occ");
  exp->add_option("--threshold", exp_opts.threshold, "Normalized magnitude cutoff");
  exp->add_option("--format", exp_opts.format, "json | dot");
  exp->add_option("--out", exp_opts.out, "Edge list path")->required();
  add_common(exp, exp_opts.common);

  // ---- experiment ----
  auto* expm = app.add_subcommand("experiment", "Synthetic study presets");
  struct {
    std::string name, out_dir;
    int trials = -1;
    std::uint64_t seed = 1;
    bool full = false;
    CommonOpts common;
  } expm_opts;
  expm->add_option("--name", expm_opts.name,
                   "scaling-mn | scaling-ln-constq | scaling-ln-joint | alpha-sweep | mixture")
      ->required();
  expm->add_option("--out-dir", expm_opts.out_dir, "Output directory")->required();
  expm->add_option("--trials", expm_opts.trials, "Trials per cell");
  expm->add_option("--seed", expm_opts.seed, "Master seed");
  expm->add_flag("--full", expm_opts.full, "Paper-scale trial counts");
  add_common(expm, expm_opts.common);

  // ---- validate ----
  auto* val = app.add_subcommand("validate", "Check panel invariants and report stats");
  struct {
    std::string panel, kind = "auto";
    int T_override = -1;
    CommonOpts common;
  } val_opts;
  val->add_option("--panel", val_opts.panel, "Panel CSV")->required();
  val->add_option("--kind", val_opts.kind, "cat | comp | auto");
  val->add_option("--T", val_opts.T_override, "Panel length override");
  add_common(val, val_opts.common);

  try {
    args = expand_config(std::move(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    Timer timer;
    if (sim->parsed()) {
      const auto& o = sim_opts;
      RunManifest man;
      man.command = "simulate";
      man.seed = o.seed;
      EventPanel panel;
      json cfg;
      cfg["T"] = o.T;
      cfg["seed"] = o.seed;
      cfg["init_event_prob"] = o.init_event_prob;
      std::vector<std::pair<std::string, std::string>> outputs;
      if (!o.preset.empty()) {
        cfg["preset"] = o.preset;
        std::string truth_path = stem_of(o.out) + ".truth.json";
        if (o.preset == "mixture-appB" || o.preset == "mixture") {
          MixtureSpec spec = MixtureSpec::benchmark_default();
          panel = simulate_mixture(spec, o.T, o.seed);
          write_text(truth_path, mixture_spec_to_json(spec).dump(2) + "\n");
        } else {
          cfg["M"] = o.M;
          cfg["s"] = o.s;
          cfg["K"] = o.K;
          SparseNetworkConfig net{o.M, o.K, o.s, -2.0, 2.0};
          CounterRng seeds(o.seed);
          std::uint64_t net_seed = seeds.next_u64();
          InitSpec init{o.init_event_prob};
          if (o.preset == "mn-4.1.1" || o.preset == "mn") {
            MultinomialModel model = make_scaling_multinomial(net, net_seed);
            panel = simulate_multinomial(model, o.T, init, o.seed);
            ModelFile::from(model).save(truth_path);
          } else if (o.preset == "ln-constq-4.1.2" || o.preset == "ln-constq") {
            LogisticNormalModel model = make_scaling_ln_constq(net, 0.8, net_seed);
            panel = simulate_logistic_normal(model, o.T, init, o.seed);
            ModelFile::from(model).save(truth_path);
          } else if (o.preset == "ln-dyn-4.1.3" || o.preset == "ln-dyn") {
            LogisticNormalModel model = make_scaling_ln_joint(net, 1.0, net_seed);
            panel = simulate_logistic_normal(model, o.T, init, o.seed);
            ModelFile::from(model).save(truth_path);
          } else {
            throw std::runtime_error("unknown preset: " + o.preset);
          }
        }
        outputs.emplace_back("truth", truth_path);
      } else if (!o.model.empty()) {
        ModelFile file = ModelFile::load(o.model);
        man.add_input(o.model);
        cfg["model"] = o.model;
        InitSpec init{o.init_event_prob};
        if (file.is_multinomial()) {
          panel = simulate_multinomial(file.to_multinomial(), o.T, init, o.seed);
        } else {
          panel = simulate_logistic_normal(file.to_logistic_normal(), o.T, init, o.seed);
        }
      } else {
        throw std::runtime_error("simulate needs --model or --preset");
      }
      panel.write_csv(o.out);
      man.config_json = cfg.dump();
      man.add_output(o.out);
      for (const auto& [_, path] : outputs) man.add_output(path);
      man.wall_seconds = timer.seconds();
      man.save(o.out + ".manifest.json");
      if (!o.common.quiet) {
        std::cout << "wrote " << o.out << " (T=" << panel.T() << ", M=" << panel.M()
                  << ", K=" << panel.K() << ")\n";
      }
      return 0;
    }

    if (fit->parsed()) {
      const auto& o = fit_opts;
      std::optional<int> T_over;
      if (o.T_override >= 0) T_over = o.T_override;
      PanelKind kind = o.kind == "mn" ? PanelKind::Categorical : PanelKind::Compositional;
      EventPanel panel = EventPanel::read_csv(o.panel, kind, T_over);
      const int M = panel.M(), K = panel.K();
      const int nu_cols = o.kind == "mn" ? K : K - 1;
      Eigen::MatrixXd nu = o.nu.empty() ? Eigen::MatrixXd::Zero(M, nu_cols)
                                        : load_matrix_arg(o.nu, "nu", M, nu_cols);
      FitConfig cfg;
      cfg.lambda = o.lambda;
      cfg.alpha = o.alpha;
      cfg.max_iters = o.max_iters;
      cfg.tol = o.tol;
      cfg.clip_eps = o.clip_eps;
      cfg.fit_intercepts = o.fit_intercepts;

      ModelFile out_model;
      bool converged = true;
      if (o.kind == "mn") {
        FitResult res = fit_multinomial(panel, nu, cfg, o.common.threads);
        MultinomialModel model{std::move(res.A), std::move(res.nu)};
        out_model = ModelFile::from(model);
        converged = res.all_converged;
      } else if (o.kind == "ln-constq") {
        FitResult res = fit_logistic_normal_const_q(panel, nu, cfg, o.common.threads);
        out_model.M = M;
        out_model.K = K;
        out_model.K_out = K - 1;
        out_model.A = std::move(res.A);
        out_model.nu = std::move(res.nu);
        out_model.q = empirical_q(panel);
        converged = res.all_converged;
      } else if (o.kind == "ln-joint") {
        Eigen::VectorXd eta = o.eta.empty()
                                  ? Eigen::VectorXd::Zero(M)
                                  : Eigen::VectorXd(load_matrix_arg(o.eta, "eta", M, 1));
        JointFitResult res = fit_joint(panel, nu, eta, cfg, o.common.threads);
        out_model.M = M;
        out_model.K = K;
        out_model.K_out = K - 1;
        out_model.A = std::move(res.A);
        out_model.nu = std::move(res.nu);
        out_model.B = std::move(res.B);
        out_model.eta = std::move(res.eta);
        converged = res.all_converged;
      } else {
        throw std::runtime_error("unknown --model-kind: " + o.kind);
      }
      out_model.save(o.out);
      if (!converged && !o.common.quiet) {
        std::cerr << "warning: some nodes hit the iteration cap before the tolerance\n";
      }
      RunManifest man;
      man.command = "fit";
      json cfg_echo;
      cfg_echo["model-kind"] = o.kind;
      cfg_echo["lambda"] = o.lambda;
      cfg_echo["alpha"] = o.alpha;
      cfg_echo["max-iters"] = o.max_iters;
      cfg_echo["tol"] = o.tol;
      cfg_echo["clip-eps"] = o.clip_eps;
      cfg_echo["fit-intercepts"] = o.fit_intercepts;
      man.config_json = cfg_echo.dump();
      man.add_input(o.panel);
      if (!o.nu.empty()) man.add_input(o.nu);
      if (!o.eta.empty()) man.add_input(o.eta);
      man.add_output(o.out);
      man.wall_seconds = timer.seconds();
      man.save(o.out + ".manifest.json");
      if (!o.common.quiet) std::cout << "wrote " << o.out << "\n";
      return 0;
    }

    if (cv->parsed()) {
      const auto& o = cv_opts;
      std::optional<int> T_over;
      if (o.T_override >= 0) T_over = o.T_override;
      PanelKind kind = o.kind == "mn" ? PanelKind::Categorical : PanelKind::Compositional;
      EventPanel panel = EventPanel::read_csv(o.panel, kind, T_over);
      const int M = panel.M(), K = panel.K();
      const int nu_cols = o.kind == "mn" ? K : K - 1;
      Eigen::MatrixXd nu = o.nu.empty() ? Eigen::MatrixXd::Zero(M, nu_cols)
                                        : load_matrix_arg(o.nu, "nu", M, nu_cols);
      Eigen::VectorXd eta = Eigen::VectorXd::Zero(M);
      if (!o.eta.empty()) eta = load_matrix_arg(o.eta, "eta", M, 1);

      ModelKindId id;
      if (o.kind == "mn") {
        id = ModelKindId::Multinomial;
      } else if (o.kind == "ln-constq") {
        id = ModelKindId::LnConstQ;
      } else if (o.kind == "ln-joint") {
        id = ModelKindId::LnJoint;
      } else {
        throw std::runtime_error("unknown --model-kind: " + o.kind);
      }
      CvConfig cv_cfg;
      cv_cfg.lambda_grid = parse_grid(o.lambda_grid);
      if (!o.alpha_grid.empty()) cv_cfg.alpha_grid = parse_grid(o.alpha_grid);
      if (o.criterion == "loss") {
        cv_cfg.criterion = CvCriterion::HeldOutLoss;
      } else if (o.criterion == "pred") {
        cv_cfg.criterion = CvCriterion::PredictionError;
      } else {
        throw std::runtime_error("unknown --criterion: " + o.criterion);
      }
      cv_cfg.quiet = o.common.quiet;
      FitConfig tmpl;
      tmpl.max_iters = o.max_iters;
      tmpl.tol = o.tol;
      tmpl.clip_eps = o.clip_eps;
      CvResult res = cross_validate(id, panel, nu, &eta, cv_cfg, tmpl, o.common.threads);

      json out;
      out["best_lambda"] = res.best_lambda;
      if (res.best_alpha) out["best_alpha"] = *res.best_alpha;
      out["table"] = json::array();
      for (const CvCell& cell : res.table) {
        json row;
        row["lambda"] = cell.lambda;
        row["alpha"] = cell.alpha;
        row["score"] = cell.score;
        row["folds_used"] = cell.folds_used;
        out["table"].push_back(row);
      }
      write_text(o.out, out.dump(2) + "\n");
      RunManifest man;
      man.command = "cv";
      json cfg_echo;
      cfg_echo["model-kind"] = o.kind;
      cfg_echo["lambda-grid"] = o.lambda_grid;
      cfg_echo["alpha-grid"] = o.alpha_grid;
      cfg_echo["criterion"] = o.criterion;
      man.config_json = cfg_echo.dump();
      man.add_input(o.panel);
      man.add_output(o.out);
      man.wall_seconds = timer.seconds();
      man.save(o.out + ".manifest.json");
      if (!o.common.quiet) {
        std::cout << "best lambda " << res.best_lambda;
        if (res.best_alpha) std::cout << ", best alpha " << *res.best_alpha;
        std::cout << "\n";
      }
      return 0;
    }

    if (pred->parsed()) {
      const auto& o = pred_opts;
      std::optional<int> T_over;
      if (o.T_override >= 0) T_over = o.T_override;
      ModelFile file = ModelFile::load(o.model);
      double err = 0.0;
      int n = 0;
      if (o.metric == "mn") {
        if (!file.is_multinomial()) {
          throw std::runtime_error("metric mn needs a multinomial model (K_out == K)");
        }
        EventPanel panel = EventPanel::read_csv(o.panel, PanelKind::Categorical, T_over);
        err = prediction_error(panel, file.to_multinomial(), o.holdout_start);
        n = panel.T() - o.holdout_start + 1;
      } else if (o.metric == "ln") {
        EventPanel panel = EventPanel::read_csv(o.panel, PanelKind::Compositional, T_over);
        LogisticNormalModel model = file.to_logistic_normal();
        Eigen::VectorXd q_hat;
        const Eigen::VectorXd* q_ptr = nullptr;
        if (!model.has_dynamic_q() && !file.q) {
          q_hat = empirical_q(panel, o.holdout_start);
          q_ptr = &q_hat;
        }
        err = prediction_error(panel, model, o.holdout_start, q_ptr);
        n = panel.T() - o.holdout_start + 1;
      } else {
        throw std::runtime_error("unknown --metric: " + o.metric);
      }
      json rep;
      rep["metric"] = o.metric;
      rep["holdout_start"] = o.holdout_start;
      rep["n_transitions"] = n;
      rep["prediction_error"] = err;
      std::cout << rep.dump(2) << "\n";
      if (!o.out.empty()) {
        write_text(o.out, rep.dump(2) + "\n");
        RunManifest man;
        man.command = "predict";
        man.config_json = rep.dump();
        man.add_input(o.model);
        man.add_input(o.panel);
        man.add_output(o.out);
        man.wall_seconds = timer.seconds();
        man.save(o.out + ".manifest.json");
      }
      return 0;
    }

    if (exp->parsed()) {
      const auto& o = exp_opts;
      ModelFile file = ModelFile::load(o.model);
      InfluenceTensor net;
      EdgeMode mode;
      if (o.mode == "abs") {
        if (!file.is_multinomial()) {
          throw std::runtime_error("mode abs needs a multinomial model");
        }
        net = file.A;
        mode = EdgeMode::Absolute;
      } else if (o.mode == "rel") {
        net = file.is_multinomial() ? absolute_to_relative(file.A) : file.A;
        mode = EdgeMode::Relative;
      } else if (o.mode == "occ") {
        if (!file.B) throw std::runtime_error("mode occ needs a model with an occurrence network");
        net = *file.B;
        mode = EdgeMode::Occurrence;
      } else {
        throw std::runtime_error("unknown --mode: " + o.mode);
      }
      EdgeList edges = extract_edges(net, o.threshold, mode);
      if (o.format == "json") {
        write_text(o.out, edges_to_json(edges) + "\n");
      } else if (o.format == "dot") {
        write_text(o.out, edges_to_dot(edges));
      } else {
        throw std::runtime_error("unknown --format: " + o.format);
      }
      RunManifest man;
      man.command = "export";
      json cfg_echo;
      cfg_echo["mode"] = o.mode;
      cfg_echo["threshold"] = o.threshold;
      cfg_echo["format"] = o.format;
      man.config_json = cfg_echo.dump();
      man.add_input(o.model);
      man.add_output(o.out);
      man.wall_seconds = timer.seconds();
      man.save(o.out + ".manifest.json");
      if (!o.common.quiet) {
        std::cout << "wrote " << edges.edges.size() << " edges to " << o.out << "\n";
      }
      return 0;
    }

    if (expm->parsed()) {
      const auto& o = expm_opts;
      std::filesystem::create_directories(o.out_dir);
      std::string csv_path = o.out_dir + "/" + o.name + ".csv";
      json cfg_echo;
      cfg_echo["name"] = o.name;
      cfg_echo["seed"] = o.seed;
      if (o.name == "scaling-mn" || o.name == "scaling-ln-constq" ||
          o.name == "scaling-ln-joint") {
        ScalingConfig cfg;
        cfg.seed = o.seed;
        if (o.name == "scaling-mn") {
          cfg.kind = ScalingKind::Multinomial;
          cfg.lambda_coeff = 0.12;
        } else if (o.name == "scaling-ln-constq") {
          cfg.kind = ScalingKind::LnConstQ;
          cfg.lambda_coeff = 0.13;
        } else {
          cfg.kind = ScalingKind::LnJoint;
          cfg.lambda_coeff = 0.08;
        }
        cfg.trials = o.full ? 50 : 10;
        if (o.trials > 0) cfg.trials = o.trials;
        ScalingResult res = run_scaling(cfg, o.common.threads);
        write_text(csv_path, scaling_to_csv(res));
        cfg_echo["trials"] = cfg.trials;
        cfg_echo["lambda_coeff"] = cfg.lambda_coeff;
        cfg_echo["K"] = cfg.K;
        cfg_echo["Ms"] = cfg.Ms;
        cfg_echo["s_multipliers"] = cfg.s_multipliers;
        cfg_echo["Ts"] = cfg.Ts;
        json slopes = json::array();
        for (const ScalingCurve& c : res.curves) {
          json row;
          row["M"] = c.M;
          row["s"] = c.s;
          row["slope_A"] = c.slope_A;
          if (cfg.kind == ScalingKind::LnJoint) row["slope_B"] = c.slope_B;
          slopes.push_back(row);
        }
        cfg_echo["slopes"] = slopes;
      } else if (o.name == "alpha-sweep") {
        AlphaSweepConfig cfg;
        cfg.seed = o.seed;
        if (o.trials > 0) cfg.trials = o.trials;
        AlphaSweepResult res = run_alpha_sweep(cfg, o.common.threads);
        write_text(csv_path, alpha_sweep_to_csv(res));
        cfg_echo["trials"] = cfg.trials;
        cfg_echo["T"] = cfg.T;
        cfg_echo["M"] = cfg.M;
        cfg_echo["s"] = cfg.s;
        cfg_echo["alpha_grid"] = cfg.alpha_grid;
        cfg_echo["lambda_coeff_grid"] = cfg.lambda_coeff_grid;
        cfg_echo["sigma2s"] = cfg.sigma2s;
      } else if (o.name == "mixture") {
        MixtureStudyConfig cfg;
        if (o.trials > 0) {
          cfg.seeds.clear();
          for (int i = 0; i < o.trials; ++i) cfg.seeds.push_back(o.seed + i);
        }
        MixtureStudyResult res = run_mixture_study(cfg, o.common.threads);
        write_text(csv_path, mixture_to_csv(res));
        cfg_echo["T"] = cfg.T;
        cfg_echo["seeds"] = cfg.seeds;
        cfg_echo["threshold"] = cfg.threshold;
        cfg_echo["alpha"] = cfg.alpha;
        cfg_echo["lambda_coeff_joint"] = cfg.lambda_coeff_joint;
        cfg_echo["lambda_coeff_mn"] = cfg.lambda_coeff_mn;
      } else {
        throw std::runtime_error("unknown --name: " + o.name);
      }
      RunManifest man;
      man.command = "experiment";
      man.seed = o.seed;
      man.config_json = cfg_echo.dump();
      man.add_output(csv_path);
      man.wall_seconds = timer.seconds();
      man.save(o.out_dir + "/" + o.name + ".manifest.json");
      if (!o.common.quiet) std::cout << "wrote " << csv_path << "\n";
      return 0;
    }

    if (val->parsed()) {
      const auto& o = val_opts;
      std::optional<int> T_over;
      if (o.T_override >= 0) T_over = o.T_override;
      PanelKind kind = PanelKind::Compositional;
      if (o.kind == "cat") {
        kind = PanelKind::Categorical;
      } else if (o.kind == "auto") {
        // a one-hot-only panel validates as categorical
        try {
          EventPanel::read_csv(o.panel, PanelKind::Categorical, T_over);
          kind = PanelKind::Categorical;
        } catch (const std::exception&) {
          kind = PanelKind::Compositional;
        }
      } else if (o.kind != "comp") {
        throw std::runtime_error("unknown --kind: " + o.kind);
      }
      EventPanel panel = EventPanel::read_csv(o.panel, kind, T_over);
      // T_m counts outcome steps t = 1..T
      Eigen::VectorXd counts = panel.event_counts() - panel.event_counts(1);
      std::cout << "OK: " << (kind == PanelKind::Categorical ? "categorical" : "compositional")
                << " panel, T=" << panel.T() << ", M=" << panel.M() << ", K=" << panel.K()
                << ", events=" << static_cast<long long>(counts.sum()) << "\n";
      Eigen::VectorXd q = empirical_q(panel);
      for (int m = 0; m < panel.M(); ++m) {
        std::cout << "  node " << m << ": T_m=" << static_cast<long long>(counts[m])
                  << ", frequency=" << q[m] << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace ctxnet
