#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ctxnet/objective.hpp"
#include "ctxnet/panel.hpp"
#include "ctxnet/tensor.hpp"

namespace ctxnet {

struct StepRule {
  enum class Kind { Backtracking, Fixed };
  Kind kind = Kind::Backtracking;
  double init = 1.0;
  double shrink = 0.5;
  double min = 1e-12;
  double fixed = 0.1;  // used by Kind::Fixed
};

struct FitConfig {
  double lambda = 0.0;
  double alpha = 0.4;       // joint fit only
  int max_iters = 5000;
  double tol = 1e-8;        // relative objective change stop
  StepRule step;
  bool fit_intercepts = false;
  double clip_eps = 0.0;    // log-ratio clipping for compositional panels
};

struct NodeDiagnostics {
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
};

struct FitResult {
  InfluenceTensor A;
  Eigen::MatrixXd nu;  // fitted intercepts when requested, else the input
  std::vector<NodeDiagnostics> nodes;
  bool all_converged = true;
};

struct JointFitResult {
  InfluenceTensor A;  // (M, K-1, M, K)
  InfluenceTensor B;  // (M, 1, M, K)
  Eigen::MatrixXd nu;
  Eigen::VectorXd eta;
  std::vector<NodeDiagnostics> nodes;
  bool all_converged = true;
};

// Vectorial group soft-threshold: max(0, 1 - tau/||v||_2) * v, 0 at v = 0.
Eigen::VectorXd prox_group(const Eigen::VectorXd& v, double tau);

// Group-penalized fits; per-node problems solved independently with
// proximal gradient descent initialized at zero. Groups are the (m, m')
// fibers (size K^2, K(K-1) and K^2 respectively).
FitResult fit_multinomial(const EventPanel& panel, const Eigen::MatrixXd& nu,
                          const FitConfig& cfg, int threads = 0);
FitResult fit_logistic_normal_const_q(const EventPanel& panel, const Eigen::MatrixXd& nu,
                                      const FitConfig& cfg, int threads = 0);
// alpha*L_LN + (1-alpha)*L_Bern + lambda*R_alpha, solved on the
// reparameterized variables (sqrt(alpha) A, sqrt(1-alpha) B); alpha = 0 or 1
// fits only the corresponding block with a plain ||.||_R penalty.
JointFitResult fit_joint(const EventPanel& panel, const Eigen::MatrixXd& nu,
                         const Eigen::VectorXd& eta, const FitConfig& cfg,
                         int threads = 0);

// Single-node variants; write only node m of the output tensors.
NodeDiagnostics fit_multinomial_node(const EventPanel& panel, const Eigen::MatrixXd& nu,
                                     const FitConfig& cfg, int m, InfluenceTensor& A,
                                     Eigen::MatrixXd* nu_out = nullptr);
NodeDiagnostics fit_logistic_normal_const_q_node(const EventPanel& panel,
                                                 const Eigen::MatrixXd& nu,
                                                 const FitConfig& cfg, int m,
                                                 InfluenceTensor& A,
                                                 Eigen::MatrixXd* nu_out = nullptr);

// First-order optimality certificate at tolerance tol (violations are
// reported relative to lambda): zero groups need ||G_g||_F <= lambda(1+tol),
// active groups ||G_g + lambda g/||g|| ||_F <= lambda*tol.
struct KktReport {
  double max_zero_violation = 0.0;
  double max_active_violation = 0.0;
  int zero_groups = 0;
  int active_groups = 0;
  double max_violation() const {
    return std::max(max_zero_violation, max_active_violation);
  }
  bool pass(double tol) const { return max_violation() <= tol; }
};

KktReport kkt_audit(const InfluenceTensor& A_hat, const InfluenceTensor& grad,
                    double lambda);
// Joint audit on the reparameterized variables; grad_A/grad_B are the
// gradients of the weighted losses as returned by combined_objective.
KktReport kkt_audit_joint(const InfluenceTensor& A_hat, const InfluenceTensor& B_hat,
                          const InfluenceTensor& grad_A, const InfluenceTensor& grad_B,
                          double alpha, double lambda);

enum class ModelKindId { Multinomial, LnConstQ, LnJoint };
enum class CvCriterion { HeldOutLoss, PredictionError };

struct CvConfig {
  std::vector<double> lambda_grid;
  std::optional<std::vector<double>> alpha_grid;  // joint fits only
  int folds = 5;
  double window_frac = 0.8;
  double offset_frac = 0.05;
  CvCriterion criterion = CvCriterion::HeldOutLoss;
  bool quiet = false;
};

struct CvFold {
  int t_begin;
  int t_end;  // inclusive window of data points [t_begin, t_end]
};

// Rolling windows t_i = round(offset_frac*T*(i-1)) of round(window_frac*T)
// consecutive transitions each.
std::vector<CvFold> cv_folds(int T, const CvConfig& cv);

struct CvCell {
  double lambda = 0.0;
  double alpha = 1.0;
  double score = 0.0;
  int folds_used = 0;
};

struct CvResult {
  double best_lambda = 0.0;
  std::optional<double> best_alpha;
  std::vector<CvCell> table;
};

// Scores every grid point by the mean held-out criterion over the rolling
// folds; deterministic winner, ties broken toward larger lambda.
CvResult cross_validate(ModelKindId kind, const EventPanel& panel,
                        const Eigen::MatrixXd& nu, const Eigen::VectorXd* eta,
                        const CvConfig& cv, const FitConfig& tmpl, int threads = 0);

}  // namespace ctxnet
