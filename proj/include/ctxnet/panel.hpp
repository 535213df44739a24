#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ctxnet/tensor.hpp"

namespace ctxnet {

enum class PanelKind { Categorical, Compositional };

// T+1 x M x K observation tensor. Each (t, m) row is either the zero vector,
// a one-hot vector (Categorical) or a strictly positive simplex vector
// (Compositional). Stored row-major [t, m, k]; immutable after construction
// in all simulation/estimation paths.
class EventPanel {
 public:
  static constexpr double kSimplexTol = 1e-9;

  EventPanel() = default;
  EventPanel(int T_plus_1, int M, int K, PanelKind kind);

  int T_plus_1() const { return T_plus_1_; }
  int T() const { return T_plus_1_ - 1; }
  int M() const { return M_; }
  int K() const { return K_; }
  PanelKind kind() const { return kind_; }

  double& at(int t, int m, int k) { return data_[idx(t, m, k)]; }
  double at(int t, int m, int k) const { return data_[idx(t, m, k)]; }

  bool row_is_zero(int t, int m) const;
  int row_argmax(int t, int m) const;

  // Flattened step X^t as a length-M*K row vector (node-major).
  Eigen::Map<const Eigen::RowVectorXd> step(int t) const {
    return {data_.data() + static_cast<std::size_t>(t) * M_ * K_, M_ * K_};
  }
  // Full panel as a (T+1) x (M*K) matrix; rows 0..T-1 are the covariates of
  // the T transitions and rows 1..T the outcomes.
  ConstMapRowMat matrix() const {
    return {data_.data(), T_plus_1_, M_ * K_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  // Checks the row invariants; throws std::runtime_error naming the first
  // offending (t, node). Compositional rows within kSimplexTol of unit sum
  // are renormalized exactly.
  void validate_and_normalize();

  // Events with outcome index in [0, t_end): count per node (T_m) and total.
  Eigen::VectorXd event_counts(int t_end = -1) const;

  // One row per (t, node) with an event; header "t,node,x_1,...,x_K".
  void write_csv(const std::string& path) const;
  static EventPanel read_csv(const std::string& path, PanelKind kind,
                             std::optional<int> T_override = std::nullopt);

  // Consecutive window [t_begin, t_begin + len - 1] as its own panel.
  EventPanel window(int t_begin, int len) const;

 private:
  std::size_t idx(int t, int m, int k) const {
    return (static_cast<std::size_t>(t) * M_ + m) * K_ + k;
  }

  int T_plus_1_ = 0, M_ = 0, K_ = 0;
  PanelKind kind_ = PanelKind::Categorical;
  std::vector<double> data_;
};

}  // namespace ctxnet
