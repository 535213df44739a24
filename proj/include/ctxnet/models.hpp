#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ctxnet/tensor.hpp"

namespace ctxnet {

// Absolute-influence autoregressive model: K x K sub-networks plus intercepts.
struct MultinomialModel {
  InfluenceTensor A;      // (M, K, M, K)
  Eigen::MatrixXd nu;     // M x K
  int M() const { return A.M(); }
  int K() const { return A.K_in(); }
};

struct ConstantQ {
  Eigen::VectorXd q;  // per-node event probability in (0, 1]
};

struct DynamicOccurrence {
  InfluenceTensor B;     // (M, 1, M, K)
  Eigen::VectorXd eta;   // per-node offset
};

// Relative-influence model on log-ratios against baseline category K, with an
// occurrence process that is either constant or driven by the past.
struct LogisticNormalModel {
  InfluenceTensor A;      // (M, K-1, M, K)
  Eigen::MatrixXd nu;     // M x (K-1)
  Eigen::MatrixXd Sigma;  // (K-1) x (K-1), positive semi-definite
  std::variant<ConstantQ, DynamicOccurrence> occurrence;

  int M() const { return A.M(); }
  int K() const { return A.K_in(); }
  bool has_dynamic_q() const {
    return std::holds_alternative<DynamicOccurrence>(occurrence);
  }
  void validate() const;
};

// Hybrid generator: group1 nodes follow the dynamic logistic-normal model,
// group2 nodes draw multinomial outcomes that are observed through
// logistic-normal contamination with noise scale sigma_contam.
struct MixtureSpec {
  std::vector<int> group1, group2;
  InfluenceTensor A_ln;     // (M, K-1, M, K), rows outside group1 zero
  InfluenceTensor B_bern;   // (M, 1, M, K)
  Eigen::MatrixXd nu_ln;    // M x (K-1)
  Eigen::VectorXd eta_bern; // M
  InfluenceTensor A_mn;     // (M, K, M, K), rows outside group2 zero
  Eigen::MatrixXd nu_mn;    // M x K
  double sigma_contam = 0.2;

  int M() const { return A_ln.M(); }
  int K() const { return A_ln.K_in(); }
  void validate() const;

  // The 17-node, 5-category benchmark network with its published parameter
  // values; eta for group1 defaults to log 4 (base event probability 0.8).
  static MixtureSpec benchmark_default();
};

// On-disk model schema shared by all fitted and ground-truth models:
// { "M", "K", "K_out", "A", "nu", "B", "eta", "Sigma", "q" } with flat
// row-major arrays; K_out == K marks a multinomial model, K_out == K-1 a
// logistic-normal one.
struct ModelFile {
  int M = 0, K = 0, K_out = 0;
  InfluenceTensor A;
  Eigen::MatrixXd nu;
  std::optional<InfluenceTensor> B;
  std::optional<Eigen::VectorXd> eta;
  std::optional<Eigen::MatrixXd> Sigma;
  std::optional<Eigen::VectorXd> q;

  bool is_multinomial() const { return K_out == K; }

  static ModelFile from(const MultinomialModel& m);
  static ModelFile from(const LogisticNormalModel& m);
  MultinomialModel to_multinomial() const;
  LogisticNormalModel to_logistic_normal() const;

  std::string to_json() const;
  static ModelFile from_json(const std::string& text);
  void save(const std::string& path) const;
  static ModelFile load(const std::string& path);
};

}  // namespace ctxnet
