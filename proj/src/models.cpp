#include "ctxnet/models.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ctxnet {

using nlohmann::json;

void LogisticNormalModel::validate() const {
  int Km1 = K() - 1;
  if (A.K_out() != Km1) throw std::invalid_argument("LN model: A must have K-1 output slices");
  if (nu.rows() != M() || nu.cols() != Km1) throw std::invalid_argument("LN model: nu shape");
  if (Sigma.rows() != Km1 || Sigma.cols() != Km1) throw std::invalid_argument("LN model: Sigma shape");
  if (!Sigma.isApprox(Sigma.transpose(), 1e-12)) throw std::invalid_argument("LN model: Sigma not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  if (es.eigenvalues().minCoeff() < -1e-12) throw std::invalid_argument("LN model: Sigma not PSD");
  if (const auto* cq = std::get_if<ConstantQ>(&occurrence)) {
    if (cq->q.size() != M()) throw std::invalid_argument("LN model: q length");
    for (int m = 0; m < M(); ++m) {
      if (cq->q[m] <= 0.0 || cq->q[m] > 1.0) throw std::invalid_argument("LN model: q outside (0,1]");
    }
  } else {
    const auto& dyn = std::get<DynamicOccurrence>(occurrence);
    if (dyn.B.M() != M() || dyn.B.K_out() != 1 || dyn.B.K_in() != K()) {
      throw std::invalid_argument("LN model: B shape");
    }
    if (dyn.eta.size() != M()) throw std::invalid_argument("LN model: eta length");
  }
}

void MixtureSpec::validate() const {
  int Mn = M();
  std::vector<int> seen(Mn, 0);
  for (int m : group1) {
    if (m < 0 || m >= Mn) throw std::invalid_argument("MixtureSpec: node out of range");
    ++seen[m];
  }
  for (int m : group2) {
    if (m < 0 || m >= Mn) throw std::invalid_argument("MixtureSpec: node out of range");
    ++seen[m];
  }
  for (int m = 0; m < Mn; ++m) {
    if (seen[m] != 1) throw std::invalid_argument("MixtureSpec: groups must partition the nodes");
  }
  if (sigma_contam <= 0.0) throw std::invalid_argument("MixtureSpec: sigma_contam must be > 0");
}

MixtureSpec MixtureSpec::benchmark_default() {
  const int M = 17, K = 5;
  MixtureSpec spec;
  spec.group1 = {0, 1, 2, 3, 4};
  for (int m = 5; m < M; ++m) spec.group2.push_back(m);
  spec.A_ln = InfluenceTensor(M, K - 1, K);
  spec.B_bern = InfluenceTensor(M, 1, K);
  spec.A_mn = InfluenceTensor(M, K, K);
  spec.nu_ln = Eigen::MatrixXd::Zero(M, K - 1);
  spec.eta_bern = Eigen::VectorXd::Zero(M);
  spec.nu_mn = Eigen::MatrixXd::Zero(M, K);
  spec.sigma_contam = 0.2;

  // Node 0 listens to the four focus hubs (one per non-baseline category);
  // nodes 1-4 listen to node 0 in every non-baseline category.
  for (int j = 0; j < 4; ++j) {
    int hub = 5 + 3 * j;  // nodes 6, 9, 12, 15 in 1-based numbering
    spec.A_ln.at(0, j, hub, j) = 0.5;
  }
  for (int m = 1; m <= 4; ++m) {
    for (int k = 0; k < 4; ++k) spec.A_ln.at(m, k, 0, k) = 1.0;
  }
  // Occurrence network mirrors the relative network: B[m, m', k'] equals
  // A_ln[m, k', m', k'] for non-baseline k', zero in the baseline column.
  for (int m = 0; m < M; ++m) {
    for (int mp = 0; mp < M; ++mp) {
      for (int kp = 0; kp < K - 1; ++kp) {
        spec.B_bern.at(m, 0, mp, kp) = spec.A_ln.at(m, kp, mp, kp);
      }
    }
  }
  // Hubs receive influence 2 from node 0 in their focus category; each hub
  // drives its two satellites at 0.7 in the same category.
  for (int j = 0; j < 4; ++j) {
    int hub = 5 + 3 * j;
    spec.A_mn.at(hub, j, 0, j) = 2.0;
    spec.A_mn.at(hub + 1, j, hub, j) = 0.7;
    spec.A_mn.at(hub + 2, j, hub, j) = 0.7;
  }

  for (int m = 0; m <= 4; ++m) {
    spec.nu_ln.row(m).setOnes();
    spec.eta_bern[m] = std::log(4.0);
  }
  for (int m = 5; m < M; ++m) {
    spec.nu_mn.row(m).setConstant(0.5);
    spec.nu_mn(m, (m - 5) / 3) = 1.0;
  }
  spec.validate();
  return spec;
}

namespace {

json flat(const std::vector<double>& v) { return json(v); }

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> v(m.size());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  }
  return json(v);
}

Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows * cols) {
    throw std::runtime_error(std::string("model JSON: bad length for ") + what);
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = j[i * cols + c].get<double>();
  }
  return m;
}

InfluenceTensor tensor_from_json(const json& j, int M, int K_out, int K_in, const char* what) {
  InfluenceTensor t(M, K_out, K_in);
  if (!j.is_array() || j.size() != t.size()) {
    throw std::runtime_error(std::string("model JSON: bad length for ") + what);
  }
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = j[i].get<double>();
  return t;
}

}  // namespace

ModelFile ModelFile::from(const MultinomialModel& m) {
  ModelFile f;
  f.M = m.M();
  f.K = m.K();
  f.K_out = m.K();
  f.A = m.A;
  f.nu = m.nu;
  return f;
}

ModelFile ModelFile::from(const LogisticNormalModel& m) {
  ModelFile f;
  f.M = m.M();
  f.K = m.K();
  f.K_out = m.K() - 1;
  f.A = m.A;
  f.nu = m.nu;
  f.Sigma = m.Sigma;
  if (const auto* cq = std::get_if<ConstantQ>(&m.occurrence)) {
    f.q = cq->q;
  } else {
    const auto& dyn = std::get<DynamicOccurrence>(m.occurrence);
    f.B = dyn.B;
    f.eta = dyn.eta;
  }
  return f;
}

MultinomialModel ModelFile::to_multinomial() const {
  if (!is_multinomial()) throw std::runtime_error("model JSON: not a multinomial model (K_out != K)");
  return {A, nu};
}

LogisticNormalModel ModelFile::to_logistic_normal() const {
  if (K_out != K - 1) throw std::runtime_error("model JSON: not a logistic-normal model (K_out != K-1)");
  LogisticNormalModel m;
  m.A = A;
  m.nu = nu;
  m.Sigma = Sigma ? *Sigma : Eigen::MatrixXd::Identity(K - 1, K - 1);
  if (B && eta) {
    m.occurrence = DynamicOccurrence{*B, *eta};
  } else if (q) {
    m.occurrence = ConstantQ{*q};
  } else {
    throw std::runtime_error("model JSON: logistic-normal model needs q or (B, eta)");
  }
  return m;
}

std::string ModelFile::to_json() const {
  json j;
  j["M"] = M;
  j["K"] = K;
  j["K_out"] = K_out;
  j["A"] = flat(A.data());
  j["nu"] = matrix_to_json(nu);
  j["B"] = B ? flat(B->data()) : json(nullptr);
  j["eta"] = eta ? matrix_to_json(*eta) : json(nullptr);
  j["Sigma"] = Sigma ? matrix_to_json(*Sigma) : json(nullptr);
  j["q"] = q ? matrix_to_json(*q) : json(nullptr);
  return j.dump(2);
}

ModelFile ModelFile::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelFile f;
  f.M = j.at("M").get<int>();
  f.K = j.at("K").get<int>();
  f.K_out = j.at("K_out").get<int>();
  if (f.M < 1 || f.K < 1 || f.K_out < 1) throw std::runtime_error("model JSON: bad dimensions");
  f.A = tensor_from_json(j.at("A"), f.M, f.K_out, f.K, "A");
  f.nu = matrix_from_json(j.at("nu"), f.M, f.K_out == f.K ? f.K : f.K - 1, "nu");
  if (j.contains("B") && !j["B"].is_null()) {
    f.B = tensor_from_json(j["B"], f.M, 1, f.K, "B");
  }
  if (j.contains("eta") && !j["eta"].is_null()) {
    f.eta = Eigen::VectorXd(matrix_from_json(j["eta"], f.M, 1, "eta"));
  }
  if (j.contains("Sigma") && !j["Sigma"].is_null()) {
    f.Sigma = matrix_from_json(j["Sigma"], f.K - 1, f.K - 1, "Sigma");
  }
  if (j.contains("q") && !j["q"].is_null()) {
    f.q = Eigen::VectorXd(matrix_from_json(j["q"], f.M, 1, "q"));
  }
  return f;
}

void ModelFile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

ModelFile ModelFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace ctxnet
