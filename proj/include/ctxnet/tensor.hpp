#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace ctxnet {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRowMat = Eigen::Map<RowMat>;
using ConstMapRowMat = Eigen::Map<const RowMat>;

// Dense 4th-order influence tensor, row-major with index order [m, k, m', k'].
// Entry (m, k, m', k') is the influence exerted upon {node m, category k} by
// {node m', category k'}. K_out is K for absolute networks, K-1 for relative
// networks and 1 for occurrence networks.
class InfluenceTensor {
 public:
  InfluenceTensor() = default;
  InfluenceTensor(int M, int K_out, int K_in)
      : M_(M), K_out_(K_out), K_in_(K_in),
        data_(static_cast<std::size_t>(M) * K_out * M * K_in, 0.0) {}

  int M() const { return M_; }
  int K_out() const { return K_out_; }
  int K_in() const { return K_in_; }
  std::size_t size() const { return data_.size(); }
  bool same_dims(const InfluenceTensor& o) const {
    return M_ == o.M_ && K_out_ == o.K_out_ && K_in_ == o.K_in_;
  }

  double& at(int m, int k, int mp, int kp) {
    return data_[idx(m, k, mp, kp)];
  }
  double at(int m, int k, int mp, int kp) const {
    return data_[idx(m, k, mp, kp)];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  // Contiguous slice A[m, :, :, :] viewed as a K_out x (M*K_in) matrix whose
  // column block [m'*K_in, (m'+1)*K_in) is the (m, m') group fiber.
  MapRowMat node_matrix(int m) {
    return MapRowMat(data_.data() + node_offset(m), K_out_, M_ * K_in_);
  }
  ConstMapRowMat node_matrix(int m) const {
    return ConstMapRowMat(data_.data() + node_offset(m), K_out_, M_ * K_in_);
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

 private:
  std::size_t idx(int m, int k, int mp, int kp) const {
    return ((static_cast<std::size_t>(m) * K_out_ + k) * M_ + mp) * K_in_ + kp;
  }
  std::size_t node_offset(int m) const {
    return static_cast<std::size_t>(m) * K_out_ * M_ * K_in_;
  }

  int M_ = 0, K_out_ = 0, K_in_ = 0;
  std::vector<double> data_;
};

// Enumerates the (m, m') groups that partition an influence tensor's entries;
// each group is the fiber A[m, :, m', :].
struct GroupRef {
  int m;
  int mp;
};

class GroupIndex {
 public:
  explicit GroupIndex(int M) : M_(M) {}
  int size() const { return M_ * M_; }
  GroupRef group(int i) const { return {i / M_, i % M_}; }

  static double fiber_norm(const InfluenceTensor& A, GroupRef g) {
    auto W = A.node_matrix(g.m);
    return W.middleCols(g.mp * A.K_in(), A.K_in()).norm();
  }

 private:
  int M_;
};

// sum over (m, m') of the Frobenius norm of the fiber A[m, :, m', :]
double group_norm_R(const InfluenceTensor& A);

// sum over (m, m') of sqrt(alpha*||A fiber||_F^2 + (1-alpha)*||B fiber||_2^2)
double group_norm_R_alpha(const InfluenceTensor& A, const InfluenceTensor& B,
                          double alpha);

double frobenius_sq_diff(const InfluenceTensor& A, const InfluenceTensor& B);

}  // namespace ctxnet
