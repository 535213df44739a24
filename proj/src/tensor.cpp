#include "ctxnet/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxnet {

double group_norm_R(const InfluenceTensor& A) {
  GroupIndex groups(A.M());
  double total = 0.0;
  for (int i = 0; i < groups.size(); ++i) {
    total += GroupIndex::fiber_norm(A, groups.group(i));
  }
  return total;
}

double group_norm_R_alpha(const InfluenceTensor& A, const InfluenceTensor& B,
                          double alpha) {
  if (A.M() != B.M() || A.K_in() != B.K_in() || B.K_out() != 1) {
    throw std::invalid_argument("group_norm_R_alpha: dimension mismatch");
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("group_norm_R_alpha: alpha outside [0,1]");
  }
  GroupIndex groups(A.M());
  double total = 0.0;
  for (int i = 0; i < groups.size(); ++i) {
    GroupRef g = groups.group(i);
    double a = GroupIndex::fiber_norm(A, g);
    double b = GroupIndex::fiber_norm(B, g);
    total += std::sqrt(alpha * a * a + (1.0 - alpha) * b * b);
  }
  return total;
}

double frobenius_sq_diff(const InfluenceTensor& A, const InfluenceTensor& B) {
  if (!A.same_dims(B)) {
    throw std::invalid_argument("frobenius_sq_diff: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    double d = A.data()[i] - B.data()[i];
    total += d * d;
  }
  return total;
}

}  // namespace ctxnet
