#include "epcag/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <limits>

namespace epcag {

double norm2(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Matrix expm(const Matrix& m) {
  if (m.size() == 0) return m;
  if (m.rows() == 1) return Matrix::Constant(1, 1, std::exp(m(0, 0)));
  return m.exp();
}

double condition_number(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

std::vector<double> interpolatory_weights(std::span<const double> nodes) {
  // Solve the moment system V^T w = m with m_k = \int_0^1 x^k dx.
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Matrix v(n, n);
  Vector moments(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) v(k, j) = std::pow(nodes[j], static_cast<double>(k));
    moments(k) = 1.0 / static_cast<double>(k + 1);
  }
  Vector w = v.fullPivLu().solve(moments);
  return {w.data(), w.data() + n};
}

}  // namespace epcag
