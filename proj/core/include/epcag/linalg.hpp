#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace epcag {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Operator 2-norm (largest singular value). Zero for empty matrices.
double norm2(const Matrix& m);

/// Matrix exponential e^{m}.
Matrix expm(const Matrix& m);

/// Spectral condition number of a square matrix.
double condition_number(const Matrix& m);

/// Weights w_j with \int_0^1 p(x) dx = sum_j w_j p(x_j) exact for polynomials
/// of degree < nodes.size(). Nodes are offsets in units of one step.
std::vector<double> interpolatory_weights(std::span<const double> nodes);

}  // namespace epcag
