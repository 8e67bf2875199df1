#pragma once

#include <vector>

#include <Eigen/Dense>

namespace voltvar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest singular value.
double sigma_max(const Matrix& m);

/// Largest eigenvalue of a symmetric matrix.
double lambda_max_symmetric(const Matrix& m);

/// Smallest eigenvalue of a symmetric matrix.
double lambda_min_symmetric(const Matrix& m);

/// Principal submatrix on the given row/column indices.
Matrix principal_submatrix(const Matrix& m, const std::vector<int>& idx);

Vector gather(const Vector& v, const std::vector<int>& idx);

}  // namespace voltvar
