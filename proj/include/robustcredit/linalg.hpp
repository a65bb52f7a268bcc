#pragma once

#include <Eigen/Dense>

namespace robustcredit {

/// Pivots with magnitude below this are treated as singular.
inline constexpr double kPivotFloor = 1e-12;

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// Throws SingularMatrixError if a pivot falls below kPivotFloor.
Eigen::VectorXd lu_solve(Eigen::MatrixXd A, Eigen::VectorXd b);

double smallest_singular_value(const Eigen::MatrixXd& A);

/// Largest eigenvalue of a symmetric matrix (only the lower triangle is read).
double max_symmetric_eigenvalue(const Eigen::MatrixXd& A);

}  // namespace robustcredit
