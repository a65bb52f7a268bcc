#include "robustcredit/linalg.hpp"

#include "robustcredit/errors.hpp"

#include <cmath>
#include <string>

namespace robustcredit {

Eigen::VectorXd lu_solve(Eigen::MatrixXd A, Eigen::VectorXd b) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || b.size() != n) throw DomainError("lu_solve needs a square system");
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index p = k;
        for (Eigen::Index i = k + 1; i < n; ++i) {
            if (std::abs(A(i, k)) > std::abs(A(p, k))) p = i;
        }
        if (!(std::abs(A(p, k)) >= kPivotFloor)) {
            throw SingularMatrixError("pivot " + std::to_string(A(p, k)) + " in column " +
                                      std::to_string(k + 1) + " below floor");
        }
        if (p != k) {
            A.row(p).swap(A.row(k));
            std::swap(b(p), b(k));
        }
        for (Eigen::Index i = k + 1; i < n; ++i) {
            const double f = A(i, k) / A(k, k);
            A(i, k) = 0.0;
            for (Eigen::Index j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
            b(i) -= f * b(k);
        }
    }
    Eigen::VectorXd x(n);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        double s = b(i);
        for (Eigen::Index j = i + 1; j < n; ++j) s -= A(i, j) * x(j);
        x(i) = s / A(i, i);
    }
    return x;
}

double smallest_singular_value(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues().minCoeff();
}

double max_symmetric_eigenvalue(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

}  // namespace robustcredit
