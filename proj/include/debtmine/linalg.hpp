#pragma once

#include <Eigen/Dense>

namespace debtmine {

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
struct SymmetricEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors; ///< column i pairs with values(i)
};

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a);

/// Sample covariance (denominator n - 1) of the columns of `x`.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& x);

/// Columns centered to mean 0 and scaled to unit sample standard deviation.
/// Columns with zero variance are centered only.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x);

} // namespace debtmine
