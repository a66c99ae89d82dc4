#pragma once

#include <Eigen/Dense>

namespace swingsynth::linalg {

/// Matrix exponential (Padé approximant with scaling and squaring).
/// Throws NumericalError on non-finite input.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a);

double min_symmetric_eigenvalue(const Eigen::MatrixXd& a);
double max_symmetric_eigenvalue(const Eigen::MatrixXd& a);

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix; infinity when
/// the smallest is zero.
double symmetric_condition_number(const Eigen::MatrixXd& a);

bool all_finite(const Eigen::MatrixXd& a);

/// Cholesky-based positive definiteness test.
bool is_positive_definite(const Eigen::MatrixXd& a);

}  // namespace swingsynth::linalg
