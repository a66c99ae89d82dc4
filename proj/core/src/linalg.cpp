#include "swingsynth/linalg.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "swingsynth/errors.hpp"

namespace swingsynth::linalg {

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw ValidationError("expm: matrix must be square");
  }
  if (!all_finite(a)) {
    throw NumericalError("expm: non-finite matrix entries");
  }
  Eigen::MatrixXd result = a.exp();
  if (!all_finite(result)) {
    throw NumericalError("expm: result overflowed");
  }
  return result;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

double min_symmetric_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a,
                                                         Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  return solver.eigenvalues()(0);
}

double max_symmetric_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a,
                                                         Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  return solver.eigenvalues()(a.rows() - 1);
}

double symmetric_condition_number(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a,
                                                         Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  const Eigen::VectorXd mags = solver.eigenvalues().cwiseAbs();
  const double smallest = mags.minCoeff();
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return mags.maxCoeff() / smallest;
}

bool all_finite(const Eigen::MatrixXd& a) { return a.allFinite(); }

bool is_positive_definite(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  return llt.info() == Eigen::Success;
}

}  // namespace swingsynth::linalg
