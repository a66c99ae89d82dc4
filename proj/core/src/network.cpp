#include "swingsynth/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"

namespace swingsynth {

StateVector stack_state(const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& omega) {
  if (theta.size() != omega.size()) {
    throw ValidationError("stack_state: theta and omega differ in length");
  }
  StateVector x(theta.size() + omega.size());
  x << theta, omega;
  return x;
}

PowerNetwork::PowerNetwork(int num_nodes, std::vector<Edge> edges,
                           Eigen::VectorXd damping,
                           Eigen::MatrixXd inertia_table)
    : num_nodes_(num_nodes),
      damping_(std::move(damping)),
      inertia_table_(std::move(inertia_table)) {
  if (num_nodes_ < 1) {
    throw ValidationError("network: n must be at least 1");
  }
  if (damping_.size() != num_nodes_) {
    throw ValidationError(fmt::format(
        "network: damping has {} entries, expected {}", damping_.size(),
        num_nodes_));
  }
  if (inertia_table_.rows() < 1 || inertia_table_.cols() != num_nodes_) {
    throw ValidationError(fmt::format(
        "network: inertia table must be m x {} with m >= 1, got {} x {}",
        num_nodes_, inertia_table_.rows(), inertia_table_.cols()));
  }
  for (int i = 0; i < num_nodes_; ++i) {
    if (!(damping_(i) > 0.0) || !std::isfinite(damping_(i))) {
      throw ValidationError(
          fmt::format("network: damping[{}] = {} must be > 0", i, damping_(i)));
    }
  }
  for (Eigen::Index q = 0; q < inertia_table_.rows(); ++q) {
    for (int i = 0; i < num_nodes_; ++i) {
      const double m = inertia_table_(q, i);
      if (!(m > 0.0) || !std::isfinite(m)) {
        throw ValidationError(fmt::format(
            "network: inertia of mode {} node {} = {} must be > 0", q + 1, i,
            m));
      }
    }
  }

  adjacency_.setConstant(num_nodes_, num_nodes_, false);
  edges_.reserve(edges.size());
  for (Edge e : edges) {
    if (e.i < 0 || e.i >= num_nodes_ || e.j < 0 || e.j >= num_nodes_) {
      throw ValidationError(fmt::format(
          "network: edge ({}, {}) references a node outside [0, {})", e.i, e.j,
          num_nodes_));
    }
    if (e.i == e.j) {
      throw ValidationError(fmt::format("network: self-loop at node {}", e.i));
    }
    if (!(e.susceptance >= 0.0) || !std::isfinite(e.susceptance)) {
      throw ValidationError(fmt::format(
          "network: edge ({}, {}) has negative or non-finite susceptance {}",
          e.i, e.j, e.susceptance));
    }
    if (e.i > e.j) std::swap(e.i, e.j);
    if (adjacency_(e.i, e.j)) {
      throw ValidationError(
          fmt::format("network: duplicate edge ({}, {})", e.i, e.j));
    }
    adjacency_(e.i, e.j) = adjacency_(e.j, e.i) = true;
    edges_.push_back(e);
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
}

void PowerNetwork::check_mode(int q) const {
  if (q < 1 || q > num_modes()) {
    throw ValidationError(
        fmt::format("mode index {} outside [1, {}]", q, num_modes()));
  }
}

Eigen::VectorXd PowerNetwork::inertia(int q) const {
  check_mode(q);
  return inertia_table_.row(q - 1).transpose();
}

Eigen::VectorXd PowerNetwork::max_inertia() const {
  return inertia_table_.colwise().maxCoeff().transpose();
}

bool PowerNetwork::are_neighbors(int i, int j) const {
  return adjacency_(i, j);
}

Eigen::MatrixXd build_laplacian(const PowerNetwork& network) {
  const int n = network.num_nodes();
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : network.edges()) {
    lap(e.i, e.j) -= e.susceptance;
    lap(e.j, e.i) -= e.susceptance;
    lap(e.i, e.i) += e.susceptance;
    lap(e.j, e.j) += e.susceptance;
  }
  return lap;
}

ModeMatrices assemble_mode(const PowerNetwork& network, int q) {
  network.check_mode(q);
  const int n = network.num_nodes();
  const Eigen::VectorXd inv_m = network.inertia(q).cwiseInverse();
  const Eigen::MatrixXd lap = build_laplacian(network);

  ModeMatrices mode;
  mode.a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  mode.a.topRightCorner(n, n).setIdentity();
  mode.a.bottomLeftCorner(n, n) = -(inv_m.asDiagonal() * lap);
  mode.a.bottomRightCorner(n, n) =
      -(inv_m.cwiseProduct(network.damping())).asDiagonal().toDenseMatrix();
  mode.b = Eigen::MatrixXd::Zero(2 * n, n);
  mode.b.bottomRows(n) = inv_m.asDiagonal().toDenseMatrix();
  return mode;
}

ModeMatrices discretize_zoh(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ValidationError(fmt::format("discretize_zoh: step {} must be > 0", h));
  }
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw ValidationError("discretize_zoh: dimension mismatch");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw NumericalError("discretize_zoh: non-finite matrix entries");
  }
  const Eigen::Index nx = a.rows();
  const Eigen::Index nu = b.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(nx + nu, nx + nu);
  aug.topLeftCorner(nx, nx) = a * h;
  aug.topRightCorner(nx, nu) = b * h;
  const Eigen::MatrixXd e = linalg::expm(aug);
  return {e.topLeftCorner(nx, nx), e.topRightCorner(nx, nu)};
}

SwitchedModel::SwitchedModel(const PowerNetwork& network, double step_h)
    : num_nodes_(network.num_nodes()), step_h_(step_h) {
  if (!(step_h > 0.0)) {
    throw ValidationError(fmt::format("step_h = {} must be > 0", step_h));
  }
  for (int q = 1; q <= network.num_modes(); ++q) {
    ModeMatrices mode = assemble_mode(network, q);
    discrete_.push_back(discretize_zoh(mode.a, mode.b, step_h));
    continuous_.push_back(std::move(mode));
  }
}

const ModeMatrices& SwitchedModel::continuous(int q) const {
  if (q < 1 || q > num_modes()) {
    throw ValidationError(
        fmt::format("mode index {} outside [1, {}]", q, num_modes()));
  }
  return continuous_[q - 1];
}

const ModeMatrices& SwitchedModel::discrete(int q) const {
  if (q < 1 || q > num_modes()) {
    throw ValidationError(
        fmt::format("mode index {} outside [1, {}]", q, num_modes()));
  }
  return discrete_[q - 1];
}

}  // namespace swingsynth
