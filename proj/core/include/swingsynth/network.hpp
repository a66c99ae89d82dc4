#pragma once

#include <vector>

#include <Eigen/Dense>

namespace swingsynth {

/// Stacked state x = (theta; omega) in R^{2n}: angle deviations followed by
/// frequency deviations.
using StateVector = Eigen::VectorXd;

StateVector stack_state(const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& omega);

/// Undirected transmission line with susceptance b_ij >= 0 (per-unit).
struct Edge {
  int i = 0;
  int j = 0;
  double susceptance = 0.0;
};

/// Graph-structured power network with a per-mode inertia table.
///
/// Nodes are 0-based. Modes are 1-based (mode q in [1, m]) to match the
/// switching sequences and every file format. The inertia table has one row
/// per mode and one column per node.
class PowerNetwork {
 public:
  /// Validates and canonicalizes the input: edges are stored once per
  /// unordered pair with i < j. Throws ValidationError on self-loops,
  /// duplicate pairs, out-of-range nodes, negative susceptance, non-positive
  /// damping or inertia.
  PowerNetwork(int num_nodes, std::vector<Edge> edges, Eigen::VectorXd damping,
               Eigen::MatrixXd inertia_table);

  int num_nodes() const { return num_nodes_; }
  int num_modes() const { return static_cast<int>(inertia_table_.rows()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Eigen::VectorXd& damping() const { return damping_; }
  const Eigen::MatrixXd& inertia_table() const { return inertia_table_; }

  /// Per-node inertia coefficients of mode q (1-based).
  Eigen::VectorXd inertia(int q) const;

  /// Entrywise maximum inertia over all modes.
  Eigen::VectorXd max_inertia() const;

  /// True when nodes i and j share a line. A node is not its own neighbor.
  bool are_neighbors(int i, int j) const;

  void check_mode(int q) const;

 private:
  int num_nodes_;
  std::vector<Edge> edges_;
  Eigen::VectorXd damping_;
  Eigen::MatrixXd inertia_table_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> adjacency_;
};

/// L = diag(sum_j b_ij) - B.
Eigen::MatrixXd build_laplacian(const PowerNetwork& network);

struct ModeMatrices {
  Eigen::MatrixXd a;  // 2n x 2n
  Eigen::MatrixXd b;  // 2n x n
};

/// A_q = [[0, I], [-M_q^{-1} L, -M_q^{-1} D]],  B_q = [0; M_q^{-1}].
ModeMatrices assemble_mode(const PowerNetwork& network, int q);

/// Exact zero-order-hold discretization, read off the exponential of the
/// augmented matrix [[A, B], [0, 0]] * h. Works for singular A.
ModeMatrices discretize_zoh(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            double h);

/// Continuous and discretized pairs for every mode.
class SwitchedModel {
 public:
  SwitchedModel(const PowerNetwork& network, double step_h);

  int num_nodes() const { return num_nodes_; }
  int state_dim() const { return 2 * num_nodes_; }
  int num_modes() const { return static_cast<int>(continuous_.size()); }
  double step_h() const { return step_h_; }

  const ModeMatrices& continuous(int q) const;
  const ModeMatrices& discrete(int q) const;

 private:
  int num_nodes_;
  double step_h_;
  std::vector<ModeMatrices> continuous_;
  std::vector<ModeMatrices> discrete_;
};

}  // namespace swingsynth
