#pragma once

#include <vector>

#include <Eigen/Dense>

#include "swingsynth/network.hpp"
#include "swingsynth/scenarios.hpp"

namespace swingsynth {

/// Quadratic stage cost x'Qx + u'Ru.
struct CostWeights {
  Eigen::MatrixXd q;  // 2n x 2n, symmetric PSD
  Eigen::MatrixXd r;  // n x n, symmetric PD

  /// Q = diag(angle * I, frequency * I), R = input * I.
  static CostWeights diagonal(int n, double angle, double frequency,
                              double input);

  /// Throws ValidationError when dimensions are wrong, Q is not symmetric
  /// PSD (to 1e-10) or R is not symmetric PD.
  void validate(int n) const;
};

/// Backward Riccati recursion output. gains[t] is F_t (n x 2n) for
/// t = 0..T-1; cost_to_go[t] is P_t for t = 0..T with P_T = Q.
struct RiccatiSolution {
  std::vector<Eigen::MatrixXd> gains;
  std::vector<Eigen::MatrixXd> cost_to_go;
};

/// Failure threshold on cond(R + B'P B).
inline constexpr double kRiccatiConditionLimit = 1e12;

/// Finite-horizon discrete LQR along a known switching sequence, using the
/// zero-order-hold pair of mode q_t at step t. The terminal input u_T has no
/// effect on the horizon and is fixed to zero.
RiccatiSolution riccati_backward(const SwitchedModel& model,
                                 const SwitchingSequence& sequence,
                                 const CostWeights& weights,
                                 int horizon_steps);

/// Optimal state-input trajectory of one scenario. states has T+1 entries,
/// inputs and modes have T.
struct Trajectory {
  std::vector<StateVector> states;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> modes;

  int horizon() const { return static_cast<int>(inputs.size()); }
};

Trajectory rollout(const SwitchedModel& model, const SwitchingSequence& sequence,
                   const RiccatiSolution& solution, const StateVector& x0);

/// sum_{t=0}^{T} x_t'Q x_t + sum_{t=0}^{T-1} u_t'R u_t.
double trajectory_cost(const Trajectory& trajectory, const CostWeights& weights);

/// Imitation training data with the Gram matrices of the step-weighted
/// least-squares objective sum_k sum_t h * ||u_t - K x_t||^2.
struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  Eigen::MatrixXd state_gram;  // G = h sum x x'   (2n x 2n)
  Eigen::MatrixXd cross_gram;  // C = h sum u x'   (n x 2n)
  double input_energy = 0.0;   // h sum u'u
  double step_h = 0.0;

  int state_dim() const { return static_cast<int>(state_gram.rows()); }
  int input_dim() const { return static_cast<int>(cross_gram.rows()); }
};

/// Aggregates in canonical order (scenario, then time). Throws
/// ValidationError on an empty set or inconsistent dimensions.
TrajectoryDataset assemble_dataset(std::vector<Trajectory> trajectories,
                                   double step_h);

/// tr(K G K') - 2 tr(C K') + input_energy, i.e. the imitation objective of K.
double imitation_objective(const TrajectoryDataset& dataset,
                           const Eigen::MatrixXd& gain);

/// Solves and rolls out every scenario (in parallel), then assembles.
TrajectoryDataset generate_dataset(const SwitchedModel& model,
                                   const std::vector<Scenario>& scenarios,
                                   const CostWeights& weights, int workers = 1);

}  // namespace swingsynth
