#include "swingsynth/lqr.hpp"

#include <cmath>

#include <fmt/format.h>

#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"
#include "swingsynth/parallel.hpp"

namespace swingsynth {

CostWeights CostWeights::diagonal(int n, double angle, double frequency,
                                  double input) {
  CostWeights w;
  w.q = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  w.q.topLeftCorner(n, n).diagonal().setConstant(angle);
  w.q.bottomRightCorner(n, n).diagonal().setConstant(frequency);
  w.r = input * Eigen::MatrixXd::Identity(n, n);
  return w;
}

void CostWeights::validate(int n) const {
  if (q.rows() != 2 * n || q.cols() != 2 * n) {
    throw ValidationError(fmt::format("weights: Q must be {0}x{0}", 2 * n));
  }
  if (r.rows() != n || r.cols() != n) {
    throw ValidationError(fmt::format("weights: R must be {0}x{0}", n));
  }
  if (!q.allFinite() || !r.allFinite()) {
    throw ValidationError("weights: non-finite entries");
  }
  const double sym_tol = 1e-10;
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > sym_tol * (1.0 + q.cwiseAbs().maxCoeff())) {
    throw ValidationError("weights: Q is not symmetric");
  }
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > sym_tol * (1.0 + r.cwiseAbs().maxCoeff())) {
    throw ValidationError("weights: R is not symmetric");
  }
  if (linalg::min_symmetric_eigenvalue(q) < -1e-10) {
    throw ValidationError("weights: Q is not positive semidefinite");
  }
  if (!(linalg::min_symmetric_eigenvalue(r) > 0.0)) {
    throw ValidationError("weights: R is not positive definite");
  }
}

RiccatiSolution riccati_backward(const SwitchedModel& model,
                                 const SwitchingSequence& sequence,
                                 const CostWeights& weights,
                                 int horizon_steps) {
  const int n = model.num_nodes();
  weights.validate(n);
  if (horizon_steps < 1) {
    throw ValidationError("riccati_backward: horizon must be >= 1");
  }
  if (static_cast<int>(sequence.modes.size()) < horizon_steps) {
    throw ValidationError(fmt::format(
        "riccati_backward: sequence covers {} steps, horizon needs {}",
        sequence.modes.size(), horizon_steps));
  }

  RiccatiSolution sol;
  sol.gains.resize(static_cast<std::size_t>(horizon_steps));
  sol.cost_to_go.resize(static_cast<std::size_t>(horizon_steps) + 1);
  sol.cost_to_go.back() = weights.q;

  for (int t = horizon_steps - 1; t >= 0; --t) {
    const ModeMatrices& mode = model.discrete(sequence.modes[static_cast<std::size_t>(t)]);
    const Eigen::MatrixXd& next = sol.cost_to_go[static_cast<std::size_t>(t) + 1];
    const Eigen::MatrixXd pb = next * mode.b;
    const Eigen::MatrixXd s = linalg::symmetrize(weights.r + mode.b.transpose() * pb);
    const double cond = linalg::symmetric_condition_number(s);
    if (!(cond <= kRiccatiConditionLimit)) {
      throw NumericalError(fmt::format(
          "riccati_backward: cond(R + B'PB) = {:.3e} at step {} exceeds {:.0e}",
          cond, t, kRiccatiConditionLimit));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      throw NumericalError(fmt::format(
          "riccati_backward: R + B'PB is not positive definite at step {}", t));
    }
    Eigen::MatrixXd gain = -llt.solve(pb.transpose() * mode.a);
    Eigen::MatrixXd p = weights.q + mode.a.transpose() * next * mode.a +
                        mode.a.transpose() * pb * gain;
    sol.cost_to_go[static_cast<std::size_t>(t)] = linalg::symmetrize(p);
    sol.gains[static_cast<std::size_t>(t)] = std::move(gain);
  }
  return sol;
}

Trajectory rollout(const SwitchedModel& model, const SwitchingSequence& sequence,
                   const RiccatiSolution& solution, const StateVector& x0) {
  const int horizon = static_cast<int>(solution.gains.size());
  if (x0.size() != model.state_dim()) {
    throw ValidationError("rollout: x0 has the wrong dimension");
  }
  if (static_cast<int>(sequence.modes.size()) < horizon) {
    throw ValidationError("rollout: sequence shorter than the gain schedule");
  }
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.inputs.reserve(static_cast<std::size_t>(horizon));
  traj.modes.assign(sequence.modes.begin(), sequence.modes.begin() + horizon);
  traj.states.push_back(x0);
  for (int t = 0; t < horizon; ++t) {
    const ModeMatrices& mode = model.discrete(traj.modes[static_cast<std::size_t>(t)]);
    const StateVector& x = traj.states.back();
    Eigen::VectorXd u = solution.gains[static_cast<std::size_t>(t)] * x;
    StateVector next = mode.a * x + mode.b * u;
    if (!next.allFinite()) {
      throw NumericalError(
          fmt::format("rollout: state became non-finite at step {}", t + 1));
    }
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double trajectory_cost(const Trajectory& trajectory, const CostWeights& weights) {
  double cost = 0.0;
  for (const StateVector& x : trajectory.states) cost += x.dot(weights.q * x);
  for (const Eigen::VectorXd& u : trajectory.inputs) cost += u.dot(weights.r * u);
  return cost;
}

TrajectoryDataset assemble_dataset(std::vector<Trajectory> trajectories,
                                   double step_h) {
  if (trajectories.empty()) {
    throw ValidationError("assemble_dataset: need at least one trajectory");
  }
  if (!(step_h > 0.0)) {
    throw ValidationError("assemble_dataset: step_h must be > 0");
  }
  const Eigen::Index nx = trajectories.front().states.front().size();
  const Eigen::Index nu = trajectories.front().inputs.empty()
                              ? nx / 2
                              : trajectories.front().inputs.front().size();
  TrajectoryDataset data;
  data.step_h = step_h;
  data.state_gram = Eigen::MatrixXd::Zero(nx, nx);
  data.cross_gram = Eigen::MatrixXd::Zero(nu, nx);
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& traj = trajectories[k];
    if (traj.states.size() != traj.inputs.size() + 1) {
      throw ValidationError(fmt::format(
          "assemble_dataset: scenario {} has {} states for {} inputs", k,
          traj.states.size(), traj.inputs.size()));
    }
    for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
      const StateVector& x = traj.states[t];
      const Eigen::VectorXd& u = traj.inputs[t];
      if (x.size() != nx || u.size() != nu) {
        throw ValidationError(fmt::format(
            "assemble_dataset: dimension mismatch in scenario {} step {}", k, t));
      }
      data.state_gram.noalias() += step_h * x * x.transpose();
      data.cross_gram.noalias() += step_h * u * x.transpose();
      data.input_energy += step_h * u.squaredNorm();
    }
  }
  data.state_gram = linalg::symmetrize(data.state_gram);
  data.trajectories = std::move(trajectories);
  return data;
}

double imitation_objective(const TrajectoryDataset& dataset,
                           const Eigen::MatrixXd& gain) {
  const Eigen::MatrixXd kg = gain * dataset.state_gram;
  return (kg.cwiseProduct(gain)).sum() -
         2.0 * dataset.cross_gram.cwiseProduct(gain).sum() +
         dataset.input_energy;
}

TrajectoryDataset generate_dataset(const SwitchedModel& model,
                                   const std::vector<Scenario>& scenarios,
                                   const CostWeights& weights, int workers) {
  std::vector<Trajectory> trajectories(scenarios.size());
  parallel_for(scenarios.size(), workers, [&](std::size_t k) {
    const Scenario& s = scenarios[k];
    const RiccatiSolution sol =
        riccati_backward(model, s.sequence, weights, s.horizon_steps);
    trajectories[k] = rollout(model, s.sequence, sol, s.x0);
  });
  return assemble_dataset(std::move(trajectories), model.step_h());
}

}  // namespace swingsynth
