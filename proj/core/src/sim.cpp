#include "swingsynth/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "swingsynth/certify.hpp"
#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"

namespace swingsynth {

double hz_to_rad_per_s(double hz) { return 2.0 * std::numbers::pi * hz; }

StateVector frequency_step_state(int num_nodes, double hz) {
  StateVector x = StateVector::Zero(2 * num_nodes);
  x.tail(num_nodes).setConstant(hz_to_rad_per_s(hz));
  return x;
}

ClosedLoopPropagator::ClosedLoopPropagator(const SwitchedModel& model,
                                           const Eigen::MatrixXd& gain)
    : gain_(gain), step_h_(model.step_h()) {
  transitions_.reserve(static_cast<std::size_t>(model.num_modes()));
  for (int q = 1; q <= model.num_modes(); ++q) {
    transitions_.push_back(linalg::expm(closed_loop(model, q, gain) * step_h_));
  }
}

const Eigen::MatrixXd& ClosedLoopPropagator::transition(int q) const {
  if (q < 1 || q > num_modes()) {
    throw ValidationError(
        fmt::format("mode index {} outside [1, {}]", q, num_modes()));
  }
  return transitions_[static_cast<std::size_t>(q - 1)];
}

ClosedLoopTrajectory simulate_closed_loop(const ClosedLoopPropagator& propagator,
                                          const SwitchingSequence& sequence,
                                          const StateVector& x0, int steps) {
  if (steps < 0) throw ValidationError("simulate: steps must be >= 0");
  if (static_cast<int>(sequence.modes.size()) < steps) {
    throw ValidationError(fmt::format(
        "simulate: sequence has {} modes, {} steps requested",
        sequence.modes.size(), steps));
  }
  if (x0.size() != propagator.gain().cols()) {
    throw ValidationError("simulate: x0 has the wrong dimension");
  }
  ClosedLoopTrajectory traj;
  traj.step_h = propagator.step_h();
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  traj.inputs.reserve(static_cast<std::size_t>(steps) + 1);
  traj.modes.reserve(static_cast<std::size_t>(steps));

  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.inputs.push_back(propagator.gain() * x0);
  for (int k = 0; k < steps; ++k) {
    const int q = sequence.modes[static_cast<std::size_t>(k)];
    StateVector next = propagator.transition(q) * traj.states.back();
    traj.modes.push_back(q);
    const double norm = next.norm();
    if (!std::isfinite(norm) || norm > kDivergenceGuard) {
      traj.modes.pop_back();
      traj.diverged = true;
      break;
    }
    traj.times.push_back(static_cast<double>(k + 1) * traj.step_h);
    traj.inputs.push_back(propagator.gain() * next);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

ClosedLoopTrajectory simulate_closed_loop(const SwitchedModel& model,
                                          const Eigen::MatrixXd& gain,
                                          const SwitchingSequence& sequence,
                                          const StateVector& x0, int steps) {
  return simulate_closed_loop(ClosedLoopPropagator(model, gain), sequence, x0,
                              steps);
}

MetricsReport metrics(const ClosedLoopTrajectory& trajectory) {
  if (trajectory.states.empty()) {
    throw ValidationError("metrics: empty trajectory");
  }
  const int n = trajectory.num_nodes();
  const double h = trajectory.step_h;
  MetricsReport report;
  for (int k = 0; k < trajectory.intervals(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const double input = trajectory.inputs[idx].cwiseAbs().sum() * h;
    const double freq = trajectory.states[idx].tail(n).cwiseAbs().sum() * h;
    report.total_input += input;
    report.total_freq_dev += freq;
    report.duration += h;
    ModeMetrics& m = report.per_mode[trajectory.modes[idx]];
    m.total_input += input;
    m.total_freq_dev += freq;
    m.duration += h;
  }
  return report;
}

std::vector<double> lyapunov_trace(const ClosedLoopTrajectory& trajectory,
                                   const Eigen::MatrixXd& p) {
  std::vector<double> v;
  v.reserve(trajectory.states.size());
  for (const StateVector& x : trajectory.states) v.push_back(x.dot(p * x));
  return v;
}

SwitchingSequence constant_sequence(int q, int steps) {
  SwitchingSequence seq;
  seq.modes.assign(static_cast<std::size_t>(steps), q);
  seq.dwell_steps = std::max(1, steps);
  return seq;
}

}  // namespace swingsynth
