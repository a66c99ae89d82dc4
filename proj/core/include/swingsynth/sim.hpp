#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "swingsynth/network.hpp"
#include "swingsynth/scenarios.hpp"

namespace swingsynth {

/// States beyond this norm stop a simulation and set the divergence flag.
inline constexpr double kDivergenceGuard = 1e12;

/// Angular frequency deviation (rad/s) of a frequency deviation in Hz.
double hz_to_rad_per_s(double hz);

/// theta = 0, omega_i = 2 pi * hz at every node.
StateVector frequency_step_state(int num_nodes, double hz);

/// Exact sampled flow of the closed loop: one exp((A_q + B_q K) h) per mode,
/// computed once at construction and read-only afterwards.
class ClosedLoopPropagator {
 public:
  ClosedLoopPropagator(const SwitchedModel& model, const Eigen::MatrixXd& gain);

  const Eigen::MatrixXd& transition(int q) const;
  const Eigen::MatrixXd& gain() const { return gain_; }
  double step_h() const { return step_h_; }
  int num_modes() const { return static_cast<int>(transitions_.size()); }

 private:
  Eigen::MatrixXd gain_;
  double step_h_;
  std::vector<Eigen::MatrixXd> transitions_;
};

/// times/states/inputs have one entry per sample k = 0..K; modes[k] is the
/// mode active on [t_k, t_{k+1}) and has K entries.
struct ClosedLoopTrajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<Eigen::VectorXd> inputs;  // u_k = K x_k
  std::vector<int> modes;
  double step_h = 0.0;
  bool diverged = false;

  int intervals() const { return static_cast<int>(modes.size()); }
  int num_nodes() const {
    return states.empty() ? 0 : static_cast<int>(states.front().size() / 2);
  }
};

ClosedLoopTrajectory simulate_closed_loop(const ClosedLoopPropagator& propagator,
                                          const SwitchingSequence& sequence,
                                          const StateVector& x0, int steps);

ClosedLoopTrajectory simulate_closed_loop(const SwitchedModel& model,
                                          const Eigen::MatrixXd& gain,
                                          const SwitchingSequence& sequence,
                                          const StateVector& x0, int steps);

struct ModeMetrics {
  double total_input = 0.0;
  double total_freq_dev = 0.0;
  double duration = 0.0;
};

/// Left-endpoint quadrature over every interval of the trajectory:
/// total_input = sum_k sum_i |u_i(t_k)| h, total_freq_dev likewise for omega.
struct MetricsReport {
  double total_input = 0.0;
  double total_freq_dev = 0.0;
  double duration = 0.0;
  std::map<int, ModeMetrics> per_mode;
};

MetricsReport metrics(const ClosedLoopTrajectory& trajectory);

/// V_k = x_k' P x_k.
std::vector<double> lyapunov_trace(const ClosedLoopTrajectory& trajectory,
                                   const Eigen::MatrixXd& p);

/// Mode sequence that stays in q for `steps` steps.
SwitchingSequence constant_sequence(int q, int steps);

}  // namespace swingsynth
