#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "swingsynth/cli/experiment.hpp"
#include "swingsynth/network.hpp"
#include "swingsynth/scenarios.hpp"
#include "swingsynth/sim.hpp"

namespace swingsynth::cli {

/// Seed of the evaluation sequences, kept apart from the training scenarios
/// so that changing one set never perturbs the other.
std::uint64_t evaluation_seed(std::uint64_t master_seed);

/// Switching sequences for closed-loop evaluation. Sequence k depends only on
/// (master_seed, k).
std::vector<SwitchingSequence> evaluation_sequences(const EvaluationSettings& settings,
                                                    int num_modes, int steps,
                                                    std::uint64_t master_seed);

/// Number of samples covering `duration` seconds at step h (rounded).
int steps_for(double duration, double step_h);

/// Aggregate of one controller over many switched runs from the same x0.
struct SwitchedSummary {
  int sequences = 0;
  int diverged = 0;
  int grew_at_check = 0;          // ||x(check)|| > ||x0||
  double worst_ratio_check = 0.0; // max ||x(check)|| / ||x0||
  double worst_ratio_final = 0.0; // max ||x(end)|| / ||x0||
  bool lyapunov_checked = false;
  int lyapunov_violations = 0;    // runs where V failed to decrease strictly
};

/// Runs every sequence from x0 for `steps` intervals. When p is given, V is
/// required to decrease strictly at every sample above the floor 1e-14 V_0.
SwitchedSummary evaluate_switched(const SwitchedModel& model,
                                  const Eigen::MatrixXd& gain,
                                  const std::optional<Eigen::MatrixXd>& p,
                                  const std::vector<SwitchingSequence>& sequences,
                                  const StateVector& x0, int steps, int check_step,
                                  int workers);

/// True when V_{k+1} < V_k for every k until V drops below floor * V_0.
bool strictly_decreasing(const std::vector<double>& v, double relative_floor = 1e-14);

struct FixedModeResult {
  int mode = 0;
  MetricsReport metrics;
  bool diverged = false;
};

/// Constant-mode runs from the fixed-mode initial deviation.
std::vector<FixedModeResult> evaluate_fixed_modes(const SwitchedModel& model,
                                                  const Eigen::MatrixXd& gain,
                                                  const EvaluationSettings& settings);

}  // namespace swingsynth::cli
