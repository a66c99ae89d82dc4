#include "swingsynth/cli/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "swingsynth/errors.hpp"
#include "swingsynth/parallel.hpp"

namespace swingsynth::cli {

namespace {

constexpr std::uint64_t kEvaluationTag = 0x6576616c75617465ULL;  // "evaluate"

}  // namespace

std::uint64_t evaluation_seed(std::uint64_t master_seed) {
  return mix64(master_seed ^ kEvaluationTag);
}

std::vector<SwitchingSequence> evaluation_sequences(const EvaluationSettings& settings,
                                                    int num_modes, int steps,
                                                    std::uint64_t master_seed) {
  if (settings.initial_mode < 1 || settings.initial_mode > num_modes) {
    throw ValidationError("evaluation.initial_mode is outside the network's modes");
  }
  const std::uint64_t base = evaluation_seed(master_seed);
  std::vector<SwitchingSequence> out;
  out.reserve(static_cast<std::size_t>(settings.sequences));
  for (int k = 0; k < settings.sequences; ++k) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(k)));
    out.push_back(sample_switching_sequence(rng, num_modes, settings.initial_mode,
                                            settings.dwell_steps, steps,
                                            settings.jump_law));
  }
  return out;
}

int steps_for(double duration, double step_h) {
  if (!(step_h > 0.0) || !(duration > 0.0)) {
    throw ValidationError("duration and step must be positive");
  }
  return static_cast<int>(std::lround(duration / step_h));
}

bool strictly_decreasing(const std::vector<double>& v, double relative_floor) {
  if (v.empty()) return true;
  const double floor = relative_floor * v.front();
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    if (v[k] <= floor) break;
    if (!(v[k + 1] < v[k])) return false;
  }
  return true;
}

SwitchedSummary evaluate_switched(const SwitchedModel& model,
                                  const Eigen::MatrixXd& gain,
                                  const std::optional<Eigen::MatrixXd>& p,
                                  const std::vector<SwitchingSequence>& sequences,
                                  const StateVector& x0, int steps, int check_step,
                                  int workers) {
  if (check_step < 0 || check_step > steps) {
    throw ValidationError("growth check falls outside the simulated horizon");
  }
  const ClosedLoopPropagator propagator(model, gain);
  const double norm0 = x0.norm();
  struct Run {
    bool diverged = false;
    double ratio_check = 0.0;
    double ratio_final = 0.0;
    bool decreasing = true;
  };
  std::vector<Run> runs(sequences.size());
  parallel_for(sequences.size(), workers, [&](std::size_t k) {
    const ClosedLoopTrajectory traj =
        simulate_closed_loop(propagator, sequences[k], x0, steps);
    Run& r = runs[k];
    r.diverged = traj.diverged;
    const auto ratio = [&](int idx) {
      if (idx >= static_cast<int>(traj.states.size())) {
        return std::numeric_limits<double>::infinity();
      }
      return norm0 > 0.0 ? traj.states[idx].norm() / norm0 : 0.0;
    };
    r.ratio_check = ratio(check_step);
    r.ratio_final = traj.diverged ? std::numeric_limits<double>::infinity() : ratio(steps);
    if (p.has_value()) r.decreasing = strictly_decreasing(lyapunov_trace(traj, *p));
  });

  SwitchedSummary s;
  s.sequences = static_cast<int>(sequences.size());
  s.lyapunov_checked = p.has_value();
  for (const Run& r : runs) {
    s.diverged += r.diverged ? 1 : 0;
    s.grew_at_check += r.ratio_check > 1.0 ? 1 : 0;
    s.worst_ratio_check = std::max(s.worst_ratio_check, r.ratio_check);
    s.worst_ratio_final = std::max(s.worst_ratio_final, r.ratio_final);
    s.lyapunov_violations += r.decreasing ? 0 : 1;
  }
  return s;
}

std::vector<FixedModeResult> evaluate_fixed_modes(const SwitchedModel& model,
                                                  const Eigen::MatrixXd& gain,
                                                  const EvaluationSettings& settings) {
  const ClosedLoopPropagator propagator(model, gain);
  const int steps = steps_for(settings.fixed_duration, model.step_h());
  const StateVector x0 = frequency_step_state(model.num_nodes(), settings.fixed_hz);
  std::vector<FixedModeResult> out;
  for (int q : settings.fixed_modes) {
    if (q < 1 || q > model.num_modes()) {
      throw ValidationError("evaluation.fixed_modes names a mode the network lacks");
    }
    const ClosedLoopTrajectory traj =
        simulate_closed_loop(propagator, constant_sequence(q, steps), x0, steps);
    out.push_back({q, metrics(traj), traj.diverged});
  }
  return out;
}

}  // namespace swingsynth::cli
