#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swingsynth/lqr.hpp"
#include "swingsynth/network.hpp"
#include "swingsynth/scenarios.hpp"
#include "swingsynth/synth.hpp"

namespace swingsynth::cli {

/// Sparse sweep settings.
struct SparseSettings {
  std::vector<double> betas{0.0, 1.0, 10.0, 100.0};
  double distributed_beta = 100.0;  // sweep entry reported as "Distributed"
  GainOrigin init = GainOrigin::kOptimal;  // kOptimal or kLocal
};

/// Closed-loop evaluation settings. Frequencies are in Hz and converted to
/// rad/s (omega = 2 pi f) when the initial state is built.
struct EvaluationSettings {
  int sequences = 100;
  int initial_mode = 10;
  JumpLaw jump_law = JumpLaw::kUniformAny;
  int dwell_steps = 1;
  double switched_hz = 0.05;
  double switched_duration = 10.0;
  double growth_check_time = 1.0;
  double fixed_hz = 0.15;
  double fixed_duration = 1.0;
  std::vector<int> fixed_modes{1, 5, 10};
  int csv_sequences = 3;
};

struct ExperimentConfig {
  std::filesystem::path network_path;
  std::uint64_t seed = 12345;
  int workers = 0;  // 0: all hardware threads
  ScenarioConfig scenarios;
  double q_angle = 1.0;
  double q_frequency = 1e5;
  double r_input = 10.0;
  SynthesisConfig synthesis;
  LocalConstructionOptions local;
  SparseSettings sparse;
  EvaluationSettings evaluation;
  std::filesystem::path output_dir = "out";

  CostWeights weights(int n) const {
    return CostWeights::diagonal(n, q_angle, q_frequency, r_input);
  }
};

/// Command-line and environment overrides, applied after parsing.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::filesystem::path> output_dir;
};

/// Parses a config document. Relative paths are resolved against base_dir.
/// Unknown keys and out-of-range values raise ValidationError naming the
/// field (for example "scenarios.count").
ExperimentConfig parse_experiment(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir);

/// Reads the file, applies SWINGSYNTH_SEED and then the explicit overrides.
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const Overrides& overrides = {});

/// Every setting that influences numeric results, with sorted keys. Worker
/// count and output directory are excluded.
nlohmann::json experiment_echo(const ExperimentConfig& config);

/// Hash of the echo plus the parsed network contents.
std::string experiment_hash(const ExperimentConfig& config);

std::string to_string(JumpLaw law);
JumpLaw parse_jump_law(const std::string& name);

}  // namespace swingsynth::cli
