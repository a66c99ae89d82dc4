#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "swingsynth/network.hpp"

namespace swingsynth {

/// Seeded random source with platform-independent sampling: the engine is
/// std::mt19937_64 (output fully specified by the standard) and every
/// distribution is implemented here rather than taken from <random>.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform integer in [0, bound), rejection sampled (no modulo bias).
  std::uint64_t uniform_index(std::uint64_t bound);
  /// Standard normal via the Marsaglia polar method.
  double standard_normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Stable per-scenario seed: mix64(mix64(master) ^ (k + 1) * golden-ratio).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t k);

/// How modes change at decision points.
enum class JumpLaw {
  kWalk,        // stay / up one / down one, each with probability 1/3, clamped
  kUniformAny,  // jump to a mode drawn uniformly from [1, m]
};

/// One mode per discrete step. Modes are 1-based.
struct SwitchingSequence {
  std::vector<int> modes;
  int dwell_steps = 1;
};

struct Scenario {
  StateVector x0;
  SwitchingSequence sequence;
  int horizon_steps = 0;
  std::uint64_t seed = 0;
};

struct ScenarioConfig {
  int count = 50;
  int horizon_steps = 50;
  int initial_mode = 7;
  int dwell_steps = 2;
  /// Spread of the initial-state distribution. Read as a variance unless
  /// spread_is_stddev is set.
  double spread = 0.1;
  bool spread_is_stddev = false;
  JumpLaw jump_law = JumpLaw::kWalk;

  double variance() const { return spread_is_stddev ? spread * spread : spread; }
};

/// 2n independent N(0, variance) draws.
StateVector sample_initial_state(Rng& rng, int n, double variance);

/// Starts at q0; at every step t > 0 that is a multiple of dwell_steps the
/// mode is redrawn according to the jump law.
SwitchingSequence sample_switching_sequence(Rng& rng, int num_modes,
                                            int initial_mode, int dwell_steps,
                                            int total_steps,
                                            JumpLaw law = JumpLaw::kWalk);

/// Scenario k draws from Rng(derive_seed(master_seed, k)) only, so any scenario
/// can be regenerated in isolation and the set does not depend on `workers`.
std::vector<Scenario> build_scenarios(const ScenarioConfig& config,
                                      int num_nodes, int num_modes,
                                      std::uint64_t master_seed,
                                      int workers = 1);

}  // namespace swingsynth
