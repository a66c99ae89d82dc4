#include "swingsynth/scenarios.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "swingsynth/errors.hpp"
#include "swingsynth/parallel.hpp"

namespace swingsynth {

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw ValidationError("uniform_index: bound must be > 0");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return draw % bound;
}

double Rng::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t k) {
  return mix64(mix64(master_seed) ^ ((k + 1) * 0x9e3779b97f4a7c15ULL));
}

StateVector sample_initial_state(Rng& rng, int n, double variance) {
  if (n < 1) throw ValidationError("sample_initial_state: n must be >= 1");
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ValidationError(
        fmt::format("sample_initial_state: variance {} must be > 0", variance));
  }
  const double sigma = std::sqrt(variance);
  StateVector x(2 * n);
  for (int i = 0; i < 2 * n; ++i) x(i) = sigma * rng.standard_normal();
  return x;
}

SwitchingSequence sample_switching_sequence(Rng& rng, int num_modes,
                                            int initial_mode, int dwell_steps,
                                            int total_steps, JumpLaw law) {
  if (num_modes < 1) throw ValidationError("switching sequence: m must be >= 1");
  if (initial_mode < 1 || initial_mode > num_modes) {
    throw ValidationError(fmt::format(
        "switching sequence: initial mode {} outside [1, {}]", initial_mode,
        num_modes));
  }
  if (dwell_steps < 1) {
    throw ValidationError("switching sequence: dwell_steps must be >= 1");
  }
  if (total_steps < 1) {
    throw ValidationError("switching sequence: total_steps must be >= 1");
  }
  SwitchingSequence seq;
  seq.dwell_steps = dwell_steps;
  seq.modes.resize(static_cast<std::size_t>(total_steps));
  int q = initial_mode;
  for (int t = 0; t < total_steps; ++t) {
    if (t > 0 && t % dwell_steps == 0) {
      if (law == JumpLaw::kWalk) {
        switch (rng.uniform_index(3)) {
          case 1:
            if (q < num_modes) ++q;
            break;
          case 2:
            if (q > 1) --q;
            break;
          default:
            break;
        }
      } else {
        q = 1 + static_cast<int>(
                    rng.uniform_index(static_cast<std::uint64_t>(num_modes)));
      }
    }
    seq.modes[static_cast<std::size_t>(t)] = q;
  }
  return seq;
}

std::vector<Scenario> build_scenarios(const ScenarioConfig& config,
                                      int num_nodes, int num_modes,
                                      std::uint64_t master_seed, int workers) {
  if (config.count < 1) {
    throw ValidationError("scenarios.count must be >= 1");
  }
  if (config.horizon_steps < 1) {
    throw ValidationError("scenarios.horizon_steps must be >= 1");
  }
  if (!(config.spread > 0.0)) {
    throw ValidationError("scenarios.variance must be > 0");
  }
  std::vector<Scenario> scenarios(static_cast<std::size_t>(config.count));
  parallel_for(scenarios.size(), workers, [&](std::size_t k) {
    Scenario& s = scenarios[k];
    s.seed = derive_seed(master_seed, k);
    s.horizon_steps = config.horizon_steps;
    Rng rng(s.seed);
    s.x0 = sample_initial_state(rng, num_nodes, config.variance());
    s.sequence = sample_switching_sequence(rng, num_modes, config.initial_mode,
                                           config.dwell_steps,
                                           config.horizon_steps,
                                           config.jump_law);
  });
  return scenarios;
}

}  // namespace swingsynth
