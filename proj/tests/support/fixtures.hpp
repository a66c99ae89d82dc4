#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "swingsynth/lqr.hpp"
#include "swingsynth/network.hpp"
#include "swingsynth/scenarios.hpp"

namespace swingsynth::testing {

/// 3-bus line 0-1-2 with two inertia modes.
inline PowerNetwork three_bus_line() {
  Eigen::MatrixXd inertia(2, 3);
  inertia << 1.0, 1.5, 2.0,
             0.5, 0.8, 1.2;
  return PowerNetwork(3, {{0, 1, 2.0}, {1, 2, 1.5}}, Eigen::Vector3d(1.0, 0.8, 1.2), inertia);
}

/// Single bus, no lines: the scalar swing equation.
inline PowerNetwork single_bus(std::vector<double> inertias, double damping = 1.0) {
  Eigen::MatrixXd inertia(static_cast<Eigen::Index>(inertias.size()), 1);
  for (std::size_t q = 0; q < inertias.size(); ++q) inertia(static_cast<Eigen::Index>(q), 0) = inertias[q];
  return PowerNetwork(1, {}, Eigen::VectorXd::Constant(1, damping), inertia);
}

/// Connected random network: a random spanning tree plus extra lines, with
/// heterogeneous per-node inertia in every mode. Drawn from swingsynth::Rng,
/// so the same seed gives the same network on every platform.
inline PowerNetwork random_network(std::uint64_t seed, int n, int modes,
                                   double min_inertia = 0.2, double max_inertia = 5.0) {
  Rng rng(seed);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); };
  std::vector<Edge> edges;
  Eigen::MatrixXi used = Eigen::MatrixXi::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i)));
    edges.push_back({j, i, uniform(0.5, 5.0)});
    used(i, j) = used(j, i) = 1;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!used(i, j) && rng.uniform01() < 0.25) edges.push_back({i, j, uniform(0.5, 5.0)});
    }
  }
  Eigen::VectorXd damping(n);
  for (int i = 0; i < n; ++i) damping(i) = uniform(0.5, 2.0);
  Eigen::MatrixXd inertia(modes, n);
  for (int q = 0; q < modes; ++q) {
    for (int i = 0; i < n; ++i) inertia(q, i) = uniform(min_inertia, max_inertia);
  }
  return PowerNetwork(n, std::move(edges), damping, inertia);
}

/// Small LQR imitation dataset on `model`.
inline TrajectoryDataset small_dataset(const SwitchedModel& model, int count, int horizon,
                                       std::uint64_t seed, double q_freq = 10.0) {
  ScenarioConfig config;
  config.count = count;
  config.horizon_steps = horizon;
  config.initial_mode = 1;
  config.dwell_steps = 2;
  config.spread = 0.1;
  const auto scenarios =
      build_scenarios(config, model.num_nodes(), model.num_modes(), seed);
  const CostWeights weights = CostWeights::diagonal(model.num_nodes(), 1.0, q_freq, 1.0);
  return generate_dataset(model, scenarios, weights);
}

}  // namespace swingsynth::testing
