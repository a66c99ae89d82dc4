#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "swingsynth/errors.hpp"
#include "swingsynth/lqr.hpp"

namespace swingsynth {
namespace {

TEST(Riccati, MatchesStackedLeastSquaresOracle) {
  std::mt19937_64 gen(2024);
  for (int instance = 0; instance < 20; ++instance) {
    const PowerNetwork net = testing::random_network(gen(), 3, 3);
    const SwitchedModel model(net, 0.05);
    const CostWeights w = testing::random_weights(gen(), 3);
    Rng rng(static_cast<std::uint64_t>(instance) + 1);
    const int horizon = 10;
    const SwitchingSequence seq =
        sample_switching_sequence(rng, 3, 1, 1, horizon, JumpLaw::kUniformAny);
    const StateVector x0 = sample_initial_state(rng, 3, 1.0);

    const RiccatiSolution sol = riccati_backward(model, seq, w, horizon);
    const Trajectory traj = rollout(model, seq, sol, x0);
    const testing::StackedSolution oracle = testing::stacked_oracle(model, seq, w, x0, horizon);
    const double cost = trajectory_cost(traj, w);
    EXPECT_LE(std::abs(cost - oracle.cost) / oracle.cost, 1e-8) << "instance " << instance;
    for (int t = 0; t < horizon; ++t) {
      EXPECT_LT((traj.inputs[t] - oracle.inputs.segment(3 * t, 3)).norm(),
                1e-7 * (1.0 + oracle.inputs.norm()));
    }
  }
}

TEST(Riccati, BellmanValueEqualsRolloutCost) {
  std::mt19937_64 gen(7);
  const PowerNetwork net = testing::random_network(gen(), 4, 2);
  const SwitchedModel model(net, 0.01);
  const CostWeights w = CostWeights::diagonal(4, 1.0, 100.0, 2.0);
  Rng rng(9);
  const SwitchingSequence seq = sample_switching_sequence(rng, 2, 1, 2, 30);
  const RiccatiSolution sol = riccati_backward(model, seq, w, 30);
  ASSERT_EQ(sol.gains.size(), 30u);
  ASSERT_EQ(sol.cost_to_go.size(), 31u);
  EXPECT_TRUE(sol.cost_to_go.back().isApprox(w.q));
  for (int trial = 0; trial < 5; ++trial) {
    const StateVector x0 = sample_initial_state(rng, 4, 1.0);
    const Trajectory traj = rollout(model, seq, sol, x0);
    const double value = x0.dot(sol.cost_to_go.front() * x0);
    EXPECT_NEAR(trajectory_cost(traj, w), value, 1e-10 * value);
  }
}

TEST(Riccati, TwoStepScalarGridSearch) {
  // Single bus, T = 2: only u_0 and u_1 matter. A fine grid around the
  // Riccati inputs must never beat them and must come close.
  const PowerNetwork net = testing::single_bus({1.0});
  const SwitchedModel model(net, 0.1);
  const CostWeights w = CostWeights::diagonal(1, 3.0, 2.0, 0.5);
  SwitchingSequence seq;
  seq.modes = {1, 1};
  const StateVector x0 = Eigen::Vector2d(0.4, -0.7);
  const RiccatiSolution sol = riccati_backward(model, seq, w, 2);
  const Trajectory traj = rollout(model, seq, sol, x0);
  const double best = trajectory_cost(traj, w);

  const ModeMatrices& d = model.discrete(1);
  const auto cost = [&](double u0, double u1) {
    const Eigen::Vector2d x1 = d.a * x0 + d.b * u0;
    const Eigen::Vector2d x2 = d.a * x1 + d.b * u1;
    return x0.dot(w.q * x0) + x1.dot(w.q * x1) + x2.dot(w.q * x2) +
           w.r(0, 0) * (u0 * u0 + u1 * u1);
  };
  double grid_min = std::numeric_limits<double>::infinity();
  const double c0 = traj.inputs[0](0), c1 = traj.inputs[1](0);
  for (int i = -200; i <= 200; ++i) {
    for (int j = -200; j <= 200; ++j) {
      grid_min = std::min(grid_min, cost(c0 + 0.005 * i + 0.0013, c1 + 0.005 * j - 0.0021));
    }
  }
  EXPECT_GE(grid_min, best - 1e-12);
  EXPECT_LE(grid_min - best, 1e-4 * best);
  EXPECT_NEAR(cost(c0, c1), best, 1e-12 * best);
}

TEST(Riccati, ZeroStateGivesZeroTrajectory) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  const CostWeights w = CostWeights::diagonal(3, 1.0, 1.0, 1.0);
  SwitchingSequence seq;
  seq.modes = {1, 2, 1, 2, 2};
  const RiccatiSolution sol = riccati_backward(model, seq, w, 5);
  const Trajectory traj = rollout(model, seq, sol, StateVector::Zero(6));
  for (const auto& u : traj.inputs) EXPECT_TRUE(u.isZero());
  EXPECT_EQ(trajectory_cost(traj, w), 0.0);
  EXPECT_EQ(traj.states.size(), 6u);
  EXPECT_EQ(traj.modes, std::vector<int>({1, 2, 1, 2, 2}));
}

TEST(Riccati, RejectsShortSequence) {
  const SwitchedModel model(testing::three_bus_line(), 0.01);
  SwitchingSequence seq;
  seq.modes = {1, 1};
  EXPECT_THROW(riccati_backward(model, seq, CostWeights::diagonal(3, 1, 1, 1), 3),
               ValidationError);
}

TEST(CostWeights, Validation) {
  CostWeights w = CostWeights::diagonal(2, 1.0, 1.0, 1.0);
  EXPECT_NO_THROW(w.validate(2));
  EXPECT_THROW(w.validate(3), ValidationError);
  CostWeights bad_r = w;
  bad_r.r(0, 0) = 0.0;
  EXPECT_THROW(bad_r.validate(2), ValidationError);
  CostWeights asym = w;
  asym.q(0, 1) = 0.5;
  EXPECT_THROW(asym.validate(2), ValidationError);
  CostWeights indefinite = w;
  indefinite.q(1, 1) = -1.0;
  EXPECT_THROW(indefinite.validate(2), ValidationError);
}

TEST(Dataset, GramMatricesMatchDirectSums) {
  const SwitchedModel model(testing::three_bus_line(), 0.02);
  const TrajectoryDataset d = testing::small_dataset(model, 4, 12, 3);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(6, 6);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 6);
  double u_energy = 0.0;
  for (const Trajectory& t : d.trajectories) {
    ASSERT_EQ(t.states.size(), t.inputs.size() + 1);
    for (std::size_t k = 0; k < t.inputs.size(); ++k) {
      g += 0.02 * t.states[k] * t.states[k].transpose();
      c += 0.02 * t.inputs[k] * t.states[k].transpose();
      u_energy += 0.02 * t.inputs[k].squaredNorm();
    }
  }
  EXPECT_TRUE(d.state_gram.isApprox(g, 1e-13));
  EXPECT_TRUE(d.cross_gram.isApprox(c, 1e-13));
  EXPECT_NEAR(d.input_energy, u_energy, 1e-13 * u_energy);

  const Eigen::MatrixXd k = Eigen::MatrixXd::Random(3, 6);
  double direct = 0.0;
  for (const Trajectory& t : d.trajectories) {
    for (std::size_t s = 0; s < t.inputs.size(); ++s) {
      direct += 0.02 * (t.inputs[s] - k * t.states[s]).squaredNorm();
    }
  }
  EXPECT_NEAR(imitation_objective(d, k), direct, 1e-10 * direct);
  EXPECT_NEAR(imitation_objective(d, Eigen::MatrixXd::Zero(3, 6)), d.input_energy, 1e-15);
}

TEST(Dataset, ParallelGenerationIsIdentical) {
  const SwitchedModel model(testing::three_bus_line(), 0.02);
  ScenarioConfig config;
  config.count = 6;
  config.horizon_steps = 10;
  config.initial_mode = 1;
  const auto scenarios = build_scenarios(config, 3, 2, 77);
  const CostWeights w = CostWeights::diagonal(3, 1.0, 10.0, 1.0);
  const TrajectoryDataset a = generate_dataset(model, scenarios, w, 1);
  const TrajectoryDataset b = generate_dataset(model, scenarios, w, 3);
  EXPECT_EQ(a.state_gram, b.state_gram);
  EXPECT_EQ(a.cross_gram, b.cross_gram);
  EXPECT_EQ(a.input_energy, b.input_energy);
}

TEST(Dataset, RejectsEmptyInput) {
  EXPECT_THROW(assemble_dataset({}, 0.01), ValidationError);
}

}  // namespace
}  // namespace swingsynth
