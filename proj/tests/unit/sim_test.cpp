#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "swingsynth/certify.hpp"
#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"
#include "swingsynth/sim.hpp"
#include "swingsynth/synth.hpp"

namespace swingsynth {
namespace {

TEST(Simulate, ConstantModeMatchesMatrixExponential) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  const Eigen::MatrixXd k = prop1_controller(net).k;
  const StateVector x0 = stack_state(Eigen::Vector3d(0.1, -0.2, 0.05), Eigen::Vector3d(0.3, 0.0, -0.1));
  for (int q = 1; q <= 2; ++q) {
    const ClosedLoopTrajectory traj = simulate_closed_loop(model, k, constant_sequence(q, 1000), x0, 1000);
    ASSERT_EQ(traj.states.size(), 1001u);
    const Eigen::MatrixXd acl = closed_loop(model, q, k);
    for (int step : {1, 10, 250, 999, 1000}) {
      const StateVector exact = linalg::expm(acl * (0.01 * step)) * x0;
      EXPECT_LT((traj.states[step] - exact).cwiseAbs().maxCoeff(), 1e-9) << "step " << step;
      EXPECT_DOUBLE_EQ(traj.times[step], 0.01 * step);
    }
  }
}

TEST(Simulate, InputsAreGainTimesState) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  const Eigen::MatrixXd k = prop1_controller(net).k;
  Rng rng(4);
  const SwitchingSequence seq = sample_switching_sequence(rng, 2, 1, 1, 50, JumpLaw::kUniformAny);
  const ClosedLoopTrajectory traj = simulate_closed_loop(model, k, seq, sample_initial_state(rng, 3, 1.0), 50);
  ASSERT_EQ(traj.inputs.size(), traj.states.size());
  ASSERT_EQ(traj.modes.size(), 50u);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    EXPECT_EQ(traj.inputs[i], k * traj.states[i]);
  }
  for (std::size_t i = 0; i < traj.modes.size(); ++i) EXPECT_EQ(traj.modes[i], seq.modes[i]);
}

TEST(Simulate, ZeroInitialStateStaysZero) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  const ClosedLoopTrajectory traj = simulate_closed_loop(
      model, prop1_controller(net).k, constant_sequence(1, 100), StateVector::Zero(6), 100);
  for (const auto& x : traj.states) EXPECT_TRUE(x.isZero());
  const MetricsReport m = metrics(traj);
  EXPECT_EQ(m.total_input, 0.0);
  EXPECT_EQ(m.total_freq_dev, 0.0);
}

TEST(Simulate, DivergenceGuardTruncates) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(3, 6);
  k.rightCols(3) = Eigen::MatrixXd::Identity(3, 3) * 50.0;
  const ClosedLoopTrajectory traj = simulate_closed_loop(
      model, k, constant_sequence(1, 5000), frequency_step_state(3, 0.05), 5000);
  EXPECT_TRUE(traj.diverged);
  EXPECT_LT(traj.states.size(), 5001u);
  EXPECT_EQ(traj.modes.size() + 1, traj.states.size());
  for (const auto& x : traj.states) EXPECT_LE(x.norm(), kDivergenceGuard);
  const std::vector<double> v = lyapunov_trace(traj, Eigen::MatrixXd::Identity(6, 6));
  EXPECT_GT(v.back(), v.front());
}

TEST(Simulate, RejectsBadArguments) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  const Eigen::MatrixXd k = prop1_controller(net).k;
  EXPECT_THROW(simulate_closed_loop(model, k, constant_sequence(1, 5), StateVector::Zero(6), 6),
               ValidationError);
  EXPECT_THROW(simulate_closed_loop(model, k, constant_sequence(1, 5), StateVector::Zero(4), 5),
               ValidationError);
  EXPECT_THROW(simulate_closed_loop(model, k, constant_sequence(3, 5), StateVector::Zero(6), 5),
               ValidationError);
  EXPECT_THROW(metrics(ClosedLoopTrajectory{}), ValidationError);
}

TEST(Simulate, CertifiedPairDecreasesAlongSwitchedRuns) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  const LocalConstruction local = local_construction(net);
  ASSERT_TRUE(local.certificate.certified());
  const ClosedLoopPropagator propagator(model, local.gain.k);
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(derive_seed(55, s));
    const SwitchingSequence seq = sample_switching_sequence(rng, 2, 1, 1, 200, JumpLaw::kUniformAny);
    const ClosedLoopTrajectory traj =
        simulate_closed_loop(propagator, seq, sample_initial_state(rng, 3, 1.0), 200);
    const std::vector<double> v = lyapunov_trace(traj, local.certificate.p);
    const double floor = 1e-14 * v.front();
    for (std::size_t k = 0; k + 1 < v.size() && v[k] > floor; ++k) {
      ASSERT_LT(v[k + 1], v[k]) << "sequence " << s << " step " << k;
    }
  }
}

ClosedLoopTrajectory constant_trajectory(int n, int intervals, double h, double u, double omega) {
  ClosedLoopTrajectory t;
  t.step_h = h;
  for (int k = 0; k <= intervals; ++k) {
    t.times.push_back(k * h);
    t.states.push_back(stack_state(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Constant(n, omega)));
    t.inputs.push_back(Eigen::VectorXd::Constant(n, u));
    if (k < intervals) t.modes.push_back(k < intervals / 2 ? 1 : 2);
  }
  return t;
}

TEST(Metrics, RectangleRule) {
  const ClosedLoopTrajectory t = constant_trajectory(4, 100, 0.01, 1.0, -2.0);
  const MetricsReport m = metrics(t);
  EXPECT_NEAR(m.total_input, 4.0, 1e-12);
  EXPECT_NEAR(m.total_freq_dev, 8.0, 1e-12);
  EXPECT_NEAR(m.duration, 1.0, 1e-12);
  ASSERT_EQ(m.per_mode.size(), 2u);
  EXPECT_NEAR(m.per_mode.at(1).total_input + m.per_mode.at(2).total_input, m.total_input, 1e-12);
  EXPECT_NEAR(m.per_mode.at(1).duration, 0.5, 1e-12);
}

TEST(Metrics, AdditiveOverConcatenatedSegments) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  const ClosedLoopPropagator propagator(model, prop1_controller(net).k);
  Rng rng(6);
  const SwitchingSequence seq = sample_switching_sequence(rng, 2, 1, 1, 200, JumpLaw::kUniformAny);
  const StateVector x0 = frequency_step_state(3, 0.15);
  const ClosedLoopTrajectory full = simulate_closed_loop(propagator, seq, x0, 200);

  SwitchingSequence head, tail;
  head.modes.assign(seq.modes.begin(), seq.modes.begin() + 120);
  tail.modes.assign(seq.modes.begin() + 120, seq.modes.end());
  const ClosedLoopTrajectory first = simulate_closed_loop(propagator, head, x0, 120);
  const ClosedLoopTrajectory second = simulate_closed_loop(propagator, tail, first.states.back(), 80);
  const MetricsReport a = metrics(full), b = metrics(first), c = metrics(second);
  EXPECT_NEAR(a.total_input, b.total_input + c.total_input, 1e-12 * a.total_input);
  EXPECT_NEAR(a.total_freq_dev, b.total_freq_dev + c.total_freq_dev, 1e-12 * a.total_freq_dev);
  EXPECT_NEAR(a.duration, 2.0, 1e-12);
}

TEST(LyapunovTrace, IdentityGivesSquaredNorm) {
  const ClosedLoopTrajectory t = constant_trajectory(2, 3, 0.1, 0.0, 3.0);
  for (double v : lyapunov_trace(t, Eigen::MatrixXd::Identity(4, 4))) EXPECT_DOUBLE_EQ(v, 18.0);
}

TEST(Units, HertzToRadiansPerSecond) {
  EXPECT_DOUBLE_EQ(hz_to_rad_per_s(1.0), 2.0 * std::numbers::pi);
  const StateVector x = frequency_step_state(3, 0.05);
  EXPECT_TRUE(x.head(3).isZero());
  EXPECT_NEAR(x(4), 0.1 * std::numbers::pi, 1e-15);
}

}  // namespace
}  // namespace swingsynth
