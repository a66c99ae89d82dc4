#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "swingsynth/certify.hpp"
#include "swingsynth/io.hpp"
#include "swingsynth/linalg.hpp"
#include "swingsynth/lqr.hpp"
#include "swingsynth/network.hpp"
#include "swingsynth/scenarios.hpp"
#include "swingsynth/sim.hpp"
#include "swingsynth/synth.hpp"

namespace {

using namespace swingsynth;

// Shipped 12-bus network plus a small training set, built once.
struct Setup {
  io::NetworkFile file = io::load_network(SWINGSYNTH_CONFIG_DIR "/network_12bus.json");
  SwitchedModel model{file.network, file.step_h};
  CostWeights weights = CostWeights::diagonal(file.network.num_nodes(), 1.0, 1e5, 10.0);
  TrajectoryDataset dataset;
  LocalConstruction local = local_construction(file.network);

  Setup() {
    ScenarioConfig config;
    config.count = 10;
    const auto scenarios =
        build_scenarios(config, file.network.num_nodes(), file.network.num_modes(), 7);
    dataset = generate_dataset(model, scenarios, weights);
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_Expm(benchmark::State& state) {
  const Setup& s = setup();
  const Eigen::MatrixXd a =
      closed_loop(s.model, s.file.network.num_modes(), s.local.gain.k) * s.file.step_h;
  for (auto _ : state) benchmark::DoNotOptimize(linalg::expm(a));
}
BENCHMARK(BM_Expm);

void BM_RiccatiBackward(benchmark::State& state) {
  const Setup& s = setup();
  const int horizon = static_cast<int>(state.range(0));
  Rng rng(3);
  const SwitchingSequence seq =
      sample_switching_sequence(rng, s.file.network.num_modes(), 7, 2, horizon);
  for (auto _ : state) benchmark::DoNotOptimize(riccati_backward(s.model, seq, s.weights, horizon));
  state.SetItemsProcessed(state.iterations() * horizon);
}
BENCHMARK(BM_RiccatiBackward)->Arg(50)->Arg(500);

// One damped-Newton direction of the gain subproblem: derivatives plus solve.
void BM_GainBarrierNewtonStep(benchmark::State& state) {
  const Setup& s = setup();
  const detail::GainBarrier barrier{&s.dataset, &s.model, s.local.certificate.p,
                                    s.dataset.input_energy, kLmiMargin};
  Eigen::MatrixXd gradient, hessian;
  for (auto _ : state) {
    barrier.derivatives(s.local.gain.k, &gradient, &hessian);
    Eigen::MatrixXd g_rows = gradient.transpose();
    const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(g_rows.data(), g_rows.size());
    benchmark::DoNotOptimize(hessian.ldlt().solve(g));
  }
}
BENCHMARK(BM_GainBarrierNewtonStep)->Unit(benchmark::kMillisecond);

void BM_JointBarrierDerivatives(benchmark::State& state) {
  const Setup& s = setup();
  const detail::JointBarrier barrier{&s.dataset, &s.model, s.dataset.input_energy, kLmiMargin,
                                     1e-8};
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  for (auto _ : state) {
    barrier.derivatives(s.local.gain.k, s.local.certificate.p, &gradient, &hessian);
    benchmark::DoNotOptimize(hessian.data());
  }
}
BENCHMARK(BM_JointBarrierDerivatives)->Unit(benchmark::kMillisecond);

void BM_LyapunovRecovery(benchmark::State& state) {
  const Setup& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(recover_lyapunov(s.local.gain.k, s.model));
}
BENCHMARK(BM_LyapunovRecovery)->Unit(benchmark::kMillisecond);

void BM_SimulateSwitched(benchmark::State& state) {
  const Setup& s = setup();
  const int steps = static_cast<int>(state.range(0));
  const ClosedLoopPropagator propagator(s.model, s.local.gain.k);
  Rng rng(11);
  const SwitchingSequence seq = sample_switching_sequence(
      rng, s.file.network.num_modes(), 10, 1, steps, JumpLaw::kUniformAny);
  const StateVector x0 = frequency_step_state(s.file.network.num_nodes(), 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_closed_loop(propagator, seq, x0, steps));
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_SimulateSwitched)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
