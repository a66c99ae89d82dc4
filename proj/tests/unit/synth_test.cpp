#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "swingsynth/certify.hpp"
#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"
#include "swingsynth/synth.hpp"

namespace swingsynth {
namespace {

bool block_diagonal(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  for (int block = 0; block < 2; ++block) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j && k(i, block * n + j) != 0.0) return false;
      }
    }
  }
  return true;
}

void expect_non_increasing(const std::vector<IterationRecord>& report) {
  for (std::size_t i = 1; i < report.size(); ++i) {
    EXPECT_LE(report[i].objective, report[i - 1].objective) << "outer iteration " << i;
  }
}

TEST(LocalConstruction, ScalarHandComputation) {
  // One bus, modes m = 1 and m = 2, d = 1, xi = 2, delta = 1:
  //   -(xi + d/m)^2 / 2 is -4.5 and -3.125; 2 xi d / m is positive,
  //   so nu = -4.5 - 1 = -5.5 and Y2 = nu * 2 - 1 = -12,
  //   K = Y2 / (xi - 1) in both blocks, P = [[1, -1], [-1, 2]]^{-1}.
  const PowerNetwork net = testing::single_bus({1.0, 2.0}, 1.0);
  LocalConstructionOptions options;
  options.xi = 2.0;
  options.delta = 1.0;
  const LocalConstruction local = local_construction(net, options);
  EXPECT_DOUBLE_EQ(local.trace.nu, -5.5);
  EXPECT_DOUBLE_EQ(local.trace.y2(0, 0), -12.0);
  EXPECT_EQ(local.trace.retries, 0);
  EXPECT_NEAR(local.gain.k(0, 0), -12.0, 1e-12);
  EXPECT_NEAR(local.gain.k(0, 1), -12.0, 1e-12);
  Eigen::Matrix2d p;
  p << 2.0, 1.0, 1.0, 1.0;
  EXPECT_TRUE(local.certificate.p.isApprox(p, 1e-12));
  EXPECT_TRUE(local.certificate.certified());
}

TEST(LocalConstruction, RandomNetworksAreCertifiedAndBlockDiagonal) {
  std::mt19937_64 gen(101);
  for (int trial = 0; trial < 10; ++trial) {
    const PowerNetwork net = testing::random_network(gen(), 6, 4);
    const LocalConstruction local = local_construction(net);
    EXPECT_TRUE(block_diagonal(local.gain.k));
    EXPECT_GT(local.certificate.min_eig_p, 0.0);
    EXPECT_LT(local.certificate.worst_margin(), -kLmiMargin);
    EXPECT_EQ(local.gain.origin, GainOrigin::kLocal);
  }
}

TEST(LocalConstruction, RejectsBadOptions) {
  LocalConstructionOptions options;
  options.xi = 1.0;
  EXPECT_THROW(local_construction(testing::three_bus_line(), options), ValidationError);
  options = {};
  options.delta = 0.0;
  EXPECT_THROW(local_construction(testing::three_bus_line(), options), ValidationError);
}

TEST(FitUnconstrained, ZeroGradientAtSolution) {
  const SwitchedModel model(testing::three_bus_line(), 0.02);
  const TrajectoryDataset d = testing::small_dataset(model, 6, 20, 4);
  const ControllerGain k = fit_unconstrained(d, 0.0);
  const Eigen::MatrixXd gradient = 2.0 * (k.k * d.state_gram - d.cross_gram);
  EXPECT_LT(gradient.norm(), 1e-9 * d.cross_gram.norm());
  // Any perturbation increases the objective.
  const double j = imitation_objective(d, k.k);
  EXPECT_GT(imitation_objective(d, k.k + 1e-3 * Eigen::MatrixXd::Random(3, 6)), j);
}

TEST(FitUnconstrained, SingularGramNeedsRidge) {
  TrajectoryDataset d;
  d.state_gram = Eigen::MatrixXd::Zero(2, 2);
  d.cross_gram = Eigen::MatrixXd::Zero(1, 2);
  d.step_h = 0.01;
  EXPECT_THROW(fit_unconstrained(d, 0.0), ValidationError);
  EXPECT_THROW(fit_unconstrained(d, -1.0), ValidationError);
}

TEST(SoftThreshold, ProximalMapOfAbs) {
  EXPECT_DOUBLE_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(soft_threshold(0.5, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(soft_threshold(-1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(soft_threshold(2.0, 0.0), 2.0);
}

TEST(SparsityPenaltyMask, NonNeighborOffDiagonalsInBothBlocks) {
  const PowerNetwork net = testing::three_bus_line();
  const auto mask = sparsity_penalty_mask(net);
  ASSERT_EQ(mask.rows(), 3);
  ASSERT_EQ(mask.cols(), 6);
  int count = 0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) count += mask(i, j) ? 1 : 0;
  }
  EXPECT_EQ(count, 4);
  EXPECT_TRUE(mask(0, 2) && mask(2, 0) && mask(0, 5) && mask(2, 3));
  EXPECT_FALSE(mask(0, 0) || mask(0, 1) || mask(0, 3) || mask(0, 4));
}

TEST(SynthesisConfig, Validation) {
  SynthesisConfig c;
  EXPECT_NO_THROW(c.validate());
  c.barrier.decay = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.barrier.minimum = 2.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.lmi_margin = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.max_outer_iterations = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

class SmallSynthesis : public ::testing::Test {
 protected:
  SmallSynthesis()
      : net_(testing::three_bus_line()),
        model_(net_, 0.02),
        data_(testing::small_dataset(model_, 10, 25, 21)),
        local_(local_construction(net_)) {}

  PowerNetwork net_;
  SwitchedModel model_;
  TrajectoryDataset data_;
  LocalConstruction local_;
};

TEST_F(SmallSynthesis, StableSynthesisIsCertifiedAndMonotone) {
  const SynthesisResult r = synthesize_stable(data_, model_, local_.gain.k, local_.certificate.p);
  ASSERT_GE(r.report.size(), 2u);
  EXPECT_EQ(r.report.front().outer_iteration, 0);
  EXPECT_DOUBLE_EQ(r.report.front().objective, imitation_objective(data_, local_.gain.k));
  expect_non_increasing(r.report);
  EXPECT_LT(r.report.back().objective, r.report.front().objective);
  EXPECT_DOUBLE_EQ(r.report.back().objective, imitation_objective(data_, r.gain.k));
  EXPECT_TRUE(r.certificate.certified());
  EXPECT_EQ(r.gain.origin, GainOrigin::kOptimal);
  // The certificate is honest: recompute from scratch.
  const LyapunovCertificate check = LyapunovCertificate::evaluate(r.gain.k, r.certificate.p, model_);
  EXPECT_TRUE(check.certified());
  // Never better than the unconstrained optimum.
  EXPECT_GE(imitation_objective(data_, r.gain.k),
            imitation_objective(data_, fit_unconstrained(data_, 0.0).k) * (1 - 1e-12));
}

TEST_F(SmallSynthesis, SparseWithZeroBetaIsStableSynthesis) {
  const SynthesisResult a = synthesize_stable(data_, model_, local_.gain.k, local_.certificate.p);
  const SynthesisResult b =
      synthesize_sparse(data_, model_, net_, local_.gain.k, local_.certificate.p, 0.0);
  EXPECT_EQ(a.gain.k, b.gain.k);
  EXPECT_EQ(a.certificate.p, b.certificate.p);
  ASSERT_EQ(a.report.size(), b.report.size());
  for (std::size_t i = 0; i < a.report.size(); ++i) {
    EXPECT_EQ(a.report[i].objective, b.report[i].objective);
  }
}

TEST_F(SmallSynthesis, LargeBetaRemovesNonNeighborGains) {
  const SynthesisResult opt = synthesize_stable(data_, model_, local_.gain.k, local_.certificate.p);
  const SynthesisResult r =
      synthesize_sparse(data_, model_, net_, opt.gain.k, opt.certificate.p, 100.0);
  EXPECT_TRUE(r.certificate.certified());
  EXPECT_EQ(r.gain.origin, GainOrigin::kSparse);
  const auto mask = sparsity_penalty_mask(net_);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) {
      if (mask(i, j)) {
        EXPECT_EQ(r.gain.k(i, j), 0.0);
      }
    }
  }
  expect_non_increasing(r.report);
}

TEST_F(SmallSynthesis, RejectsInfeasibleInit) {
  EXPECT_THROW(synthesize_stable(data_, model_, Eigen::MatrixXd::Zero(3, 6),
                                 Eigen::MatrixXd::Identity(6, 6)),
               ValidationError);
}

TEST(Synthesis, ZeroDatasetStaysCertified) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  TrajectoryDataset d;
  d.state_gram = Eigen::MatrixXd::Zero(6, 6);
  d.cross_gram = Eigen::MatrixXd::Zero(3, 6);
  d.input_energy = 0.0;
  d.step_h = 0.01;
  const LocalConstruction local = local_construction(net);
  const SynthesisResult r = synthesize_stable(d, model, local.gain.k, local.certificate.p);
  EXPECT_TRUE(r.certificate.certified());
  EXPECT_EQ(imitation_objective(d, r.gain.k), 0.0);
}

TEST(Synthesis, SingleModeReachesUnconstrainedOptimum) {
  // With one mode and a Hurwitz least-squares gain, the constraint is
  // inactive at the optimum: the synthesized objective must close the gap
  // to the unconstrained fit.
  Eigen::MatrixXd inertia(1, 3);
  inertia << 1.0, 1.5, 2.0;
  const PowerNetwork net(3, {{0, 1, 2.0}, {1, 2, 1.5}}, Eigen::Vector3d(1.0, 0.8, 1.2), inertia);
  const SwitchedModel model(net, 0.02);
  const TrajectoryDataset d = testing::small_dataset(model, 10, 50, 5);
  const ControllerGain unc = fit_unconstrained(d, 0.0);
  ASSERT_LT(hurwitz_margin(closed_loop(model, 1, unc.k)), 0.0);
  const LocalConstruction local = local_construction(net);
  const SynthesisResult r = synthesize_stable(d, model, local.gain.k, local.certificate.p);
  const double j_unc = imitation_objective(d, unc.k);
  const double gap0 = imitation_objective(d, local.gain.k) - j_unc;
  const double gap = imitation_objective(d, r.gain.k) - j_unc;
  EXPECT_GE(gap, -1e-9 * j_unc);
  EXPECT_LE(gap, 1e-3 * gap0);
  EXPECT_TRUE(r.certificate.certified());
}

}  // namespace
}  // namespace swingsynth
