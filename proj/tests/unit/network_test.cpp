#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"
#include "swingsynth/network.hpp"

namespace swingsynth {
namespace {

// Truncated power series; accurate for ||A h|| well below one.
ModeMatrices taylor_zoh(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double h) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd ad = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd integral = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);  // (A h)^k / k!
  for (int k = 0; k < 40; ++k) {
    ad += term;
    integral += term * (h / (k + 1));
    term = term * a * (h / (k + 1));
  }
  return {ad, integral * b};
}

TEST(PowerNetwork, RejectsMalformedInput) {
  const Eigen::VectorXd d = Eigen::VectorXd::Ones(2);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Ones(1, 2);
  EXPECT_THROW(PowerNetwork(2, {{0, 0, 1.0}}, d, m), ValidationError);
  EXPECT_THROW(PowerNetwork(2, {{0, 1, 1.0}, {1, 0, 2.0}}, d, m), ValidationError);
  EXPECT_THROW(PowerNetwork(2, {{0, 2, 1.0}}, d, m), ValidationError);
  EXPECT_THROW(PowerNetwork(2, {{0, 1, -1.0}}, d, m), ValidationError);
  EXPECT_THROW(PowerNetwork(2, {}, Eigen::Vector2d(1.0, 0.0), m), ValidationError);
  EXPECT_THROW(PowerNetwork(2, {}, d, Eigen::MatrixXd::Zero(1, 2)), ValidationError);
  EXPECT_THROW(PowerNetwork(2, {}, d, Eigen::MatrixXd::Ones(1, 3)), ValidationError);
}

TEST(PowerNetwork, CanonicalEdgesAndNeighbors) {
  const PowerNetwork net(3, {{2, 1, 1.0}, {0, 1, 2.0}}, Eigen::Vector3d::Ones(),
                         Eigen::MatrixXd::Ones(1, 3));
  for (const Edge& e : net.edges()) EXPECT_LT(e.i, e.j);
  EXPECT_TRUE(net.are_neighbors(1, 2));
  EXPECT_TRUE(net.are_neighbors(2, 1));
  EXPECT_FALSE(net.are_neighbors(0, 2));
  EXPECT_FALSE(net.are_neighbors(1, 1));
  EXPECT_THROW(net.inertia(0), ValidationError);
  EXPECT_THROW(net.inertia(2), ValidationError);
}

TEST(PowerNetwork, MaxInertiaIsEntrywise) {
  const PowerNetwork net = testing::three_bus_line();
  EXPECT_TRUE(net.max_inertia().isApprox(Eigen::Vector3d(1.0, 1.5, 2.0)));
}

TEST(Laplacian, SymmetricWithZeroRowSumsAndPsd) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    const PowerNetwork net = testing::random_network(gen(), 6, 2);
    const Eigen::MatrixXd l = build_laplacian(net);
    EXPECT_LT((l - l.transpose()).norm(), 1e-14);
    EXPECT_LT(l.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(linalg::min_symmetric_eigenvalue(l), -1e-12);
  }
}

TEST(Laplacian, MatchesHandComputedLine) {
  Eigen::Matrix3d expected;
  expected << 2.0, -2.0, 0.0,
              -2.0, 3.5, -1.5,
              0.0, -1.5, 1.5;
  EXPECT_TRUE(build_laplacian(testing::three_bus_line()).isApprox(expected, 1e-15));
}

TEST(AssembleMode, SwingEquationBlocks) {
  const PowerNetwork net = testing::three_bus_line();
  const ModeMatrices mm = assemble_mode(net, 2);
  const Eigen::VectorXd minv = net.inertia(2).cwiseInverse();
  const Eigen::MatrixXd l = build_laplacian(net);
  EXPECT_TRUE(mm.a.topLeftCorner(3, 3).isZero());
  EXPECT_TRUE(mm.a.topRightCorner(3, 3).isIdentity());
  EXPECT_TRUE(mm.a.bottomLeftCorner(3, 3).isApprox(-(minv.asDiagonal() * l)));
  EXPECT_TRUE(mm.a.bottomRightCorner(3, 3).isApprox(
      Eigen::MatrixXd((-minv.cwiseProduct(net.damping())).asDiagonal())));
  EXPECT_TRUE(mm.b.topRows(3).isZero());
  EXPECT_TRUE(mm.b.bottomRows(3).isApprox(Eigen::MatrixXd(minv.asDiagonal())));
}

TEST(DiscretizeZoh, MatchesTaylorSeries) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 5; ++trial) {
    const PowerNetwork net = testing::random_network(gen(), 4, 2);
    for (int q = 1; q <= 2; ++q) {
      const ModeMatrices c = assemble_mode(net, q);
      const ModeMatrices d = discretize_zoh(c.a, c.b, 0.01);
      const ModeMatrices oracle = taylor_zoh(c.a, c.b, 0.01);
      EXPECT_LT((d.a - oracle.a).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((d.b - oracle.b).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(DiscretizeZoh, SingularDriftIsHandled) {
  // Double integrator: A singular, closed form known.
  Eigen::Matrix2d a;
  a << 0.0, 1.0, 0.0, 0.0;
  const Eigen::Vector2d b(0.0, 1.0);
  const double h = 0.3;
  const ModeMatrices d = discretize_zoh(a, b, h);
  Eigen::Matrix2d ad;
  ad << 1.0, h, 0.0, 1.0;
  EXPECT_TRUE(d.a.isApprox(ad, 1e-14));
  EXPECT_NEAR(d.b(0, 0), h * h / 2.0, 1e-15);
  EXPECT_NEAR(d.b(1, 0), h, 1e-15);
}

TEST(SwitchedModel, CachesEveryMode) {
  const PowerNetwork net = testing::three_bus_line();
  const SwitchedModel model(net, 0.01);
  EXPECT_EQ(model.num_modes(), 2);
  EXPECT_EQ(model.state_dim(), 6);
  for (int q = 1; q <= 2; ++q) {
    const ModeMatrices c = assemble_mode(net, q);
    EXPECT_TRUE(model.continuous(q).a.isApprox(c.a));
    EXPECT_TRUE(model.discrete(q).a.isApprox(linalg::expm(c.a * 0.01), 1e-13));
  }
  EXPECT_THROW(model.discrete(3), ValidationError);
  EXPECT_THROW(SwitchedModel(net, 0.0), ValidationError);
}

TEST(Expm, SymmetricMatrixMatchesEigendecomposition) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd s(5, 5);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = nd(gen) * (1 + trial);
    s = (s + s.transpose()).eval() / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const Eigen::MatrixXd oracle = es.eigenvectors() *
                                   es.eigenvalues().array().exp().matrix().asDiagonal() *
                                   es.eigenvectors().transpose();
    EXPECT_LT((linalg::expm(s) - oracle).norm() / oracle.norm(), 1e-12);
  }
}

TEST(Expm, InverseAndNonFinite) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 4) * 3.0;
  const Eigen::MatrixXd prod = linalg::expm(a) * linalg::expm(-a);
  EXPECT_LT((prod - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-10);
  a(0, 0) = std::nan("");
  EXPECT_THROW(linalg::expm(a), NumericalError);
}

TEST(StackState, OrdersAnglesFirst) {
  const StateVector x = stack_state(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4));
  EXPECT_TRUE(x.isApprox(Eigen::Vector4d(1, 2, 3, 4)));
}

}  // namespace
}  // namespace swingsynth
