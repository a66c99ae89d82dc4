#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swingsynth/certify.hpp"
#include "swingsynth/lqr.hpp"
#include "swingsynth/network.hpp"

namespace swingsynth {

enum class GainOrigin { kUnconstrained, kProp1, kLocal, kOptimal, kSparse };

std::string to_string(GainOrigin origin);
/// Throws ValidationError on an unknown tag.
GainOrigin parse_gain_origin(const std::string& tag);

/// u = K x with K = [K1 K2]: K1 acts on angles, K2 on frequencies.
struct ControllerGain {
  Eigen::MatrixXd k;
  GainOrigin origin = GainOrigin::kUnconstrained;

  int num_nodes() const { return static_cast<int>(k.rows()); }
  Eigen::MatrixXd angle_block() const { return k.leftCols(k.rows()); }
  Eigen::MatrixXd frequency_block() const { return k.rightCols(k.rows()); }
};

/// Common quadratic Lyapunov function V(x) = x'Px together with the margins
/// it achieves for a specific gain.
struct LyapunovCertificate {
  Eigen::MatrixXd p;
  std::vector<double> margins;  // mu_q per mode
  double min_eig_p = 0.0;

  /// Recomputes margins and min_eig_p for (gain, p).
  static LyapunovCertificate evaluate(const Eigen::MatrixXd& gain,
                                      const Eigen::MatrixXd& p,
                                      const SwitchedModel& model);

  double worst_margin() const;
  bool certified(double lmi_margin = kLmiMargin) const {
    return min_eig_p > 0.0 && worst_margin() < -lmi_margin;
  }
};

/// K = C (G + ridge I)^{-1}, the unconstrained minimizer of the imitation
/// objective. Throws ValidationError when G is numerically singular and
/// ridge is zero.
ControllerGain fit_unconstrained(const TrajectoryDataset& dataset, double ridge);

/// K1 = L - I, K2 = D - I. Stabilizes every mode individually; the closed
/// loop of mode q is [[0, I], [-M_q^{-1}, -M_q^{-1}]].
ControllerGain prop1_controller(const PowerNetwork& network);

/// Intermediate quantities of the local (diagonal-gain) construction.
struct LocalConstructionTrace {
  Eigen::MatrixXd x1, x2, x3, y1, y2;
  std::vector<Eigen::MatrixXd> z;  // per mode
  std::vector<Eigen::MatrixXd> w;  // per mode
  Eigen::MatrixXd n;               // nu * I
  Eigen::VectorXd max_inertia;     // diagonal of M-bar
  double nu = 0.0;
  double delta = 0.0;
  int retries = 0;
};

struct LocalConstruction {
  ControllerGain gain;
  LyapunovCertificate certificate;
  LocalConstructionTrace trace;
};

struct LocalConstructionOptions {
  double delta = 1.0;  // margin added to the N and Y2 bounds
  double xi = 2.0;     // X3 = xi * I, xi > 1
  int max_retries = 20;
  double lmi_margin = kLmiMargin;
};

/// Builds the local controller with an analytic common Lyapunov certificate.
/// With X1 = I, X2 = -I, Y1 = 0, X3 = xi I:
///   Z_q = M_q^{-1}(D - L),  W_q = -M_q^{-1} L + xi M_q^{-1} D,
///   N = nu I with nu = min(0, min_q lmin(W_q + W_q'),
///                          min_q lmin(-(X3 + Z_q')'(X3 + Z_q') / 2)) - delta,
///   Y2 = diag(nu * mbar_i - delta),
///   K = [Y2 (X3 - I)^{-1}, Y2 (X3 - I)^{-1}],  P = X^{-1}.
/// The pair is verified numerically; on failure delta is doubled and the
/// construction repeated. Throws NumericalError once max_retries is spent.
LocalConstruction local_construction(const PowerNetwork& network,
                                     const LocalConstructionOptions& options = {});

struct BarrierSchedule {
  double initial = 1.0;
  double decay = 0.1;
  double minimum = 1e-6;
};

struct SynthesisConfig {
  BarrierSchedule barrier;
  double inner_tolerance = 1e-8;
  /// Stop once the barrier weight sits at its minimum and the relative
  /// objective change of an outer iteration falls below this.
  double outer_tolerance = 1e-9;
  int max_outer_iterations = 60;
  int max_newton_iterations = 100;
  int max_prox_iterations = 5000;
  double lmi_margin = kLmiMargin;  // LMI_q <= -lmi_margin I
  double p_floor = 1e-8;           // P >= p_floor I
  double ridge = 1e-9;

  void validate() const;
};

struct IterationRecord {
  int outer_iteration = 0;
  double barrier_weight = 0.0;
  double objective = 0.0;  // imitation objective (+ l1 penalty when sparse)
  double worst_lmi_margin = 0.0;
  int inner_iterations = 0;
  bool step_accepted = true;
  bool inner_stalled = false;  // line search failed before the tolerance
};

struct SynthesisResult {
  ControllerGain gain;
  LyapunovCertificate certificate;
  std::vector<IterationRecord> report;  // report[0] is the initial point
};

/// Alternating log-det barrier scheme for
///   min_{K,P} J(K)  s.t.  (A_q + B_q K)'P + P(A_q + B_q K) < 0 for all q,
///                         P > 0.
/// With Phi(K, P) = sum_q -log det(-LMI_q) - log det(P - p_floor I) and a
/// barrier weight w = mu * J(0), each outer iteration
///   (a) minimizes J(K) + w Phi(K, P) over K with P fixed (damped Newton),
///   (a') refines (K, P) jointly on the same function by shifted Newton with
///        tr(P) held fixed, which keeps the pair off the LMI boundary where
///        the two half-steps alone stall,
///   (b) recenters P by minimizing Phi(K, P) at fixed trace with K fixed,
///   (c) shrinks mu by the decay factor, down to its minimum.
/// It stops once mu is at its minimum and the relative objective change
/// falls below outer_tolerance, or after max_outer_iterations. Steps that
/// would raise J are rejected, so the recorded objective never increases.
/// Throws ValidationError when the initial pair is not strictly feasible.
SynthesisResult synthesize_stable(const TrajectoryDataset& dataset,
                                  const SwitchedModel& model,
                                  const Eigen::MatrixXd& init_gain,
                                  const Eigen::MatrixXd& init_p,
                                  const SynthesisConfig& config = {});

/// Same scheme with J(K) + beta * sum_{penalized} |K_ij|. The K-step is
/// proximal gradient: a gradient step on the smooth part followed by
/// soft-thresholding of penalized entries at step * beta; the joint
/// refinement (a') is skipped because the penalty is not smooth. Penalized entries
/// are K1[i, j] and K2[i, j] for every non-neighbor pair i != j. beta = 0
/// runs exactly synthesize_stable.
SynthesisResult synthesize_sparse(const TrajectoryDataset& dataset,
                                  const SwitchedModel& model,
                                  const PowerNetwork& network,
                                  const Eigen::MatrixXd& init_gain,
                                  const Eigen::MatrixXd& init_p, double beta,
                                  const SynthesisConfig& config = {});

/// Penalized index set as a mask over K (n x 2n).
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> sparsity_penalty_mask(
    const PowerNetwork& network);

/// Scalar proximal map of t |.|: sign(v) max(|v| - t, 0).
double soft_threshold(double value, double threshold);

namespace detail {

/// Log-det barrier of the K-subproblem with P fixed. Exposed for tests.
struct GainBarrier {
  const TrajectoryDataset* dataset;
  const SwitchedModel* model;
  Eigen::MatrixXd p;
  double weight;
  double lmi_margin;

  /// Smooth objective J(K) + weight * sum_q -log det(S_q(K)); +inf when any
  /// S_q(K) = -LMI_q(K) - lmi_margin I is not positive definite.
  double value(const Eigen::MatrixXd& gain) const;
  /// Gradient (n x 2n) and Hessian over row-major vec(K); requires a
  /// strictly feasible gain.
  void derivatives(const Eigen::MatrixXd& gain, Eigen::MatrixXd* gradient,
                   Eigen::MatrixXd* hessian) const;
};

/// Analytic-center barrier of the P-subproblem with K fixed.
struct LyapunovBarrier {
  std::vector<Eigen::MatrixXd> closed_loops;
  double lmi_margin;
  double p_floor;

  double value(const Eigen::MatrixXd& p) const;
  /// Gradient (symmetric matrix) and Hessian over full column-major vec(P).
  void derivatives(const Eigen::MatrixXd& p, Eigen::MatrixXd* gradient,
                   Eigen::MatrixXd* hessian) const;
};

/// Joint barrier objective over (K, P):
///   J(K) + weight * (sum_q -log det(S_q(K, P)) - log det(P - p_floor I)).
/// Coordinates are row-major vec(K) followed by the upper triangle of P
/// taken column by column (P(a, b) for a <= b). Exposed for tests.
struct JointBarrier {
  const TrajectoryDataset* dataset;
  const SwitchedModel* model;
  double weight;
  double lmi_margin;
  double p_floor;

  double value(const Eigen::MatrixXd& gain, const Eigen::MatrixXd& p) const;
  /// hessian may be null when only the gradient is needed.
  void derivatives(const Eigen::MatrixXd& gain, const Eigen::MatrixXd& p,
                   Eigen::VectorXd* gradient, Eigen::MatrixXd* hessian) const;
};

}  // namespace detail

}  // namespace swingsynth
