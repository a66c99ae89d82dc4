#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swingsynth/network.hpp"

namespace swingsynth {

/// Strictness margin: a pair (K, P) is certified when every mode's LMI matrix
/// has largest eigenvalue below -kLmiMargin and P is positive definite.
inline constexpr double kLmiMargin = 1e-7;

/// A_q + B_q K (continuous time).
Eigen::MatrixXd closed_loop(const SwitchedModel& model, int q,
                            const Eigen::MatrixXd& gain);

/// (A_cl)'P + P A_cl.
Eigen::MatrixXd lyapunov_lmi(const Eigen::MatrixXd& a_cl,
                             const Eigen::MatrixXd& p);

/// Spectral abscissa max Re(eig(a)) from the general eigenproblem.
/// Throws NumericalError if the eigensolver fails.
double hurwitz_margin(const Eigen::MatrixXd& a);

/// Per-mode mu_q = lambda_max((A_q + B_q K)'P + P(A_q + B_q K)), mode order.
std::vector<double> lmi_margins(const Eigen::MatrixXd& gain,
                                const Eigen::MatrixXd& p,
                                const SwitchedModel& model);

struct RecoveryOptions {
  double p_floor = 1e-8;        // P >= p_floor * I
  double lmi_margin = kLmiMargin;
  int max_iterations = 4000;
  double initial_step = 0.5;    // relative to ||I||_F
};

struct LyapunovRecovery {
  bool feasible = false;
  Eigen::MatrixXd p;     // best iterate, tr(P) = 2n
  double worst_margin;   // t = max_q lambda_max(LMI_q(P)) at the best iterate
  int iterations = 0;
};

/// Fixed-gain common Lyapunov search: minimizes t = max_q lambda_max(LMI_q(P))
/// over {P >= p_floor I, tr P = 2n} by projected subgradient descent. The
/// subgradient of the active mode is the symmetrized outer product
/// v (A_cl v)' + (A_cl v) v' of its top eigenvector v.
LyapunovRecovery recover_lyapunov(const Eigen::MatrixXd& gain,
                                  const SwitchedModel& model,
                                  const RecoveryOptions& options = {});

/// Euclidean projection onto {P symmetric : P >= floor * I, tr P = trace}.
Eigen::MatrixXd project_trace_slab(const Eigen::MatrixXd& p, double floor,
                                   double trace);

enum class CertificateSource { kSupplied, kRecovered, kNone };

struct CertificationReport {
  std::vector<double> spectral_abscissa;
  std::vector<double> lmi_margins;   // empty when no certificate is available
  double min_eig_p = 0.0;
  CertificateSource source = CertificateSource::kNone;
  std::optional<Eigen::MatrixXd> p;
  bool per_mode_stable = false;
  bool switched_certified = false;
  double lmi_tolerance = kLmiMargin;
  std::string note;

  double worst_abscissa() const;
  double worst_lmi_margin() const;
};

/// Recomputes every margin from (K, P, model). When P is not supplied and all
/// modes are Hurwitz, a certificate is searched with recover_lyapunov.
CertificationReport certify_controller(const Eigen::MatrixXd& gain,
                                       const std::optional<Eigen::MatrixXd>& p,
                                       const SwitchedModel& model,
                                       const RecoveryOptions& recovery = {});

enum class SparsityClass { kLocal, kDistributed, kDense };

std::string to_string(SparsityClass c);

struct SparsityReport {
  SparsityClass classification = SparsityClass::kDense;
  double threshold = 0.0;
  int significant_non_edge = 0;      // off-diagonal, non-neighbor, both blocks
  int significant_off_diagonal = 0;  // both blocks
  int total_off_diagonal = 0;        // 2 n (n - 1)
  double communication_saving = 0.0;
};

/// Entries with |K_ij| > relative_tol * max|K| are significant. Local: only
/// block diagonals. Distributed: off-diagonal entries only between neighbors
/// (either block). Dense: anything else.
SparsityReport sparsity_report(const Eigen::MatrixXd& gain,
                               const PowerNetwork& network,
                               double relative_tol = 1e-6);

}  // namespace swingsynth
