#include "swingsynth/certify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <fmt/format.h>

#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"

namespace swingsynth {

Eigen::MatrixXd closed_loop(const SwitchedModel& model, int q,
                            const Eigen::MatrixXd& gain) {
  const ModeMatrices& mode = model.continuous(q);
  if (gain.rows() != mode.b.cols() || gain.cols() != mode.a.cols()) {
    throw ValidationError(fmt::format(
        "gain is {}x{}, expected {}x{}", gain.rows(), gain.cols(),
        mode.b.cols(), mode.a.cols()));
  }
  return mode.a + mode.b * gain;
}

Eigen::MatrixXd lyapunov_lmi(const Eigen::MatrixXd& a_cl,
                             const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd pa = p * a_cl;
  return linalg::symmetrize(pa + pa.transpose());
}

double hurwitz_margin(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ValidationError("hurwitz_margin: matrix must be square and non-empty");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("hurwitz_margin: eigensolver did not converge");
  }
  return solver.eigenvalues().real().maxCoeff();
}

std::vector<double> lmi_margins(const Eigen::MatrixXd& gain,
                                const Eigen::MatrixXd& p,
                                const SwitchedModel& model) {
  if (p.rows() != model.state_dim() || p.cols() != model.state_dim()) {
    throw ValidationError(fmt::format("P must be {0}x{0}", model.state_dim()));
  }
  const Eigen::MatrixXd p_sym = linalg::symmetrize(p);
  std::vector<double> margins;
  margins.reserve(static_cast<std::size_t>(model.num_modes()));
  for (int q = 1; q <= model.num_modes(); ++q) {
    margins.push_back(linalg::max_symmetric_eigenvalue(
        lyapunov_lmi(closed_loop(model, q, gain), p_sym)));
  }
  return margins;
}

Eigen::MatrixXd project_trace_slab(const Eigen::MatrixXd& p, double floor,
                                   double trace) {
  const Eigen::Index d = p.rows();
  const double budget = trace - floor * static_cast<double>(d);
  if (!(budget > 0.0)) {
    throw ValidationError("project_trace_slab: trace too small for the floor");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(linalg::symmetrize(p));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("project_trace_slab: eigensolver did not converge");
  }
  // Simplex projection of (lambda - floor) onto {mu >= 0, sum mu = budget}.
  Eigen::VectorXd shifted = eig.eigenvalues().array() - floor;
  std::vector<double> sorted(shifted.data(), shifted.data() + d);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - budget) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) tau = candidate;
  }
  const Eigen::VectorXd mu =
      (shifted.array() - tau).cwiseMax(0.0) + floor;
  return linalg::symmetrize(eig.eigenvectors() * mu.asDiagonal() *
                            eig.eigenvectors().transpose());
}

namespace {

// Reduction of full symmetric-matrix derivatives to the coordinates
// P(a, b), a <= b.
struct SymCoords {
  explicit SymCoords(int dim) : dim(dim) {
    for (int b = 0; b < dim; ++b) {
      for (int a = 0; a <= b; ++a) pairs.emplace_back(a, b);
    }
  }
  int dim;
  std::vector<std::pair<int, int>> pairs;

  Eigen::Index size() const { return static_cast<Eigen::Index>(pairs.size()); }

  Eigen::VectorXd reduce(const Eigen::MatrixXd& g) const {
    Eigen::VectorXd out(size());
    for (Eigen::Index s = 0; s < size(); ++s) {
      const auto [a, b] = pairs[static_cast<std::size_t>(s)];
      out(s) = a == b ? g(a, a) : g(a, b) + g(b, a);
    }
    return out;
  }

  // h is a Hessian over column-major vec of the full matrix.
  Eigen::MatrixXd reduce(const Eigen::MatrixXd& h, int) const {
    Eigen::MatrixXd out(size(), size());
    for (Eigen::Index s = 0; s < size(); ++s) {
      const auto [a, b] = pairs[static_cast<std::size_t>(s)];
      const int rows[2] = {a + b * dim, b + a * dim};
      for (Eigen::Index t = 0; t <= s; ++t) {
        const auto [c, d] = pairs[static_cast<std::size_t>(t)];
        const int cols[2] = {c + d * dim, d + c * dim};
        double acc = 0.0;
        for (int i = 0; i < (a == b ? 1 : 2); ++i) {
          for (int j = 0; j < (c == d ? 1 : 2); ++j) acc += h(rows[i], cols[j]);
        }
        out(s, t) = out(t, s) = acc;
      }
    }
    return out;
  }

  Eigen::MatrixXd expand(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd m(dim, dim);
    for (Eigen::Index s = 0; s < size(); ++s) {
      const auto [a, b] = pairs[static_cast<std::size_t>(s)];
      m(a, b) = m(b, a) = v(s);
    }
    return m;
  }
};

double neg_log_det(const Eigen::MatrixXd& s) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return -2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double worst_margin_of(const std::vector<Eigen::MatrixXd>& a_cl,
                       const Eigen::MatrixXd& p) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const Eigen::MatrixXd& a : a_cl) {
    worst = std::max(worst, linalg::max_symmetric_eigenvalue(lyapunov_lmi(a, p)));
  }
  return worst;
}

// Interior-point solution of
//   min t  s.t.  LMI_q(P) <= t I (each A_q normalized to unit Frobenius norm),
//                P >= floor I,  tr P = d.
// Normalizing the modes leaves the sign of the optimal t unchanged. Stops at
// the first centered point whose unnormalized worst margin is below
// -lmi_margin, or once the duality gap is negligible.
struct PhaseOneResult {
  Eigen::MatrixXd p;
  int newton_steps = 0;
};

PhaseOneResult barrier_phase_one(const std::vector<Eigen::MatrixXd>& a_cl,
                                 const RecoveryOptions& options) {
  constexpr int kMaxStages = 24;
  constexpr int kMaxCentering = 60;
  constexpr double kGrowth = 10.0;
  constexpr double kGapTolerance = 1e-11;

  const int d = static_cast<int>(a_cl.front().rows());
  const SymCoords coords(d);
  const Eigen::Index np = coords.size();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  std::vector<Eigen::MatrixXd> scaled;
  for (const Eigen::MatrixXd& a : a_cl) scaled.push_back(a / a.norm());

  const auto value = [&](const Eigen::MatrixXd& p, double t, double tau) {
    double f = neg_log_det(p - options.p_floor * eye);
    for (const Eigen::MatrixXd& a : scaled) f += neg_log_det(t * eye - lyapunov_lmi(a, p));
    return tau * t + f;
  };

  Eigen::VectorXd constraint = Eigen::VectorXd::Zero(np + 1);
  constraint.head(np) = coords.reduce(eye);

  PhaseOneResult result;
  Eigen::MatrixXd p = eye;
  double t = worst_margin_of(scaled, p) + 1.0;
  double tau = 1.0;
  const double barrier_count = static_cast<double>(d) * static_cast<double>(scaled.size() + 1);

  for (int stage = 0; stage < kMaxStages; ++stage) {
    double f = value(p, t, tau);
    for (int it = 0; it < kMaxCentering; ++it) {
      const Eigen::MatrixXd v = (p - options.p_floor * eye).llt().solve(eye);
      Eigen::MatrixXd grad_p = -v;
      Eigen::MatrixXd hess_p = Eigen::kroneckerProduct(v, v);
      double grad_t = tau;
      double hess_tt = 0.0;
      Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);
      for (const Eigen::MatrixXd& a : scaled) {
        const Eigen::MatrixXd w = (t * eye - lyapunov_lmi(a, p)).llt().solve(eye);
        const Eigen::MatrixXd aw = a * w;
        const Eigen::MatrixXd wat = aw.transpose();
        const Eigen::MatrixXd awat = a * wat;
        grad_p += aw + wat;
        hess_p += Eigen::kroneckerProduct(w, awat);
        hess_p += Eigen::kroneckerProduct(wat, aw);
        hess_p += Eigen::kroneckerProduct(aw, wat);
        hess_p += Eigen::kroneckerProduct(awat, w);
        grad_t -= w.trace();
        hess_tt += w.squaredNorm();
        const Eigen::MatrixXd aww = aw * w;
        cross -= aww + aww.transpose();
      }
      Eigen::VectorXd g(np + 1);
      g.head(np) = coords.reduce(grad_p);
      g(np) = grad_t;
      Eigen::MatrixXd h(np + 1, np + 1);
      h.topLeftCorner(np, np) = coords.reduce(hess_p, 0);
      h.block(0, np, np, 1) = coords.reduce(cross);
      h.block(np, 0, 1, np) = h.block(0, np, np, 1).transpose();
      h(np, np) = hess_tt;

      const Eigen::LLT<Eigen::MatrixXd> llt(h);
      if (llt.info() != Eigen::Success) break;
      const Eigen::VectorXd hg = llt.solve(g);
      const Eigen::VectorXd hc = llt.solve(constraint);
      const double nu = -constraint.dot(hg) / constraint.dot(hc);
      const Eigen::VectorXd step = -(hg + nu * hc);
      const double decrement = -g.dot(step);
      ++result.newton_steps;
      if (decrement / 2.0 <= 1e-10) break;
      const Eigen::MatrixXd step_p = coords.expand(step.head(np));
      double alpha = 1.0;
      bool moved = false;
      for (int k = 0; k < 60; ++k, alpha *= 0.5) {
        const double trial = value(p + alpha * step_p, t + alpha * step(np), tau);
        if (trial <= f - 0.25 * alpha * decrement) {
          p = linalg::symmetrize(p + alpha * step_p);
          t += alpha * step(np);
          f = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (worst_margin_of(a_cl, p) < -options.lmi_margin) break;
    if (barrier_count / tau < kGapTolerance) break;
    tau *= kGrowth;
  }
  result.p = std::move(p);
  return result;
}

}  // namespace

LyapunovRecovery recover_lyapunov(const Eigen::MatrixXd& gain,
                                  const SwitchedModel& model,
                                  const RecoveryOptions& options) {
  const int d = model.state_dim();
  const double trace = static_cast<double>(d);
  std::vector<Eigen::MatrixXd> a_cl;
  for (int q = 1; q <= model.num_modes(); ++q) {
    a_cl.push_back(closed_loop(model, q, gain));
  }

  // Worst mode value and its subgradient at P.
  const auto evaluate = [&](const Eigen::MatrixXd& p, Eigen::MatrixXd* subgrad) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const Eigen::MatrixXd& a : a_cl) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lyapunov_lmi(a, p));
      if (eig.info() != Eigen::Success) {
        throw NumericalError("recover_lyapunov: eigensolver did not converge");
      }
      const double top = eig.eigenvalues()(d - 1);
      if (top > worst) {
        worst = top;
        if (subgrad != nullptr) {
          const Eigen::VectorXd v = eig.eigenvectors().col(d - 1);
          const Eigen::VectorXd av = a * v;
          *subgrad = v * av.transpose() + av * v.transpose();
        }
      }
    }
    return worst;
  };

  LyapunovRecovery best;
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(d, d);
  best.p = p;
  best.worst_margin = evaluate(p, nullptr);
  const double base_step = options.initial_step * std::sqrt(trace);

  Eigen::MatrixXd g;
  for (int k = 0; k < options.max_iterations; ++k) {
    const double value = evaluate(p, &g);
    if (value < best.worst_margin) {
      best.worst_margin = value;
      best.p = p;
    }
    best.iterations = k + 1;
    if (best.worst_margin < -options.lmi_margin &&
        linalg::min_symmetric_eigenvalue(best.p) > 0.0) {
      break;
    }
    const double norm = g.norm();
    if (!(norm > 0.0)) break;
    const double step = base_step / std::sqrt(static_cast<double>(k) + 1.0);
    p = project_trace_slab(p - (step / norm) * g, options.p_floor, trace);
  }
  best.feasible = best.worst_margin < -options.lmi_margin &&
                  linalg::min_symmetric_eigenvalue(best.p) > 0.0;
  if (best.feasible) return best;

  // Thin feasible sets (stiff closed loops) are out of reach of the
  // subgradient method; finish with an interior-point solve.
  PhaseOneResult polished = barrier_phase_one(a_cl, options);
  best.iterations += polished.newton_steps;
  const double polished_margin = worst_margin_of(a_cl, polished.p);
  if (polished_margin < best.worst_margin) {
    best.worst_margin = polished_margin;
    best.p = std::move(polished.p);
  }
  best.feasible = best.worst_margin < -options.lmi_margin &&
                  linalg::min_symmetric_eigenvalue(best.p) > 0.0;
  return best;
}

double CertificationReport::worst_abscissa() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (double a : spectral_abscissa) worst = std::max(worst, a);
  return worst;
}

double CertificationReport::worst_lmi_margin() const {
  if (lmi_margins.empty()) return std::numeric_limits<double>::infinity();
  double worst = -std::numeric_limits<double>::infinity();
  for (double m : lmi_margins) worst = std::max(worst, m);
  return worst;
}

CertificationReport certify_controller(const Eigen::MatrixXd& gain,
                                       const std::optional<Eigen::MatrixXd>& p,
                                       const SwitchedModel& model,
                                       const RecoveryOptions& recovery) {
  CertificationReport report;
  report.lmi_tolerance = recovery.lmi_margin;
  for (int q = 1; q <= model.num_modes(); ++q) {
    report.spectral_abscissa.push_back(
        hurwitz_margin(closed_loop(model, q, gain)));
  }
  report.per_mode_stable = report.worst_abscissa() < 0.0;

  if (p.has_value()) {
    report.source = CertificateSource::kSupplied;
    report.p = linalg::symmetrize(*p);
  } else if (report.per_mode_stable) {
    LyapunovRecovery rec = recover_lyapunov(gain, model, recovery);
    if (rec.feasible) {
      report.source = CertificateSource::kRecovered;
      report.p = std::move(rec.p);
    } else {
      report.note = fmt::format(
          "Lyapunov recovery failed after {} iterations (best margin {:.6e})",
          rec.iterations, rec.worst_margin);
    }
  } else {
    report.note = "no certificate searched: a mode is not Hurwitz";
  }

  if (report.p.has_value()) {
    report.lmi_margins = lmi_margins(gain, *report.p, model);
    report.min_eig_p = linalg::min_symmetric_eigenvalue(*report.p);
    report.switched_certified = report.min_eig_p > 0.0 &&
                                report.worst_lmi_margin() < -report.lmi_tolerance;
  }
  return report;
}

std::string to_string(SparsityClass c) {
  switch (c) {
    case SparsityClass::kLocal:
      return "local";
    case SparsityClass::kDistributed:
      return "distributed";
    case SparsityClass::kDense:
      return "dense";
  }
  return "dense";
}

SparsityReport sparsity_report(const Eigen::MatrixXd& gain,
                               const PowerNetwork& network,
                               double relative_tol) {
  const int n = network.num_nodes();
  if (gain.rows() != n || gain.cols() != 2 * n) {
    throw ValidationError(fmt::format("gain must be {}x{}", n, 2 * n));
  }
  if (!(relative_tol > 0.0)) {
    throw ValidationError("sparsity_report: tolerance must be > 0");
  }
  SparsityReport report;
  report.threshold = relative_tol * gain.cwiseAbs().maxCoeff();
  report.total_off_diagonal = 2 * n * (n - 1);
  for (int block = 0; block < 2; ++block) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        if (std::abs(gain(i, block * n + j)) <= report.threshold) continue;
        ++report.significant_off_diagonal;
        if (!network.are_neighbors(i, j)) ++report.significant_non_edge;
      }
    }
  }
  if (report.significant_off_diagonal == 0) {
    report.classification = SparsityClass::kLocal;
  } else if (report.significant_non_edge == 0) {
    report.classification = SparsityClass::kDistributed;
  } else {
    report.classification = SparsityClass::kDense;
  }
  report.communication_saving =
      report.total_off_diagonal == 0
          ? 1.0
          : 1.0 - static_cast<double>(report.significant_off_diagonal) /
                      static_cast<double>(report.total_off_diagonal);
  return report;
}

}  // namespace swingsynth
