#include "swingsynth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "swingsynth/errors.hpp"
#include "swingsynth/linalg.hpp"

namespace swingsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 0.25;
constexpr int kMaxHalvings = 60;

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Row-major vec of an n x m matrix: index i * m + j.
Eigen::VectorXd vec_rows(const Eigen::MatrixXd& a) {
  Eigen::VectorXd v(a.size());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) v(i * a.cols() + j) = a(i, j);
  }
  return v;
}

Eigen::MatrixXd unvec_rows(const Eigen::VectorXd& v, Eigen::Index rows,
                           Eigen::Index cols) {
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = v(i * cols + j);
  }
  return a;
}

// -log det of a symmetric matrix, or +inf when it is not positive definite.
double neg_log_det(const Eigen::MatrixXd& s) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) return kInf;
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) return kInf;
  return -2.0 * diag.array().log().sum();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& s) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("barrier evaluated at an infeasible point");
  }
  return linalg::symmetrize(
      llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols())));
}

// Solves H x = rhs for symmetric H, shifting the diagonal if H is not
// numerically positive definite.
Eigen::VectorXd solve_spd_shifted(const Eigen::MatrixXd& h,
                                  const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  double shift = 0.0;
  const double scale = std::max(1e-300, h.diagonal().cwiseAbs().maxCoeff());
  while (llt.info() != Eigen::Success) {
    shift = shift == 0.0 ? 1e-12 * scale : shift * 10.0;
    if (shift > scale) throw NumericalError("Newton system is indefinite");
    llt.compute(h + shift * Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  }
  return llt.solve(rhs);
}

double l1_penalty(const Eigen::MatrixXd& gain, const BoolMatrix& mask) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < gain.rows(); ++i) {
    for (Eigen::Index j = 0; j < gain.cols(); ++j) {
      if (mask(i, j)) total += std::abs(gain(i, j));
    }
  }
  return total;
}

struct InnerResult {
  Eigen::MatrixXd gain;
  int iterations = 0;
  bool stalled = false;
};

// Damped Newton on the smooth K-subproblem.
InnerResult minimize_gain_newton(const detail::GainBarrier& barrier,
                                 Eigen::MatrixXd gain,
                                 const SynthesisConfig& config) {
  InnerResult result;
  double value = barrier.value(gain);
  Eigen::MatrixXd grad;
  Eigen::MatrixXd hess;
  for (int it = 0; it < config.max_newton_iterations; ++it) {
    barrier.derivatives(gain, &grad, &hess);
    const Eigen::VectorXd g = vec_rows(grad);
    const Eigen::VectorXd d = -solve_spd_shifted(hess, g);
    const double slope = g.dot(d);
    result.iterations = it + 1;
    if (-slope / 2.0 <= config.inner_tolerance * std::max(1.0, std::abs(value))) break;
    const Eigen::MatrixXd step = unvec_rows(d, gain.rows(), gain.cols());
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
      const Eigen::MatrixXd trial = gain + t * step;
      const double trial_value = barrier.value(trial);
      if (trial_value <= value + kArmijo * t * slope) {
        gain = trial;
        value = trial_value;
        moved = true;
        break;
      }
    }
    if (!moved) {
      result.stalled = true;
      break;
    }
  }
  result.gain = std::move(gain);
  return result;
}

// Proximal gradient with Barzilai-Borwein step estimates on
// smooth(K) + beta * ||K||_1 over the masked entries.
InnerResult minimize_gain_prox(const detail::GainBarrier& barrier,
                               Eigen::MatrixXd gain, double beta,
                               const BoolMatrix& mask,
                               const SynthesisConfig& config) {
  InnerResult result;
  double smooth = barrier.value(gain);
  Eigen::MatrixXd grad;
  barrier.derivatives(gain, &grad, nullptr);
  double step = 1.0 / std::max(1.0, 2.0 * barrier.dataset->state_gram.norm());

  for (int it = 0; it < config.max_prox_iterations; ++it) {
    result.iterations = it + 1;
    Eigen::MatrixXd candidate;
    double candidate_smooth = kInf;
    bool accepted = false;
    for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
      candidate = gain - step * grad;
      for (Eigen::Index i = 0; i < gain.rows(); ++i) {
        for (Eigen::Index j = 0; j < gain.cols(); ++j) {
          if (mask(i, j)) {
            candidate(i, j) = soft_threshold(candidate(i, j), step * beta);
          }
        }
      }
      const Eigen::MatrixXd diff = candidate - gain;
      candidate_smooth = barrier.value(candidate);
      if (candidate_smooth <= smooth + grad.cwiseProduct(diff).sum() +
                                  diff.squaredNorm() / (2.0 * step)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.stalled = true;
      break;
    }
    const Eigen::MatrixXd s = candidate - gain;
    const double mapping_norm = s.norm() / step;
    Eigen::MatrixXd next_grad;
    barrier.derivatives(candidate, &next_grad, nullptr);
    const Eigen::MatrixXd y = next_grad - grad;
    gain = std::move(candidate);
    smooth = candidate_smooth;
    grad = std::move(next_grad);
    if (mapping_norm <= std::sqrt(config.inner_tolerance) *
                            (1.0 + grad.norm())) {
      break;
    }
    const double sy = s.cwiseProduct(y).sum();
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-14, 1e14)
                    : step * 2.0;
  }
  result.gain = std::move(gain);
  return result;
}

// Symmetric coordinates (a <= b) for the P-subproblem.
struct SymmetricBasis {
  explicit SymmetricBasis(int dim) : dim(dim) {
    for (int b = 0; b < dim; ++b) {
      for (int a = 0; a <= b; ++a) pairs.emplace_back(a, b);
    }
  }
  int dim;
  std::vector<std::pair<int, int>> pairs;

  Eigen::VectorXd reduce_gradient(const Eigen::MatrixXd& g) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t s = 0; s < pairs.size(); ++s) {
      const auto [a, b] = pairs[s];
      out(static_cast<Eigen::Index>(s)) = a == b ? g(a, a) : g(a, b) + g(b, a);
    }
    return out;
  }

  Eigen::MatrixXd reduce_hessian(const Eigen::MatrixXd& h) const {
    const auto count = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd out(count, count);
    for (Eigen::Index s = 0; s < count; ++s) {
      const auto [a, b] = pairs[static_cast<std::size_t>(s)];
      for (Eigen::Index t = 0; t <= s; ++t) {
        const auto [c, d] = pairs[static_cast<std::size_t>(t)];
        double acc = 0.0;
        const int rows_s[2] = {a + b * dim, b + a * dim};
        const int cols_t[2] = {c + d * dim, d + c * dim};
        const int ns = a == b ? 1 : 2;
        const int nt = c == d ? 1 : 2;
        for (int i = 0; i < ns; ++i) {
          for (int j = 0; j < nt; ++j) acc += h(rows_s[i], cols_t[j]);
        }
        out(s, t) = out(t, s) = acc;
      }
    }
    return out;
  }

  Eigen::MatrixXd expand(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t s = 0; s < pairs.size(); ++s) {
      const auto [a, b] = pairs[s];
      m(a, b) = m(b, a) = v(static_cast<Eigen::Index>(s));
    }
    return m;
  }

  Eigen::VectorXd trace_row() const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t s = 0; s < pairs.size(); ++s) {
      if (pairs[s].first == pairs[s].second) c(static_cast<Eigen::Index>(s)) = 1.0;
    }
    return c;
  }
};

// Trace-preserving damped Newton toward the analytic center in P.
int recenter_lyapunov(const detail::LyapunovBarrier& barrier,
                      Eigen::MatrixXd* p, const SynthesisConfig& config) {
  const SymmetricBasis basis(static_cast<int>(p->rows()));
  const Eigen::VectorXd c = basis.trace_row();
  double value = barrier.value(*p);
  Eigen::MatrixXd grad_full;
  Eigen::MatrixXd hess_full;
  int it = 0;
  for (; it < config.max_newton_iterations; ++it) {
    barrier.derivatives(*p, &grad_full, &hess_full);
    const Eigen::VectorXd g = basis.reduce_gradient(grad_full);
    const Eigen::MatrixXd h = basis.reduce_hessian(hess_full);
    Eigen::MatrixXd rhs(g.size(), 2);
    rhs.col(0) = g;
    rhs.col(1) = c;
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    Eigen::MatrixXd sol;
    if (llt.info() == Eigen::Success) {
      sol = llt.solve(rhs);
    } else {
      sol.resize(g.size(), 2);
      sol.col(0) = solve_spd_shifted(h, g);
      sol.col(1) = solve_spd_shifted(h, c);
    }
    const double nu = -c.dot(sol.col(0)) / c.dot(sol.col(1));
    const Eigen::VectorXd d = -(sol.col(0) + nu * sol.col(1));
    const double slope = g.dot(d);
    if (-slope / 2.0 <= config.inner_tolerance * std::max(1.0, std::abs(value))) break;
    const Eigen::MatrixXd step = basis.expand(d);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < kMaxHalvings; ++k, t *= 0.5) {
      const Eigen::MatrixXd trial = *p + t * step;
      const double trial_value = barrier.value(trial);
      if (trial_value <= value + kArmijo * t * slope) {
        *p = trial;
        value = trial_value;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return it;
}

std::vector<Eigen::MatrixXd> closed_loops(const SwitchedModel& model,
                                          const Eigen::MatrixXd& gain) {
  std::vector<Eigen::MatrixXd> out;
  for (int q = 1; q <= model.num_modes(); ++q) {
    out.push_back(closed_loop(model, q, gain));
  }
  return out;
}

// Cholesky of H + shift I with the smallest tried shift that succeeds.
Eigen::LLT<Eigen::MatrixXd> factor_shifted(const Eigen::MatrixXd& h) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  double shift = 0.0;
  const double scale = std::max(1e-300, h.diagonal().cwiseAbs().maxCoeff());
  while (llt.info() != Eigen::Success) {
    shift = shift == 0.0 ? 1e-12 * scale : shift * 10.0;
    if (shift > scale) throw NumericalError("Newton system is indefinite");
    llt.compute(h + shift * Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  }
  return llt;
}

struct JointResult {
  Eigen::MatrixXd gain;
  Eigen::MatrixXd p;
  int iterations = 0;
};

// Damped (shift-modified) Newton on the joint barrier objective with
// tr(P) held fixed. The joint problem is not convex; the shift keeps every
// direction a descent direction.
JointResult minimize_joint(const detail::JointBarrier& barrier,
                           Eigen::MatrixXd gain, Eigen::MatrixXd p,
                           const SynthesisConfig& config) {
  const Eigen::Index nk = gain.size();
  const SymmetricBasis basis(static_cast<int>(p.rows()));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(nk + static_cast<Eigen::Index>(basis.pairs.size()));
  c.tail(static_cast<Eigen::Index>(basis.pairs.size())) = basis.trace_row();

  JointResult result;
  double value = barrier.value(gain, p);
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  for (int it = 0; it < config.max_newton_iterations; ++it) {
    barrier.derivatives(gain, p, &g, &h);
    const Eigen::LLT<Eigen::MatrixXd> llt = factor_shifted(h);
    const Eigen::VectorXd hg = llt.solve(g);
    const Eigen::VectorXd hc = llt.solve(c);
    const double nu = -c.dot(hg) / c.dot(hc);
    const Eigen::VectorXd d = -(hg + nu * hc);
    const double slope = g.dot(d);
    result.iterations = it + 1;
    if (-slope / 2.0 <= config.inner_tolerance * std::max(1.0, std::abs(value))) break;
    const Eigen::MatrixXd step_k = unvec_rows(d.head(nk), gain.rows(), gain.cols());
    const Eigen::MatrixXd step_p = basis.expand(d.tail(d.size() - nk));
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < kMaxHalvings; ++k, t *= 0.5) {
      const Eigen::MatrixXd trial_k = gain + t * step_k;
      const Eigen::MatrixXd trial_p = p + t * step_p;
      const double trial_value = barrier.value(trial_k, trial_p);
      if (trial_value <= value + kArmijo * t * slope) {
        gain = trial_k;
        p = trial_p;
        value = trial_value;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  result.gain = std::move(gain);
  result.p = std::move(p);
  return result;
}

void check_feasible_init(const SwitchedModel& model, const Eigen::MatrixXd& gain,
                         const Eigen::MatrixXd& p, const SynthesisConfig& config) {
  const int n = model.num_nodes();
  if (gain.rows() != n || gain.cols() != 2 * n) {
    throw ValidationError(fmt::format("init gain must be {}x{}", n, 2 * n));
  }
  if (p.rows() != 2 * n || p.cols() != 2 * n) {
    throw ValidationError(fmt::format("init P must be {0}x{0}", 2 * n));
  }
  const LyapunovCertificate cert = LyapunovCertificate::evaluate(gain, p, model);
  if (!(cert.worst_margin() < -config.lmi_margin)) {
    throw ValidationError(fmt::format(
        "infeasible initialization: worst LMI margin {:.6e} is not below -{:.1e}",
        cert.worst_margin(), config.lmi_margin));
  }
  if (!(cert.min_eig_p > config.p_floor)) {
    throw ValidationError(fmt::format(
        "infeasible initialization: min eig(P) = {:.6e} is not above {:.1e}",
        cert.min_eig_p, config.p_floor));
  }
}

SynthesisResult run_alternating(const TrajectoryDataset& dataset,
                                const SwitchedModel& model,
                                const Eigen::MatrixXd& init_gain,
                                const Eigen::MatrixXd& init_p, double beta,
                                const BoolMatrix& mask,
                                const SynthesisConfig& config) {
  config.validate();
  if (dataset.state_dim() != model.state_dim() ||
      dataset.input_dim() != model.num_nodes()) {
    throw ValidationError("dataset dimensions do not match the model");
  }
  check_feasible_init(model, init_gain, init_p, config);
  // The barriers enforce a slightly stricter margin than the certificate
  // test so that round-off at the barrier boundary cannot flip the verdict.
  const double init_margin =
      LyapunovCertificate::evaluate(init_gain, init_p, model).worst_margin();
  const double margin =
      std::min(2.0 * config.lmi_margin, 0.5 * (config.lmi_margin - init_margin));

  const auto objective = [&](const Eigen::MatrixXd& k) {
    double j = imitation_objective(dataset, k);
    if (beta > 0.0) j += beta * l1_penalty(k, mask);
    return j;
  };

  Eigen::MatrixXd gain = init_gain;
  Eigen::MatrixXd p = linalg::symmetrize(init_p);
  SynthesisResult result;
  double current = objective(gain);
  result.report.push_back(
      {0, 0.0, current,
       LyapunovCertificate::evaluate(gain, p, model).worst_margin(), 0, true});

  // Barrier weights are relative to J(0) = input energy of the data, so the
  // schedule does not depend on the units of u.
  const double scale = dataset.input_energy > 0.0 ? dataset.input_energy : 1.0;
  double mu = config.barrier.initial;
  for (int outer = 1; outer <= config.max_outer_iterations; ++outer) {
    const detail::GainBarrier barrier{&dataset, &model, p, mu * scale, margin};
    const InnerResult inner =
        beta > 0.0 ? minimize_gain_prox(barrier, gain, beta, mask, config)
                   : minimize_gain_newton(barrier, gain, config);
    double candidate = objective(inner.gain);
    bool accepted = candidate <= current;
    if (accepted) gain = inner.gain;
    int joint_iterations = 0;
    if (beta == 0.0) {
      const detail::JointBarrier joint{&dataset, &model, mu * scale, margin,
                                       config.p_floor};
      JointResult refined = minimize_joint(joint, gain, p, config);
      joint_iterations = refined.iterations;
      const double refined_value = objective(refined.gain);
      if (refined_value <= std::min(current, candidate)) {
        gain = std::move(refined.gain);
        p = std::move(refined.p);
        accepted = true;
      }
    }

    detail::LyapunovBarrier centering{closed_loops(model, gain), margin,
                                      config.p_floor};
    recenter_lyapunov(centering, &p, config);

    const double previous = current;
    current = objective(gain);
    result.report.push_back(
        {outer, mu, current,
         LyapunovCertificate::evaluate(gain, p, model).worst_margin(),
         inner.iterations + joint_iterations, accepted, inner.stalled});

    const bool at_floor = mu <= config.barrier.minimum;
    const double change =
        std::abs(previous - current) / std::max(1.0, std::abs(previous));
    if (at_floor && change < config.outer_tolerance) break;
    mu = std::max(mu * config.barrier.decay, config.barrier.minimum);
  }

  result.gain = {gain, beta > 0.0 ? GainOrigin::kSparse : GainOrigin::kOptimal};
  result.certificate = LyapunovCertificate::evaluate(gain, p, model);
  return result;
}

}  // namespace

std::string to_string(GainOrigin origin) {
  switch (origin) {
    case GainOrigin::kUnconstrained:
      return "unconstrained";
    case GainOrigin::kProp1:
      return "prop1";
    case GainOrigin::kLocal:
      return "local";
    case GainOrigin::kOptimal:
      return "optimal";
    case GainOrigin::kSparse:
      return "sparse";
  }
  return "unconstrained";
}

GainOrigin parse_gain_origin(const std::string& tag) {
  for (GainOrigin o : {GainOrigin::kUnconstrained, GainOrigin::kProp1,
                       GainOrigin::kLocal, GainOrigin::kOptimal,
                       GainOrigin::kSparse}) {
    if (to_string(o) == tag) return o;
  }
  throw ValidationError(fmt::format("unknown controller origin '{}'", tag));
}

LyapunovCertificate LyapunovCertificate::evaluate(const Eigen::MatrixXd& gain,
                                                  const Eigen::MatrixXd& p,
                                                  const SwitchedModel& model) {
  LyapunovCertificate cert;
  cert.p = linalg::symmetrize(p);
  cert.margins = lmi_margins(gain, cert.p, model);
  cert.min_eig_p = linalg::min_symmetric_eigenvalue(cert.p);
  return cert;
}

double LyapunovCertificate::worst_margin() const {
  if (margins.empty()) return kInf;
  return *std::max_element(margins.begin(), margins.end());
}

void SynthesisConfig::validate() const {
  if (!(barrier.initial > 0.0) || !(barrier.minimum > 0.0) ||
      barrier.minimum > barrier.initial) {
    throw ValidationError("synthesis: barrier weights must satisfy 0 < mu_min <= mu0");
  }
  if (!(barrier.decay > 0.0 && barrier.decay < 1.0)) {
    throw ValidationError("synthesis: barrier decay must lie in (0, 1)");
  }
  if (!(inner_tolerance > 0.0) || !(outer_tolerance > 0.0) ||
      !(lmi_margin > 0.0) || !(p_floor > 0.0)) {
    throw ValidationError("synthesis: tolerances and margins must be > 0");
  }
  if (max_outer_iterations < 1 || max_newton_iterations < 1 ||
      max_prox_iterations < 1) {
    throw ValidationError("synthesis: iteration caps must be >= 1");
  }
  if (!(ridge >= 0.0)) throw ValidationError("synthesis: ridge must be >= 0");
}

ControllerGain fit_unconstrained(const TrajectoryDataset& dataset, double ridge) {
  if (!(ridge >= 0.0)) throw ValidationError("fit: ridge must be >= 0");
  const Eigen::Index nx = dataset.state_gram.rows();
  if (nx == 0) throw ValidationError("fit: empty dataset");
  const Eigen::MatrixXd regularized =
      dataset.state_gram + ridge * Eigen::MatrixXd::Identity(nx, nx);
  Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  const bool singular =
      llt.info() != Eigen::Success ||
      !(linalg::symmetric_condition_number(regularized) < 1e12);
  if (singular) {
    if (ridge == 0.0) {
      throw ValidationError(
          "fit: state Gram matrix is numerically singular; use a nonzero ridge");
    }
    throw NumericalError("fit: regularized Gram matrix is ill-conditioned");
  }
  // K (G + rI) = C  <=>  (G + rI) K' = C'.
  Eigen::MatrixXd k = llt.solve(dataset.cross_gram.transpose()).transpose();
  return {std::move(k), GainOrigin::kUnconstrained};
}

ControllerGain prop1_controller(const PowerNetwork& network) {
  const int n = network.num_nodes();
  Eigen::MatrixXd k(n, 2 * n);
  k.leftCols(n) = build_laplacian(network) - Eigen::MatrixXd::Identity(n, n);
  k.rightCols(n) = network.damping().asDiagonal().toDenseMatrix() -
                   Eigen::MatrixXd::Identity(n, n);
  return {std::move(k), GainOrigin::kProp1};
}

LocalConstruction local_construction(const PowerNetwork& network,
                                     const LocalConstructionOptions& options) {
  if (!(options.delta > 0.0)) {
    throw ValidationError("local_construction: delta must be > 0");
  }
  if (!(options.xi > 1.0)) {
    throw ValidationError("local_construction: xi must be > 1");
  }
  const int n = network.num_nodes();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd lap = build_laplacian(network);
  const Eigen::MatrixXd damp = network.damping().asDiagonal().toDenseMatrix();
  const SwitchedModel model(network, 1.0);

  LocalConstructionTrace trace;
  trace.x1 = eye;
  trace.x2 = -eye;
  trace.x3 = options.xi * eye;
  trace.y1 = Eigen::MatrixXd::Zero(n, n);
  trace.max_inertia = network.max_inertia();

  // Bounds that do not depend on delta.
  double bound = 0.0;
  for (int q = 1; q <= network.num_modes(); ++q) {
    const Eigen::VectorXd inv_m = network.inertia(q).cwiseInverse();
    Eigen::MatrixXd z = inv_m.asDiagonal() * (-lap * trace.x1 - damp * trace.x2.transpose() + trace.y1);
    Eigen::MatrixXd w = inv_m.asDiagonal() * (lap * trace.x2 + damp * trace.x3);
    const Eigen::MatrixXd coupling = trace.x3 + z.transpose();
    bound = std::min(bound, linalg::min_symmetric_eigenvalue(w + w.transpose()));
    bound = std::min(bound, linalg::min_symmetric_eigenvalue(
                                -0.5 * coupling.transpose() * coupling));
    trace.z.push_back(std::move(z));
    trace.w.push_back(std::move(w));
  }

  const Eigen::MatrixXd x3_shift_inv = (trace.x3 - eye).inverse();
  Eigen::MatrixXd x(2 * n, 2 * n);
  x << trace.x1, trace.x2, trace.x2.transpose(), trace.x3;
  const Eigen::MatrixXd p = linalg::symmetrize(x.inverse());

  double delta = options.delta;
  LyapunovCertificate last;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    trace.delta = delta;
    trace.retries = attempt;
    trace.nu = bound - delta;
    trace.n = trace.nu * eye;
    trace.y2 = (trace.nu * trace.max_inertia.array() - delta)
                   .matrix()
                   .asDiagonal()
                   .toDenseMatrix();
    const Eigen::MatrixXd block = trace.y2 * x3_shift_inv;
    Eigen::MatrixXd k(n, 2 * n);
    k << block, block;
    last = LyapunovCertificate::evaluate(k, p, model);
    if (last.certified(options.lmi_margin)) {
      return {{std::move(k), GainOrigin::kLocal}, std::move(last), std::move(trace)};
    }
    delta *= 2.0;
  }
  throw NumericalError(fmt::format(
      "local_construction: no certified pair after {} retries (worst LMI "
      "margin {:.6e}, min eig(P) {:.6e})",
      options.max_retries, last.worst_margin(), last.min_eig_p));
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> sparsity_penalty_mask(
    const PowerNetwork& network) {
  const int n = network.num_nodes();
  BoolMatrix mask = BoolMatrix::Constant(n, 2 * n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && !network.are_neighbors(i, j)) {
        mask(i, j) = true;
        mask(i, n + j) = true;
      }
    }
  }
  return mask;
}

SynthesisResult synthesize_stable(const TrajectoryDataset& dataset,
                                  const SwitchedModel& model,
                                  const Eigen::MatrixXd& init_gain,
                                  const Eigen::MatrixXd& init_p,
                                  const SynthesisConfig& config) {
  const BoolMatrix none = BoolMatrix::Constant(init_gain.rows(), init_gain.cols(), false);
  return run_alternating(dataset, model, init_gain, init_p, 0.0, none, config);
}

SynthesisResult synthesize_sparse(const TrajectoryDataset& dataset,
                                  const SwitchedModel& model,
                                  const PowerNetwork& network,
                                  const Eigen::MatrixXd& init_gain,
                                  const Eigen::MatrixXd& init_p, double beta,
                                  const SynthesisConfig& config) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ValidationError(fmt::format("sparse synthesis: beta = {} must be >= 0", beta));
  }
  if (beta == 0.0) {
    return synthesize_stable(dataset, model, init_gain, init_p, config);
  }
  return run_alternating(dataset, model, init_gain, init_p, beta,
                         sparsity_penalty_mask(network), config);
}

namespace detail {

double GainBarrier::value(const Eigen::MatrixXd& gain) const {
  double total = imitation_objective(*dataset, gain);
  const Eigen::Index d = p.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (int q = 1; q <= model->num_modes(); ++q) {
    const double barrier =
        neg_log_det(-lyapunov_lmi(closed_loop(*model, q, gain), p) - lmi_margin * eye);
    if (!std::isfinite(barrier)) return kInf;
    total += weight * barrier;
  }
  return total;
}

void GainBarrier::derivatives(const Eigen::MatrixXd& gain,
                              Eigen::MatrixXd* gradient,
                              Eigen::MatrixXd* hessian) const {
  const Eigen::Index n = gain.rows();
  const Eigen::Index nx = gain.cols();
  const Eigen::MatrixXd& g = dataset->state_gram;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);

  *gradient = 2.0 * (gain * g - dataset->cross_gram);
  if (hessian != nullptr) {
    hessian->setZero(n * nx, n * nx);
    for (Eigen::Index i = 0; i < n; ++i) {
      hessian->block(i * nx, i * nx, nx, nx) = 2.0 * g;
    }
  }
  for (int q = 1; q <= model->num_modes(); ++q) {
    const ModeMatrices& mode = model->continuous(q);
    const Eigen::MatrixXd s =
        -lyapunov_lmi(mode.a + mode.b * gain, p) - lmi_margin * eye;
    const Eigen::MatrixXd w = spd_inverse(s);
    const Eigen::MatrixXd f = p * mode.b;           // nx x n
    const Eigen::MatrixXd wf = w * f;               // nx x n
    *gradient += weight * 2.0 * wf.transpose();
    if (hessian == nullptr) continue;
    const Eigen::MatrixXd fwf = f.transpose() * wf;  // n x n
    // H[(i,j),(k,l)] = 2 (WF[l,i] WF[j,k] + F'WF[i,k] W[j,l]).
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) {
        auto block = hessian->block(i * nx, k * nx, nx, nx);
        block.noalias() += (2.0 * weight) *
                           (wf.col(k) * wf.col(i).transpose() + fwf(i, k) * w);
      }
    }
  }
}

double LyapunovBarrier::value(const Eigen::MatrixXd& p) const {
  const Eigen::Index d = p.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  double total = neg_log_det(p - p_floor * eye);
  if (!std::isfinite(total)) return kInf;
  for (const Eigen::MatrixXd& a : closed_loops) {
    const double barrier = neg_log_det(-lyapunov_lmi(a, p) - lmi_margin * eye);
    if (!std::isfinite(barrier)) return kInf;
    total += barrier;
  }
  return total;
}

void LyapunovBarrier::derivatives(const Eigen::MatrixXd& p,
                                  Eigen::MatrixXd* gradient,
                                  Eigen::MatrixXd* hessian) const {
  const Eigen::Index d = p.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd v = spd_inverse(p - p_floor * eye);
  *gradient = -v;
  if (hessian != nullptr) *hessian = Eigen::kroneckerProduct(v, v);
  for (const Eigen::MatrixXd& a : closed_loops) {
    const Eigen::MatrixXd w = spd_inverse(-lyapunov_lmi(a, p) - lmi_margin * eye);
    const Eigen::MatrixXd aw = a * w;
    const Eigen::MatrixXd wat = aw.transpose();
    *gradient += aw + wat;
    if (hessian == nullptr) continue;
    const Eigen::MatrixXd awat = a * wat;
    *hessian += Eigen::kroneckerProduct(w, awat);
    *hessian += Eigen::kroneckerProduct(wat, aw);
    *hessian += Eigen::kroneckerProduct(aw, wat);
    *hessian += Eigen::kroneckerProduct(awat, w);
  }
}

double JointBarrier::value(const Eigen::MatrixXd& gain,
                           const Eigen::MatrixXd& p) const {
  const Eigen::Index d = p.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  double total = neg_log_det(p - p_floor * eye);
  if (!std::isfinite(total)) return kInf;
  for (int q = 1; q <= model->num_modes(); ++q) {
    const double barrier =
        neg_log_det(-lyapunov_lmi(closed_loop(*model, q, gain), p) - lmi_margin * eye);
    if (!std::isfinite(barrier)) return kInf;
    total += barrier;
  }
  return imitation_objective(*dataset, gain) + weight * total;
}

void JointBarrier::derivatives(const Eigen::MatrixXd& gain,
                               const Eigen::MatrixXd& p,
                               Eigen::VectorXd* gradient,
                               Eigen::MatrixXd* hessian) const {
  const Eigen::Index n = gain.rows();
  const Eigen::Index nx = gain.cols();
  const Eigen::Index nk = n * nx;
  const SymmetricBasis basis(static_cast<int>(nx));
  const auto np = static_cast<Eigen::Index>(basis.pairs.size());

  // K block, including the imitation term.
  const GainBarrier gain_part{dataset, model, p, weight, lmi_margin};
  Eigen::MatrixXd grad_k;
  Eigen::MatrixXd hess_k;
  gain_part.derivatives(gain, &grad_k, hessian != nullptr ? &hess_k : nullptr);

  // P block.
  const LyapunovBarrier p_part{closed_loops(*model, gain), lmi_margin, p_floor};
  Eigen::MatrixXd grad_p;
  Eigen::MatrixXd hess_p;
  p_part.derivatives(p, &grad_p, hessian != nullptr ? &hess_p : nullptr);

  gradient->resize(nk + np);
  gradient->head(nk) = vec_rows(grad_k);
  gradient->tail(np) = weight * basis.reduce_gradient(grad_p);
  if (hessian == nullptr) return;

  hessian->setZero(nk + np, nk + np);
  hessian->topLeftCorner(nk, nk) = hess_k;
  hessian->bottomRightCorner(np, np) = weight * basis.reduce_hessian(hess_p);

  // Mixed block: tr(W dS_K W dS_P) - tr(W d2S), with
  //   dS_K = -(e_j f_i' + f_i e_j'),  dS_P = -(A'E + EA),
  //   d2S  = -(e_j b_i' E + E b_i e_j').
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(nk, np);
  for (int q = 1; q <= model->num_modes(); ++q) {
    const ModeMatrices& mode = model->continuous(q);
    const Eigen::MatrixXd a = mode.a + mode.b * gain;
    const Eigen::MatrixXd w = spd_inverse(-lyapunov_lmi(a, p) - lmi_margin * eye);
    const Eigen::MatrixXd v = w * p * mode.b;  // W f_i as columns
    const Eigen::MatrixXd aw = a * w;
    const Eigen::MatrixXd av = a * v;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < nx; ++j) {
        // N = A M with M = w_j v_i' + v_i w_j'.
        const auto row = i * nx + j;
        for (Eigen::Index s = 0; s < np; ++s) {
          const auto [c, d] = basis.pairs[static_cast<std::size_t>(s)];
          const double n_cd = aw(c, j) * v(d, i) + av(c, i) * w(d, j);
          double value;
          if (c == d) {
            value = 2.0 * n_cd + 2.0 * w(j, c) * mode.b(c, i);
          } else {
            const double n_dc = aw(d, j) * v(c, i) + av(d, i) * w(c, j);
            value = 2.0 * (n_cd + n_dc) +
                    2.0 * (w(j, c) * mode.b(d, i) + w(j, d) * mode.b(c, i));
          }
          cross(row, s) += value;
        }
      }
    }
  }
  hessian->topRightCorner(nk, np) = weight * cross;
  hessian->bottomLeftCorner(np, nk) = weight * cross.transpose();
}

}  // namespace detail

}  // namespace swingsynth
