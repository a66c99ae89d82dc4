#include "swingsynth/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "swingsynth/errors.hpp"
#include "swingsynth/scenarios.hpp"
#include "swingsynth/sim.hpp"

namespace swingsynth::cli {

namespace {

using nlohmann::json;

io::NetworkFile load_checked_network(const ExperimentConfig& config) {
  if (!std::filesystem::exists(config.network_path)) {
    throw ValidationError(fmt::format("config field 'network': file '{}' does not exist",
                                      config.network_path.string()));
  }
  return io::load_network(config.network_path);
}

json merged(json base, const json& extra) {
  for (const auto& [key, value] : extra.items()) base[key] = value;
  return base;
}

void write_json(const Workspace& ws, const std::string& file, const json& j) {
  std::filesystem::create_directories(ws.config().output_dir);
  io::write_json_file(ws.path(file), j);
}

void write_text(const Workspace& ws, const std::string& file, const std::string& text) {
  std::filesystem::create_directories(ws.config().output_dir);
  io::write_text_file(ws.path(file), text);
}

std::string sci(double v, int digits = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.{}e}", v, digits);
}

json certification_summary(const CertificationReport& report) {
  json j = {{"verdict", report.switched_certified ? "certified" : "not certified"},
            {"per_mode_stable", report.per_mode_stable},
            {"worst_spectral_abscissa", report.worst_abscissa()}};
  if (!report.lmi_margins.empty()) j["worst_lmi_margin"] = report.worst_lmi_margin();
  if (!report.note.empty()) j["note"] = report.note;
  return j;
}

}  // namespace

RecoveryOptions recovery_options(const ExperimentConfig& config) {
  RecoveryOptions options;
  options.p_floor = config.synthesis.p_floor;
  options.lmi_margin = config.synthesis.lmi_margin;
  return options;
}

Workspace::Workspace(ExperimentConfig config, bool force)
    : config_(std::move(config)),
      network_(load_checked_network(config_)),
      model_(network_.network, network_.step_h),
      hash_(experiment_hash(config_)),
      force_(force) {
  config_.weights(network_.network.num_nodes()).validate(network_.network.num_nodes());
}

std::filesystem::path Workspace::path(const std::string& file) const {
  return config_.output_dir / file;
}

json Workspace::stamp() const {
  return {{"config_hash", hash_}, {"config", experiment_echo(config_)}};
}

void Workspace::check_stamp(const json& artifact, const std::filesystem::path& file) const {
  if (force_) return;
  if (!artifact.contains("config_hash") || !artifact.at("config_hash").is_string()) {
    throw ValidationError(fmt::format(
        "'{}' carries no config_hash; rerun the producing command or pass --force",
        file.string()));
  }
  const std::string found = artifact.at("config_hash").get<std::string>();
  if (found != hash_) {
    throw ValidationError(fmt::format(
        "'{}' has config_hash {} but the current config hashes to {}; "
        "rerun the producing command or pass --force",
        file.string(), found, hash_));
  }
}

json Workspace::read_artifact(const std::string& file, const std::string& producer) const {
  const std::filesystem::path p = path(file);
  if (!std::filesystem::exists(p)) {
    throw ValidationError(fmt::format("missing artifact '{}'; run '{}' first", p.string(),
                                      producer));
  }
  json j = io::read_json_file(p);
  check_stamp(j, p);
  return j;
}

std::string sparse_name(double beta) { return fmt::format("sparse_beta{}", beta); }

std::string controller_name(const std::filesystem::path& file) {
  std::string stem = file.stem().string();
  const std::string prefix = "controller_";
  if (stem.rfind(prefix, 0) == 0 && stem.size() > prefix.size()) {
    stem = stem.substr(prefix.size());
  }
  return stem;
}

GenDataOutput run_gen_data(const Workspace& ws) {
  const ExperimentConfig& c = ws.config();
  const PowerNetwork& net = ws.network();
  GenDataOutput out;
  out.scenarios = build_scenarios(c.scenarios, net.num_nodes(), net.num_modes(), c.seed,
                                  c.workers);
  out.dataset = generate_dataset(ws.model(), out.scenarios, c.weights(net.num_nodes()),
                                 c.workers);

  write_json(ws, "scenarios.json", merged(ws.stamp(), io::scenarios_to_json(out.scenarios)));
  std::ostringstream csv;
  io::write_trajectories_csv(csv, out.dataset.trajectories);
  write_text(ws, "trajectories.csv", csv.str());
  write_json(ws, "dataset.json", merged(ws.stamp(), io::dataset_to_json(out.dataset)));
  return out;
}

TrajectoryDataset load_dataset(const Workspace& ws) {
  TrajectoryDataset d = io::dataset_from_json(ws.read_artifact("dataset.json", "gen-data"));
  if (d.state_dim() != ws.model().state_dim()) {
    throw ValidationError("dataset.json does not match the network dimension");
  }
  return d;
}

io::ControllerFile run_fit(const Workspace& ws, const TrajectoryDataset& dataset) {
  io::ControllerFile file;
  file.gain = fit_unconstrained(dataset, ws.config().synthesis.ridge);
  file.metadata = merged(ws.stamp(),
                         {{"imitation_objective", imitation_objective(dataset, file.gain.k)}});
  write_json(ws, "controller_unconstrained.json", io::controller_to_json(file, std::nullopt));
  return file;
}

io::ControllerFile run_construct(const Workspace& ws) {
  const LocalConstruction local = local_construction(ws.network(), ws.config().local);
  io::ControllerFile file;
  file.gain = local.gain;
  file.p = local.certificate.p;
  file.metadata = merged(ws.stamp(), {{"delta", local.trace.delta},
                                      {"nu", local.trace.nu},
                                      {"retries", local.trace.retries}});
  write_json(ws, "controller_local.json",
             io::controller_to_json(file, local.certificate.margins));
  return file;
}

SynthOutput run_synth(const Workspace& ws, const TrajectoryDataset& dataset,
                      const io::ControllerFile& init, std::optional<double> beta) {
  const ExperimentConfig& c = ws.config();
  if (init.gain.num_nodes() != ws.network().num_nodes()) {
    throw ValidationError("init controller does not match the network dimension");
  }
  Eigen::MatrixXd p0;
  if (init.p.has_value()) {
    p0 = *init.p;
  } else {
    const LyapunovRecovery rec = recover_lyapunov(init.gain.k, ws.model(), recovery_options(c));
    if (!rec.feasible) {
      throw ValidationError(fmt::format(
          "init controller ({}) has no common Lyapunov certificate (worst margin {})",
          to_string(init.gain.origin), rec.worst_margin));
    }
    p0 = rec.p;
  }

  SynthOutput out;
  if (beta.has_value()) {
    out.result = synthesize_sparse(dataset, ws.model(), ws.network(), init.gain.k, p0, *beta,
                                   c.synthesis);
    out.name = sparse_name(*beta);
  } else {
    out.result = synthesize_stable(dataset, ws.model(), init.gain.k, p0, c.synthesis);
    out.name = "optimal";
  }
  out.controller.gain = out.result.gain;
  out.controller.p = out.result.certificate.p;
  json extra = {{"init_origin", to_string(init.gain.origin)},
                {"imitation_objective", imitation_objective(dataset, out.result.gain.k)},
                {"outer_iterations", static_cast<int>(out.result.report.size()) - 1}};
  if (beta.has_value()) extra["beta"] = *beta;
  out.controller.metadata = merged(ws.stamp(), extra);
  write_json(ws, "controller_" + out.name + ".json",
             io::controller_to_json(out.controller, out.result.certificate.margins));
  std::ostringstream csv;
  io::write_iteration_report_csv(csv, out.result.report);
  write_text(ws, "synth_report_" + out.name + ".csv", csv.str());
  return out;
}

io::ControllerFile load_controller(const Workspace& ws, const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) {
    throw ValidationError(fmt::format("controller file '{}' does not exist", file.string()));
  }
  const json j = io::read_json_file(file);
  ws.check_stamp(j, file);
  io::ControllerFile c = io::controller_from_json(j);
  if (c.gain.num_nodes() != ws.network().num_nodes()) {
    throw ValidationError(fmt::format("controller '{}' has {} rows but the network has {} nodes",
                                      file.string(), c.gain.num_nodes(),
                                      ws.network().num_nodes()));
  }
  return c;
}

std::optional<Eigen::MatrixXd> certified_p(const CertificationReport& report) {
  if (report.switched_certified && report.p.has_value()) return report.p;
  return std::nullopt;
}

void print_certification(std::ostream& out, const std::string& name,
                         const CertificationReport& report) {
  out << fmt::format("controller {}\n", name);
  out << fmt::format("  {:>4}  {:>14}  {:>14}\n", "mode", "abscissa", "lmi margin");
  for (std::size_t q = 0; q < report.spectral_abscissa.size(); ++q) {
    const std::string lmi =
        q < report.lmi_margins.size() ? sci(report.lmi_margins[q]) : std::string("-");
    out << fmt::format("  {:>4}  {:>14}  {:>14}\n", q + 1, sci(report.spectral_abscissa[q]),
                       lmi);
  }
  out << fmt::format("  verdict: {}", report.switched_certified ? "certified" : "not certified");
  if (!report.note.empty()) out << " (" << report.note << ")";
  out << '\n';
}

json switched_to_json(const SwitchedSummary& s) {
  json j = {{"sequences", s.sequences},
            {"diverged", s.diverged},
            {"grew_at_check", s.grew_at_check},
            {"worst_ratio_check", s.worst_ratio_check},
            {"worst_ratio_final", s.worst_ratio_final}};
  if (s.lyapunov_checked) j["lyapunov_violations"] = s.lyapunov_violations;
  return j;
}

json fixed_modes_to_json(const std::vector<FixedModeResult>& results) {
  json list = json::array();
  for (const FixedModeResult& r : results) {
    list.push_back({{"mode", r.mode},
                    {"total_input", r.metrics.total_input},
                    {"total_freq_dev", r.metrics.total_freq_dev},
                    {"duration", r.metrics.duration},
                    {"diverged", r.diverged}});
  }
  return list;
}

SimulationOutput run_simulate(const Workspace& ws, const std::string& name,
                              const Eigen::MatrixXd& gain,
                              const std::optional<Eigen::MatrixXd>& p) {
  const ExperimentConfig& c = ws.config();
  const EvaluationSettings& e = c.evaluation;
  const SwitchedModel& model = ws.model();
  const int steps = steps_for(e.switched_duration, model.step_h());
  const int check = steps_for(e.growth_check_time, model.step_h());
  const StateVector x0 = frequency_step_state(model.num_nodes(), e.switched_hz);
  const auto sequences = evaluation_sequences(e, model.num_modes(), steps, c.seed);

  SimulationOutput out;
  out.switched = evaluate_switched(model, gain, p, sequences, x0, steps, check, c.workers);
  out.fixed = evaluate_fixed_modes(model, gain, e);

  const ClosedLoopPropagator propagator(model, gain);
  const Eigen::MatrixXd* p_ptr = p.has_value() ? &*p : nullptr;
  const int traces = std::min<int>(e.csv_sequences, static_cast<int>(sequences.size()));
  for (int k = 0; k < traces; ++k) {
    std::ostringstream csv;
    io::write_closed_loop_csv(
        csv, simulate_closed_loop(propagator, sequences[k], x0, steps), p_ptr);
    write_text(ws, fmt::format("sim_{}_seq{}.csv", name, k), csv.str());
  }
  const int fixed_steps = steps_for(e.fixed_duration, model.step_h());
  const StateVector fixed_x0 = frequency_step_state(model.num_nodes(), e.fixed_hz);
  for (int q : e.fixed_modes) {
    std::ostringstream csv;
    io::write_closed_loop_csv(
        csv,
        simulate_closed_loop(propagator, constant_sequence(q, fixed_steps), fixed_x0,
                             fixed_steps),
        p_ptr);
    write_text(ws, fmt::format("sim_{}_mode{}.csv", name, q), csv.str());
  }

  write_json(ws, fmt::format("simulation_{}.json", name),
             merged(ws.stamp(), {{"controller", name},
                                 {"switched", switched_to_json(out.switched)},
                                 {"fixed_modes", fixed_modes_to_json(out.fixed)}}));
  return out;
}

std::vector<FixedModeResult> run_metrics(const Workspace& ws, const std::string& name,
                                         const Eigen::MatrixXd& gain) {
  const EvaluationSettings& e = ws.config().evaluation;
  std::vector<FixedModeResult> results = evaluate_fixed_modes(ws.model(), gain, e);
  write_json(ws, fmt::format("metrics_{}.json", name),
             merged(ws.stamp(), {{"controller", name},
                                 {"initial_deviation_hz", e.fixed_hz},
                                 {"initial_deviation_rad_per_s", hz_to_rad_per_s(e.fixed_hz)},
                                 {"duration", e.fixed_duration},
                                 {"modes", fixed_modes_to_json(results)}}));
  return results;
}

namespace {

struct Evaluated {
  std::string label;
  std::string name;
  Eigen::MatrixXd gain;
  double objective = 0.0;
  CertificationReport certification;
  SparsityReport sparsity;
  SimulationOutput simulation;
};

CertificationReport certify_and_write(const Workspace& ws, const std::string& name,
                                      const io::ControllerFile& file) {
  const CertificationReport report =
      certify_controller(file.gain.k, file.p, ws.model(), recovery_options(ws.config()));
  json j = merged(ws.stamp(), io::certification_to_json(report));
  j["controller"] = name;
  j["sparsity"] = io::sparsity_to_json(sparsity_report(file.gain.k, ws.network()));
  write_json(ws, fmt::format("certification_{}.json", name), j);
  return report;
}

std::string summary_text(const json& s, const std::vector<int>& modes) {
  std::ostringstream out;
  out << fmt::format("swingsynth reproduce: seed {}, config hash {}\n\n",
                     s.at("seed").get<std::uint64_t>(), s.at("config_hash").get<std::string>());
  const json& ev = s.at("evaluation");
  out << fmt::format(
      "Switched runs: {} sequences, {} Hz initial deviation, {} s, growth checked at {} s\n\n",
      ev.at("sequences").get<int>(), ev.at("switched_hz").get<double>(),
      ev.at("switched_duration").get<double>(), ev.at("growth_check_time").get<double>());
  out << fmt::format("{:<14} {:>11} {:>13} {:>11} {:>11} {:>15} {:>9} {:>8} {:>11} {:>11} {:>9}\n",
                     "controller", "J(K)", "verdict", "abscissa", "lmi margin", "sparsity",
                     "diverged", "grew", "|x(chk)|", "|x(end)|", "V fails");
  for (const json& c : s.at("controllers")) {
    const json& cert = c.at("certification");
    const json& sw = c.at("switched");
    const std::string lmi =
        cert.contains("worst_lmi_margin") ? sci(cert.at("worst_lmi_margin").get<double>(), 2) : "-";
    const std::string vfails = sw.contains("lyapunov_violations")
                                   ? std::to_string(sw.at("lyapunov_violations").get<int>())
                                   : "-";
    const auto ratio = [](const json& v) { return v.is_null() ? std::string("inf") : sci(v.get<double>(), 2); };
    out << fmt::format("{:<14} {:>11} {:>13} {:>11} {:>11} {:>15} {:>9} {:>8} {:>11} {:>11} {:>9}\n",
                       c.at("label").get<std::string>(), sci(c.at("imitation_objective").get<double>()),
                       cert.at("verdict").get<std::string>(),
                       sci(cert.at("worst_spectral_abscissa").get<double>(), 2), lmi,
                       fmt::format("{}({})", c.at("sparsity").at("classification").get<std::string>(),
                                   c.at("sparsity").at("significant_non_edge").get<int>()),
                       fmt::format("{}/{}", sw.at("diverged").get<int>(), sw.at("sequences").get<int>()),
                       fmt::format("{}/{}", sw.at("grew_at_check").get<int>(), sw.at("sequences").get<int>()),
                       ratio(sw.at("worst_ratio_check")), ratio(sw.at("worst_ratio_final")), vfails);
  }

  out << fmt::format("\nFixed-mode metrics ({} Hz, {} s): total input / total frequency deviation [rad]\n",
                     ev.at("fixed_hz").get<double>(), ev.at("fixed_duration").get<double>());
  out << fmt::format("{:<14}", "controller");
  for (int q : modes) out << fmt::format(" {:>24}", fmt::format("mode {}", q));
  out << '\n';
  for (const json& c : s.at("controllers")) {
    out << fmt::format("{:<14}", c.at("label").get<std::string>());
    for (const json& m : c.at("fixed_modes")) {
      out << fmt::format(" {:>24}", fmt::format("{:.5g} / {:.5g}", m.at("total_input").get<double>(),
                                                m.at("total_freq_dev").get<double>()));
    }
    out << '\n';
  }

  out << fmt::format("\nSparsity sweep (init: {})\n", s.at("sparse_init").get<std::string>());
  out << fmt::format("{:>8} {:>11} {:>9} {:>12} {:>13} {:>7}\n", "beta", "J(K)", "non-edge",
                     "class", "verdict", "outer");
  for (const json& r : s.at("sparse_sweep")) {
    out << fmt::format("{:>8} {:>11} {:>9} {:>12} {:>13} {:>7}\n", r.at("beta").get<double>(),
                       sci(r.at("imitation_objective").get<double>()),
                       r.at("significant_non_edge").get<int>(),
                       r.at("classification").get<std::string>(), r.at("verdict").get<std::string>(),
                       r.at("outer_iterations").get<int>());
  }
  return out.str();
}

}  // namespace

json run_reproduce(const Workspace& ws, std::ostream& out, std::ostream& log) {
  const ExperimentConfig& c = ws.config();
  log << "[1/7] generating scenarios and LQR trajectories\n";
  const GenDataOutput data = run_gen_data(ws);
  const TrajectoryDataset& dataset = data.dataset;

  log << "[2/7] local construction\n";
  const io::ControllerFile local = run_construct(ws);

  log << "[3/7] stable synthesis from the local controller\n";
  const SynthOutput optimal = run_synth(ws, dataset, local, std::nullopt);

  std::vector<double> betas = c.sparse.betas;
  if (std::find(betas.begin(), betas.end(), c.sparse.distributed_beta) == betas.end()) {
    betas.push_back(c.sparse.distributed_beta);
  }
  const io::ControllerFile& sparse_init =
      c.sparse.init == GainOrigin::kLocal ? local : optimal.controller;
  std::vector<SynthOutput> sweep;
  for (double beta : betas) {
    log << fmt::format("[4/7] sparse synthesis, beta = {}\n", beta);
    sweep.push_back(run_synth(ws, dataset, sparse_init, beta));
  }

  log << "[5/7] unconstrained fit\n";
  const io::ControllerFile unconstrained = run_fit(ws, dataset);

  log << "[6/7] certification\n";
  const CertificationReport local_cert = certify_and_write(ws, "local", local);
  const CertificationReport optimal_cert = certify_and_write(ws, "optimal", optimal.controller);
  std::vector<CertificationReport> sweep_cert;
  for (const SynthOutput& s : sweep) {
    sweep_cert.push_back(certify_and_write(ws, s.name, s.controller));
  }
  const CertificationReport unc_cert = certify_and_write(ws, "unconstrained", unconstrained);

  std::size_t distributed_idx = 0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (betas[i] == c.sparse.distributed_beta) distributed_idx = i;
  }

  log << "[7/7] simulation and metrics\n";
  std::vector<Evaluated> rows;
  const auto add = [&](std::string label, std::string name, const io::ControllerFile& file,
                       const CertificationReport& cert) {
    Evaluated e;
    e.label = std::move(label);
    e.name = std::move(name);
    e.gain = file.gain.k;
    e.objective = imitation_objective(dataset, file.gain.k);
    e.certification = cert;
    e.sparsity = sparsity_report(file.gain.k, ws.network());
    e.simulation = run_simulate(ws, e.name, e.gain, certified_p(cert));
    run_metrics(ws, e.name, e.gain);
    rows.push_back(std::move(e));
  };
  add("Optimal", "optimal", optimal.controller, optimal_cert);
  add("Distributed", sweep[distributed_idx].name, sweep[distributed_idx].controller,
      sweep_cert[distributed_idx]);
  add("Unconstrained", "unconstrained", unconstrained, unc_cert);
  add("Local", "local", local, local_cert);

  json summary = ws.stamp();
  summary["seed"] = c.seed;
  summary["evaluation"] = {{"sequences", c.evaluation.sequences},
                           {"initial_mode", c.evaluation.initial_mode},
                           {"jump_law", to_string(c.evaluation.jump_law)},
                           {"switched_hz", c.evaluation.switched_hz},
                           {"switched_duration", c.evaluation.switched_duration},
                           {"growth_check_time", c.evaluation.growth_check_time},
                           {"fixed_hz", c.evaluation.fixed_hz},
                           {"fixed_duration", c.evaluation.fixed_duration}};
  json controllers = json::array();
  for (const Evaluated& e : rows) {
    controllers.push_back({{"label", e.label},
                           {"file", "controller_" + e.name + ".json"},
                           {"imitation_objective", e.objective},
                           {"certification", certification_summary(e.certification)},
                           {"sparsity", io::sparsity_to_json(e.sparsity)},
                           {"switched", switched_to_json(e.simulation.switched)},
                           {"fixed_modes", fixed_modes_to_json(e.simulation.fixed)}});
  }
  summary["controllers"] = std::move(controllers);
  summary["sparse_init"] = to_string(c.sparse.init);
  summary["distributed_beta"] = c.sparse.distributed_beta;
  json sweep_rows = json::array();
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const SparsityReport sp = sparsity_report(sweep[i].controller.gain.k, ws.network());
    sweep_rows.push_back(
        {{"beta", betas[i]},
         {"file", "controller_" + sweep[i].name + ".json"},
         {"imitation_objective", imitation_objective(dataset, sweep[i].controller.gain.k)},
         {"significant_non_edge", sp.significant_non_edge},
         {"classification", to_string(sp.classification)},
         {"verdict", sweep_cert[i].switched_certified ? "certified" : "not certified"},
         {"outer_iterations", static_cast<int>(sweep[i].result.report.size()) - 1}});
  }
  summary["sparse_sweep"] = std::move(sweep_rows);
  summary["unconstrained_observation"] = {
      {"certified", unc_cert.switched_certified},
      {"per_mode_stable", unc_cert.per_mode_stable},
      {"diverged_runs", rows[2].simulation.switched.diverged},
      {"grew_at_check_runs", rows[2].simulation.switched.grew_at_check}};

  write_json(ws, "summary.json", summary);
  const std::string text = summary_text(summary, c.evaluation.fixed_modes);
  write_text(ws, "summary.txt", text);
  out << text;
  return summary;
}

}  // namespace swingsynth::cli
