#include "swingsynth/cli/dispatch.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <ostream>

#include <CLI/CLI.hpp>
#include <fmt/format.h>

#include "swingsynth/cli/commands.hpp"
#include "swingsynth/errors.hpp"

namespace swingsynth::cli {

namespace {

constexpr std::array<const char*, 8> kCommands = {
    "gen-data", "fit", "construct", "synth", "certify", "simulate", "metrics", "reproduce"};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  bool force = false;

  Workspace workspace() const {
    Overrides o;
    o.seed = seed;
    o.workers = workers;
    if (out) o.output_dir = *out;
    return Workspace(load_experiment(config, o), force);
  }
};

void add_common(CLI::App* cmd, Common* c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c->config, "experiment config (JSON)");
  if (config_required) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("--seed", c->seed, "master seed (overrides config and SWINGSYNTH_SEED)");
  cmd->add_option("--workers", c->workers, "worker threads, 0 = all cores")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", c->out, "output directory (overrides config)");
  cmd->add_flag("--force", c->force, "accept artifacts produced by a different config");
}

int run_certify(const Common& c, const std::string& controller_path,
                const std::string& network_path, std::ostream& out) {
  if (c.config.empty() == network_path.empty()) {
    throw ValidationError("certify needs exactly one of --network or --config");
  }
  const std::string name = controller_name(controller_path);
  if (!c.config.empty()) {
    const Workspace ws = c.workspace();
    const io::ControllerFile file = load_controller(ws, controller_path);
    const CertificationReport report =
        certify_controller(file.gain.k, file.p, ws.model(), recovery_options(ws.config()));
    print_certification(out, name, report);
    nlohmann::json j = ws.stamp();
    const nlohmann::json body = io::certification_to_json(report);
    for (const auto& [k, v] : body.items()) j[k] = v;
    j["controller"] = name;
    j["sparsity"] = io::sparsity_to_json(sparsity_report(file.gain.k, ws.network()));
    std::filesystem::create_directories(ws.config().output_dir);
    io::write_json_file(ws.path("certification_" + name + ".json"), j);
    return kExitOk;
  }
  if (!std::filesystem::exists(network_path)) {
    throw ValidationError(fmt::format("network file '{}' does not exist", network_path));
  }
  if (!std::filesystem::exists(controller_path)) {
    throw ValidationError(fmt::format("controller file '{}' does not exist", controller_path));
  }
  const io::NetworkFile net = io::load_network(network_path);
  const io::ControllerFile file = io::controller_from_json(io::read_json_file(controller_path));
  if (file.gain.num_nodes() != net.network.num_nodes()) {
    throw ValidationError("controller dimension does not match the network");
  }
  const SwitchedModel model(net.network, net.step_h);
  const CertificationReport report = certify_controller(file.gain.k, file.p, model);
  print_certification(out, name, report);
  if (c.out) {
    nlohmann::json j = io::certification_to_json(report);
    j["controller"] = name;
    j["sparsity"] = io::sparsity_to_json(sparsity_report(file.gain.k, net.network));
    std::filesystem::create_directories(*c.out);
    io::write_json_file(std::filesystem::path(*c.out) / ("certification_" + name + ".json"), j);
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
      std::find(kCommands.begin(), kCommands.end(), args.front()) == kCommands.end()) {
    err << fmt::format("error: unknown command '{}' (expected one of: {})\n", args.front(),
                       fmt::join(kCommands, ", "));
    return kExitValidation;
  }

  CLI::App app{"Stability-certified imitation controllers for switched-inertia power networks",
               "swingsynth"};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("gen-data", "sample scenarios and solve the LQR problems");
  add_common(gen, &c);
  auto* fit = app.add_subcommand("fit", "unconstrained least-squares controller");
  add_common(fit, &c);
  auto* construct = app.add_subcommand("construct", "local controller with analytic certificate");
  add_common(construct, &c);

  auto* synth = app.add_subcommand("synth", "certified imitation synthesis");
  add_common(synth, &c);
  std::optional<double> beta;
  std::string init_path;
  synth->add_option("--beta", beta, "l1 weight on non-neighbor gains (sparse variant)")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--init", init_path, "initial controller file")->check(CLI::ExistingFile);

  auto* certify = app.add_subcommand("certify", "certify a controller");
  add_common(certify, &c, false);
  std::string controller_path;
  std::string network_path;
  certify->add_option("--controller", controller_path, "controller file")->required();
  certify->add_option("--network", network_path, "network file (instead of --config)");

  auto* simulate = app.add_subcommand("simulate", "closed-loop switched and fixed-mode runs");
  add_common(simulate, &c);
  simulate->add_option("--controller", controller_path, "controller file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* metrics_cmd = app.add_subcommand("metrics", "fixed-mode input and frequency metrics");
  add_common(metrics_cmd, &c);
  metrics_cmd->add_option("--controller", controller_path, "controller file")
      ->required()
      ->check(CLI::ExistingFile);

  auto* reproduce = app.add_subcommand("reproduce", "run the whole pipeline");
  add_common(reproduce, &c);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) {
      const Workspace ws = c.workspace();
      const GenDataOutput d = run_gen_data(ws);
      out << fmt::format("wrote {} scenarios to {}\n", d.scenarios.size(),
                         ws.config().output_dir.string());
    } else if (fit->parsed()) {
      const Workspace ws = c.workspace();
      const TrajectoryDataset d = load_dataset(ws);
      const io::ControllerFile f = run_fit(ws, d);
      out << fmt::format("unconstrained: J = {:.6e}\n", imitation_objective(d, f.gain.k));
    } else if (construct->parsed()) {
      const Workspace ws = c.workspace();
      const io::ControllerFile f = run_construct(ws);
      out << fmt::format("local: wrote {}\n", ws.path("controller_local.json").string());
    } else if (synth->parsed()) {
      const Workspace ws = c.workspace();
      const TrajectoryDataset d = load_dataset(ws);
      io::ControllerFile init;
      if (!init_path.empty()) {
        init = load_controller(ws, init_path);
      } else {
        const bool from_local = !beta || ws.config().sparse.init == GainOrigin::kLocal;
        const std::string file = from_local ? "controller_local.json" : "controller_optimal.json";
        init = io::controller_from_json(
            ws.read_artifact(file, from_local ? "construct" : "synth"));
      }
      const SynthOutput s = run_synth(ws, d, init, beta);
      out << fmt::format("{}: J = {:.6e}, {} outer iterations, {}\n", s.name,
                         imitation_objective(d, s.controller.gain.k),
                         s.result.report.size() - 1,
                         s.result.certificate.certified(ws.config().synthesis.lmi_margin)
                             ? "certified"
                             : "not certified");
    } else if (certify->parsed()) {
      return run_certify(c, controller_path, network_path, out);
    } else if (simulate->parsed()) {
      const Workspace ws = c.workspace();
      const io::ControllerFile f = load_controller(ws, controller_path);
      const std::string name = controller_name(controller_path);
      std::optional<Eigen::MatrixXd> p;
      if (f.p) {
        const LyapunovCertificate cert = LyapunovCertificate::evaluate(f.gain.k, *f.p, ws.model());
        if (cert.certified(ws.config().synthesis.lmi_margin)) p = f.p;
      }
      const SimulationOutput s = run_simulate(ws, name, f.gain.k, p);
      out << fmt::format("{}: {}/{} switched runs diverged, worst |x(end)|/|x0| = {:.4e}\n", name,
                         s.switched.diverged, s.switched.sequences, s.switched.worst_ratio_final);
    } else if (metrics_cmd->parsed()) {
      const Workspace ws = c.workspace();
      const io::ControllerFile f = load_controller(ws, controller_path);
      const std::string name = controller_name(controller_path);
      for (const FixedModeResult& r : run_metrics(ws, name, f.gain.k)) {
        out << fmt::format("{} mode {}: total input {:.6g}, total frequency deviation {:.6g}\n",
                           name, r.mode, r.metrics.total_input, r.metrics.total_freq_dev);
      }
    } else if (reproduce->parsed()) {
      const Workspace ws = c.workspace();
      run_reproduce(ws, out, err);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace swingsynth::cli
