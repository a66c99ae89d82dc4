#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swingsynth/certify.hpp"
#include "swingsynth/cli/evaluation.hpp"
#include "swingsynth/cli/experiment.hpp"
#include "swingsynth/io.hpp"
#include "swingsynth/lqr.hpp"
#include "swingsynth/network.hpp"
#include "swingsynth/synth.hpp"

namespace swingsynth::cli {

/// Resolved config, network and model for one invocation, plus the artifact
/// directory. Every artifact written through it carries the config hash.
class Workspace {
 public:
  Workspace(ExperimentConfig config, bool force);

  const ExperimentConfig& config() const { return config_; }
  const PowerNetwork& network() const { return network_.network; }
  const SwitchedModel& model() const { return model_; }
  const std::string& hash() const { return hash_; }
  bool force() const { return force_; }

  std::filesystem::path path(const std::string& file) const;
  /// {"config_hash": ..., "config": echo}.
  nlohmann::json stamp() const;
  /// Throws ValidationError when the artifact was produced by another config
  /// (or carries no hash), unless force is set.
  void check_stamp(const nlohmann::json& artifact, const std::filesystem::path& file) const;
  /// Reads an artifact of this workspace; a missing file names the command
  /// that produces it.
  nlohmann::json read_artifact(const std::string& file, const std::string& producer) const;

 private:
  ExperimentConfig config_;
  io::NetworkFile network_;
  SwitchedModel model_;
  std::string hash_;
  bool force_;
};

/// Certificate search settings taken from the synthesis section.
RecoveryOptions recovery_options(const ExperimentConfig& config);

/// File-name fragment of a controller: "optimal", "sparse_beta10", ...
std::string sparse_name(double beta);
/// Controller name of a file path: controller_<name>.json -> <name>.
std::string controller_name(const std::filesystem::path& file);

struct GenDataOutput {
  std::vector<Scenario> scenarios;
  TrajectoryDataset dataset;
};

GenDataOutput run_gen_data(const Workspace& ws);
TrajectoryDataset load_dataset(const Workspace& ws);

io::ControllerFile run_fit(const Workspace& ws, const TrajectoryDataset& dataset);
io::ControllerFile run_construct(const Workspace& ws);

struct SynthOutput {
  io::ControllerFile controller;
  SynthesisResult result;
  std::string name;
};

/// beta empty: stable synthesis, written as controller_optimal.json. Otherwise
/// the sparse variant, written as controller_sparse_beta<B>.json. An init
/// without P gets one from recover_lyapunov.
SynthOutput run_synth(const Workspace& ws, const TrajectoryDataset& dataset,
                      const io::ControllerFile& init, std::optional<double> beta);

/// Loads a controller and checks its stamp against the workspace.
io::ControllerFile load_controller(const Workspace& ws, const std::filesystem::path& file);

/// The certificate used for Lyapunov checks: the report's P when certified.
std::optional<Eigen::MatrixXd> certified_p(const CertificationReport& report);

/// Human-readable certification table.
void print_certification(std::ostream& out, const std::string& name,
                         const CertificationReport& report);

struct SimulationOutput {
  SwitchedSummary switched;
  std::vector<FixedModeResult> fixed;
};

/// Switched and fixed-mode runs; writes CSV traces and simulation_<name>.json.
SimulationOutput run_simulate(const Workspace& ws, const std::string& name,
                              const Eigen::MatrixXd& gain,
                              const std::optional<Eigen::MatrixXd>& p);

/// Fixed-mode metrics; writes metrics_<name>.json.
std::vector<FixedModeResult> run_metrics(const Workspace& ws, const std::string& name,
                                         const Eigen::MatrixXd& gain);

nlohmann::json switched_to_json(const SwitchedSummary& s);
nlohmann::json fixed_modes_to_json(const std::vector<FixedModeResult>& results);

/// Full pipeline. Writes every artifact plus summary.json and summary.txt and
/// prints the summary to `out`. Returns the summary document.
nlohmann::json run_reproduce(const Workspace& ws, std::ostream& out, std::ostream& log);

}  // namespace swingsynth::cli
