#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "swingsynth/certify.hpp"
#include "swingsynth/lqr.hpp"
#include "swingsynth/network.hpp"
#include "swingsynth/scenarios.hpp"
#include "swingsynth/sim.hpp"
#include "swingsynth/synth.hpp"

namespace swingsynth::io {

using json = nlohmann::json;

/// {"rows": r, "cols": c, "data": [row-major entries]}.
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field);

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j, const std::string& field);

/// Network file contents.
struct NetworkFile {
  PowerNetwork network;
  double step_h;
};

/// Keys: n, edges ([i, j, b] with 0-based nodes), damping, inertia_modes
/// (per mode either one scalar for every node or an array of n values),
/// step_h. Throws ValidationError naming the offending field.
NetworkFile network_from_json(const json& j);
json network_to_json(const PowerNetwork& network, double step_h);
NetworkFile load_network(const std::filesystem::path& path);

json scenarios_to_json(const std::vector<Scenario>& scenarios);
std::vector<Scenario> scenarios_from_json(const json& j);

/// Gram matrices, input energy, step and sample counts. Trajectories are
/// exported separately as CSV.
json dataset_to_json(const TrajectoryDataset& dataset);
/// Restores the Gram matrices only (trajectories are left empty).
TrajectoryDataset dataset_from_json(const json& j);

/// Columns: scenario, t, theta_1..theta_n, omega_1..omega_n, u_1..u_n, mode.
/// The terminal row t = T carries blank input and mode fields.
void write_trajectories_csv(std::ostream& out,
                            const std::vector<Trajectory>& trajectories);

/// Columns: outer_iter, mu_barrier, objective, worst_lmi_margin.
void write_iteration_report_csv(std::ostream& out,
                                const std::vector<IterationRecord>& report);

/// Columns: t, mode, theta_1.., omega_1.., u_1.. and V when p is given.
/// The mode column holds the mode active on [t, t + h); blank on the last row.
void write_closed_loop_csv(std::ostream& out,
                           const ClosedLoopTrajectory& trajectory,
                           const Eigen::MatrixXd* p = nullptr);

json certification_to_json(const CertificationReport& report);
json sparsity_to_json(const SparsityReport& report);
json metrics_to_json(const MetricsReport& report);

/// Controller file: K, optional P, origin tag, certification margins, plus
/// whatever metadata the caller attaches (config echo, config hash).
struct ControllerFile {
  ControllerGain gain;
  std::optional<Eigen::MatrixXd> p;
  json metadata = json::object();
};

json controller_to_json(const ControllerFile& file,
                        const std::optional<std::vector<double>>& margins);
ControllerFile controller_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; key order is sorted so output is
/// byte-stable.
void write_json_file(const std::filesystem::path& path, const json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64-bit of the string, rendered as 16 hex digits.
std::string stable_hash(const std::string& text);

}  // namespace swingsynth::io
