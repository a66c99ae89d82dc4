#include "swingsynth/io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "swingsynth/errors.hpp"

namespace swingsynth::io {

namespace {

const json& require(const json& j, const std::string& key,
                    const std::string& context) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(fmt::format("{}: missing field '{}'", context, key));
  }
  return j.at(key);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) {
    throw ValidationError(fmt::format("field '{}' must be a number", field));
  }
  return j.get<double>();
}

int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) {
    throw ValidationError(fmt::format("field '{}' must be an integer", field));
  }
  return j.get<int>();
}

// Shortest round-trip representation.
std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  const int rows = integer(require(j, "rows", field), field + ".rows");
  const int cols = integer(require(j, "cols", field), field + ".cols");
  const json& data = require(j, "data", field);
  if (rows < 0 || cols < 0 || !data.is_array() ||
      data.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw ValidationError(fmt::format(
        "field '{}': expected {} x {} row-major entries", field, rows, cols));
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) {
      m(i, c) = number(data[static_cast<std::size_t>(i * cols + c)], field + ".data");
    }
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) {
    throw ValidationError(fmt::format("field '{}' must be an array", field));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], field);
  }
  return v;
}

NetworkFile network_from_json(const json& j) {
  const std::string ctx = "network";
  const int n = integer(require(j, "n", ctx), "n");
  if (n < 1) throw ValidationError("field 'n' must be >= 1");

  std::vector<Edge> edges;
  const json& edges_json = require(j, "edges", ctx);
  if (!edges_json.is_array()) throw ValidationError("field 'edges' must be an array");
  for (const json& e : edges_json) {
    if (!e.is_array() || e.size() != 3) {
      throw ValidationError("field 'edges' must hold [i, j, b] triples");
    }
    edges.push_back({integer(e[0], "edges[].i"), integer(e[1], "edges[].j"),
                     number(e[2], "edges[].b")});
  }

  const Eigen::VectorXd damping = vector_from_json(require(j, "damping", ctx), "damping");

  const json& modes = require(j, "inertia_modes", ctx);
  if (!modes.is_array() || modes.empty()) {
    throw ValidationError("field 'inertia_modes' must be a non-empty array");
  }
  Eigen::MatrixXd table(static_cast<Eigen::Index>(modes.size()), n);
  for (std::size_t q = 0; q < modes.size(); ++q) {
    const auto row = static_cast<Eigen::Index>(q);
    if (modes[q].is_number()) {
      table.row(row).setConstant(number(modes[q], "inertia_modes"));
    } else {
      const Eigen::VectorXd values = vector_from_json(modes[q], "inertia_modes");
      if (values.size() != n) {
        throw ValidationError(fmt::format(
            "field 'inertia_modes[{}]' has {} entries, expected {}", q,
            values.size(), n));
      }
      table.row(row) = values.transpose();
    }
  }
  const double step_h = number(require(j, "step_h", ctx), "step_h");
  if (!(step_h > 0.0)) throw ValidationError("field 'step_h' must be > 0");
  return {PowerNetwork(n, std::move(edges), damping, std::move(table)), step_h};
}

json network_to_json(const PowerNetwork& network, double step_h) {
  json edges = json::array();
  for (const Edge& e : network.edges()) edges.push_back({e.i, e.j, e.susceptance});
  json modes = json::array();
  for (int q = 1; q <= network.num_modes(); ++q) {
    modes.push_back(vector_to_json(network.inertia(q)));
  }
  return {{"n", network.num_nodes()},
          {"edges", std::move(edges)},
          {"damping", vector_to_json(network.damping())},
          {"inertia_modes", std::move(modes)},
          {"step_h", step_h}};
}

NetworkFile load_network(const std::filesystem::path& path) {
  return network_from_json(read_json_file(path));
}

json scenarios_to_json(const std::vector<Scenario>& scenarios) {
  json list = json::array();
  for (const Scenario& s : scenarios) {
    list.push_back({{"seed", s.seed},
                    {"horizon_steps", s.horizon_steps},
                    {"dwell_steps", s.sequence.dwell_steps},
                    {"x0", vector_to_json(s.x0)},
                    {"modes", s.sequence.modes}});
  }
  return {{"scenarios", std::move(list)}};
}

std::vector<Scenario> scenarios_from_json(const json& j) {
  const json& list = require(j, "scenarios", "scenarios file");
  if (!list.is_array()) throw ValidationError("field 'scenarios' must be an array");
  std::vector<Scenario> out;
  for (const json& s : list) {
    Scenario sc;
    const json& seed = require(s, "seed", "scenario");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
      throw ValidationError("field 'scenarios[].seed' must be an integer");
    }
    sc.seed = seed.get<std::uint64_t>();
    sc.horizon_steps = integer(require(s, "horizon_steps", "scenario"), "horizon_steps");
    sc.sequence.dwell_steps = integer(require(s, "dwell_steps", "scenario"), "dwell_steps");
    sc.x0 = vector_from_json(require(s, "x0", "scenario"), "x0");
    for (const json& q : require(s, "modes", "scenario")) {
      sc.sequence.modes.push_back(integer(q, "modes"));
    }
    if (static_cast<int>(sc.sequence.modes.size()) < sc.horizon_steps) {
      throw ValidationError("scenario: 'modes' shorter than 'horizon_steps'");
    }
    out.push_back(std::move(sc));
  }
  return out;
}

json dataset_to_json(const TrajectoryDataset& dataset) {
  std::size_t samples = 0;
  for (const Trajectory& t : dataset.trajectories) samples += t.inputs.size();
  return {{"step_h", dataset.step_h},
          {"scenario_count", dataset.trajectories.size()},
          {"sample_count", samples},
          {"state_gram", matrix_to_json(dataset.state_gram)},
          {"cross_gram", matrix_to_json(dataset.cross_gram)},
          {"input_energy", dataset.input_energy}};
}

TrajectoryDataset dataset_from_json(const json& j) {
  TrajectoryDataset d;
  d.step_h = number(require(j, "step_h", "dataset"), "step_h");
  d.state_gram = matrix_from_json(require(j, "state_gram", "dataset"), "state_gram");
  d.cross_gram = matrix_from_json(require(j, "cross_gram", "dataset"), "cross_gram");
  d.input_energy = number(require(j, "input_energy", "dataset"), "input_energy");
  if (d.state_gram.rows() != d.state_gram.cols() ||
      d.cross_gram.cols() != d.state_gram.cols()) {
    throw ValidationError("dataset: Gram matrix dimensions are inconsistent");
  }
  return d;
}

void write_trajectories_csv(std::ostream& out,
                            const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) return;
  const Eigen::Index n = trajectories.front().states.front().size() / 2;
  out << "scenario,t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",theta_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) out << ",omega_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) out << ",u_" << i;
  out << ",mode\n";
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& traj = trajectories[k];
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      out << k << ',' << t;
      const StateVector& x = traj.states[t];
      for (Eigen::Index i = 0; i < x.size(); ++i) out << ',' << num(x(i));
      if (t < traj.inputs.size()) {
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << num(traj.inputs[t](i));
        out << ',' << traj.modes[t];
      } else {
        for (Eigen::Index i = 0; i < n; ++i) out << ',';
        out << ',';
      }
      out << '\n';
    }
  }
}

void write_iteration_report_csv(std::ostream& out,
                                const std::vector<IterationRecord>& report) {
  out << "outer_iter,mu_barrier,objective,worst_lmi_margin\n";
  for (const IterationRecord& r : report) {
    out << r.outer_iteration << ',' << num(r.barrier_weight) << ','
        << num(r.objective) << ',' << num(r.worst_lmi_margin) << '\n';
  }
}

void write_closed_loop_csv(std::ostream& out,
                           const ClosedLoopTrajectory& trajectory,
                           const Eigen::MatrixXd* p) {
  const int n = trajectory.num_nodes();
  out << "t,mode";
  for (int i = 1; i <= n; ++i) out << ",theta_" << i;
  for (int i = 1; i <= n; ++i) out << ",omega_" << i;
  for (int i = 1; i <= n; ++i) out << ",u_" << i;
  if (p != nullptr) out << ",V";
  out << '\n';
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    out << num(trajectory.times[k]) << ',';
    if (k < trajectory.modes.size()) out << trajectory.modes[k];
    const StateVector& x = trajectory.states[k];
    for (Eigen::Index i = 0; i < x.size(); ++i) out << ',' << num(x(i));
    const Eigen::VectorXd& u = trajectory.inputs[k];
    for (Eigen::Index i = 0; i < u.size(); ++i) out << ',' << num(u(i));
    if (p != nullptr) out << ',' << num(x.dot(*p * x));
    out << '\n';
  }
}

json certification_to_json(const CertificationReport& report) {
  std::string source = "none";
  if (report.source == CertificateSource::kSupplied) source = "supplied";
  if (report.source == CertificateSource::kRecovered) source = "recovered";
  json j = {{"spectral_abscissa", report.spectral_abscissa},
            {"worst_spectral_abscissa", report.worst_abscissa()},
            {"per_mode_stable", report.per_mode_stable},
            {"switched_certified", report.switched_certified},
            {"lmi_tolerance", report.lmi_tolerance},
            {"certificate_source", source},
            {"verdict", report.switched_certified ? "certified" : "not certified"}};
  if (!report.lmi_margins.empty()) {
    j["lmi_margins"] = report.lmi_margins;
    j["worst_lmi_margin"] = report.worst_lmi_margin();
    j["min_eig_p"] = report.min_eig_p;
  }
  if (report.p.has_value()) j["P"] = matrix_to_json(*report.p);
  if (!report.note.empty()) j["note"] = report.note;
  return j;
}

json sparsity_to_json(const SparsityReport& report) {
  return {{"classification", to_string(report.classification)},
          {"threshold", report.threshold},
          {"significant_non_edge", report.significant_non_edge},
          {"significant_off_diagonal", report.significant_off_diagonal},
          {"total_off_diagonal", report.total_off_diagonal},
          {"communication_saving", report.communication_saving}};
}

json metrics_to_json(const MetricsReport& report) {
  json per_mode = json::object();
  for (const auto& [q, m] : report.per_mode) {
    per_mode[std::to_string(q)] = {{"total_input", m.total_input},
                                   {"total_freq_dev", m.total_freq_dev},
                                   {"duration", m.duration}};
  }
  return {{"total_input", report.total_input},
          {"total_freq_dev", report.total_freq_dev},
          {"duration", report.duration},
          {"per_mode", std::move(per_mode)}};
}

json controller_to_json(const ControllerFile& file,
                        const std::optional<std::vector<double>>& margins) {
  json j = file.metadata.is_object() ? file.metadata : json::object();
  j["origin"] = to_string(file.gain.origin);
  j["K"] = matrix_to_json(file.gain.k);
  if (file.p.has_value()) j["P"] = matrix_to_json(*file.p);
  if (margins.has_value()) j["lmi_margins"] = *margins;
  return j;
}

ControllerFile controller_from_json(const json& j) {
  ControllerFile file;
  file.gain.k = matrix_from_json(require(j, "K", "controller"), "K");
  const json& origin = require(j, "origin", "controller");
  if (!origin.is_string()) throw ValidationError("field 'origin' must be a string");
  file.gain.origin = parse_gain_origin(origin.get<std::string>());
  if (j.contains("P")) file.p = matrix_from_json(j.at("P"), "P");
  file.metadata = j;
  file.metadata.erase("K");
  file.metadata.erase("P");
  if (file.gain.k.cols() != 2 * file.gain.k.rows()) {
    throw ValidationError("field 'K' must be n x 2n");
  }
  return file;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("malformed JSON in '{}': {}", path.string(), e.what()));
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

std::string stable_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace swingsynth::io
