#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "swingsynth/errors.hpp"
#include "swingsynth/io.hpp"

namespace swingsynth::io {
namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("swingsynth_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

json valid_network() {
  return json::parse(R"({"n": 3, "edges": [[0, 1, 2.0], [1, 2, 1.5]],
                        "damping": [1.0, 0.8, 1.2],
                        "inertia_modes": [1.0, [0.5, 0.8, 1.2]], "step_h": 0.01})");
}

std::string error_of(const json& j) {
  try {
    network_from_json(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(Io, MatrixRoundTripIsExact) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(3, 5) * 1e7;
  const json j = json::parse(matrix_to_json(m).dump());
  EXPECT_EQ(matrix_from_json(j, "m"), m);
  EXPECT_THROW(matrix_from_json(json::parse(R"({"rows": 2, "cols": 2, "data": [1, 2, 3]})"), "m"),
               ValidationError);
}

TEST(Io, NetworkParsesScalarAndPerNodeModes) {
  const NetworkFile f = network_from_json(valid_network());
  EXPECT_EQ(f.network.num_nodes(), 3);
  EXPECT_EQ(f.network.num_modes(), 2);
  EXPECT_DOUBLE_EQ(f.step_h, 0.01);
  EXPECT_TRUE(f.network.inertia(1).isApprox(Eigen::Vector3d::Ones()));
  EXPECT_TRUE(f.network.inertia(2).isApprox(Eigen::Vector3d(0.5, 0.8, 1.2)));
  const NetworkFile again = network_from_json(network_to_json(f.network, f.step_h));
  EXPECT_EQ(again.network.inertia_table(), f.network.inertia_table());
  EXPECT_EQ(again.network.edges().size(), 2u);
}

TEST(Io, NetworkErrorsNameTheField) {
  json j = valid_network();
  j.erase("damping");
  EXPECT_NE(error_of(j).find("damping"), std::string::npos);
  j = valid_network();
  j["step_h"] = -1.0;
  EXPECT_NE(error_of(j).find("step_h"), std::string::npos);
  j = valid_network();
  j["inertia_modes"][1] = json::array({1.0, 2.0});
  EXPECT_NE(error_of(j).find("inertia_modes[1]"), std::string::npos);
  j = valid_network();
  j["edges"][0] = json::array({0, 1});
  EXPECT_NE(error_of(j).find("edges"), std::string::npos);
}

TEST(Io, ShippedNetworkLoads) {
  const NetworkFile f = load_network(std::string(SWINGSYNTH_CONFIG_DIR) + "/network_12bus.json");
  EXPECT_EQ(f.network.num_nodes(), 12);
  EXPECT_EQ(f.network.num_modes(), 10);
  EXPECT_DOUBLE_EQ(f.network.inertia(10)(3), 9.0);
}

TEST(Io, ControllerRoundTrip) {
  ControllerFile c;
  c.gain = {Eigen::MatrixXd::Random(2, 4), GainOrigin::kSparse};
  c.p = Eigen::MatrixXd::Identity(4, 4);
  c.metadata = {{"config_hash", "abc"}, {"beta", 10.0}};
  const json j = json::parse(controller_to_json(c, std::vector<double>{-1.0, -2.0}).dump());
  const ControllerFile back = controller_from_json(j);
  EXPECT_EQ(back.gain.k, c.gain.k);
  EXPECT_EQ(back.gain.origin, GainOrigin::kSparse);
  ASSERT_TRUE(back.p.has_value());
  EXPECT_EQ(*back.p, *c.p);
  EXPECT_EQ(back.metadata.at("config_hash"), "abc");
  EXPECT_EQ(j.at("lmi_margins").size(), 2u);

  json bad = j;
  bad["origin"] = "mystery";
  EXPECT_THROW(controller_from_json(bad), ValidationError);
  bad = j;
  bad["K"] = matrix_to_json(Eigen::MatrixXd::Zero(2, 3));
  EXPECT_THROW(controller_from_json(bad), ValidationError);
}

TEST(Io, ScenariosAndDatasetRoundTrip) {
  const SwitchedModel model(testing::three_bus_line(), 0.02);
  ScenarioConfig config;
  config.count = 3;
  config.horizon_steps = 8;
  config.initial_mode = 1;
  const auto scenarios = build_scenarios(config, 3, 2, 5);
  const auto back = scenarios_from_json(json::parse(scenarios_to_json(scenarios).dump()));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back[k].x0, scenarios[k].x0);
    EXPECT_EQ(back[k].sequence.modes, scenarios[k].sequence.modes);
    EXPECT_EQ(back[k].seed, scenarios[k].seed);
  }
  const TrajectoryDataset d = generate_dataset(model, scenarios, CostWeights::diagonal(3, 1, 1, 1));
  const TrajectoryDataset d2 = dataset_from_json(json::parse(dataset_to_json(d).dump()));
  EXPECT_EQ(d2.state_gram, d.state_gram);
  EXPECT_EQ(d2.cross_gram, d.cross_gram);
  EXPECT_EQ(d2.input_energy, d.input_energy);
}

TEST(Io, TrajectoryCsvLayout) {
  const SwitchedModel model(testing::three_bus_line(), 0.02);
  const TrajectoryDataset d = testing::small_dataset(model, 2, 4, 1);
  std::ostringstream out;
  write_trajectories_csv(out, d.trajectories);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "scenario,t,theta_1,theta_2,theta_3,omega_1,omega_2,omega_3,u_1,u_2,u_3,mode");
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 2 * 5);
  EXPECT_EQ(last.substr(last.size() - 4), ",,,,");  // terminal row: no input, no mode
}

TEST(Io, StableHashKnownValues) {
  EXPECT_EQ(stable_hash(""), "cbf29ce484222325");
  EXPECT_EQ(stable_hash("a"), "af63dc4c8601ec8c");
  EXPECT_NE(stable_hash("ab"), stable_hash("ba"));
}

TEST(Io, JsonFilesAreByteStable) {
  const auto dir = temp_dir("stable");
  const json j = {{"b", 1.0 / 3.0}, {"a", json::array({1, 2})}};
  write_json_file(dir / "x.json", j);
  write_json_file(dir / "y.json", json::parse(j.dump()));
  std::ifstream x(dir / "x.json"), y(dir / "y.json");
  std::stringstream sx, sy;
  sx << x.rdbuf();
  sy << y.rdbuf();
  EXPECT_EQ(sx.str(), sy.str());
  EXPECT_LT(sx.str().find("\"a\""), sx.str().find("\"b\""));
  EXPECT_EQ(read_json_file(dir / "x.json"), j);
  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_THROW(read_json_file(dir / "bad.json"), ValidationError);
  EXPECT_THROW(read_json_file(dir / "missing.json"), ValidationError);
}

}  // namespace
}  // namespace swingsynth::io
