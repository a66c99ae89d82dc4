#include "swingsynth/cli/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "swingsynth/errors.hpp"
#include "swingsynth/io.hpp"

namespace swingsynth::cli {

namespace {

using nlohmann::json;

// Reads one JSON object section and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) {
      throw ValidationError(fmt::format("config field '{}' must be an object",
                                        prefix_.empty() ? "<root>" : prefix_));
    }
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key);
  }

  std::string name(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json& at(const std::string& key) {
    known_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      throw ValidationError(fmt::format("config field '{}' must be a finite number", name(key)));
    }
    return v.get<double>();
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) {
      throw ValidationError(fmt::format("config field '{}' must be > 0", name(key)));
    }
    return v;
  }

  double non_negative(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) {
      throw ValidationError(fmt::format("config field '{}' must be >= 0", name(key)));
    }
    return v;
  }

  int integer(const std::string& key, int fallback, int minimum) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) {
      throw ValidationError(fmt::format("config field '{}' must be an integer", name(key)));
    }
    const auto value = v.get<std::int64_t>();
    if (value < minimum || value > std::numeric_limits<int>::max()) {
      throw ValidationError(fmt::format("config field '{}' must be >= {}", name(key), minimum));
    }
    return static_cast<int>(value);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) {
      throw ValidationError(fmt::format("config field '{}' must be true or false", name(key)));
    }
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) {
      throw ValidationError(fmt::format("config field '{}' must be a string", name(key)));
    }
    return v.get<std::string>();
  }

  Section child(const std::string& key) {
    static const json empty = json::object();
    return Section(has(key) ? j_.at(key) : empty, name(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.contains(key)) {
        throw ValidationError(fmt::format("unknown config field '{}'", name(key)));
      }
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> known_;
};

std::uint64_t parse_seed_text(const std::string& text, const std::string& origin) {
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw ValidationError(fmt::format("{} must be a non-negative integer, got '{}'", origin, text));
  }
  return value;
}

void parse_scenarios(Section s, ScenarioConfig* out) {
  out->count = s.integer("count", out->count, 1);
  out->horizon_steps = s.integer("horizon_steps", out->horizon_steps, 1);
  out->initial_mode = s.integer("initial_mode", out->initial_mode, 1);
  out->dwell_steps = s.integer("dwell_steps", out->dwell_steps, 1);
  const bool has_variance = s.has("variance");
  const bool has_stddev = s.has("stddev");
  if (has_variance && has_stddev) {
    throw ValidationError("config fields 'scenarios.variance' and 'scenarios.stddev' are exclusive");
  }
  if (has_stddev) {
    out->spread = s.non_negative("stddev", 0.0);
    out->spread_is_stddev = true;
  } else {
    out->spread = s.non_negative("variance", out->spread);
    out->spread_is_stddev = false;
  }
  const std::string law = s.string("jump_law", to_string(out->jump_law));
  try {
    out->jump_law = parse_jump_law(law);
  } catch (const ValidationError&) {
    throw ValidationError(fmt::format(
        "config field 'scenarios.jump_law' must be \"walk\" or \"uniform\", got \"{}\"", law));
  }
  s.finish();
}

void parse_synthesis(Section s, SynthesisConfig* out) {
  Section barrier = s.child("barrier");
  out->barrier.initial = barrier.positive("initial", out->barrier.initial);
  out->barrier.decay = barrier.positive("decay", out->barrier.decay);
  out->barrier.minimum = barrier.positive("minimum", out->barrier.minimum);
  barrier.finish();
  out->inner_tolerance = s.positive("inner_tolerance", out->inner_tolerance);
  out->outer_tolerance = s.positive("outer_tolerance", out->outer_tolerance);
  out->max_outer_iterations = s.integer("max_outer_iterations", out->max_outer_iterations, 1);
  out->max_newton_iterations = s.integer("max_newton_iterations", out->max_newton_iterations, 1);
  out->max_prox_iterations = s.integer("max_prox_iterations", out->max_prox_iterations, 1);
  out->lmi_margin = s.positive("lmi_margin", out->lmi_margin);
  out->p_floor = s.positive("p_floor", out->p_floor);
  out->ridge = s.non_negative("ridge", out->ridge);
  s.finish();
  try {
    out->validate();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("config section 'synthesis': {}", e.what()));
  }
}

void parse_sparse(Section s, SparseSettings* out) {
  if (s.has("betas")) {
    const json& betas = s.at("betas");
    if (!betas.is_array() || betas.empty()) {
      throw ValidationError("config field 'sparse.betas' must be a non-empty array");
    }
    out->betas.clear();
    for (const json& b : betas) {
      if (!b.is_number() || !(b.get<double>() >= 0.0) || !std::isfinite(b.get<double>())) {
        throw ValidationError("config field 'sparse.betas' must hold finite numbers >= 0");
      }
      out->betas.push_back(b.get<double>());
    }
  }
  out->distributed_beta = s.non_negative("distributed_beta", out->distributed_beta);
  const std::string init = s.string("init", to_string(out->init));
  if (init == "optimal") {
    out->init = GainOrigin::kOptimal;
  } else if (init == "local") {
    out->init = GainOrigin::kLocal;
  } else {
    throw ValidationError(fmt::format(
        "config field 'sparse.init' must be \"optimal\" or \"local\", got \"{}\"", init));
  }
  s.finish();
}

void parse_evaluation(Section s, EvaluationSettings* out) {
  out->sequences = s.integer("sequences", out->sequences, 1);
  out->initial_mode = s.integer("initial_mode", out->initial_mode, 1);
  const std::string law = s.string("jump_law", to_string(out->jump_law));
  try {
    out->jump_law = parse_jump_law(law);
  } catch (const ValidationError&) {
    throw ValidationError(fmt::format(
        "config field 'evaluation.jump_law' must be \"walk\" or \"uniform\", got \"{}\"", law));
  }
  out->dwell_steps = s.integer("dwell_steps", out->dwell_steps, 1);
  out->switched_hz = s.number("switched_hz", out->switched_hz);
  out->switched_duration = s.positive("switched_duration", out->switched_duration);
  out->growth_check_time = s.positive("growth_check_time", out->growth_check_time);
  out->fixed_hz = s.number("fixed_hz", out->fixed_hz);
  out->fixed_duration = s.positive("fixed_duration", out->fixed_duration);
  if (s.has("fixed_modes")) {
    const json& modes = s.at("fixed_modes");
    if (!modes.is_array()) {
      throw ValidationError("config field 'evaluation.fixed_modes' must be an array");
    }
    out->fixed_modes.clear();
    for (const json& q : modes) {
      if (!q.is_number_integer() || q.get<int>() < 1) {
        throw ValidationError("config field 'evaluation.fixed_modes' must hold modes >= 1");
      }
      out->fixed_modes.push_back(q.get<int>());
    }
  }
  out->csv_sequences = s.integer("csv_sequences", out->csv_sequences, 0);
  if (out->growth_check_time > out->switched_duration) {
    throw ValidationError(
        "config field 'evaluation.growth_check_time' exceeds 'evaluation.switched_duration'");
  }
  s.finish();
}

}  // namespace

std::string to_string(JumpLaw law) {
  return law == JumpLaw::kWalk ? "walk" : "uniform";
}

JumpLaw parse_jump_law(const std::string& name) {
  if (name == "walk") return JumpLaw::kWalk;
  if (name == "uniform") return JumpLaw::kUniformAny;
  throw ValidationError(fmt::format("unknown jump law '{}'", name));
}

ExperimentConfig parse_experiment(const json& j,
                                  const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  Section root(j, "");
  if (!root.has("network")) {
    throw ValidationError("config field 'network' is required");
  }
  const std::string network = root.string("network", "");
  config.network_path = std::filesystem::path(network).is_absolute()
                            ? std::filesystem::path(network)
                            : base_dir / network;
  if (root.has("seed")) {
    const json& seed = root.at("seed");
    if (!seed.is_number_unsigned()) {
      throw ValidationError("config field 'seed' must be a non-negative integer");
    }
    config.seed = seed.get<std::uint64_t>();
  }
  config.workers = root.integer("workers", config.workers, 0);
  config.output_dir = root.string("output_dir", config.output_dir.string());

  parse_scenarios(root.child("scenarios"), &config.scenarios);

  Section weights = root.child("weights");
  config.q_angle = weights.non_negative("q_angle", config.q_angle);
  config.q_frequency = weights.non_negative("q_frequency", config.q_frequency);
  config.r_input = weights.positive("r", config.r_input);
  weights.finish();

  parse_synthesis(root.child("synthesis"), &config.synthesis);

  Section local = root.child("local");
  config.local.delta = local.positive("delta", config.local.delta);
  config.local.xi = local.number("xi", config.local.xi);
  if (!(config.local.xi > 1.0)) {
    throw ValidationError("config field 'local.xi' must be > 1");
  }
  config.local.max_retries = local.integer("max_retries", config.local.max_retries, 0);
  local.finish();
  config.local.lmi_margin = config.synthesis.lmi_margin;

  parse_sparse(root.child("sparse"), &config.sparse);
  parse_evaluation(root.child("evaluation"), &config.evaluation);
  root.finish();
  return config;
}

ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const Overrides& overrides) {
  const json j = io::read_json_file(path);
  ExperimentConfig config = parse_experiment(j, path.parent_path());
  if (const char* env = std::getenv("SWINGSYNTH_SEED"); env != nullptr && *env != '\0') {
    config.seed = parse_seed_text(env, "SWINGSYNTH_SEED");
  }
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.workers) {
    if (*overrides.workers < 0) throw ValidationError("--workers must be >= 0");
    config.workers = *overrides.workers;
  }
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  return config;
}

json experiment_echo(const ExperimentConfig& c) {
  const SynthesisConfig& s = c.synthesis;
  const EvaluationSettings& e = c.evaluation;
  return {
      {"network", c.network_path.filename().string()},
      {"seed", c.seed},
      {"scenarios",
       {{"count", c.scenarios.count},
        {"horizon_steps", c.scenarios.horizon_steps},
        {"initial_mode", c.scenarios.initial_mode},
        {"dwell_steps", c.scenarios.dwell_steps},
        {c.scenarios.spread_is_stddev ? "stddev" : "variance", c.scenarios.spread},
        {"jump_law", to_string(c.scenarios.jump_law)}}},
      {"weights", {{"q_angle", c.q_angle}, {"q_frequency", c.q_frequency}, {"r", c.r_input}}},
      {"synthesis",
       {{"barrier",
         {{"initial", s.barrier.initial},
          {"decay", s.barrier.decay},
          {"minimum", s.barrier.minimum}}},
        {"inner_tolerance", s.inner_tolerance},
        {"outer_tolerance", s.outer_tolerance},
        {"max_outer_iterations", s.max_outer_iterations},
        {"max_newton_iterations", s.max_newton_iterations},
        {"max_prox_iterations", s.max_prox_iterations},
        {"lmi_margin", s.lmi_margin},
        {"p_floor", s.p_floor},
        {"ridge", s.ridge}}},
      {"local",
       {{"delta", c.local.delta}, {"xi", c.local.xi}, {"max_retries", c.local.max_retries}}},
      {"sparse",
       {{"betas", c.sparse.betas},
        {"distributed_beta", c.sparse.distributed_beta},
        {"init", to_string(c.sparse.init)}}},
      {"evaluation",
       {{"sequences", e.sequences},
        {"initial_mode", e.initial_mode},
        {"jump_law", to_string(e.jump_law)},
        {"dwell_steps", e.dwell_steps},
        {"switched_hz", e.switched_hz},
        {"switched_duration", e.switched_duration},
        {"growth_check_time", e.growth_check_time},
        {"fixed_hz", e.fixed_hz},
        {"fixed_duration", e.fixed_duration},
        {"fixed_modes", e.fixed_modes},
        {"csv_sequences", e.csv_sequences}}},
  };
}

std::string experiment_hash(const ExperimentConfig& config) {
  json echo = experiment_echo(config);
  echo.erase("network");
  const io::NetworkFile network = io::load_network(config.network_path);
  echo["network_contents"] = io::network_to_json(network.network, network.step_h);
  return io::stable_hash(echo.dump());
}

}  // namespace swingsynth::cli
