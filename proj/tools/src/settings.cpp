#include "settings.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

#include "tenshape/synth.hpp"

namespace tenshape::cli {
namespace fs = std::filesystem;

namespace {

double parse_rate(const std::string& text, double automatic, const char* name) {
  if (text == "auto") return automatic;
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(name) + " must be a number or 'auto', got '" + text + "'");
  }
  return v;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || path == "-" || path.rfind("tcp:", 0) == 0) return path;
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::string rate_text(const nlohmann::json& v, const char* key) {
  if (v.is_number()) return nlohmann::json(v.get<double>()).dump();
  if (v.is_string()) return v.get<std::string>();
  throw ConfigFileError(std::string("config key '") + key + "' must be a number or \"auto\"");
}

}  // namespace

FilterConfig Settings::filter_config() const {
  FilterConfig f;
  f.time_constant = time_constant;
  f.sample_period = sample_period;
  if (!(time_constant > 0.0) || !(sample_period > 0.0)) {
    throw ConfigError("filter time constant and sample period must be positive");
  }
  return f;
}

EstimatorConfig Settings::estimator_config(const StructureSpec& spec,
                                           const std::vector<double>& inclinations,
                                           InitMode default_init) const {
  EstimatorConfig c;
  c.schedule = parse_schedule(schedule);
  c.sweep_update = parse_sweep_update(sweep);
  const auto automatic = synth::recommended_rates(spec, inclinations, c.schedule);
  c.position_rate = parse_rate(alpha, automatic.position, "alpha");
  c.yaw_rate = parse_rate(beta, automatic.yaw, "beta");
  c.max_steps = steps;
  c.tol_position = tol_p;
  c.tol_yaw = tol_theta;
  c.shuffle_order = shuffle;
  c.sensor_refresh_period = refresh;
  c.init_mode = init ? parse_init_mode(*init) : default_init;
  c.seed = seed;
  c.auto_backoff = auto_backoff;
  c.divergence_factor = divergence_factor;
  c.snapshot_every = 0;
  c.validate();
  if (!(step_dt > 0.0)) throw ConfigError("step_dt must be positive");
  if (lead_in < 0.0) throw ConfigError("lead_in must be >= 0");
  return c;
}

nlohmann::json Settings::to_json() const {
  nlohmann::json j;
  j["structure"] = structure;
  j["sensors"] = sensors;
  j["truth"] = truth;
  j["out_dir"] = out_dir;
  j["steps"] = steps;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["schedule"] = schedule;
  j["sweep"] = sweep;
  j["shuffle"] = shuffle;
  j["refresh"] = refresh;
  j["init"] = init ? nlohmann::json(*init) : nlohmann::json(nullptr);
  j["seed"] = seed;
  j["tol_p"] = tol_p;
  j["tol_theta"] = tol_theta;
  j["auto_backoff"] = auto_backoff;
  j["divergence_factor"] = divergence_factor;
  j["snapshot_every"] = snapshot_every;
  j["step_dt"] = step_dt;
  j["lead_in"] = lead_in;
  j["time_constant"] = time_constant;
  j["sample_period"] = sample_period;
  j["tcp_timeout"] = tcp_timeout;
  j["restarts"] = restarts;
  j["seeds"] = seeds;
  j["jobs"] = jobs;
  return j;
}

void apply_config(Settings& s, const nlohmann::json& config, const std::string& base_dir) {
  if (!config.is_object()) throw ConfigFileError("config file must hold a JSON object");
  for (const auto& [key, v] : config.items()) {
    try {
      if (key == "structure") s.structure = resolve(v.get<std::string>(), base_dir);
      else if (key == "sensors") s.sensors = resolve(v.get<std::string>(), base_dir);
      else if (key == "truth") s.truth = resolve(v.get<std::string>(), base_dir);
      else if (key == "out_dir") s.out_dir = resolve(v.get<std::string>(), base_dir);
      else if (key == "steps") s.steps = v.get<int>();
      else if (key == "alpha") s.alpha = rate_text(v, "alpha");
      else if (key == "beta") s.beta = rate_text(v, "beta");
      else if (key == "schedule") s.schedule = v.get<std::string>();
      else if (key == "sweep") s.sweep = v.get<std::string>();
      else if (key == "shuffle") s.shuffle = v.get<bool>();
      else if (key == "refresh") s.refresh = v.get<int>();
      else if (key == "init") s.init = v.get<std::string>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "tol_p") s.tol_p = v.get<double>();
      else if (key == "tol_theta") s.tol_theta = v.get<double>();
      else if (key == "auto_backoff") s.auto_backoff = v.get<bool>();
      else if (key == "divergence_factor") s.divergence_factor = v.get<double>();
      else if (key == "snapshot_every") s.snapshot_every = v.get<int>();
      else if (key == "step_dt") s.step_dt = v.get<double>();
      else if (key == "lead_in") s.lead_in = v.get<double>();
      else if (key == "time_constant") s.time_constant = v.get<double>();
      else if (key == "sample_period") s.sample_period = v.get<double>();
      else if (key == "tcp_timeout") s.tcp_timeout = v.get<double>();
      else if (key == "restarts") s.restarts = v.get<int>();
      else if (key == "seeds") s.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "jobs") s.jobs = v.get<int>();
      else throw ConfigFileError("unknown config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigFileError("config key '" + key + "': " + e.what());
    }
  }
}

void apply_config_file(Settings& settings, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigFileError("config file '" + path + "': " + e.what());
  }
  apply_config(settings, j, fs::path(path).parent_path().string());
}

}  // namespace tenshape::cli
