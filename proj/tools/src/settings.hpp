#pragma once

// Run settings shared by every subcommand. Precedence: command-line flags,
// then the JSON config file, then these defaults.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tenshape/estimator.hpp"
#include "tenshape/sensing.hpp"

namespace tenshape::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
  kExitDivergence = 5,
  kExitSensor = 6,
  kExitVerifyMismatch = 7,
};

class ConfigFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string structure;
  std::string sensors;  // path, "-" for stdin, or "tcp:PORT"
  std::string truth;    // truth_nodes.csv (estimate) or truth_frames.csv (perturb)
  std::string out_dir = "out";

  int steps = 1000;
  // Numeric text or "auto" (curvature-scaled, see synth::recommended_rates).
  std::string alpha = "1e-3";
  std::string beta = "1e-3";
  std::string schedule = "per-strut";
  std::string sweep = "gauss-seidel";
  bool shuffle = false;
  int refresh = 20;
  std::optional<std::string> init;  // per-command default when unset
  std::uint64_t seed = 0;
  double tol_p = 1e-6;
  double tol_theta = 1e-6;
  bool auto_backoff = false;
  double divergence_factor = 1e6;
  int snapshot_every = -1;  // < 0: per-command default, 0: off

  // Replay clock: estimator step s reads the stream at
  // t0 + lead_in + s * step_dt.
  double step_dt = 0.00736;
  double lead_in = 1.0;
  double time_constant = 0.2;
  double sample_period = 0.0125;
  double tcp_timeout = 10.0;

  int restarts = 10;
  std::vector<std::uint64_t> seeds;  // overrides seed + i when non-empty
  int jobs = 1;

  FilterConfig filter_config() const;
  // Resolves "auto" rates against the given inclinations.
  EstimatorConfig estimator_config(const StructureSpec& spec,
                                   const std::vector<double>& inclinations,
                                   InitMode default_init) const;
  nlohmann::json to_json() const;
};

// Applies a JSON config object. Relative paths resolve against base_dir.
// Throws ConfigFileError on unknown keys or wrong types.
void apply_config(Settings& settings, const nlohmann::json& config, const std::string& base_dir);
void apply_config_file(Settings& settings, const std::string& path);

}  // namespace tenshape::cli
