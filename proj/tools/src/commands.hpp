#pragma once

#include <iosfwd>
#include <string>

#include "settings.hpp"

namespace tenshape::cli {

// Each command validates every input before creating the output directory,
// returns an ExitCode and throws ConfigError / ConfigFileError / IoError /
// DivergenceError / SensorSourceError for the caller to map.
int cmd_estimate(const Settings& settings, std::ostream& log);
int cmd_restarts(const Settings& settings, std::ostream& log);
int cmd_perturb(const Settings& settings, std::ostream& log);

struct BenchOptions {
  int repeats = 3;
  double target_ms = 7.36;
};
int cmd_bench(const Settings& settings, const BenchOptions& options, std::ostream& log);

// Recomputes the numbers in out_dir/report.json from the files next to it.
struct VerifyOptions {
  double relative_tolerance = 1e-9;
};
int cmd_verify(const std::string& out_dir, const VerifyOptions& options, std::ostream& log);

struct GenOptions {
  std::string fixture = "prism";  // prism | tm40
  std::string out_dir = "fixture";
  std::string motion = "static";  // static | tilt | bend

  int struts = 3;
  double radius = 0.2;
  double height = 0.3;
  double ring_stiffness = 1.0;
  double vertical_stiffness = 3.0;

  int layers = 5;
  double passive_stiffness = 1.0;
  double active_stiffness = 27.0 / 140.0;

  double rate_hz = 80.0;
  double duration_s = 0.0;      // <= 0: 10 s static, else hold + two cycles
  double frame_rate_hz = 10.0;  // truth_frames.csv sampling
  double amplitude = 0.0;       // <= 0: per-motion default
  double frequency_hz = 0.25;   // tilt
  double period_s = 16.0;       // bend
  double hold_s = 8.0;          // static lead before the motion starts
  double accel_sigma = 0.0;
  double gyro_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  int steps = 0;  // config.json steps, 0: derived
};
int cmd_gen(const GenOptions& options, std::ostream& log);

}  // namespace tenshape::cli
