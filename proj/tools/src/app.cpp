#include "app.hpp"

#include <filesystem>
#include <functional>
#include <ostream>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "settings.hpp"
#include "tenshape/estimator.hpp"
#include "tenshape/inclination_source.hpp"
#include "tenshape/model.hpp"

namespace tenshape::cli {
namespace {

// Flags are parsed into a scratch Settings and copied over the config-file
// values only when given on the command line.
struct Bindings {
  Settings* flags = nullptr;
  std::vector<std::pair<CLI::Option*, std::function<void(Settings&)>>> copies;
  CLI::Option* config = nullptr;
  std::string config_path;

  template <typename T>
  CLI::Option* option(CLI::App* app, const std::string& name, T Settings::*member,
                      const std::string& help) {
    auto* opt = app->add_option(name, flags->*member, help);
    Settings* src = flags;
    copies.emplace_back(opt, [src, member](Settings& dst) { dst.*member = src->*member; });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, bool Settings::*member,
                    const std::string& help) {
    auto* opt = app->add_flag(name, flags->*member, help);
    Settings* src = flags;
    copies.emplace_back(opt, [src, member](Settings& dst) { dst.*member = src->*member; });
    return opt;
  }

  Settings resolve() const {
    Settings s;
    if (!config_path.empty()) apply_config_file(s, config_path);
    for (const auto& [opt, copy] : copies) {
      if (opt->count() > 0) copy(s);
    }
    return s;
  }
};

void add_inputs(CLI::App* app, Bindings& b) {
  b.config = app->add_option("--config", b.config_path, "JSON config file (flags override it)");
  b.option(app, "--structure", &Settings::structure, "structure definition file");
  b.option(app, "--sensors", &Settings::sensors, "sensor stream: file, '-' for stdin, or tcp:PORT");
  b.option(app, "--out-dir", &Settings::out_dir, "output directory");
}

void add_estimator(CLI::App* app, Bindings& b) {
  b.option(app, "--truth", &Settings::truth, "truth_nodes.csv or truth_frames.csv");
  b.option(app, "--steps", &Settings::steps, "maximum number of steps");
  b.option(app, "--alpha", &Settings::alpha, "position learning rate, or 'auto'");
  b.option(app, "--beta", &Settings::beta, "yaw learning rate, or 'auto'");
  b.option(app, "--schedule", &Settings::schedule, "per-strut | full-batch");
  b.option(app, "--sweep", &Settings::sweep, "gauss-seidel | jacobi (per-strut schedule)");
  b.flag(app, "--shuffle", &Settings::shuffle, "shuffle the strut order each sweep");
  b.option(app, "--refresh", &Settings::refresh, "steps between sensor refreshes");
  b.option(app, "--init", &Settings::init, "collapsed | expanded | random");
  b.option(app, "--seed", &Settings::seed, "random seed");
  b.option(app, "--tol-p", &Settings::tol_p, "position gradient tolerance");
  b.option(app, "--tol-theta", &Settings::tol_theta, "yaw gradient tolerance");
  b.flag(app, "--auto-backoff", &Settings::auto_backoff, "halve the rates on an energy increase");
  b.option(app, "--divergence-factor", &Settings::divergence_factor,
           "abort when energy exceeds this multiple of the reference");
  b.option(app, "--snapshot-every", &Settings::snapshot_every, "frame period in steps, 0 = off");
  b.option(app, "--step-dt", &Settings::step_dt, "stream seconds per estimator step");
  b.option(app, "--lead-in", &Settings::lead_in, "stream seconds fused before step 0");
  b.option(app, "--time-constant", &Settings::time_constant, "filter time constant, s");
  b.option(app, "--sample-period", &Settings::sample_period, "filter sample period, s");
  b.option(app, "--tcp-timeout", &Settings::tcp_timeout, "seconds to wait for live data");
}

}  // namespace

int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensegrity shape estimation from strut inclinations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tenshape 0.1.0");

  Settings flags;
  std::vector<std::unique_ptr<Bindings>> all;
  auto bindings = [&] {
    all.push_back(std::make_unique<Bindings>());
    all.back()->flags = &flags;
    return all.back().get();
  };

  auto* estimate = app.add_subcommand("estimate", "estimate the shape from a sensor stream");
  auto* be = bindings();
  add_inputs(estimate, *be);
  add_estimator(estimate, *be);

  auto* restarts = app.add_subcommand("restarts", "repeat the estimate from random starts");
  auto* br = bindings();
  add_inputs(restarts, *br);
  add_estimator(restarts, *br);
  br->option(restarts, "-n,--runs", &Settings::restarts, "number of runs");
  br->option(restarts, "--seeds", &Settings::seeds, "explicit seeds (overrides --runs)");
  br->option(restarts, "--jobs", &Settings::jobs, "parallel workers");

  auto* perturb = app.add_subcommand("perturb", "track a time-varying stream, exporting frames");
  auto* bp = bindings();
  add_inputs(perturb, *bp);
  add_estimator(perturb, *bp);

  BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "time estimator steps");
  auto* bb = bindings();
  add_inputs(bench, *bb);
  add_estimator(bench, *bb);
  bench->add_option("--repeats", bench_opts.repeats, "timed repetitions");
  bench->add_option("--target-ms", bench_opts.target_ms, "per-step target, ms");

  std::string verify_dir = "out";
  VerifyOptions verify_opts;
  auto* verify = app.add_subcommand("verify", "recompute report numbers from the emitted files");
  verify->add_option("out_dir,--out-dir", verify_dir, "directory holding report.json");
  verify->add_option("--rtol", verify_opts.relative_tolerance, "relative tolerance");

  GenOptions gen_opts;
  auto* gen = app.add_subcommand("gen", "write a synthetic fixture");
  gen->add_option("fixture", gen_opts.fixture, "prism | tm40")->required();
  gen->add_option("--out-dir", gen_opts.out_dir, "output directory");
  gen->add_option("--motion", gen_opts.motion, "static | tilt | bend");
  gen->add_option("--struts", gen_opts.struts, "prism strut count");
  gen->add_option("--radius", gen_opts.radius, "prism radius, m");
  gen->add_option("--height", gen_opts.height, "prism height, m");
  gen->add_option("--ring-stiffness", gen_opts.ring_stiffness, "prism ring cable stiffness");
  gen->add_option("--vertical-stiffness", gen_opts.vertical_stiffness,
                  "prism vertical cable stiffness");
  gen->add_option("--layers", gen_opts.layers, "tm40 module count");
  gen->add_option("--passive", gen_opts.passive_stiffness, "tm40 passive cable stiffness");
  gen->add_option("--active", gen_opts.active_stiffness, "tm40 active cable stiffness");
  gen->add_option("--rate", gen_opts.rate_hz, "IMU rate, Hz");
  gen->add_option("--duration", gen_opts.duration_s, "stream length, s");
  gen->add_option("--frame-rate", gen_opts.frame_rate_hz, "truth frame rate, Hz");
  gen->add_option("--amplitude", gen_opts.amplitude, "tilt (rad) or bend (rad/m) amplitude");
  gen->add_option("--frequency", gen_opts.frequency_hz, "tilt frequency, Hz");
  gen->add_option("--period", gen_opts.period_s, "bend period, s");
  gen->add_option("--hold", gen_opts.hold_s, "static seconds before the motion starts");
  gen->add_option("--accel-sigma", gen_opts.accel_sigma, "accelerometer noise, m/s^2");
  gen->add_option("--gyro-sigma", gen_opts.gyro_sigma, "gyro noise, rad/s");
  gen->add_option("--noise-seed", gen_opts.noise_seed, "noise seed");
  gen->add_option("--steps", gen_opts.steps, "steps written to config.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(be->resolve(), out);
    if (restarts->parsed()) return cmd_restarts(br->resolve(), out);
    if (perturb->parsed()) return cmd_perturb(bp->resolve(), out);
    if (bench->parsed()) return cmd_bench(bb->resolve(), bench_opts, out);
    if (verify->parsed()) return cmd_verify(verify_dir, verify_opts, out);
    if (gen->parsed()) return cmd_gen(gen_opts, out);
  } catch (const ConfigFileError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const SensorSourceError& e) {
    err << "sensor error: " << e.what() << '\n';
    return kExitSensor;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace tenshape::cli
