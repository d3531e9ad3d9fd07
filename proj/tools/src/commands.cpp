#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include "artifacts.hpp"
#include "tenshape/energy.hpp"
#include "tenshape/estimator.hpp"
#include "tenshape/kinematics.hpp"
#include "tenshape/model.hpp"
#include "tenshape/sensing.hpp"
#include "tenshape/synth.hpp"

namespace tenshape::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kBlock = 20;

std::string run_id(const std::string& command, const json& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : command + config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return command + "-" + buf;
}

StructureSpec load_spec(const std::string& path) {
  if (path.empty()) throw ConfigError("--structure is required");
  if (!fs::is_regular_file(path)) throw IoError("cannot open structure file '" + path + "'");
  try {
    return load_structure(path);
  } catch (const StructureError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Recorded streams are replayed; tcp:PORT feeds a live filter bank.
class Feed {
 public:
  Feed(const Settings& s, int strut_count, std::ostream& log)
      : strut_count_(strut_count), settings_(s), filter_(s.filter_config()) {
    if (s.sensors.empty()) throw ConfigError("--sensors is required");
    if (s.sensors.rfind("tcp:", 0) == 0) {
      open_tcp(s.sensors.substr(4), log);
      return;
    }
    StreamParseResult parsed;
    if (s.sensors == "-") {
      parsed = parse_sensor_stream(std::cin, strut_count);
    } else {
      std::ifstream in(s.sensors);
      if (!in) throw IoError("cannot open sensor stream '" + s.sensors + "'");
      parsed = parse_sensor_stream(in, strut_count);
    }
    for (const auto& w : parsed.warnings) log << "warning: " << w << '\n';
    stats_ = {{"samples", parsed.samples.size()},
              {"malformed", parsed.malformed},
              {"out_of_order", parsed.out_of_order}};
    samples_ = std::move(parsed.samples);
    if (samples_.empty()) throw SensorSourceError(0, "no valid samples in '" + s.sensors + "'");
    t0_ = samples_.front().t;
    for (const auto& x : samples_) t0_ = std::min(t0_, x.t);
    std::vector<bool> seen(static_cast<std::size_t>(strut_count), false);
    for (const auto& x : samples_) seen[static_cast<std::size_t>(x.strut)] = true;
    for (int i = 0; i < strut_count; ++i) {
      if (!seen[static_cast<std::size_t>(i)]) {
        throw SensorSourceError(0, "no samples for strut " + std::to_string(i + 1));
      }
    }
  }

  bool live() const { return live_ != nullptr; }
  const json& stats() const { return stats_; }

  double time_at(int step) const {
    if (live()) return step * settings_.step_dt;
    return t0_ + settings_.lead_in + step * settings_.step_dt;
  }

  std::unique_ptr<InclinationSource> make_source() const {
    if (live()) return std::make_unique<Forward>(live_);
    return std::make_unique<StreamReplaySource>(samples_, strut_count_, settings_.step_dt,
                                                settings_.lead_in, filter_);
  }

 private:
  struct Live {
    LiveSource source;
    TcpLineServer server;
    std::size_t bad = 0;
    Live(int n, FilterConfig f, double timeout, int port)
        : source(n, f, timeout), server(port) {}
  };

  class Forward final : public InclinationSource {
   public:
    explicit Forward(std::shared_ptr<Live> live) : live_(std::move(live)) {}
    std::vector<double> inclinations(int step) override {
      return live_->source.inclinations(step);
    }

   private:
    std::shared_ptr<Live> live_;
  };

  void open_tcp(const std::string& port_text, std::ostream& log) {
    int port = -1;
    try {
      std::size_t used = 0;
      port = std::stoi(port_text, &used);
      if (used != port_text.size()) port = -1;
    } catch (const std::exception&) {
      port = -1;
    }
    if (port < 0 || port > 65535) throw ConfigError("bad tcp port '" + port_text + "'");
    try {
      live_ = std::make_shared<Live>(strut_count_, filter_, settings_.tcp_timeout, port);
    } catch (const std::exception& e) {
      throw IoError(std::string("tcp: ") + e.what());
    }
    log << "listening on 127.0.0.1:" << live_->server.port() << std::endl;
    stats_ = {{"tcp_port", live_->server.port()}};
    // The reader owns a reference, so it may outlive the run harmlessly.
    std::thread([live = live_] {
      live->server.serve([&](std::string_view line) {
        if (line.empty() || line.front() == '#' || line.rfind("t,", 0) == 0) return;
        const auto sample = parse_sensor_record(line);
        if (!sample) {
          ++live->bad;
          return;
        }
        try {
          live->source.bank().push(*sample);
        } catch (const UnknownStrutError&) {
          ++live->bad;
        }
      });
    }).detach();
  }

  int strut_count_;
  Settings settings_;
  FilterConfig filter_;
  std::vector<ImuSample> samples_;
  double t0_ = 0.0;
  std::shared_ptr<Live> live_;
  json stats_;
};

// truth_nodes.csv (one static frame) or truth_frames.csv.
std::vector<Frame> load_truth(const std::string& path, int node_count) {
  if (path.empty()) return {};
  std::ifstream probe(path);
  if (!probe) throw IoError("cannot open truth file '" + path + "'");
  std::string header;
  std::getline(probe, header);
  std::vector<Frame> frames;
  if (header.rfind("t,", 0) == 0) {
    frames = read_frames_csv(path);
  } else {
    frames.push_back({0, std::nan(""), read_nodes_csv(path)});
  }
  if (frames.empty()) throw IoError("truth file '" + path + "' holds no nodes");
  for (const auto& f : frames) {
    if (f.nodes.size() != node_count) {
      throw IoError("truth file '" + path + "' has " + std::to_string(f.nodes.size()) +
                    " nodes, structure has " + std::to_string(node_count));
    }
  }
  return frames;
}

const Frame& nearest_frame(const std::vector<Frame>& frames, double t) {
  if (frames.size() == 1 || std::isnan(t)) return frames.back();
  const Frame* best = &frames.front();
  for (const auto& f : frames) {
    if (std::abs(f.t - t) < std::abs(best->t - t)) best = &f;
  }
  return *best;
}

double tip_x(const NodeSet& nodes, const std::vector<int>& top) {
  double x = 0.0;
  for (int id : top) x += nodes[id].x();
  return x / static_cast<double>(top.size());
}

std::vector<TraceRow> rows_of(const EstimationTrace& trace) {
  std::vector<TraceRow> rows;
  rows.push_back({0, trace.initial_energy, 0.0, 0.0, -1, 0.0, 0.0});
  for (const auto& r : trace.steps) {
    rows.push_back({r.step, r.energy, r.grad_position_norm, r.grad_yaw_norm, r.strut,
                    r.sweep_energy, r.seconds});
  }
  return rows;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json timing_of(const std::vector<double>& seconds) {
  json j;
  const double total = std::accumulate(seconds.begin(), seconds.end(), 0.0);
  j["total_s"] = total;
  j["mean_step_ms"] = seconds.empty() ? 0.0 : 1e3 * total / static_cast<double>(seconds.size());
  j["median_step_ms"] = 1e3 * median(seconds);
  const std::size_t blocks = seconds.size() / kBlock;
  double blocked = 0.0;
  for (std::size_t i = 0; i < blocks * kBlock; ++i) blocked += seconds[i];
  j["mean_block20_ms"] = blocks ? 1e3 * blocked / static_cast<double>(blocks) : 0.0;
  j["blocks20"] = blocks;
  return j;
}

// Everything here must be recomputable by `verify` from trace.csv alone.
json summary_of(const std::vector<TraceRow>& rows) {
  json j;
  auto peak = std::max_element(rows.begin(), rows.end(),
                               [](const TraceRow& a, const TraceRow& b) { return a.energy < b.energy; });
  auto sweep_peak =
      std::max_element(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) {
        return a.sweep_energy < b.sweep_energy;
      });
  j["initial_energy"] = rows.front().energy;
  j["peak_energy"] = peak->energy;
  j["peak_step"] = peak->step;
  j["peak_sweep_energy"] = sweep_peak->sweep_energy;
  j["peak_sweep_step"] = sweep_peak->step;
  j["final_energy"] = rows.back().energy;
  j["steps"] = rows.back().step;
  std::vector<double> secs;
  for (std::size_t i = 1; i < rows.size(); ++i) secs.push_back(rows[i].step_seconds);
  j["timing"] = timing_of(secs);
  return j;
}

json structure_json(const StructureSpec& spec, const std::string& path) {
  return {{"path", path},
          {"name", spec.name()},
          {"struts", spec.strut_count()},
          {"nodes", spec.node_count()},
          {"cables", spec.cable_count()}};
}

bool has_metric(const StructureSpec& spec) {
  return !spec.metric_nodes().top.empty() && !spec.metric_nodes().base.empty();
}

double length_of(const StructureSpec& spec, const NodeSet& nodes) {
  return manipulator_length(nodes, spec.metric_nodes().top, spec.metric_nodes().base);
}

json comparison(const StructureSpec& spec, const NodeSet& estimate, const NodeSet& truth) {
  const Alignment a = align_poses(estimate, truth, Reflection::kAllow);
  json j{{"mae_m", a.mae}, {"reflected", a.transform.reflected},
         {"rotation_rad", a.transform.rotation}};
  if (has_metric(spec)) {
    const double d = length_of(spec, estimate);
    const double dt = length_of(spec, truth);
    j["length_truth_m"] = dt;
    j["length_error_m"] = d - dt;
    j["length_error_pct"] = 100.0 * std::abs(d - dt) / dt;
  }
  return j;
}

json final_heatmap(const EstimationTrace& trace) {
  json rows = json::array();
  if (trace.heatmap.empty()) return rows;
  const auto& h = trace.heatmap.back();
  for (std::size_t i = 0; i < h.position.size(); ++i) {
    rows.push_back({{"strut", i + 1}, {"grad_p_mean", h.position[i]}, {"grad_theta_abs", h.yaw[i]}});
  }
  return rows;
}

struct RunArtifacts {
  EstimationTrace trace;
  NodeSet final_nodes;
  double position_rate = 0.0;
  double yaw_rate = 0.0;
};

RunArtifacts run_once(const StructureSpec& spec, const ConnectivityMatrix& conn,
                      EstimatorConfig config, const Feed& feed) {
  auto source = feed.make_source();
  RunArtifacts out;
  out.position_rate = config.position_rate;
  out.yaw_rate = config.yaw_rate;
  out.trace = run(spec, conn, config, *source);
  out.final_nodes = nodes_from_pose(spec, out.trace.final_pose);
  return out;
}

// Writes trace, heatmap, final nodes and frames into dir; returns file list.
json write_run(const std::string& dir, const StructureSpec& spec, const RunArtifacts& run,
               const Feed& feed) {
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
  write_trace_csv(p("trace.csv"), run.trace, spec.strut_count());
  write_heatmap_csv(p("heatmap.csv"), run.trace, spec.strut_count());
  write_nodes_csv(p("final_nodes.csv"), run.final_nodes);
  std::vector<Frame> frames;
  frames.push_back({0, feed.time_at(0), nodes_from_pose(spec, run.trace.initial_pose)});
  for (const auto& s : run.trace.snapshots) frames.push_back({s.step, feed.time_at(s.step), s.nodes});
  write_frames(p("frames"), frames);
  return json::array({"trace.csv", "heatmap.csv", "final_nodes.csv", "frames/index.csv"});
}

json effective_config(const Settings& s, const EstimatorConfig& c) {
  json j = s.to_json();
  j["resolved"] = {{"alpha", c.position_rate},
                   {"beta", c.yaw_rate},
                   {"init", std::string(to_string(c.init_mode))},
                   {"schedule", std::string(to_string(c.schedule))},
                   {"sweep", std::string(to_string(c.sweep_update))},
                   {"snapshot_every", c.snapshot_every}};
  return j;
}

struct Prepared {
  StructureSpec spec;
  ConnectivityMatrix conn;
  std::unique_ptr<Feed> feed;
  std::vector<Frame> truth;
  EstimatorConfig config;
};

Prepared prepare(const Settings& s, InitMode default_init, int default_snapshot,
                 std::ostream& log) {
  Prepared p;
  p.spec = load_spec(s.structure);
  p.conn = build_connectivity(p.spec);
  p.truth = load_truth(s.truth, p.spec.node_count());
  // Validate the cheap settings before touching the sensor source.
  s.filter_config();
  p.feed = std::make_unique<Feed>(s, p.spec.strut_count(), log);
  const auto phi0 = p.feed->make_source()->inclinations(0);
  p.config = s.estimator_config(p.spec, phi0, default_init);
  p.config.snapshot_every = s.snapshot_every >= 0 ? s.snapshot_every : default_snapshot;
  return p;
}

}  // namespace

int cmd_estimate(const Settings& s, std::ostream& log) {
  auto p = prepare(s, InitMode::kCollapsed, 100, log);
  const RunArtifacts r = run_once(p.spec, p.conn, p.config, *p.feed);

  json report;
  const json config = effective_config(s, p.config);
  report["run_id"] = run_id("estimate", config);
  report["command"] = "estimate";
  report["config"] = config;
  report["structure"] = structure_json(p.spec, s.structure);
  report["sensors"] = p.feed->stats();
  report["summary"] = summary_of(rows_of(r.trace));
  report["summary"]["converged"] = r.trace.converged;
  report["summary"]["steps_to_convergence"] = r.trace.steps_to_convergence;
  if (has_metric(p.spec)) report["length_m"] = length_of(p.spec, r.final_nodes);
  if (!p.truth.empty()) {
    const double t_end = p.feed->time_at(r.trace.steps.empty() ? 0 : r.trace.steps.back().step);
    report["truth"] = comparison(p.spec, r.final_nodes, nearest_frame(p.truth, t_end).nodes);
  }
  report["heatmap_final"] = final_heatmap(r.trace);
  report["files"] = write_run(s.out_dir, p.spec, r, *p.feed);
  write_json((fs::path(s.out_dir) / "report.json").string(), report);

  log << "estimate: " << r.trace.steps.size() << " steps, energy "
      << format_double(r.trace.initial_energy) << " -> " << format_double(r.trace.final_energy())
      << (r.trace.converged ? " (converged)" : " (not converged)") << '\n';
  if (report.contains("truth")) log << "  MAE vs truth " << report["truth"]["mae_m"] << " m\n";
  return kExitOk;
}

int cmd_restarts(const Settings& s, std::ostream& log) {
  std::vector<std::uint64_t> seeds = s.seeds;
  if (seeds.empty()) {
    for (int i = 0; i < s.restarts; ++i) seeds.push_back(s.seed + static_cast<std::uint64_t>(i));
  }
  if (seeds.size() < 2) throw ConfigError("restarts needs at least 2 runs");
  if (s.jobs < 1) throw ConfigError("--jobs must be >= 1");
  if (s.sensors.rfind("tcp:", 0) == 0) throw ConfigError("restarts needs a recorded stream");

  auto p = prepare(s, InitMode::kRandom, 0, log);
  std::vector<RunArtifacts> runs(seeds.size());
  for (std::size_t next = 0; next < seeds.size();) {
    std::vector<std::future<RunArtifacts>> batch;
    for (int j = 0; j < s.jobs && next < seeds.size(); ++j, ++next) {
      EstimatorConfig c = p.config;
      c.seed = seeds[next];
      batch.push_back(std::async(s.jobs > 1 ? std::launch::async : std::launch::deferred,
                                 [&, c] { return run_once(p.spec, p.conn, c, *p.feed); }));
    }
    const std::size_t first = next - batch.size();
    for (std::size_t j = 0; j < batch.size(); ++j) runs[first + j] = batch[j].get();
  }

  json report;
  const json config = effective_config(s, p.config);
  report["run_id"] = run_id("restarts", config);
  report["command"] = "restarts";
  report["config"] = config;
  report["structure"] = structure_json(p.spec, s.structure);
  report["sensors"] = p.feed->stats();

  json list = json::array();
  std::vector<double> finals;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    char dir[32];
    std::snprintf(dir, sizeof(dir), "runs/%02zu", i);
    json entry;
    entry["seed"] = seeds[i];
    entry["dir"] = dir;
    entry["summary"] = summary_of(rows_of(runs[i].trace));
    entry["summary"]["converged"] = runs[i].trace.converged;
    entry["summary"]["steps_to_convergence"] = runs[i].trace.steps_to_convergence;
    if (!p.truth.empty()) entry["truth"] = comparison(p.spec, runs[i].final_nodes, p.truth.back().nodes);
    entry["files"] = write_run((fs::path(s.out_dir) / dir).string(), p.spec, runs[i], *p.feed);
    finals.push_back(runs[i].trace.final_energy());
    list.push_back(std::move(entry));
  }
  report["runs"] = list;

  const double n = static_cast<double>(finals.size());
  const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / n;
  double var = 0.0;
  for (double e : finals) var += (e - mean) * (e - mean);
  const double sd = std::sqrt(var / n);
  double mae_sum = 0.0, mae_max = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      const double m = align_poses(runs[b].final_nodes, runs[a].final_nodes).mae;
      mae_sum += m;
      mae_max = std::max(mae_max, m);
      ++pairs;
    }
  }
  const auto converged = std::count_if(runs.begin(), runs.end(),
                                       [](const RunArtifacts& r) { return r.trace.converged; });
  report["statistics"] = {{"runs", runs.size()},
                          {"converged", converged},
                          {"energy_mean", mean},
                          {"energy_std", sd},
                          {"energy_cv", mean != 0.0 ? sd / std::abs(mean) : 0.0},
                          {"energy_min", *std::min_element(finals.begin(), finals.end())},
                          {"energy_max", *std::max_element(finals.begin(), finals.end())},
                          {"pairwise_mae_mean_m", mae_sum / pairs},
                          {"pairwise_mae_max_m", mae_max}};
  write_json((fs::path(s.out_dir) / "report.json").string(), report);

  log << "restarts: " << runs.size() << " runs, " << converged << " converged, energy "
      << format_double(mean) << " +- " << format_double(sd) << '\n';
  return kExitOk;
}

int cmd_perturb(const Settings& s, std::ostream& log) {
  auto p = prepare(s, InitMode::kCollapsed, s.refresh, log);
  const RunArtifacts r = run_once(p.spec, p.conn, p.config, *p.feed);

  json report;
  const json config = effective_config(s, p.config);
  report["run_id"] = run_id("perturb", config);
  report["command"] = "perturb";
  report["config"] = config;
  report["structure"] = structure_json(p.spec, s.structure);
  report["sensors"] = p.feed->stats();
  report["summary"] = summary_of(rows_of(r.trace));
  report["summary"]["converged"] = r.trace.converged;
  report["summary"]["steps_to_convergence"] = r.trace.steps_to_convergence;
  if (has_metric(p.spec)) report["length_m"] = length_of(p.spec, r.final_nodes);
  report["files"] = write_run(s.out_dir, p.spec, r, *p.feed);

  if (!p.truth.empty()) {
    // Tip motion is measured from the truth at rest for both shapes.
    const bool tip = has_metric(p.spec);
    const auto& top = p.spec.metric_nodes().top;
    const double rest = tip ? tip_x(p.truth.front().nodes, top) : 0.0;
    json frames = json::array();
    double max_truth_dx = 0.0;
    std::vector<std::pair<double, double>> dx;
    double mae_sum = 0.0;
    for (const auto& snap : r.trace.snapshots) {
      const double t = p.feed->time_at(snap.step);
      const Frame& truth = nearest_frame(p.truth, t);
      const double mae = align_poses(snap.nodes, truth.nodes).mae;
      mae_sum += mae;
      json f{{"step", snap.step}, {"t", t}, {"truth_t", truth.t}, {"mae_m", mae}};
      if (tip) {
        const double te = tip_x(snap.nodes, top) - rest;
        const double tt = tip_x(truth.nodes, top) - rest;
        f["tip_dx_m"] = te;
        f["truth_tip_dx_m"] = tt;
        dx.emplace_back(te, tt);
        max_truth_dx = std::max(max_truth_dx, std::abs(tt));
      }
      frames.push_back(std::move(f));
    }
    json tracking{{"frames", frames.size()},
                  {"mae_mean_m", frames.empty() ? 0.0 : mae_sum / static_cast<double>(frames.size())}};
    if (tip && max_truth_dx > 0.0) {
      // The estimate trails the truth by a fraction of a second, so only
      // instants displaced by at least half the swing carry a usable sign.
      int checked = 0, agree = 0;
      for (const auto& [te, tt] : dx) {
        if (std::abs(tt) < 0.5 * max_truth_dx) continue;
        ++checked;
        if ((te > 0.0) == (tt > 0.0)) ++agree;
      }
      tracking["sign_checked"] = checked;
      tracking["sign_agree"] = agree;
    }
    report["tracking"] = tracking;
    report["tracking_frames"] = frames;
  }
  write_json((fs::path(s.out_dir) / "report.json").string(), report);

  log << "perturb: " << r.trace.steps.size() << " steps, " << r.trace.snapshots.size()
      << " frames";
  if (report.contains("tracking") && report["tracking"].contains("sign_checked")) {
    log << ", tip sign agreement " << report["tracking"]["sign_agree"] << "/"
        << report["tracking"]["sign_checked"];
  }
  log << '\n';
  return kExitOk;
}

int cmd_bench(const Settings& s, const BenchOptions& o, std::ostream& log) {
  if (s.steps < 100) throw ConfigError("bench needs --steps >= 100");
  if (o.repeats < 1) throw ConfigError("bench needs --repeats >= 1");
  const StructureSpec spec = load_spec(s.structure);
  const ConnectivityMatrix conn = build_connectivity(spec);

  std::vector<double> phi;
  std::unique_ptr<Feed> feed;
  if (!s.sensors.empty()) {
    feed = std::make_unique<Feed>(s, spec.strut_count(), log);
    phi = feed->make_source()->inclinations(0);
  } else {
    phi.assign(static_cast<std::size_t>(spec.strut_count()), 0.5);
  }
  EstimatorConfig c = s.estimator_config(spec, phi, InitMode::kCollapsed);
  c.tol_position = std::numeric_limits<double>::min();
  c.tol_yaw = std::numeric_limits<double>::min();
  c.record_heatmap = false;
  c.snapshot_every = 0;

  json reps = json::array();
  std::vector<double> all;
  std::vector<double> means;
  for (int rep = 0; rep < o.repeats; ++rep) {
    std::unique_ptr<InclinationSource> src;
    if (feed) src = feed->make_source();
    else src = std::make_unique<FixedInclinations>(phi);
    const auto trace = run(spec, conn, c, *src);
    std::vector<double> secs;
    for (const auto& r : trace.steps) secs.push_back(r.seconds);
    json t = timing_of(secs);
    means.push_back(t["mean_step_ms"].get<double>());
    reps.push_back(t);
    all.insert(all.end(), secs.begin(), secs.end());
  }
  json report;
  report["command"] = "bench";
  report["structure"] = structure_json(spec, s.structure);
  report["steps"] = s.steps;
  report["schedule"] = std::string(to_string(c.schedule));
  report["repeats"] = reps;
  report["overall"] = timing_of(all);
  const double mm = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  double spread = 0.0;
  for (double m : means) spread = std::max(spread, std::abs(m - mm));
  report["repeat_spread_ms"] = spread;
  report["target_step_ms"] = o.target_ms;
  const double mean_ms = report["overall"]["mean_step_ms"].get<double>();
  report["within_target"] = mean_ms <= o.target_ms;

  if (!s.out_dir.empty()) {
    fs::create_directories(s.out_dir);
    write_json((fs::path(s.out_dir) / "bench.json").string(), report);
  }
  log << "bench " << spec.name() << " (" << spec.strut_count() << " struts, " << s.steps
      << " steps x " << o.repeats << "): mean " << mean_ms << " ms/step, median "
      << report["overall"]["median_step_ms"].get<double>() << " ms/step, "
      << report["overall"]["mean_block20_ms"].get<double>() << " ms per 20 steps; target "
      << o.target_ms << " ms/step " << (mean_ms <= o.target_ms ? "met" : "NOT met") << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

namespace {

class Checker {
 public:
  Checker(double tol, std::ostream& log) : tol_(tol), log_(log) {}

  void number(const std::string& what, const json& reported, double recomputed) {
    ++checked_;
    if (!reported.is_number()) return fail(what + ": missing in report");
    const double r = reported.get<double>();
    const double scale = std::max({std::abs(r), std::abs(recomputed), 1e-300});
    if (std::abs(r - recomputed) > tol_ * scale && std::abs(r - recomputed) > 1e-15) {
      fail(what + ": report " + format_double(r) + ", recomputed " + format_double(recomputed));
    }
  }
  void equal(const std::string& what, const json& reported, const json& recomputed) {
    ++checked_;
    if (reported != recomputed) {
      fail(what + ": report " + reported.dump() + ", recomputed " + recomputed.dump());
    }
  }
  void fail(const std::string& msg) {
    ++failed_;
    log_ << "mismatch: " << msg << '\n';
  }
  int checked() const { return checked_; }
  int failed() const { return failed_; }

 private:
  double tol_;
  std::ostream& log_;
  int checked_ = 0;
  int failed_ = 0;
};

void check_summary(Checker& c, const std::string& prefix, const json& reported,
                   const std::vector<TraceRow>& rows) {
  if (rows.empty()) return c.fail(prefix + "trace is empty");
  const json re = summary_of(rows);
  for (const char* key : {"initial_energy", "peak_energy", "peak_sweep_energy", "final_energy"}) {
    c.number(prefix + key, reported.value(key, json()), re[key].get<double>());
  }
  for (const char* key : {"peak_step", "peak_sweep_step", "steps"}) {
    c.equal(prefix + key, reported.value(key, json()), re[key]);
  }
  const json& rt = reported.value("timing", json::object());
  for (const char* key : {"total_s", "mean_step_ms", "median_step_ms", "mean_block20_ms"}) {
    c.number(prefix + "timing." + key, rt.value(key, json()), re["timing"][key].get<double>());
  }
  if (reported.value("converged", false)) {
    c.equal(prefix + "steps_to_convergence", reported.value("steps_to_convergence", json()),
            re["steps"]);
  }
}

void check_run_dir(Checker& c, const std::string& prefix, const fs::path& dir, const json& entry,
                   const StructureSpec& spec, const ConnectivityMatrix& conn,
                   const std::vector<Frame>& truth) {
  const auto rows = read_trace_csv((dir / "trace.csv").string());
  check_summary(c, prefix + "summary.", entry.value("summary", json::object()), rows);
  if (!fs::is_regular_file(dir / "heatmap.csv")) c.fail(prefix + "heatmap.csv missing");

  const NodeSet final_nodes = read_nodes_csv((dir / "final_nodes.csv").string());
  if (final_nodes.size() != spec.node_count()) return c.fail(prefix + "final_nodes.csv size");
  c.number(prefix + "final energy of final_nodes.csv",
           json(evaluate_energy(spec, conn, final_nodes).total), rows.back().energy);
  if (entry.contains("length_m") && has_metric(spec)) {
    c.number(prefix + "length_m", entry["length_m"], length_of(spec, final_nodes));
  }
  if (entry.contains("truth") && !truth.empty() && truth.size() == 1) {
    const json re = comparison(spec, final_nodes, truth.back().nodes);
    c.number(prefix + "truth.mae_m", entry["truth"].value("mae_m", json()), re["mae_m"].get<double>());
    if (re.contains("length_error_pct")) {
      c.number(prefix + "truth.length_error_pct", entry["truth"].value("length_error_pct", json()),
               re["length_error_pct"].get<double>());
    }
  }

  // Every frame's energy must reproduce the trace row of its step.
  std::ifstream index(dir / "frames" / "index.csv");
  if (!index) return c.fail(prefix + "frames/index.csv missing");
  std::string line;
  std::getline(index, line);
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    int frame = 0, step = 0;
    if (std::sscanf(line.c_str(), "%d,%d", &frame, &step) != 2) {
      c.fail(prefix + "bad frames/index.csv line '" + line + "'");
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "%04d.csv", frame);
    const NodeSet nodes = read_nodes_csv((dir / "frames" / name).string());
    auto row = std::find_if(rows.begin(), rows.end(), [&](const TraceRow& r) { return r.step == step; });
    if (row == rows.end()) {
      c.fail(prefix + "frame " + std::to_string(frame) + " step not in trace");
      continue;
    }
    c.number(prefix + "frame " + std::to_string(frame) + " energy",
             json(evaluate_energy(spec, conn, nodes).total), row->energy);
  }
}

}  // namespace

int cmd_verify(const std::string& out_dir, const VerifyOptions& o, std::ostream& log) {
  const fs::path dir(out_dir);
  const json report = read_json((dir / "report.json").string());
  const std::string command = report.value("command", "");
  if (command != "estimate" && command != "perturb" && command != "restarts") {
    throw IoError("report.json: cannot verify command '" + command + "'");
  }
  const json& config = report.at("config");
  const StructureSpec spec = load_spec(config.at("structure").get<std::string>());
  const ConnectivityMatrix conn = build_connectivity(spec);
  const std::string truth_path = config.value("truth", "");
  const auto truth = load_truth(truth_path, spec.node_count());

  Checker c(o.relative_tolerance, log);
  c.equal("run_id", report.value("run_id", json()), json(run_id(command, config)));
  if (command == "restarts") {
    std::vector<double> finals;
    for (const auto& entry : report.at("runs")) {
      const std::string sub = entry.at("dir").get<std::string>();
      check_run_dir(c, sub + ": ", dir / sub, entry, spec, conn, truth);
      finals.push_back(read_trace_csv((dir / sub / "trace.csv").string()).back().energy);
    }
    const double n = static_cast<double>(finals.size());
    const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / n;
    double var = 0.0;
    for (double e : finals) var += (e - mean) * (e - mean);
    const json& st = report.at("statistics");
    c.number("statistics.energy_mean", st.value("energy_mean", json()), mean);
    c.number("statistics.energy_std", st.value("energy_std", json()), std::sqrt(var / n));
  } else {
    json entry = report;
    check_run_dir(c, "", dir, entry, spec, conn, truth);
  }
  log << "verify: " << c.checked() << " checks, " << c.failed() << " mismatches\n";
  return c.failed() ? kExitVerifyMismatch : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_gen(const GenOptions& o, std::ostream& log) {
  if (o.motion != "static" && o.motion != "tilt" && o.motion != "bend") {
    throw ConfigError("--motion must be static, tilt or bend");
  }
  double duration = o.duration_s;
  if (duration <= 0.0) {
    if (o.motion == "static") duration = 10.0;
    else duration = o.hold_s + 2.0 * (o.motion == "tilt" ? 1.0 / o.frequency_hz : o.period_s);
  }
  if (!(o.rate_hz > 0.0) || !(duration > 0.0) || !(o.frame_rate_hz > 0.0)) {
    throw ConfigError("rates and duration must be positive");
  }
  if (o.accel_sigma < 0.0 || o.gyro_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  if (o.hold_s < 0.0) throw ConfigError("--hold must be >= 0");

  synth::SyntheticScenario sc;
  try {
    if (o.fixture == "prism") {
      synth::PrismOptions po;
      po.ring_stiffness = o.ring_stiffness;
      po.vertical_stiffness = o.vertical_stiffness;
      sc = synth::make_prism(o.struts, o.radius, o.height, 5.0 * std::acos(-1.0) / 6.0, po);
    } else if (o.fixture == "tm40") {
      synth::Tm40Options to;
      to.passive_stiffness = o.passive_stiffness;
      to.active_stiffness = o.active_stiffness;
      sc = synth::make_tm40_like(o.layers, 4, {0.33, 0.39}, to);
    } else {
      throw ConfigError("fixture must be prism or tm40");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const StructureError& e) {
    throw ConfigError(e.what());
  }

  const bool prism = o.fixture == "prism";
  if (o.motion == "tilt") {
    sc.path = synth::sinusoidal_tilt(sc.truth_pose, o.amplitude > 0.0 ? o.amplitude : 0.1,
                                     o.frequency_hz);
  } else if (o.motion == "bend") {
    sc.path = synth::bend_path(sc.spec, sc.truth_pose,
                               o.amplitude > 0.0 ? o.amplitude : (prism ? 0.5 : 0.3), o.period_s);
  }
  if (sc.path && o.hold_s > 0.0) sc.path = synth::hold_then(sc.path, o.hold_s);
  sc.noise = {o.accel_sigma, o.gyro_sigma, o.noise_seed};

  const auto samples = synth::emit_imu_stream(sc, o.rate_hz, duration);
  std::vector<Frame> frames;
  const int frame_count = static_cast<int>(std::floor(duration * o.frame_rate_hz + 1e-9)) + 1;
  for (int f = 0; f < (sc.is_static() ? 1 : frame_count); ++f) {
    const double t = f / o.frame_rate_hz;
    frames.push_back({0, t, synth::truth_nodes_at(sc, t)});
  }
  const auto rates = synth::recommended_rates(sc.spec, synth::inclinations_of(sc.truth_pose));
  Settings defaults;
  int steps = o.steps;
  if (steps <= 0) {
    steps = sc.is_static() ? (prism ? 2000 : 20000)
                           : static_cast<int>((duration - defaults.lead_in) / defaults.step_dt);
  }

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  save_structure(sc.spec, (dir / "structure.txt").string());
  {
    std::ofstream out(dir / "sensors.csv");
    if (!out) throw IoError("cannot write '" + (dir / "sensors.csv").string() + "'");
    write_sensor_stream(out, samples);
  }
  write_nodes_csv((dir / "truth_nodes.csv").string(), sc.truth_nodes);
  write_frames_csv((dir / "truth_frames.csv").string(), frames);
  json config{{"structure", "structure.txt"},
              {"sensors", "sensors.csv"},
              {"truth", sc.is_static() ? "truth_nodes.csv" : "truth_frames.csv"},
              {"alpha", rates.position},
              {"beta", rates.yaw},
              {"steps", steps}};
  write_json((dir / "config.json").string(), config);

  log << "gen " << o.fixture << " (" << sc.spec.strut_count() << " struts, "
      << sc.spec.cable_count() << " cables, motion " << o.motion << "): " << samples.size()
      << " samples, " << frames.size() << " truth frames -> " << o.out_dir << '\n';
  return kExitOk;
}

}  // namespace tenshape::cli
