#pragma once

// Files written under --out-dir and read back by `verify`.
//
//   report.json          summary, config echo, metrics
//   trace.csv            one row per step (row 0 is the initial pose)
//   heatmap.csv          step,strut,grad_p_mean,grad_theta_abs (long format)
//   frames/NNNN.csv      id,x,y,z per node; frames/index.csv maps frame -> step, t
//   final_nodes.csv      id,x,y,z of the final estimate

#include <string>
#include <vector>

#include "json.hpp"

#include "tenshape/estimator.hpp"
#include "tenshape/kinematics.hpp"

namespace tenshape::cli {

struct Frame {
  int step = 0;
  double t = 0.0;
  NodeSet nodes;
};

void write_trace_csv(const std::string& path, const EstimationTrace& trace, int strut_count);
void write_heatmap_csv(const std::string& path, const EstimationTrace& trace, int strut_count);
void write_nodes_csv(const std::string& path, const NodeSet& nodes);
void write_frames(const std::string& dir, const std::vector<Frame>& frames);
void write_json(const std::string& path, const nlohmann::json& j);

NodeSet read_nodes_csv(const std::string& path);
// t,id,x,y,z rows grouped by t.
std::vector<Frame> read_frames_csv(const std::string& path);
void write_frames_csv(const std::string& path, const std::vector<Frame>& frames);
nlohmann::json read_json(const std::string& path);

struct TraceRow {
  int step = 0;
  double energy = 0.0;
  double grad_p_norm = 0.0;
  double grad_theta_norm = 0.0;
  int strut = -1;
  double sweep_energy = 0.0;
  double step_seconds = 0.0;
};

std::vector<TraceRow> read_trace_csv(const std::string& path);

}  // namespace tenshape::cli
