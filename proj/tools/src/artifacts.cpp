#include "artifacts.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "settings.hpp"
#include "tenshape/model.hpp"

namespace tenshape::cli {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
    while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
  }
  return out;
}

template <typename T>
T field(std::string_view tok, const std::string& path, int line) {
  T v{};
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw IoError(path + ":" + std::to_string(line) + ": bad field '" + std::string(tok) + "'");
  }
  return v;
}

void put_nodes(std::ostream& out, const NodeSet& nodes, const std::string& prefix) {
  for (int i = 0; i < nodes.size(); ++i) {
    out << prefix << i + 1;
    for (int a = 0; a < 3; ++a) out << ',' << format_double(nodes[i][a]);
    out << '\n';
  }
}

}  // namespace

void write_trace_csv(const std::string& path, const EstimationTrace& trace, int strut_count) {
  auto out = open_out(path);
  out << "step,energy,grad_p_norm,grad_theta_norm";
  for (int i = 1; i <= strut_count; ++i) out << ",grad_p_mean_" << i;
  for (int i = 1; i <= strut_count; ++i) out << ",grad_theta_abs_" << i;
  out << ",strut,sweep_energy,step_seconds\n";

  auto blank = [&] {
    for (int i = 0; i < 2 * strut_count; ++i) out << ',';
  };
  out << 0 << ',' << format_double(trace.initial_energy) << ",,";
  blank();
  out << ",,0,0\n";
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& r = trace.steps[s];
    out << r.step << ',' << format_double(r.energy) << ',' << format_double(r.grad_position_norm)
        << ',' << format_double(r.grad_yaw_norm);
    if (s < trace.heatmap.size()) {
      for (double v : trace.heatmap[s].position) out << ',' << format_double(v);
      for (double v : trace.heatmap[s].yaw) out << ',' << format_double(v);
    } else {
      blank();
    }
    out << ',' << (r.strut >= 0 ? std::to_string(r.strut + 1) : std::string()) << ','
        << format_double(r.sweep_energy) << ',' << format_double(r.seconds) << '\n';
  }
}

void write_heatmap_csv(const std::string& path, const EstimationTrace& trace, int strut_count) {
  auto out = open_out(path);
  out << "step,strut,grad_p_mean,grad_theta_abs\n";
  for (std::size_t s = 0; s < trace.heatmap.size(); ++s) {
    const auto& row = trace.heatmap[s];
    for (int i = 0; i < strut_count; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      out << trace.steps[s].step << ',' << i + 1 << ',' << format_double(row.position[ui]) << ','
          << format_double(row.yaw[ui]) << '\n';
    }
  }
}

void write_nodes_csv(const std::string& path, const NodeSet& nodes) {
  auto out = open_out(path);
  out << "id,x,y,z\n";
  put_nodes(out, nodes, "");
}

void write_frames(const std::string& dir, const std::vector<Frame>& frames) {
  fs::create_directories(dir);
  auto index = open_out((fs::path(dir) / "index.csv").string());
  index << "frame,step,t\n";
  for (std::size_t f = 0; f < frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04zu.csv", f);
    write_nodes_csv((fs::path(dir) / name).string(), frames[f].nodes);
    index << f << ',' << frames[f].step << ',' << format_double(frames[f].t) << '\n';
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

NodeSet read_nodes_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  NodeSet nodes;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) throw IoError(path + ":" + std::to_string(line_no) + ": expected id,x,y,z");
    const int id = field<int>(f[0], path, line_no);
    if (id != nodes.size() + 1) {
      throw IoError(path + ":" + std::to_string(line_no) + ": node ids must be consecutive");
    }
    nodes.positions.emplace_back(field<double>(f[1], path, line_no),
                                 field<double>(f[2], path, line_no),
                                 field<double>(f[3], path, line_no));
  }
  return nodes;
}

std::vector<Frame> read_frames_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<Frame> frames;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected t,id,x,y,z");
    }
    const double t = field<double>(f[0], path, line_no);
    const int id = field<int>(f[1], path, line_no);
    if (id == 1) frames.push_back({0, t, {}});
    if (frames.empty() || id != frames.back().nodes.size() + 1) {
      throw IoError(path + ":" + std::to_string(line_no) + ": node ids must restart at 1 per t");
    }
    frames.back().nodes.positions.emplace_back(field<double>(f[2], path, line_no),
                                               field<double>(f[3], path, line_no),
                                               field<double>(f[4], path, line_no));
  }
  return frames;
}

void write_frames_csv(const std::string& path, const std::vector<Frame>& frames) {
  auto out = open_out(path);
  out << "t,id,x,y,z\n";
  for (const auto& f : frames) put_nodes(out, f.nodes, format_double(f.t) + ",");
}

nlohmann::json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::vector<TraceRow> rows;
  int line_no = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_csv(line);
    if (line_no == 1) {
      if (f.size() < 7 || f[0] != "step") throw IoError(path + ": not a trace file");
      columns = f.size();
      continue;
    }
    if (line.empty()) continue;
    if (f.size() != columns) {
      throw IoError(path + ":" + std::to_string(line_no) + ": wrong column count");
    }
    TraceRow r;
    r.step = field<int>(f[0], path, line_no);
    r.energy = field<double>(f[1], path, line_no);
    if (!f[2].empty()) r.grad_p_norm = field<double>(f[2], path, line_no);
    if (!f[3].empty()) r.grad_theta_norm = field<double>(f[3], path, line_no);
    const auto& strut = f[columns - 3];
    r.strut = strut.empty() ? -1 : field<int>(strut, path, line_no) - 1;
    r.sweep_energy = field<double>(f[columns - 2], path, line_no);
    r.step_seconds = field<double>(f[columns - 1], path, line_no);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace tenshape::cli
