#include "tenshape/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace tenshape {

std::string_view to_string(CableClass c) {
  return c == CableClass::kActive ? "active" : "passive";
}

StructureError::StructureError(const std::string& what, int line, std::string element)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line),
      element_(std::move(element)) {}

StructureSpec::StructureSpec(std::string name, std::vector<StrutSpec> struts,
                             std::vector<CableSpec> cables, AnchorSpec anchors,
                             MetricNodes metric)
    : name_(std::move(name)),
      struts_(std::move(struts)),
      cables_(std::move(cables)),
      anchors_(std::move(anchors)),
      metric_(std::move(metric)) {
  validate();
  strut_cables_.assign(struts_.size(), {});
  for (int k = 0; k < cable_count(); ++k) {
    const auto& c = cables_[static_cast<std::size_t>(k)];
    strut_cables_[static_cast<std::size_t>(strut_of_node(c.node_a))].push_back(k);
    strut_cables_[static_cast<std::size_t>(strut_of_node(c.node_b))].push_back(k);
  }
}

void StructureSpec::validate() const {
  if (struts_.empty()) throw StructureError("structure has no struts");
  if (cables_.empty()) throw StructureError("structure has no cables");
  for (int i = 0; i < strut_count(); ++i) {
    const auto& s = struts_[static_cast<std::size_t>(i)];
    const std::string id = "strut " + std::to_string(i + 1);
    if (!std::isfinite(s.length) || s.length <= 0.0) {
      throw StructureError(id + ": length must be positive", 0, id);
    }
  }
  const int n = node_count();
  for (int k = 0; k < cable_count(); ++k) {
    const auto& c = cables_[static_cast<std::size_t>(k)];
    const std::string id = "cable " + std::to_string(k + 1);
    if (c.node_a < 0 || c.node_a >= n || c.node_b < 0 || c.node_b >= n) {
      throw StructureError(id + ": node index out of range [1, " + std::to_string(n) + "]", 0,
                           id);
    }
    if (c.node_a == c.node_b) {
      throw StructureError(id + ": joins node " + std::to_string(c.node_a + 1) + " to itself",
                           0, id);
    }
    if (strut_of_node(c.node_a) == strut_of_node(c.node_b)) {
      throw StructureError(id + ": connects the two ends of strut " +
                               std::to_string(strut_of_node(c.node_a) + 1),
                           0, id);
    }
    if (!std::isfinite(c.stiffness) || c.stiffness < 0.0) {
      throw StructureError(id + ": stiffness must be >= 0", 0, id);
    }
    if (!std::isfinite(c.natural_length) || c.natural_length < 0.0) {
      throw StructureError(id + ": natural length must be >= 0", 0, id);
    }
  }
  std::set<int> seen;
  for (int s : anchors_.centroid_struts) {
    if (s < 0 || s >= strut_count()) {
      throw StructureError("centroid anchor references unknown strut " + std::to_string(s + 1),
                           0, "meta");
    }
    if (!seen.insert(s).second) {
      throw StructureError("centroid anchor lists strut " + std::to_string(s + 1) + " twice", 0,
                           "meta");
    }
  }
  for (const auto* group : {&metric_.top, &metric_.base}) {
    for (int node : *group) {
      if (node < 0 || node >= n) {
        throw StructureError("metric node " + std::to_string(node + 1) + " out of range", 0,
                             "meta");
      }
    }
  }
  // Both fix the translation gauge; recentring would move a frozen strut.
  if (!anchors_.centroid_struts.empty()) {
    for (int i = 0; i < strut_count(); ++i) {
      if (struts_[static_cast<std::size_t>(i)].freeze_position) {
        const std::string id = "strut " + std::to_string(i + 1);
        throw StructureError(id + ": position freeze cannot be combined with a centroid anchor",
                             0, id);
      }
    }
  }
}

ConnectivityMatrix::ConnectivityMatrix(std::vector<Row> rows, int node_count)
    : rows_(std::move(rows)), node_count_(node_count) {}

std::vector<Eigen::Vector3d> ConnectivityMatrix::apply(
    std::span<const Eigen::Vector3d> nodes) const {
  if (static_cast<int>(nodes.size()) != node_count_) {
    throw std::invalid_argument("connectivity: node count mismatch");
  }
  std::vector<Eigen::Vector3d> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) {
    out.push_back(nodes[static_cast<std::size_t>(r.plus)] -
                  nodes[static_cast<std::size_t>(r.minus)]);
  }
  return out;
}

Eigen::SparseMatrix<double> ConnectivityMatrix::compact() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * rows_.size());
  for (int k = 0; k < rows(); ++k) {
    t.emplace_back(k, rows_[static_cast<std::size_t>(k)].plus, 1.0);
    t.emplace_back(k, rows_[static_cast<std::size_t>(k)].minus, -1.0);
  }
  Eigen::SparseMatrix<double> m(rows(), node_count_);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Eigen::SparseMatrix<double> ConnectivityMatrix::blocked() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(6 * rows_.size());
  for (int k = 0; k < rows(); ++k) {
    const auto& r = rows_[static_cast<std::size_t>(k)];
    for (int axis = 0; axis < 3; ++axis) {
      t.emplace_back(3 * k + axis, 3 * r.plus + axis, 1.0);
      t.emplace_back(3 * k + axis, 3 * r.minus + axis, -1.0);
    }
  }
  Eigen::SparseMatrix<double> m(3 * rows(), 3 * node_count_);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

ConnectivityMatrix build_connectivity(const StructureSpec& spec) {
  std::vector<ConnectivityMatrix::Row> rows;
  rows.reserve(spec.cables().size());
  for (const auto& c : spec.cables()) rows.push_back({c.node_a, c.node_b});
  return ConnectivityMatrix(std::move(rows), spec.node_count());
}

// ---------------------------------------------------------------------------
// Text format

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

enum class Section { kNone, kMeta, kStruts, kCables };

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_number(std::string_view tok, int line, const char* what) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw StructureError("invalid " + std::string(what) + " '" + std::string(tok) + "'", line);
  }
  return v;
}

int parse_int(std::string_view tok, int line, const char* what) {
  int v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw StructureError("invalid " + std::string(what) + " '" + std::string(tok) + "'", line);
  }
  return v;
}

}  // namespace

StructureSpec parse_structure(std::string_view text) {
  Section section = Section::kNone;
  std::set<Section> seen_sections;
  std::string name;
  int declared_struts = -1;
  int declared_cables = -1;
  AnchorSpec anchors;
  MetricNodes metric;
  std::vector<StrutSpec> struts;
  std::vector<CableSpec> cables;
  std::vector<std::pair<int, int>> raw_nodes;  // 1-based, resolved after struts are known

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') throw StructureError("unterminated section header", line_no);
      const auto title = trim(line.substr(1, line.size() - 2));
      if (title == "meta") {
        section = Section::kMeta;
      } else if (title == "struts") {
        section = Section::kStruts;
      } else if (title == "cables") {
        section = Section::kCables;
      } else {
        throw StructureError("unknown section [" + std::string(title) + "]", line_no);
      }
      if (!seen_sections.insert(section).second) {
        throw StructureError("duplicate section [" + std::string(title) + "]", line_no);
      }
      continue;
    }

    switch (section) {
      case Section::kNone:
        throw StructureError("content before first section header", line_no);
      case Section::kMeta: {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw StructureError("expected key = value", line_no);
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "format") {
          if (value != "1") throw StructureError("unsupported format version", line_no);
        } else if (key == "name") {
          name = std::string(value);
        } else if (key == "struts") {
          declared_struts = parse_int(value, line_no, "strut count");
        } else if (key == "cables") {
          declared_cables = parse_int(value, line_no, "cable count");
        } else if (key == "centroid_anchor") {
          for (auto tok : split_ws(value)) {
            anchors.centroid_struts.push_back(parse_int(tok, line_no, "strut id") - 1);
          }
        } else if (key == "top_nodes" || key == "base_nodes") {
          auto& group = key == "top_nodes" ? metric.top : metric.base;
          for (auto tok : split_ws(value)) {
            group.push_back(parse_int(tok, line_no, "node id") - 1);
          }
        } else {
          throw StructureError("unknown meta key '" + std::string(key) + "'", line_no);
        }
        break;
      }
      case Section::kStruts: {
        const auto tok = split_ws(line);
        if (tok.size() < 3 || tok.size() > 4) {
          throw StructureError("strut row needs: id length_m freeze [label]", line_no);
        }
        const int id = parse_int(tok[0], line_no, "strut id");
        if (id != static_cast<int>(struts.size()) + 1) {
          throw StructureError("strut ids must be consecutive from 1", line_no,
                               "strut " + std::string(tok[0]));
        }
        StrutSpec s;
        s.length = parse_number(tok[1], line_no, "strut length");
        if (tok[2] == "none") {
        } else if (tok[2] == "p") {
          s.freeze_position = true;
        } else if (tok[2] == "theta") {
          s.freeze_yaw = true;
        } else if (tok[2] == "all") {
          s.freeze_position = s.freeze_yaw = true;
        } else {
          throw StructureError("freeze flag must be none|p|theta|all", line_no);
        }
        if (tok.size() == 4) s.label = std::string(tok[3]);
        struts.push_back(std::move(s));
        break;
      }
      case Section::kCables: {
        const auto tok = split_ws(line);
        if (tok.size() < 6 || tok.size() > 7) {
          throw StructureError(
              "cable row needs: id node_a node_b stiffness natural_length_m class [label]",
              line_no);
        }
        const int id = parse_int(tok[0], line_no, "cable id");
        if (id != static_cast<int>(cables.size()) + 1) {
          throw StructureError("cable ids must be consecutive from 1", line_no,
                               "cable " + std::string(tok[0]));
        }
        CableSpec c;
        raw_nodes.emplace_back(parse_int(tok[1], line_no, "node index"),
                               parse_int(tok[2], line_no, "node index"));
        c.stiffness = parse_number(tok[3], line_no, "stiffness");
        c.natural_length = parse_number(tok[4], line_no, "natural length");
        if (tok[5] == "passive") {
          c.cable_class = CableClass::kPassive;
        } else if (tok[5] == "active") {
          c.cable_class = CableClass::kActive;
        } else {
          throw StructureError("cable class must be passive|active", line_no);
        }
        if (tok.size() == 7) c.label = std::string(tok[6]);
        cables.push_back(std::move(c));
        break;
      }
    }
    if (nl == text.size()) break;
  }

  if (declared_struts >= 0 && declared_struts != static_cast<int>(struts.size())) {
    throw StructureError("meta declares " + std::to_string(declared_struts) + " struts, found " +
                         std::to_string(struts.size()));
  }
  if (declared_cables >= 0 && declared_cables != static_cast<int>(cables.size())) {
    throw StructureError("meta declares " + std::to_string(declared_cables) + " cables, found " +
                         std::to_string(cables.size()));
  }
  for (std::size_t k = 0; k < cables.size(); ++k) {
    cables[k].node_a = raw_nodes[k].first - 1;
    cables[k].node_b = raw_nodes[k].second - 1;
  }
  return StructureSpec(std::move(name), std::move(struts), std::move(cables), std::move(anchors),
                       std::move(metric));
}

StructureSpec parse_structure(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_structure(std::string_view(text));
}

StructureSpec load_structure(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open structure file '" + path + "'");
  return parse_structure(in);
}

std::string serialize_structure(const StructureSpec& spec) {
  std::ostringstream out;
  out << "# tenshape structure definition\n";
  out << "[meta]\n";
  out << "format = 1\n";
  if (!spec.name().empty()) out << "name = " << spec.name() << "\n";
  out << "struts = " << spec.strut_count() << "\n";
  out << "cables = " << spec.cable_count() << "\n";
  if (!spec.anchors().centroid_struts.empty()) {
    out << "centroid_anchor =";
    for (int s : spec.anchors().centroid_struts) out << ' ' << s + 1;
    out << "\n";
  }
  auto group = [&](const char* key, const std::vector<int>& ids) {
    if (ids.empty()) return;
    out << key << " =";
    for (int id : ids) out << ' ' << id + 1;
    out << "\n";
  };
  group("top_nodes", spec.metric_nodes().top);
  group("base_nodes", spec.metric_nodes().base);
  out << "\n[struts]\n# id length_m freeze [label]\n";
  for (int i = 0; i < spec.strut_count(); ++i) {
    const auto& s = spec.strut(i);
    const char* freeze = s.freeze_position ? (s.freeze_yaw ? "all" : "p")
                                           : (s.freeze_yaw ? "theta" : "none");
    out << i + 1 << ' ' << format_double(s.length) << ' ' << freeze;
    if (!s.label.empty()) out << ' ' << s.label;
    out << "\n";
  }
  out << "\n[cables]\n# id node_a node_b stiffness natural_length_m class [label]\n";
  for (int k = 0; k < spec.cable_count(); ++k) {
    const auto& c = spec.cable(k);
    out << k + 1 << ' ' << c.node_a + 1 << ' ' << c.node_b + 1 << ' '
        << format_double(c.stiffness) << ' ' << format_double(c.natural_length) << ' '
        << to_string(c.cable_class);
    if (!c.label.empty()) out << ' ' << c.label;
    out << "\n";
  }
  return out.str();
}

void save_structure(const StructureSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write structure file '" + path + "'");
  out << serialize_structure(spec);
}

}  // namespace tenshape
