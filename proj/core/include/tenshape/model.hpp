#pragma once

// Static description of a tensegrity: struts, cables, anchoring, and the
// signed cable/node incidence used by the energy evaluation.
//
// Node convention: strut i (0-based) owns node i (the "+q" end) and node
// i + strut_count (the "-q" end). Structure files use 1-based ids.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace tenshape {

enum class CableClass { kPassive, kActive };

std::string_view to_string(CableClass c);

struct CableSpec {
  int node_a = 0;  // 0-based
  int node_b = 0;  // 0-based
  double stiffness = 1.0;
  double natural_length = 0.0;
  CableClass cable_class = CableClass::kPassive;
  std::string label;

  bool operator==(const CableSpec&) const = default;
};

struct StrutSpec {
  double length = 1.0;
  bool freeze_position = false;
  bool freeze_yaw = false;
  std::string label;

  bool operator==(const StrutSpec&) const = default;
};

// Gauge fixing. Per-strut freeze flags live on StrutSpec; a non-empty
// centroid group has the mean of its strut centers held at the origin.
struct AnchorSpec {
  std::vector<int> centroid_struts;  // 0-based strut indices

  bool operator==(const AnchorSpec&) const = default;
};

// Node groups for the manipulator length metric (top and base ends).
struct MetricNodes {
  std::vector<int> top;   // 0-based node indices
  std::vector<int> base;

  bool operator==(const MetricNodes&) const = default;
};

// Raised for syntax errors (line() > 0) and invariant violations (element()
// names the offending strut or cable, e.g. "cable 7").
class StructureError : public std::runtime_error {
 public:
  StructureError(const std::string& what, int line = 0, std::string element = {});

  int line() const { return line_; }
  const std::string& element() const { return element_; }

 private:
  int line_;
  std::string element_;
};

class StructureSpec {
 public:
  StructureSpec() = default;
  // Validates every invariant; throws StructureError.
  StructureSpec(std::string name, std::vector<StrutSpec> struts,
                std::vector<CableSpec> cables, AnchorSpec anchors = {},
                MetricNodes metric = {});

  const std::string& name() const { return name_; }
  int strut_count() const { return static_cast<int>(struts_.size()); }
  int cable_count() const { return static_cast<int>(cables_.size()); }
  int node_count() const { return 2 * strut_count(); }

  const std::vector<StrutSpec>& struts() const { return struts_; }
  const std::vector<CableSpec>& cables() const { return cables_; }
  const AnchorSpec& anchors() const { return anchors_; }
  const MetricNodes& metric_nodes() const { return metric_; }
  const StrutSpec& strut(int i) const { return struts_.at(static_cast<std::size_t>(i)); }
  const CableSpec& cable(int k) const { return cables_.at(static_cast<std::size_t>(k)); }

  int strut_of_node(int node) const { return node % strut_count(); }
  // +1 for node i (p + L/2 q), -1 for node i + m_b (p - L/2 q).
  double node_sign(int node) const { return node < strut_count() ? 1.0 : -1.0; }

  // Cables incident to either node of strut i, in cable order.
  const std::vector<int>& cables_of_strut(int i) const {
    return strut_cables_.at(static_cast<std::size_t>(i));
  }

  bool operator==(const StructureSpec& other) const {
    return name_ == other.name_ && struts_ == other.struts_ &&
           cables_ == other.cables_ && anchors_ == other.anchors_ && metric_ == other.metric_;
  }

 private:
  void validate() const;

  std::string name_;
  std::vector<StrutSpec> struts_;
  std::vector<CableSpec> cables_;
  AnchorSpec anchors_;
  MetricNodes metric_;
  std::vector<std::vector<int>> strut_cables_;
};

// Signed incidence C_s: row k has +1 at node_b and -1 at node_a, so that
// applying it to stacked node positions yields node_b - node_a per cable.
class ConnectivityMatrix {
 public:
  struct Row {
    int minus;  // node_a
    int plus;   // node_b
  };

  ConnectivityMatrix() = default;
  ConnectivityMatrix(std::vector<Row> rows, int node_count);

  int rows() const { return static_cast<int>(rows_.size()); }
  int cols() const { return node_count_; }
  const Row& row(int k) const { return rows_[static_cast<std::size_t>(k)]; }
  std::span<const Row> entries() const { return rows_; }

  std::vector<Eigen::Vector3d> apply(std::span<const Eigen::Vector3d> nodes) const;

  // m_s x n signed incidence.
  Eigen::SparseMatrix<double> compact() const;
  // 3m_s x 3n blocked form; node j occupies columns 3j..3j+2.
  Eigen::SparseMatrix<double> blocked() const;

 private:
  std::vector<Row> rows_;
  int node_count_ = 0;
};

ConnectivityMatrix build_connectivity(const StructureSpec& spec);

// Structure-definition files. Grammar is documented in docs/structure-format.md.
StructureSpec parse_structure(std::string_view text);
StructureSpec parse_structure(std::istream& in);
StructureSpec load_structure(const std::string& path);
std::string serialize_structure(const StructureSpec& spec);
void save_structure(const StructureSpec& spec, const std::string& path);

// Shortest text form that parses back to the identical double.
std::string format_double(double value);

}  // namespace tenshape
