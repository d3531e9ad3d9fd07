#include "tenshape/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace tenshape {
namespace {

// Force density t = K (m - b) / m for taut cables, 0 otherwise.
double force_density(const CableSpec& c, double length) {
  if (length < kMinCableLength || length - c.natural_length <= 0.0) return 0.0;
  return c.stiffness * (length - c.natural_length) / length;
}

void check_rows(const StructureSpec& spec, const ConnectivityMatrix& connectivity) {
  if (connectivity.rows() != spec.cable_count() || connectivity.cols() != spec.node_count()) {
    throw std::invalid_argument("connectivity does not match structure");
  }
}

}  // namespace

double EnergyGradients::position_norm() const {
  double s = 0.0;
  for (const auto& g : position) s += g.squaredNorm();
  return std::sqrt(s);
}

double EnergyGradients::yaw_norm() const {
  double s = 0.0;
  for (double g : yaw) s += g * g;
  return std::sqrt(s);
}

Eigen::VectorXd EnergyGradients::position_vector() const {
  Eigen::VectorXd v(3 * static_cast<Eigen::Index>(position.size()));
  for (std::size_t i = 0; i < position.size(); ++i) {
    v.segment<3>(3 * static_cast<Eigen::Index>(i)) = position[i];
  }
  return v;
}

double cable_energy(const CableSpec& cable, double length) {
  const double stretch = length - cable.natural_length;
  return stretch > 0.0 ? 0.5 * cable.stiffness * stretch * stretch : 0.0;
}

CableGeometry evaluate_energy(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                              const NodeSet& nodes) {
  check_rows(spec, connectivity);
  const auto ms = static_cast<std::size_t>(spec.cable_count());
  CableGeometry g;
  g.vectors.resize(ms);
  g.lengths.resize(ms);
  g.taut.resize(ms);
  g.energies.resize(ms);
  for (std::size_t k = 0; k < ms; ++k) {
    const auto& row = connectivity.row(static_cast<int>(k));
    const auto& cable = spec.cables()[k];
    g.vectors[k] = nodes[row.plus] - nodes[row.minus];
    g.lengths[k] = g.vectors[k].norm();
    g.taut[k] = g.lengths[k] - cable.natural_length > 0.0;
    g.energies[k] = cable_energy(cable, g.lengths[k]);
    g.total += g.energies[k];
  }
  return g;
}

CableGeometry evaluate_energy(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                              const PoseState& pose) {
  return evaluate_energy(spec, connectivity, nodes_from_pose(spec, pose));
}

EnergyGradients evaluate_gradients(const StructureSpec& spec,
                                   const ConnectivityMatrix& connectivity,
                                   const PoseState& pose, Masking masking) {
  check_rows(spec, connectivity);
  const NodeSet nodes = nodes_from_pose(spec, pose);
  const int mb = spec.strut_count();

  // de/dn per node; slack cables have zero force density.
  std::vector<Eigen::Vector3d> node_grad(static_cast<std::size_t>(spec.node_count()),
                                         Eigen::Vector3d::Zero());
  for (int k = 0; k < spec.cable_count(); ++k) {
    const auto& row = connectivity.row(k);
    const Eigen::Vector3d v = nodes[row.plus] - nodes[row.minus];
    const double t = force_density(spec.cable(k), v.norm());
    if (t == 0.0) continue;
    node_grad[static_cast<std::size_t>(row.plus)] += t * v;
    node_grad[static_cast<std::size_t>(row.minus)] -= t * v;
  }

  EnergyGradients out;
  out.position.resize(static_cast<std::size_t>(mb));
  out.yaw.resize(static_cast<std::size_t>(mb));
  for (int i = 0; i < mb; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto& g_plus = node_grad[ui];
    const auto& g_minus = node_grad[ui + static_cast<std::size_t>(mb)];
    out.position[ui] = g_plus + g_minus;
    out.yaw[ui] = 0.5 * spec.strut(i).length *
                  (g_plus - g_minus).dot(yaw_jacobian_column(pose.inclinations[ui], pose.yaws[ui]));
    if (masking == Masking::kAnchored) {
      if (spec.strut(i).freeze_position) out.position[ui].setZero();
      if (spec.strut(i).freeze_yaw) out.yaw[ui] = 0.0;
    }
  }
  return out;
}

StrutGradient strut_gradient(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                             const PoseState& pose, const NodeSet& nodes, int strut) {
  const int mb = spec.strut_count();
  const int plus_node = strut;
  const int minus_node = strut + mb;
  Eigen::Vector3d g_plus = Eigen::Vector3d::Zero();
  Eigen::Vector3d g_minus = Eigen::Vector3d::Zero();
  for (int k : spec.cables_of_strut(strut)) {
    const auto& row = connectivity.row(k);
    const Eigen::Vector3d v = nodes[row.plus] - nodes[row.minus];
    const double t = force_density(spec.cable(k), v.norm());
    if (t == 0.0) continue;
    if (row.plus == plus_node) g_plus += t * v;
    if (row.plus == minus_node) g_minus += t * v;
    if (row.minus == plus_node) g_plus -= t * v;
    if (row.minus == minus_node) g_minus -= t * v;
  }
  const auto ui = static_cast<std::size_t>(strut);
  StrutGradient out;
  out.position = g_plus + g_minus;
  out.yaw = 0.5 * spec.strut(strut).length *
            (g_plus - g_minus).dot(yaw_jacobian_column(pose.inclinations[ui], pose.yaws[ui]));
  return out;
}

double strut_energy(const StructureSpec& spec, const NodeSet& nodes, int strut) {
  double e = 0.0;
  for (int k : spec.cables_of_strut(strut)) {
    const auto& c = spec.cable(k);
    e += cable_energy(c, (nodes[c.node_b] - nodes[c.node_a]).norm());
  }
  return e;
}

bool convergence_check(const EnergyGradients& grads, double tol_position, double tol_yaw) {
  if (!(tol_position > 0.0) || !(tol_yaw > 0.0)) {
    throw std::invalid_argument("convergence tolerances must be positive");
  }
  return grads.position_norm() < tol_position && grads.yaw_norm() < tol_yaw;
}

}  // namespace tenshape
