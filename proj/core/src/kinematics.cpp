#include "tenshape/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tenshape {
namespace {

void check_inclination(double inclination) {
  if (!(inclination >= -kInclinationSlack && inclination <= std::numbers::pi + kInclinationSlack)) {
    throw std::domain_error("inclination " + std::to_string(inclination) +
                            " rad outside [0, pi]");
  }
}

}  // namespace

Eigen::Vector3d direction_from_angles(double inclination, double yaw) {
  check_inclination(inclination);
  const double s = std::sin(inclination);
  return {s * std::cos(yaw), s * std::sin(yaw), std::cos(inclination)};
}

Eigen::Vector3d yaw_jacobian_column(double inclination, double yaw) {
  check_inclination(inclination);
  const double s = std::sin(inclination);
  return {-s * std::sin(yaw), s * std::cos(yaw), 0.0};
}

double normalize_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

DofMask dof_mask(const StructureSpec& spec) {
  DofMask mask;
  for (const auto& s : spec.struts()) {
    mask.position_frozen.push_back(s.freeze_position);
    mask.yaw_frozen.push_back(s.freeze_yaw);
  }
  return mask;
}

NodeSet nodes_from_pose(const StructureSpec& spec, const PoseState& pose) {
  const int mb = spec.strut_count();
  if (pose.strut_count() != mb || !pose.consistent()) {
    throw std::invalid_argument("pose has " + std::to_string(pose.strut_count()) +
                                " struts, structure has " + std::to_string(mb));
  }
  NodeSet out;
  out.positions.resize(static_cast<std::size_t>(2 * mb));
  for (int i = 0; i < mb; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Eigen::Vector3d half =
        0.5 * spec.strut(i).length * direction_from_angles(pose.inclinations[ui], pose.yaws[ui]);
    out.positions[ui] = pose.centers[ui] + half;
    out.positions[ui + static_cast<std::size_t>(mb)] = pose.centers[ui] - half;
  }
  return out;
}

double manipulator_length(const NodeSet& nodes, std::span<const int> top_ids,
                          std::span<const int> base_ids) {
  if (top_ids.empty() || base_ids.empty()) {
    throw std::invalid_argument("manipulator_length: empty node group");
  }
  auto mean = [&](std::span<const int> ids) {
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    for (int id : ids) {
      if (id < 0 || id >= nodes.size()) {
        throw std::out_of_range("manipulator_length: node " + std::to_string(id + 1));
      }
      m += nodes[id];
    }
    return Eigen::Vector3d(m / static_cast<double>(ids.size()));
  };
  return (mean(top_ids) - mean(base_ids)).norm();
}

PoseState rotate_about_gravity(const PoseState& pose, double delta) {
  const double c = std::cos(delta);
  const double s = std::sin(delta);
  PoseState out = pose;
  for (std::size_t i = 0; i < out.centers.size(); ++i) {
    const auto& p = pose.centers[i];
    out.centers[i] = {c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z()};
    out.yaws[i] += delta;
  }
  return out;
}

}  // namespace tenshape
