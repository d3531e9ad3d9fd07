#pragma once

// Strut parameterization: center p, inclination phi from the world +z
// (gravity) axis, yaw theta about it. No roll degree of freedom.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "tenshape/model.hpp"

namespace tenshape {

// Slack allowed on phi in [0, pi] before a domain error is raised.
inline constexpr double kInclinationSlack = 1e-9;

// (sin phi cos theta, sin phi sin theta, cos phi). Throws std::domain_error.
Eigen::Vector3d direction_from_angles(double inclination, double yaw);

// d q / d theta = (-sin phi sin theta, sin phi cos theta, 0).
Eigen::Vector3d yaw_jacobian_column(double inclination, double yaw);

// Wraps to (-pi, pi].
double normalize_angle(double angle);

struct PoseState {
  std::vector<Eigen::Vector3d> centers;
  std::vector<double> inclinations;
  std::vector<double> yaws;  // unwrapped

  PoseState() = default;
  explicit PoseState(int strut_count)
      : centers(static_cast<std::size_t>(strut_count), Eigen::Vector3d::Zero()),
        inclinations(static_cast<std::size_t>(strut_count), 0.0),
        yaws(static_cast<std::size_t>(strut_count), 0.0) {}

  int strut_count() const { return static_cast<int>(centers.size()); }
  bool consistent() const {
    return inclinations.size() == centers.size() && yaws.size() == centers.size();
  }
};

// Frozen degrees of freedom, mirrored from the structure's anchors.
struct DofMask {
  std::vector<bool> position_frozen;
  std::vector<bool> yaw_frozen;
};

DofMask dof_mask(const StructureSpec& spec);

struct NodeSet {
  std::vector<Eigen::Vector3d> positions;

  int size() const { return static_cast<int>(positions.size()); }
  const Eigen::Vector3d& operator[](int i) const {
    return positions[static_cast<std::size_t>(i)];
  }
};

// n_i = p_i + (L_i/2) q_i, n_{i+m_b} = p_i - (L_i/2) q_i.
NodeSet nodes_from_pose(const StructureSpec& spec, const PoseState& pose);

// Distance between the mean of the top nodes and the mean of the base nodes.
double manipulator_length(const NodeSet& nodes, std::span<const int> top_ids,
                          std::span<const int> base_ids);

// Rotates every center about the z axis by delta and adds delta to every yaw.
// The node set rotates rigidly with it.
PoseState rotate_about_gravity(const PoseState& pose, double delta);

}  // namespace tenshape
