#pragma once

// Cable elastic energy e = sum_k e_k, e_k = K_k (m_k - b_k)^2 / 2 for taut
// cables and 0 for slack ones, with analytic gradients in the strut
// centers and yaw angles.

#include <vector>

#include <Eigen/Core>

#include "tenshape/kinematics.hpp"
#include "tenshape/model.hpp"

namespace tenshape {

// Cables shorter than this contribute no gradient.
inline constexpr double kMinCableLength = 1e-12;

struct CableGeometry {
  std::vector<Eigen::Vector3d> vectors;  // node_b - node_a
  std::vector<double> lengths;
  std::vector<bool> taut;  // m_k - b_k > 0
  std::vector<double> energies;
  double total = 0.0;
};

struct EnergyGradients {
  std::vector<Eigen::Vector3d> position;  // de/dp_i
  std::vector<double> yaw;                // de/dtheta_i

  double position_norm() const;
  double yaw_norm() const;
  // Strut-major (x, y, z per strut), length 3 m_b.
  Eigen::VectorXd position_vector() const;
};

enum class Masking { kRaw, kAnchored };

double cable_energy(const CableSpec& cable, double length);

CableGeometry evaluate_energy(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                              const PoseState& pose);
CableGeometry evaluate_energy(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                              const NodeSet& nodes);

EnergyGradients evaluate_gradients(const StructureSpec& spec,
                                   const ConnectivityMatrix& connectivity,
                                   const PoseState& pose, Masking masking = Masking::kAnchored);

struct StrutGradient {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

// Gradient of e with respect to strut i's own unknowns, summed over the
// cables attached to it only. No anchor masking.
StrutGradient strut_gradient(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                             const PoseState& pose, const NodeSet& nodes, int strut);

// Energy of the cables attached to strut i.
double strut_energy(const StructureSpec& spec, const NodeSet& nodes, int strut);

bool convergence_check(const EnergyGradients& grads, double tol_position, double tol_yaw);

}  // namespace tenshape
