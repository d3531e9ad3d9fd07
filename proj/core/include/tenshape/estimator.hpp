#pragma once

// Gradient-descent shape estimation: p <- p - alpha de/dp,
// theta <- theta - beta de/dtheta, either on all struts at once or one strut
// per step in round-robin order.

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tenshape/energy.hpp"
#include "tenshape/inclination_source.hpp"
#include "tenshape/kinematics.hpp"
#include "tenshape/model.hpp"

namespace tenshape {

enum class Schedule { kFullBatch, kPerStrut };
// Per-strut schedule only: neighbours at their freshest values (Gauss-Seidel)
// or frozen at the start of the sweep (Jacobi).
enum class SweepUpdate { kGaussSeidel, kJacobi };
enum class InitMode { kCollapsed, kExpanded, kRandom, kGiven };

std::string_view to_string(Schedule s);
std::string_view to_string(SweepUpdate s);
std::string_view to_string(InitMode m);
Schedule parse_schedule(std::string_view s);
SweepUpdate parse_sweep_update(std::string_view s);
InitMode parse_init_mode(std::string_view s);

struct EstimatorConfig {
  double position_rate = 1e-3;  // alpha
  double yaw_rate = 1e-3;       // beta
  int max_steps = 1000;
  double tol_position = 1e-6;
  double tol_yaw = 1e-6;
  Schedule schedule = Schedule::kPerStrut;
  SweepUpdate sweep_update = SweepUpdate::kGaussSeidel;
  bool shuffle_order = false;
  int sensor_refresh_period = 20;

  InitMode init_mode = InitMode::kCollapsed;
  std::uint64_t seed = 0;
  std::optional<PoseState> given_pose;
  double collapsed_radius = 0.05;
  double expanded_radius = 0.0;  // <= 0: twice nominal_structure_length()
  double random_half_width = 0.0;  // <= 0: longest strut length

  // Halve both rates on an energy increase, restore gradually on success.
  bool auto_backoff = false;
  double divergence_factor = 1e6;
  int snapshot_every = 0;  // node snapshot period in steps, 0 = off
  bool record_heatmap = true;

  // Throws ConfigError.
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// sqrt(m_b) times the longest strut: a size scale for initial scatter.
double nominal_structure_length(const StructureSpec& spec);

PoseState initialize_pose(const StructureSpec& spec, const EstimatorConfig& config,
                          const std::vector<double>& measured_inclinations);

// Shifts every center so the anchored centroid sits at the origin.
void apply_centroid_anchor(const StructureSpec& spec, PoseState& pose);

struct StepRecord {
  int step = 0;    // 1-based count of completed steps
  int strut = -1;  // updated strut, -1 for a full-batch step
  double energy = 0.0;
  // Sum of per-cable energies as last evaluated by the per-strut sweep;
  // cables not visited yet count as zero. Equals energy for full batch.
  double sweep_energy = 0.0;
  double grad_position_norm = 0.0;
  double grad_yaw_norm = 0.0;
  double seconds = 0.0;
};

struct HeatmapRow {
  std::vector<double> position;  // per strut, mean(|de/dx|, |de/dy|, |de/dz|)
  std::vector<double> yaw;       // per strut, |de/dtheta|
};

struct NodeSnapshot {
  int step = 0;
  NodeSet nodes;
};

struct EstimationTrace {
  double initial_energy = 0.0;
  std::vector<StepRecord> steps;
  std::vector<HeatmapRow> heatmap;
  std::vector<NodeSnapshot> snapshots;
  std::vector<PoseState> poses;  // only when run() is asked to keep them
  PoseState initial_pose;
  PoseState final_pose;
  bool converged = false;
  int steps_to_convergence = -1;

  double final_energy() const { return steps.empty() ? initial_energy : steps.back().energy; }
  double peak_energy() const;
};

class Estimator {
 public:
  Estimator(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
            EstimatorConfig config, PoseState initial);

  StepRecord step();
  void set_inclinations(const std::vector<double>& inclinations);

  const PoseState& pose() const { return pose_; }
  const NodeSet& nodes() const { return nodes_; }
  const EnergyGradients& gradients() const { return gradients_; }
  double energy() const { return energy_; }
  int steps_taken() const { return steps_taken_; }
  double position_rate() const { return alpha_; }
  double yaw_rate() const { return beta_; }

 private:
  void step_full_batch();
  void step_single_strut(int strut);
  void recentre();
  void refresh_nodes();
  void refresh_diagnostics();

  const StructureSpec& spec_;
  const ConnectivityMatrix& connectivity_;
  EstimatorConfig config_;
  PoseState pose_;
  NodeSet nodes_;
  PoseState sweep_start_;
  NodeSet sweep_start_nodes_;
  EnergyGradients gradients_;
  double energy_ = 0.0;
  std::vector<double> cable_cache_;
  std::vector<int> order_;
  int cursor_ = 0;
  int steps_taken_ = 0;
  double alpha_;
  double beta_;
  int backoff_streak_ = 0;
  std::mt19937_64 rng_;
};

// One estimator step from an arbitrary pose; step_index selects the strut
// in the per-strut schedule (strut = step_index mod m_b).
std::pair<PoseState, StepRecord> step(const StructureSpec& spec,
                                      const ConnectivityMatrix& connectivity,
                                      const PoseState& pose, const EstimatorConfig& config,
                                      int step_index = 0);

struct RunOptions {
  bool keep_poses = false;
};

EstimationTrace run(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                    const EstimatorConfig& config, InclinationSource& source,
                    RunOptions options = {});

// Rotation about z (optionally composed with the mirror y -> -y) plus a
// translation.
struct GravityAxisTransform {
  double rotation = 0.0;
  bool reflected = false;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const;
  NodeSet apply(const NodeSet& nodes) const;
};

enum class Reflection { kForbid, kAllow };

struct Alignment {
  NodeSet aligned;
  double mae = 0.0;  // mean Euclidean node distance, meters
  GravityAxisTransform transform;
};

// Least-squares rigid fit of `estimated` onto `reference` using only
// gravity-preserving motions. Inclination data cannot distinguish a shape
// from its mirror image, so kAllow also tries the reflected candidate.
Alignment align_poses(const NodeSet& estimated, const NodeSet& reference,
                      Reflection reflection = Reflection::kAllow);

double mean_node_distance(const NodeSet& a, const NodeSet& b);

}  // namespace tenshape
