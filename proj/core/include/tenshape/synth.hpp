#pragma once

// Synthetic fixtures: structures, ground-truth poses, consistent IMU streams
// and a brute-force minimizer used as an independent oracle by the tests.
//
// Ground truth is the constructed geometry relaxed to the minimum of the
// cable energy over p and theta with its inclinations held: the shape those
// inclinations determine. Any other pose with the same inclinations has more
// energy and cannot be recovered from them. Relaxing phi as well is possible
// but with zero natural lengths it drives the shape flat.

#include <cstdint>
#include <functional>
#include <vector>

#include "tenshape/estimator.hpp"
#include "tenshape/kinematics.hpp"
#include "tenshape/model.hpp"
#include "tenshape/sensing.hpp"

namespace tenshape::synth {

inline constexpr double kGravity = 9.81;

struct NoiseModel {
  double accel_sigma = 0.0;  // m/s^2 per axis
  double gyro_sigma = 0.0;   // rad/s per axis
  std::uint64_t seed = 0;
};

using PosePath = std::function<PoseState(double t)>;

struct SyntheticScenario {
  StructureSpec spec;
  PoseState truth_pose;
  NodeSet truth_nodes;
  PoseState nominal_pose;  // constructed geometry before form-finding
  PosePath path;           // empty for a static scenario
  NoiseModel noise;
  std::vector<int> top_nodes;   // 0-based, for the length metric
  std::vector<int> base_nodes;

  bool is_static() const { return !path; }
  PoseState pose_at(double t) const { return path ? path(t) : truth_pose; }
};

struct FormFindOptions {
  bool free_inclinations = false;
  int max_iterations = 20000;
  double gradient_tolerance = 1e-11;
};

struct FormFindResult {
  PoseState pose;
  double energy = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

// BFGS over every p and theta, and phi when free_inclinations is set
// (anchors ignored). The result is
// moved into the structure's gauge: the frozen-yaw strut gets theta = 0 and
// the anchored centroid sits at the origin.
FormFindResult form_find(const StructureSpec& spec, const PoseState& start,
                         const FormFindOptions& options = {});

// Moves a pose into the gauge declared by the structure's anchors.
PoseState gauge_fix(const StructureSpec& spec, PoseState pose);

struct PrismOptions {
  double ring_stiffness = 1.0;
  double vertical_stiffness = 3.0;
  bool form_find = true;
};

// Class-1 prism. Node i (top) and node i + n (bottom) of strut i; bottom and
// top rings plus one vertical cable per strut, bottom i to top i - 1.
SyntheticScenario make_prism(int strut_count = 3, double radius = 0.2, double height = 0.3,
                             double twist = 5.0 * 3.14159265358979323846 / 6.0,
                             PrismOptions options = {});

struct Tm40Options {
  double passive_stiffness = 1.0;
  double active_stiffness = 27.0 / 140.0;
  double upper_height = 0.22;  // module height, upper modules
  double base_height = 0.28;   // module height, base module
  double twist = 3.0 * 3.14159265358979323846 / 4.0;
  bool form_find = true;
};

// Modules stacked top (module 1) to base. Struts are numbered module by
// module from the top; node i is the upper end of strut i. Passive loops:
// the top square, the bottom square and one octagon per module interface.
// Active cables: each upper node to the two nearest lower nodes of its own
// module. lengths[0] applies to the upper modules, lengths.back() to the base.
SyntheticScenario make_tm40_like(int layers = 5, int struts_per_layer = 4,
                                 std::vector<double> lengths = {0.33, 0.39},
                                 Tm40Options options = {});

struct LearningRates {
  double position = 0.0;
  double yaw = 0.0;
};

// Step sizes scaled to the local curvature of the energy: alpha from the
// stiffness attached to each strut, beta from that stiffness times the
// squared horizontal lever arm of its nodes. Halved for full batch.
LearningRates recommended_rates(const StructureSpec& spec, const std::vector<double>& inclinations,
                                Schedule schedule = Schedule::kPerStrut);

std::vector<double> inclinations_of(const PoseState& pose);

// Samples every strut at rate_hz for duration_s, records interleaved by
// strut. Accel is gravity in a strut frame with a random (fixed) roll, gyro
// the inclination rate about the inclination-plane normal; both plus noise.
std::vector<ImuSample> emit_imu_stream(const SyntheticScenario& scenario, double rate_hz,
                                       double duration_s);

// phi_i(t) = phi_i(0) + amplitude sin(2 pi f t + i phase_step).
PosePath sinusoidal_tilt(PoseState base, double amplitude, double frequency_hz,
                         double phase_step = 0.0);

// Bends the structure in the x-z plane about a fixed base: strut i is turned
// rigidly about the y axis through the base centroid by
// curvature(t) * (height of its center above the base), where
// curvature(t) = amplitude * sin(2 pi t / period). Positive amplitude at
// t = period / 4 moves the tip towards +x.
PosePath bend_path(const StructureSpec& spec, PoseState base, double amplitude, double period_s);

// Holds the path at its t = 0 pose for hold_s seconds, then plays it.
PosePath hold_then(PosePath path, double hold_s);

// Tip displacement (mean of top nodes) along x relative to t = 0.
double tip_offset_x(const SyntheticScenario& scenario, double t);

// The shape a moving scenario should be estimated as at time t: pose_at(t)
// relaxed with its inclinations held, in the structure's gauge. The path
// itself only drives the sensors.
NodeSet truth_nodes_at(const SyntheticScenario& scenario, double t);

struct OracleOptions {
  int iterations = 40000;
  double step = 0.0;  // <= 0: a quarter of recommended_rates (full batch)
  double difference_step = 1e-6;
  double gradient_tolerance = 1e-10;
};

struct OracleResult {
  PoseState pose;
  NodeSet nodes;
  double energy = 0.0;
};

// Minimizes the same energy over p and theta with phi fixed by a different
// route: central-difference gradients of evaluate_energy, one small fixed
// step for both unknown kinds, full batch, from `restarts` random starts.
OracleResult oracle_minimize(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                             const std::vector<double>& inclinations, int restarts,
                             std::uint64_t seed, const OracleOptions& options = {});

}  // namespace tenshape::synth
