#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "tenshape/synth.hpp"

namespace tenshape {
namespace {

using test::kPi;

TEST(Prism, CountsAndSymmetry) {
  const auto p = synth::make_prism();
  EXPECT_EQ(p.spec.strut_count(), 3);
  EXPECT_EQ(p.spec.cable_count(), 9);
  EXPECT_EQ(p.spec.node_count(), 6);
  const auto& phi = p.truth_pose.inclinations;
  EXPECT_NEAR(phi[1], phi[0], 1e-9);
  EXPECT_NEAR(phi[2], phi[0], 1e-9);
  EXPECT_GT(phi[0], 0.0);
  EXPECT_LT(phi[0], kPi / 2);
}

TEST(Prism, FormFoundTruthIsStationary) {
  const auto p = synth::make_prism();
  const auto g = evaluate_gradients(p.spec, build_connectivity(p.spec), p.truth_pose, Masking::kRaw);
  EXPECT_LT(g.position_norm(), 1e-8);
  EXPECT_LT(g.yaw_norm(), 1e-8);
  EXPECT_EQ(p.truth_pose.inclinations, p.nominal_pose.inclinations);
}

TEST(Tm40, Counts) {
  const auto tm = synth::make_tm40_like();
  EXPECT_EQ(tm.spec.strut_count(), 20);
  EXPECT_EQ(tm.spec.node_count(), 40);
  EXPECT_EQ(tm.spec.cable_count(), 80);
  const auto one = synth::make_tm40_like(1, 4, {0.39}, {.form_find = false});
  EXPECT_EQ(one.spec.strut_count(), 4);
  EXPECT_EQ(one.spec.cable_count(), 16);
  EXPECT_EQ(tm.top_nodes.size(), 4u);
  EXPECT_EQ(tm.base_nodes.size(), 4u);
}

TEST(Tm40, EveryNodeCarriesCables) {
  const auto tm = synth::make_tm40_like();
  std::vector<int> degree(40, 0);
  for (const auto& c : tm.spec.cables()) {
    ++degree[static_cast<std::size_t>(c.node_a)];
    ++degree[static_cast<std::size_t>(c.node_b)];
  }
  for (int d : degree) EXPECT_GE(d, 3);
}

TEST(Rates, ScaleWithStiffness) {
  const auto p = synth::make_prism();
  const auto phi = synth::inclinations_of(p.truth_pose);
  const auto a = synth::recommended_rates(p.spec, phi);
  const auto stiff = synth::make_prism(3, 0.2, 0.3, 5.0 * kPi / 6.0, {2.0, 6.0});
  const auto b = synth::recommended_rates(stiff.spec, phi);
  EXPECT_GT(a.position, 0.0);
  EXPECT_GT(a.yaw, 0.0);
  EXPECT_NEAR(b.position, a.position / 2.0, 1e-12);
  const auto full = synth::recommended_rates(p.spec, phi, Schedule::kFullBatch);
  EXPECT_NEAR(full.position, a.position / 2.0, 1e-15);
}

// Two struts with zero natural lengths: every cable vector is
// sign * (p1 - p0) + c_k(theta), so the optimal offset is the weighted mean
// and only the yaw difference is left to search.
double two_strut_minimum(const StructureSpec& spec, const std::vector<double>& phi) {
  auto energy_at = [&](double dtheta) {
    const Eigen::Vector3d q0 = direction_from_angles(phi[0], 0.0);
    const Eigen::Vector3d q1 = direction_from_angles(phi[1], dtheta);
    const Eigen::Vector3d ends[4] = {0.5 * spec.strut(0).length * q0, 0.5 * spec.strut(1).length * q1,
                                     -0.5 * spec.strut(0).length * q0, -0.5 * spec.strut(1).length * q1};
    // Node n lives on strut n % 2; vector = (p_{b%2} - p_{a%2}) + ends[b] - ends[a].
    double ksum = 0.0;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (const auto& c : spec.cables()) {
      const double sign = c.node_b % 2 == 1 ? 1.0 : -1.0;  // coefficient of d = p1 - p0
      acc += c.stiffness * sign * (ends[c.node_b] - ends[c.node_a]);
      ksum += c.stiffness;
    }
    const Eigen::Vector3d d = -acc / ksum;
    double e = 0.0;
    for (const auto& c : spec.cables()) {
      const double sign = c.node_b % 2 == 1 ? 1.0 : -1.0;
      e += 0.5 * c.stiffness * (sign * d + ends[c.node_b] - ends[c.node_a]).squaredNorm();
    }
    return e;
  };
  double best = 0.0, best_e = energy_at(0.0);
  for (double t = -kPi; t < kPi; t += 1e-4) {
    if (const double e = energy_at(t); e < best_e) best_e = e, best = t;
  }
  for (double h = 1e-5; h > 1e-12; h /= 2) {
    for (double cand : {best - h, best + h}) {
      if (const double e = energy_at(cand); e < best_e) best_e = e, best = cand;
    }
  }
  return best_e;
}

TEST(Oracle, MatchesClosedFormOnTwoStruts) {
  const StructureSpec spec = test::two_strut_spec();
  for (const auto& phi : {std::vector<double>{0.4, 2.0}, std::vector<double>{1.2, 1.3}}) {
    const double exact = two_strut_minimum(spec, phi);
    const auto o = synth::oracle_minimize(spec, build_connectivity(spec), phi, 3, 9);
    EXPECT_NEAR(o.energy, exact, 1e-8 * std::max(1.0, exact));
  }
}

TEST(Oracle, AgreesWithEstimatorOnPrism) {
  const auto p = synth::make_prism();
  const ConnectivityMatrix c = build_connectivity(p.spec);
  const auto phi = synth::inclinations_of(p.truth_pose);
  const auto o = synth::oracle_minimize(p.spec, c, phi, 3, 10);
  EstimatorConfig cfg;
  const auto r = synth::recommended_rates(p.spec, phi);
  cfg.position_rate = r.position;
  cfg.yaw_rate = r.yaw;
  cfg.max_steps = 20000;
  cfg.tol_position = cfg.tol_yaw = 1e-10;
  FixedInclinations src(phi);
  const auto t = run(p.spec, c, cfg, src);
  EXPECT_NEAR(o.energy, t.final_energy(), 1e-8);
  EXPECT_LT(align_poses(nodes_from_pose(p.spec, t.final_pose), o.nodes).mae, 1e-4);
  EXPECT_LT(align_poses(o.nodes, p.truth_nodes).mae, 1e-4);
}

TEST(Oracle, AllSlackEndsAtZero) {
  auto p = synth::make_prism(3, 0.2, 0.3, 5.0 * kPi / 6.0, {.form_find = false});
  std::vector<CableSpec> cables = p.spec.cables();
  for (auto& c : cables) c.natural_length = 50.0;
  const StructureSpec loose("loose", p.spec.struts(), cables);
  const auto o = synth::oracle_minimize(loose, build_connectivity(loose),
                                        synth::inclinations_of(p.nominal_pose), 2, 1);
  EXPECT_EQ(o.energy, 0.0);
}

TEST(Motion, TiltFollowsSinusoid) {
  const auto p = synth::make_prism();
  const auto path = synth::sinusoidal_tilt(p.truth_pose, 0.1, 0.25, 0.5);
  for (double t : {0.0, 0.3, 1.0, 2.7}) {
    const PoseState s = path(t);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(s.inclinations[i],
                  p.truth_pose.inclinations[i] +
                      0.1 * std::sin(2 * kPi * 0.25 * t + 0.5 * static_cast<double>(i)),
                  1e-15);
    }
  }
}

TEST(Motion, BendMovesTipTowardsPlusX) {
  auto tm = synth::make_tm40_like(5, 4, {0.33, 0.39}, {.active_stiffness = 0.5});
  tm.path = synth::bend_path(tm.spec, tm.truth_pose, 0.3, 16.0);
  EXPECT_GT(synth::tip_offset_x(tm, 4.0), 0.01);
  EXPECT_LT(synth::tip_offset_x(tm, 12.0), -0.01);
  EXPECT_NEAR(synth::tip_offset_x(tm, 8.0), 0.0, 1e-9);
  // Bending is rigid per strut: lengths are kept, base nodes hardly move.
  const NodeSet n0 = nodes_from_pose(tm.spec, tm.pose_at(0.0));
  const NodeSet n1 = nodes_from_pose(tm.spec, tm.pose_at(4.0));
  for (int id : tm.base_nodes) EXPECT_LT((n1[id] - n0[id]).norm(), 0.05);

  const NodeSet relaxed = synth::truth_nodes_at(tm, 4.0);
  double tip0 = 0.0, tip1 = 0.0;
  for (int id : tm.top_nodes) tip0 += n0[id].x(), tip1 += relaxed[id].x();
  EXPECT_GT(tip1 - tip0, 0.0);
}

TEST(Motion, HoldThenDelaysThePath) {
  const auto p = synth::make_prism();
  const auto held = synth::hold_then(synth::sinusoidal_tilt(p.truth_pose, 0.1, 0.25), 2.0);
  EXPECT_EQ(held(0.0).inclinations, held(1.9).inclinations);
  EXPECT_EQ(held(2.5).inclinations,
            synth::sinusoidal_tilt(p.truth_pose, 0.1, 0.25)(0.5).inclinations);
  EXPECT_THROW(synth::hold_then({}, -1.0), std::invalid_argument);
}

TEST(Stream, GyroMatchesInclinationRate) {
  auto p = synth::make_prism();
  p.path = synth::sinusoidal_tilt(p.truth_pose, 0.1, 0.25);
  const auto samples = synth::emit_imu_stream(p, 80.0, 2.0);
  for (const auto& s : samples) {
    const double t = s.t;
    const double expected = 0.1 * 2 * kPi * 0.25 * std::cos(2 * kPi * 0.25 * t);
    EXPECT_NEAR(inclination_rate(s.accel, s.gyro).value, expected, 1e-6);
    EXPECT_NEAR(*quasi_static_angle(s.accel), p.pose_at(t).inclinations[static_cast<std::size_t>(s.strut)],
                1e-9);
  }
}

TEST(Stream, FusionBeatsAccelerometerUnderNoise) {
  auto p = synth::make_prism();
  p.path = synth::sinusoidal_tilt(p.truth_pose, 0.1, 0.25);
  p.noise = {0.5, 0.01, 7};
  const auto samples = synth::emit_imu_stream(p, 80.0, 20.0);
  FilterBank bank(3);
  double fused_sq = 0.0, accel_sq = 0.0;
  int n = 0;
  for (const auto& s : samples) {
    bank.push(s);
    if (s.t < 2.0) continue;
    const double truth = p.pose_at(s.t).inclinations[static_cast<std::size_t>(s.strut)];
    const double fused = bank.snapshot()[static_cast<std::size_t>(s.strut)];
    const double raw = *quasi_static_angle(s.accel);
    fused_sq += (fused - truth) * (fused - truth);
    accel_sq += (raw - truth) * (raw - truth);
    ++n;
  }
  EXPECT_LT(std::sqrt(fused_sq / n), std::sqrt(accel_sq / n));
}

TEST(Stream, DeterministicForASeed) {
  auto p = synth::make_prism();
  p.noise = {0.2, 0.01, 42};
  const auto a = synth::emit_imu_stream(p, 80.0, 1.0);
  const auto b = synth::emit_imu_stream(p, 80.0, 1.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].accel, b[i].accel);
  EXPECT_THROW(synth::emit_imu_stream(p, 0.0, 1.0), std::invalid_argument);
}

TEST(Gauge, FixMovesAnchorsToOrigin) {
  const auto tm = synth::make_tm40_like(5, 4, {0.33, 0.39}, {.form_find = false});
  std::mt19937_64 rng(61);
  PoseState pose = test::random_pose(rng, 20);
  pose.inclinations = tm.nominal_pose.inclinations;
  const PoseState fixed = synth::gauge_fix(tm.spec, pose);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int s : tm.spec.anchors().centroid_struts) mean += fixed.centers[static_cast<std::size_t>(s)];
  EXPECT_LT(mean.norm(), 1e-12);
  const ConnectivityMatrix c = build_connectivity(tm.spec);
  EXPECT_NEAR(evaluate_energy(tm.spec, c, fixed).total, evaluate_energy(tm.spec, c, pose).total,
              1e-9);
}

}  // namespace
}  // namespace tenshape
