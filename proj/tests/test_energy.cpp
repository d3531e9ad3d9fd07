#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "tenshape/energy.hpp"
#include "tenshape/synth.hpp"

namespace tenshape {
namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

TEST(Energy, MatchesNaiveSum) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const StructureSpec spec = test::random_spec(rng, 2 + trial % 5, trial % 2 == 0);
    const ConnectivityMatrix c = build_connectivity(spec);
    const PoseState pose = test::random_pose(rng, spec.strut_count());
    const CableGeometry g = evaluate_energy(spec, c, pose);
    EXPECT_NEAR(g.total, test::naive_energy(spec, pose), 1e-12 * std::max(1.0, g.total));
    double sum = 0.0;
    for (double e : g.energies) sum += e;
    EXPECT_DOUBLE_EQ(sum, g.total);
  }
}

TEST(Energy, SingleCableHandValue) {
  StructureSpec spec("pair", {{1.0}, {1.0}}, {{0, 1, 4.0, 0.5, CableClass::kPassive, {}}});
  PoseState pose(2);
  pose.centers[1] = Eigen::Vector3d(2.0, 0.0, 0.0);
  // Both struts vertical, top nodes 2 m apart: e = 4 (2 - 0.5)^2 / 2 = 4.5.
  EXPECT_DOUBLE_EQ(evaluate_energy(spec, build_connectivity(spec), pose).total, 4.5);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(22);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const StructureSpec spec = test::random_spec(rng, 2 + trial % 5, false);
    const ConnectivityMatrix c = build_connectivity(spec);
    const PoseState pose = test::random_pose(rng, spec.strut_count());
    const EnergyGradients g = evaluate_gradients(spec, c, pose, Masking::kRaw);
    const auto fd = test::central_difference(spec, pose);
    for (int i = 0; i < spec.strut_count(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      for (int a = 0; a < 3; ++a) {
        EXPECT_LT(rel_err(g.position[ui][a], fd.position[ui][a]), 1e-6);
      }
      EXPECT_LT(rel_err(g.yaw[ui], fd.yaw[ui]), 1e-6);
      ++checked;
    }
  }
  EXPECT_GT(checked, 600);
}

TEST(Gradient, PerStrutMatchesFullEvaluation) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const StructureSpec spec = test::random_spec(rng, 3 + trial % 3, true);
    const ConnectivityMatrix c = build_connectivity(spec);
    const PoseState pose = test::random_pose(rng, spec.strut_count());
    const NodeSet nodes = nodes_from_pose(spec, pose);
    const EnergyGradients g = evaluate_gradients(spec, c, pose, Masking::kRaw);
    for (int i = 0; i < spec.strut_count(); ++i) {
      const StrutGradient s = strut_gradient(spec, c, pose, nodes, i);
      EXPECT_LT((s.position - g.position[static_cast<std::size_t>(i)]).norm(), 1e-12);
      EXPECT_NEAR(s.yaw, g.yaw[static_cast<std::size_t>(i)], 1e-12);
    }
  }
}

TEST(Gradient, AnchoredMaskZeroesFrozenUnknowns) {
  std::vector<StrutSpec> struts{{0.5, true, true, {}}, {0.5, false, true, {}}, {0.5}};
  std::vector<CableSpec> cables{{0, 1, 1.0, 0.0, CableClass::kPassive, {}},
                                {1, 2, 1.0, 0.0, CableClass::kPassive, {}},
                                {3, 5, 1.0, 0.0, CableClass::kPassive, {}},
                                {2, 3, 1.0, 0.0, CableClass::kPassive, {}}};
  const StructureSpec spec("mask", struts, cables);
  std::mt19937_64 rng(24);
  const PoseState pose = test::random_pose(rng, 3);
  const auto g = evaluate_gradients(spec, build_connectivity(spec), pose);
  EXPECT_EQ(g.position[0].norm(), 0.0);
  EXPECT_EQ(g.yaw[0], 0.0);
  EXPECT_GT(g.position[1].norm(), 0.0);
  EXPECT_EQ(g.yaw[1], 0.0);
  EXPECT_NE(g.yaw[2], 0.0);
}

TEST(Gauge, TranslationAndGravityRotation) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const StructureSpec spec = test::random_spec(rng, 2 + trial % 5, trial % 3 == 0);
    const ConnectivityMatrix c = build_connectivity(spec);
    const PoseState pose = test::random_pose(rng, spec.strut_count());
    const double e0 = evaluate_energy(spec, c, pose).total;

    PoseState moved = pose;
    const Eigen::Vector3d shift(u(rng), u(rng), u(rng));
    for (auto& p : moved.centers) p += shift;
    EXPECT_LE(std::abs(evaluate_energy(spec, c, moved).total - e0), 1e-12 * std::max(1.0, e0));

    const PoseState turned = rotate_about_gravity(pose, u(rng));
    EXPECT_LE(std::abs(evaluate_energy(spec, c, turned).total - e0), 1e-10 * std::max(1.0, e0));

    const auto g = evaluate_gradients(spec, c, pose, Masking::kRaw);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& gp : g.position) sum += gp;
    EXPECT_LE(sum.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Slack, MaskedCablesContributeNothing) {
  std::mt19937_64 rng(26);
  int slack_seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    StructureSpec base = test::random_spec(rng, 2 + trial % 4, true);
    const PoseState pose = test::random_pose(rng, base.strut_count(), 0.2);
    const ConnectivityMatrix c = build_connectivity(base);
    const CableGeometry geo = evaluate_energy(base, c, pose);
    for (int k = 0; k < base.cable_count(); ++k) {
      const double m = geo.lengths[static_cast<std::size_t>(k)];
      if (m > base.cable(k).natural_length) continue;
      ++slack_seen;
      EXPECT_EQ(geo.energies[static_cast<std::size_t>(k)], 0.0);
      EXPECT_FALSE(geo.taut[static_cast<std::size_t>(k)]);
      // Removing that cable must leave every gradient bit-identical.
      std::vector<CableSpec> others = base.cables();
      others.erase(others.begin() + k);
      const StructureSpec without("w", base.struts(), others);
      const auto g1 = evaluate_gradients(base, c, pose, Masking::kRaw);
      const auto g2 = evaluate_gradients(without, build_connectivity(without), pose, Masking::kRaw);
      for (int i = 0; i < base.strut_count(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        EXPECT_LT((g1.position[ui] - g2.position[ui]).norm(), 1e-14);
        EXPECT_NEAR(g1.yaw[ui], g2.yaw[ui], 1e-14);
      }
    }
  }
  EXPECT_GT(slack_seen, 20);
}

TEST(Slack, LongerNaturalLengthNeverRaisesEnergy) {
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> len(0.0, 2.0), grow(0.0, 0.5), k(0.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    CableSpec c{0, 1, k(rng), len(rng), CableClass::kPassive, {}};
    const double m = len(rng);
    const double before = cable_energy(c, m);
    c.natural_length += grow(rng);
    EXPECT_LE(cable_energy(c, m), before);
    if (m <= c.natural_length) {
      EXPECT_EQ(cable_energy(c, m), 0.0);
    }
  }
}

TEST(Convergence, Check) {
  EnergyGradients g;
  g.position = {Eigen::Vector3d(1e-7, 0, 0)};
  g.yaw = {1e-7};
  EXPECT_TRUE(convergence_check(g, 1e-6, 1e-6));
  EXPECT_FALSE(convergence_check(g, 1e-8, 1e-6));
  EXPECT_FALSE(convergence_check(g, 1e-6, 1e-8));
  EXPECT_THROW(convergence_check(g, 0.0, 1e-6), std::invalid_argument);
}

TEST(Energy, AllSlackIsZeroEverywhere) {
  std::mt19937_64 rng(28);
  StructureSpec spec = test::random_spec(rng, 3, false);
  std::vector<CableSpec> cables = spec.cables();
  for (auto& c : cables) c.natural_length = 1e3;
  const StructureSpec loose("loose", spec.struts(), cables);
  const ConnectivityMatrix c = build_connectivity(loose);
  for (int i = 0; i < 20; ++i) {
    const PoseState pose = test::random_pose(rng, 3);
    EXPECT_EQ(evaluate_energy(loose, c, pose).total, 0.0);
    const auto g = evaluate_gradients(loose, c, pose, Masking::kRaw);
    EXPECT_EQ(g.position_norm(), 0.0);
    EXPECT_EQ(g.yaw_norm(), 0.0);
  }
}

}  // namespace
}  // namespace tenshape
