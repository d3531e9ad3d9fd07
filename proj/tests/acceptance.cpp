// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion other than the performance warning fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "support.hpp"
#include "tenshape/energy.hpp"
#include "tenshape/estimator.hpp"
#include "tenshape/sensing.hpp"
#include "tenshape/synth.hpp"

namespace ts = tenshape;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and limits.
constexpr double kGradientRel = 1e-6;
constexpr int kGradientPoses = 240;
constexpr double kTranslationTol = 1e-12;
constexpr double kRotationTol = 1e-10;
constexpr double kGradSumTol = 1e-9;
constexpr double kPrismMae = 1e-3;
constexpr double kPrismCv = 0.02;
constexpr int kPrismRestarts = 10;
constexpr double kLengthPct = 2.1;
constexpr double kStaticPhiTol = 1e-6;
constexpr double kStepTargetMs = 7.36;
constexpr double kOracleSlack = 1e-4;
constexpr double kFixtureActive = 0.5;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Line& l, bool warn_only = false) {
  const char* verdict = l.pass ? "PASS" : (warn_only ? "WARN" : "FAIL");
  std::printf("[%s] %d %s: %s\n", verdict, id, name, l.detail.c_str());
  std::fflush(stdout);
  if (!l.pass && !warn_only) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ts::EstimatorConfig tuned(const ts::StructureSpec& spec, const std::vector<double>& phi) {
  ts::EstimatorConfig cfg;
  const auto r = ts::synth::recommended_rates(spec, phi);
  cfg.position_rate = r.position;
  cfg.yaw_rate = r.yaw;
  cfg.max_steps = 200000;
  cfg.tol_position = 1e-9;
  cfg.tol_yaw = 1e-9;
  cfg.record_heatmap = false;
  return cfg;
}

ts::synth::SyntheticScenario fixture_tm40(double active = kFixtureActive) {
  return ts::synth::make_tm40_like(5, 4, {0.33, 0.39}, {.active_stiffness = active});
}

double length_of(const ts::synth::SyntheticScenario& sc, const ts::NodeSet& nodes) {
  return ts::manipulator_length(nodes, sc.top_nodes, sc.base_nodes);
}

Line gradient_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int components = 0;
  for (int trial = 0; trial < kGradientPoses; ++trial) {
    const auto spec = ts::test::random_spec(rng, 2 + trial % 5, trial % 2 == 1);
    const auto c = ts::build_connectivity(spec);
    const auto pose = ts::test::random_pose(rng, spec.strut_count());
    const auto g = ts::evaluate_gradients(spec, c, pose, ts::Masking::kRaw);
    const auto fd = ts::test::central_difference(spec, pose);
    auto rel = [](double a, double b) {
      return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
    };
    for (std::size_t i = 0; i < g.yaw.size(); ++i) {
      for (int a = 0; a < 3; ++a) worst = std::max(worst, rel(g.position[i][a], fd.position[i][a]));
      worst = std::max(worst, rel(g.yaw[i], fd.yaw[i]));
      components += 4;
    }
  }
  const double dt = seconds_since(t0);
  return {worst < kGradientRel && dt < 60.0,
          fmt("%d poses, %d components, worst relative error %.2e (limit %.0e), %.2f s",
              kGradientPoses, components, worst, kGradientRel, dt)};
}

Line gauge_invariance() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst_t = 0.0, worst_r = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto spec = ts::test::random_spec(rng, 2 + trial % 5, trial % 2 == 0);
    const auto c = ts::build_connectivity(spec);
    const auto pose = ts::test::random_pose(rng, spec.strut_count());
    const double e0 = ts::evaluate_energy(spec, c, pose).total;
    const double scale = std::max(1.0, e0);
    ts::PoseState moved = pose;
    const Eigen::Vector3d shift(u(rng), u(rng), u(rng));
    for (auto& p : moved.centers) p += shift;
    worst_t = std::max(worst_t, std::abs(ts::evaluate_energy(spec, c, moved).total - e0) / scale);
    const auto turned = ts::rotate_about_gravity(pose, u(rng));
    worst_r = std::max(worst_r, std::abs(ts::evaluate_energy(spec, c, turned).total - e0) / scale);
    const auto g = ts::evaluate_gradients(spec, c, pose, ts::Masking::kRaw);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& gp : g.position) sum += gp;
    worst_sum = std::max(worst_sum, sum.cwiseAbs().maxCoeff());
  }
  return {worst_t <= kTranslationTol && worst_r <= kRotationTol && worst_sum <= kGradSumTol,
          fmt("translation %.1e (<= %.0e), gravity rotation %.1e (<= %.0e), "
              "max per-axis grad_p sum %.1e (<= %.0e); 300 instances",
              worst_t, kTranslationTol, worst_r, kRotationTol, worst_sum, kGradSumTol)};
}

Line slack_mask() {
  std::mt19937_64 rng(103);
  int slack = 0, violations = 0, monotone_checks = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto spec = ts::test::random_spec(rng, 2 + trial % 5, true);
    const auto c = ts::build_connectivity(spec);
    const auto pose = ts::test::random_pose(rng, spec.strut_count(), 0.2);
    const auto geo = ts::evaluate_energy(spec, c, pose);
    const auto g_all = ts::evaluate_gradients(spec, c, pose, ts::Masking::kRaw);
    for (int k = 0; k < spec.cable_count(); ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (geo.lengths[uk] > spec.cable(k).natural_length) continue;
      ++slack;
      if (geo.energies[uk] != 0.0 || geo.taut[uk]) ++violations;
      std::vector<ts::CableSpec> others = spec.cables();
      others.erase(others.begin() + k);
      const ts::StructureSpec without("w", spec.struts(), others);
      const auto g = ts::evaluate_gradients(without, ts::build_connectivity(without), pose,
                                            ts::Masking::kRaw);
      for (std::size_t i = 0; i < g.yaw.size(); ++i) {
        if ((g.position[i] - g_all.position[i]).norm() > 1e-14 ||
            std::abs(g.yaw[i] - g_all.yaw[i]) > 1e-14) {
          ++violations;
        }
      }
    }
    for (int k = 0; k < spec.cable_count(); ++k) {
      ts::CableSpec cable = spec.cable(k);
      const double m = geo.lengths[static_cast<std::size_t>(k)];
      double prev = ts::cable_energy(cable, m);
      for (int s = 0; s < 8; ++s) {
        cable.natural_length += 0.05;
        const double e = ts::cable_energy(cable, m);
        if (e > prev) ++violations;
        prev = e;
        ++monotone_checks;
      }
    }
  }
  return {violations == 0 && slack > 50,
          fmt("%d slack cables checked, %d natural-length increments, %d violations", slack,
              monotone_checks, violations)};
}

Line prism_recovery() {
  const auto t0 = Clock::now();
  const auto prism = ts::synth::make_prism();
  const auto c = ts::build_connectivity(prism.spec);
  const auto phi = ts::synth::inclinations_of(prism.truth_pose);
  ts::FixedInclinations src(phi);
  std::vector<double> energies;
  double worst_mae = 0.0;
  int converged = 0;
  for (int r = 0; r < kPrismRestarts; ++r) {
    auto cfg = tuned(prism.spec, phi);
    cfg.init_mode = ts::InitMode::kRandom;
    cfg.seed = 1000 + static_cast<std::uint64_t>(r);
    const auto t = ts::run(prism.spec, c, cfg, src);
    converged += t.converged;
    energies.push_back(t.final_energy());
    const auto nodes = ts::nodes_from_pose(prism.spec, t.final_pose);
    worst_mae = std::max(worst_mae, ts::align_poses(nodes, prism.truth_nodes).mae);
  }
  const double mean = std::accumulate(energies.begin(), energies.end(), 0.0) / energies.size();
  double var = 0.0;
  for (double e : energies) var += (e - mean) * (e - mean);
  const double cv = std::sqrt(var / energies.size()) / mean;
  const double dt = seconds_since(t0);
  return {converged == kPrismRestarts && worst_mae < kPrismMae && cv < kPrismCv && dt < 120.0,
          fmt("%d/%d converged, worst MAE %.2e m (< %.0e), energy cv %.2e (< %.2f), %.2f s",
              converged, kPrismRestarts, worst_mae, kPrismMae, cv, kPrismCv, dt)};
}

struct Tm40Run {
  ts::EstimationTrace trace;
  double seconds = 0.0;
};

Tm40Run run_tm40(const ts::synth::SyntheticScenario& sc, ts::InitMode init, int max_steps = 200000) {
  const auto c = ts::build_connectivity(sc.spec);
  const auto phi = ts::synth::inclinations_of(sc.truth_pose);
  ts::FixedInclinations src(phi);
  auto cfg = tuned(sc.spec, phi);
  cfg.init_mode = init;
  cfg.max_steps = max_steps;
  const auto t0 = Clock::now();
  Tm40Run r{ts::run(sc.spec, c, cfg, src), 0.0};
  r.seconds = seconds_since(t0);
  return r;
}

Line five_layer(const ts::synth::SyntheticScenario& sc, const Tm40Run& r) {
  const double truth = length_of(sc, sc.truth_nodes);
  const double est = length_of(sc, ts::nodes_from_pose(sc.spec, r.trace.final_pose));
  const double pct = 100.0 * std::abs(est - truth) / truth;
  const double mae =
      ts::align_poses(ts::nodes_from_pose(sc.spec, r.trace.final_pose), sc.truth_nodes).mae;
  return {pct < kLengthPct && r.seconds < 300.0,
          fmt("d = %.6f m vs truth %.6f m, error %.2e %% (< %.1f %%), node MAE %.2e m, "
              "%d steps, %.2f s",
              est, truth, pct, kLengthPct, mae, static_cast<int>(r.trace.steps.size()),
              r.seconds)};
}

Line energy_shape(const ts::synth::SyntheticScenario& sc, const Tm40Run& collapsed) {
  const auto& steps = collapsed.trace.steps;
  // The running per-sweep energy starts near zero: struts not yet visited
  // contribute nothing, so it climbs over the first sweep and then follows
  // the exact energy down.
  std::size_t peak = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].sweep_energy > steps[peak].sweep_energy) peak = i;
  }
  const std::size_t early_limit = std::max<std::size_t>(2 * sc.spec.strut_count(), steps.size() / 20);
  const bool early = peak < early_limit && steps[peak].sweep_energy > steps.front().sweep_energy;
  std::size_t rises = 0, exact_rises = 0;
  for (std::size_t i = peak + 1; i < steps.size(); ++i) {
    if (steps[i].sweep_energy > steps[i - 1].sweep_energy * (1.0 + 1e-12) + 1e-15) ++rises;
    if (steps[i].energy > steps[i - 1].energy * (1.0 + 1e-12) + 1e-15) ++exact_rises;
  }
  const double final_e = steps.back().energy;
  const std::size_t tail = steps.size() - steps.size() / 10;
  const double plateau = std::abs(steps[tail].energy - final_e) / std::max(final_e, 1e-300);

  ts::EstimatorConfig cfg;
  const auto phi = ts::synth::inclinations_of(sc.truth_pose);
  const auto c = ts::build_connectivity(sc.spec);
  int expanded_higher = 0;
  double e_collapsed_mean = 0.0, e_expanded_mean = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    cfg.init_mode = ts::InitMode::kCollapsed;
    const double ec = ts::evaluate_energy(sc.spec, c, ts::initialize_pose(sc.spec, cfg, phi)).total;
    cfg.init_mode = ts::InitMode::kExpanded;
    const double ee = ts::evaluate_energy(sc.spec, c, ts::initialize_pose(sc.spec, cfg, phi)).total;
    expanded_higher += ee > ec;
    e_collapsed_mean += ec / 5;
    e_expanded_mean += ee / 5;
  }
  return {early && rises == 0 && exact_rises == 0 && plateau < 1e-3 && expanded_higher == 5,
          fmt("sweep energy %.4g after step 1, peak %.4g at step %zu (limit %zu), %zu/%zu sweep/exact "
              "rises after the peak, final %.5g, last-10%% drift %.1e; initial energy expanded %.4g vs "
              "collapsed %.4g (%d/5 seeds higher)",
              steps.front().sweep_energy, steps[peak].sweep_energy, peak + 1, early_limit, rises,
              exact_rises,
              final_e, plateau, e_expanded_mean, e_collapsed_mean, expanded_higher)};
}

Line sensing() {
  // Zero-noise static streams.
  double worst_static = 0.0;
  for (const auto& sc : {ts::synth::make_prism(), fixture_tm40()}) {
    const int mb = sc.spec.strut_count();
    ts::StreamReplaySource src(ts::synth::emit_imu_stream(sc, 80.0, 5.0), mb, 7.36e-3, 1.0);
    const auto phi = src.inclinations(200);
    for (int i = 0; i < mb; ++i) {
      worst_static = std::max(worst_static, std::abs(phi[static_cast<std::size_t>(i)] -
                                                     sc.truth_pose.inclinations[static_cast<std::size_t>(i)]));
    }
  }
  // Noisy sinusoidal tilt.
  auto tilt = ts::synth::make_prism();
  tilt.path = ts::synth::sinusoidal_tilt(tilt.truth_pose, 0.1, 0.25);
  tilt.noise = {0.5, 0.01, 17};
  const auto samples = ts::synth::emit_imu_stream(tilt, 80.0, 20.0);
  ts::FilterBank bank(3);
  double fused = 0.0, raw = 0.0;
  int n = 0;
  for (const auto& s : samples) {
    bank.push(s);
    if (s.t < 2.0) continue;
    const double truth = tilt.pose_at(s.t).inclinations[static_cast<std::size_t>(s.strut)];
    const double f = bank.snapshot()[static_cast<std::size_t>(s.strut)] - truth;
    const double a = *ts::quasi_static_angle(s.accel) - truth;
    fused += f * f;
    raw += a * a;
    ++n;
  }
  const double rms_f = std::sqrt(fused / n), rms_a = std::sqrt(raw / n);
  const double lambda = ts::FilterConfig{}.coefficient();
  const bool exact = lambda == 16.0 / 17.0;
  return {worst_static < kStaticPhiTol && rms_f < rms_a && exact,
          fmt("static max |phi error| %.1e rad (< %.0e); tilt RMS fused %.4f vs accel-only %.4f "
              "rad; lambda = %.17g %s 16/17",
              worst_static, kStaticPhiTol, rms_f, rms_a, lambda, exact ? "==" : "!=")};
}

Line performance(const ts::synth::SyntheticScenario& sc) {
  const auto c = ts::build_connectivity(sc.spec);
  const auto phi = ts::synth::inclinations_of(sc.truth_pose);
  auto cfg = tuned(sc.spec, phi);
  cfg.record_heatmap = true;
  ts::Estimator est(sc.spec, c, cfg, ts::initialize_pose(sc.spec, cfg, phi));
  const int steps = 4000;
  const auto t0 = Clock::now();
  for (int s = 0; s < steps; ++s) est.step();
  const double ms = 1e3 * seconds_since(t0) / steps;
  return {ms <= kStepTargetMs, fmt("%.4f ms per step on 20 struts over %d steps (target %.2f ms)",
                                   ms, steps, kStepTargetMs)};
}

Line oracle_ceiling(const ts::synth::SyntheticScenario& tm, const Tm40Run& tm_run) {
  struct Case {
    std::string name;
    ts::StructureSpec spec;
    std::vector<double> phi;
    double estimator = 0.0;
  };
  std::vector<Case> cases;
  const auto prism = ts::synth::make_prism();
  cases.push_back({"prism", prism.spec, ts::synth::inclinations_of(prism.truth_pose)});
  cases.push_back({"two-strut", ts::test::two_strut_spec(2.0, 0.1), {0.6, 2.1}});
  {
    const auto c = ts::build_connectivity(prism.spec);
    ts::FixedInclinations src(cases[0].phi);
    cases[0].estimator = ts::run(prism.spec, c, tuned(prism.spec, cases[0].phi), src).final_energy();
  }
  {
    const auto& cs = cases[1];
    const auto c = ts::build_connectivity(cs.spec);
    ts::FixedInclinations src(cs.phi);
    cases[1].estimator = ts::run(cs.spec, c, tuned(cs.spec, cs.phi), src).final_energy();
  }
  cases.push_back({"tm40", tm.spec, ts::synth::inclinations_of(tm.truth_pose),
                   tm_run.trace.final_energy()});

  std::string detail;
  bool ok = true;
  for (const auto& cs : cases) {
    const auto t0 = Clock::now();
    const auto o = ts::synth::oracle_minimize(cs.spec, ts::build_connectivity(cs.spec), cs.phi,
                                              cs.name == "tm40" ? 2 : 4, 7);
    const bool pass = cs.estimator <= o.energy * (1.0 + kOracleSlack);
    ok = ok && pass;
    detail += fmt("%s%s estimator %.8g vs oracle %.8g (%.1f s)", detail.empty() ? "" : "; ",
                  cs.name.c_str(), cs.estimator, o.energy, seconds_since(t0));
  }
  return {ok, detail};
}

}  // namespace

int main() {
  report(1, "gradient oracle", gradient_oracle());
  report(2, "gauge invariance", gauge_invariance());
  report(3, "slack mask", slack_mask());
  report(4, "prism recovery", prism_recovery());

  const auto tm = fixture_tm40();
  const auto collapsed = run_tm40(tm, ts::InitMode::kCollapsed);
  report(5, "five-layer length", five_layer(tm, collapsed));
  report(6, "energy trace shape", energy_shape(tm, collapsed));
  report(7, "sensing pipeline", sensing());
  report(8, "step time", performance(tm), true);
  report(9, "oracle ceiling", oracle_ceiling(tm, collapsed));

  // The 140:27 passive:active stiffness ratio, for reference only.
  const auto stock = fixture_tm40(27.0 / 140.0);
  const auto stock_run = run_tm40(stock, ts::InitMode::kCollapsed, 50000);
  const double truth = length_of(stock, stock.truth_nodes);
  const double est = length_of(stock, ts::nodes_from_pose(stock.spec, stock_run.trace.final_pose));
  const double mae = ts::align_poses(ts::nodes_from_pose(stock.spec, stock_run.trace.final_pose),
                                     stock.truth_nodes)
                         .mae;
  std::printf("[INFO] tm40 at 140:27 stiffness: d error %.2e %%, node MAE %.3e m, %s after %zu steps\n",
              100.0 * std::abs(est - truth) / truth, mae,
              stock_run.trace.converged ? "converged" : "not converged",
              stock_run.trace.steps.size());

  std::printf("%s: %d criterion failure(s)\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
