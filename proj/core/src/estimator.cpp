#include "tenshape/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

namespace tenshape {

std::string_view to_string(Schedule s) {
  return s == Schedule::kFullBatch ? "full-batch" : "per-strut";
}

std::string_view to_string(SweepUpdate s) {
  return s == SweepUpdate::kJacobi ? "jacobi" : "gauss-seidel";
}

std::string_view to_string(InitMode m) {
  switch (m) {
    case InitMode::kCollapsed: return "collapsed";
    case InitMode::kExpanded: return "expanded";
    case InitMode::kRandom: return "random";
    case InitMode::kGiven: return "given";
  }
  return "?";
}

Schedule parse_schedule(std::string_view s) {
  if (s == "full-batch") return Schedule::kFullBatch;
  if (s == "per-strut") return Schedule::kPerStrut;
  throw ConfigError("schedule must be full-batch or per-strut, got '" + std::string(s) + "'");
}

SweepUpdate parse_sweep_update(std::string_view s) {
  if (s == "gauss-seidel") return SweepUpdate::kGaussSeidel;
  if (s == "jacobi") return SweepUpdate::kJacobi;
  throw ConfigError("sweep update must be gauss-seidel or jacobi, got '" + std::string(s) + "'");
}

InitMode parse_init_mode(std::string_view s) {
  if (s == "collapsed") return InitMode::kCollapsed;
  if (s == "expanded") return InitMode::kExpanded;
  if (s == "random") return InitMode::kRandom;
  if (s == "given") return InitMode::kGiven;
  throw ConfigError("init must be collapsed, expanded, random or given, got '" + std::string(s) +
                    "'");
}

void EstimatorConfig::validate() const {
  if (!(position_rate > 0.0) || !std::isfinite(position_rate)) {
    throw ConfigError("alpha must be positive");
  }
  if (!(yaw_rate > 0.0) || !std::isfinite(yaw_rate)) throw ConfigError("beta must be positive");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!(tol_position > 0.0) || !(tol_yaw > 0.0)) throw ConfigError("tolerances must be positive");
  if (sensor_refresh_period < 1) throw ConfigError("sensor refresh period must be >= 1");
  if (!(collapsed_radius >= 0.0)) throw ConfigError("collapsed radius must be >= 0");
  if (!(divergence_factor > 1.0)) throw ConfigError("divergence factor must exceed 1");
  if (snapshot_every < 0) throw ConfigError("snapshot period must be >= 0");
  if (init_mode == InitMode::kGiven && !given_pose) {
    throw ConfigError("init mode 'given' needs a pose");
  }
}

double nominal_structure_length(const StructureSpec& spec) {
  double longest = 0.0;
  for (const auto& s : spec.struts()) longest = std::max(longest, s.length);
  return std::sqrt(static_cast<double>(spec.strut_count())) * longest;
}

void apply_centroid_anchor(const StructureSpec& spec, PoseState& pose) {
  const auto& group = spec.anchors().centroid_struts;
  if (group.empty()) return;
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (int s : group) c += pose.centers[static_cast<std::size_t>(s)];
  c /= static_cast<double>(group.size());
  for (auto& p : pose.centers) p -= c;
}

namespace {

void check_inclinations(const StructureSpec& spec, const std::vector<double>& phi) {
  if (static_cast<int>(phi.size()) != spec.strut_count()) {
    throw std::invalid_argument("expected " + std::to_string(spec.strut_count()) +
                                " inclinations, got " + std::to_string(phi.size()));
  }
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (!(phi[i] >= 0.0 && phi[i] <= std::numbers::pi)) {
      throw std::domain_error("inclination of strut " + std::to_string(i + 1) +
                              " outside [0, pi]");
    }
  }
}

Eigen::Vector3d sample_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = {u(rng), u(rng), u(rng)};
  } while (v.squaredNorm() > 1.0);
  return radius * v;
}

bool all_finite(const Eigen::Vector3d& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace

PoseState initialize_pose(const StructureSpec& spec, const EstimatorConfig& config,
                          const std::vector<double>& measured_inclinations) {
  check_inclinations(spec, measured_inclinations);
  const int mb = spec.strut_count();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> yaw_dist(0.0, 2.0 * std::numbers::pi);

  PoseState pose(mb);
  if (config.init_mode == InitMode::kGiven) {
    if (!config.given_pose) throw ConfigError("init mode 'given' needs a pose");
    pose = *config.given_pose;
    if (pose.strut_count() != mb || !pose.consistent()) {
      throw std::invalid_argument("given pose does not match structure");
    }
  } else {
    double half_width = config.random_half_width;
    if (half_width <= 0.0) {
      for (const auto& s : spec.struts()) half_width = std::max(half_width, s.length);
    }
    const double expanded = config.expanded_radius > 0.0
                                ? config.expanded_radius
                                : 2.0 * nominal_structure_length(spec);
    std::uniform_real_distribution<double> box(-half_width, half_width);
    for (int i = 0; i < mb; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      switch (config.init_mode) {
        case InitMode::kCollapsed:
          pose.centers[ui] = sample_ball(rng, config.collapsed_radius);
          break;
        case InitMode::kExpanded:
          pose.centers[ui] = sample_ball(rng, expanded);
          break;
        case InitMode::kRandom:
          pose.centers[ui] = {box(rng), box(rng), box(rng)};
          break;
        case InitMode::kGiven:
          break;
      }
      pose.yaws[ui] = yaw_dist(rng);
      if (spec.strut(i).freeze_position) pose.centers[ui].setZero();
      if (spec.strut(i).freeze_yaw) pose.yaws[ui] = 0.0;
    }
    apply_centroid_anchor(spec, pose);
  }
  pose.inclinations = measured_inclinations;
  return pose;
}

double EstimationTrace::peak_energy() const {
  double peak = initial_energy;
  for (const auto& s : steps) peak = std::max(peak, s.energy);
  return peak;
}

// ---------------------------------------------------------------------------

Estimator::Estimator(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                     EstimatorConfig config, PoseState initial)
    : spec_(spec),
      connectivity_(connectivity),
      config_(std::move(config)),
      pose_(std::move(initial)),
      alpha_(config_.position_rate),
      beta_(config_.yaw_rate),
      rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  if (pose_.strut_count() != spec_.strut_count() || !pose_.consistent()) {
    throw std::invalid_argument("initial pose does not match structure");
  }
  check_inclinations(spec_, pose_.inclinations);
  order_.resize(static_cast<std::size_t>(spec_.strut_count()));
  std::iota(order_.begin(), order_.end(), 0);
  if (config_.shuffle_order) std::shuffle(order_.begin(), order_.end(), rng_);
  cable_cache_.assign(static_cast<std::size_t>(spec_.cable_count()), 0.0);
  refresh_nodes();
  refresh_diagnostics();
  if (config_.schedule == Schedule::kFullBatch) {
    const auto geom = evaluate_energy(spec_, connectivity_, nodes_);
    cable_cache_ = geom.energies;
  }
}

void Estimator::refresh_nodes() { nodes_ = nodes_from_pose(spec_, pose_); }

void Estimator::refresh_diagnostics() {
  energy_ = evaluate_energy(spec_, connectivity_, nodes_).total;
  gradients_ = evaluate_gradients(spec_, connectivity_, pose_, Masking::kAnchored);
}

void Estimator::set_inclinations(const std::vector<double>& inclinations) {
  check_inclinations(spec_, inclinations);
  pose_.inclinations = inclinations;
  if (!sweep_start_.centers.empty()) sweep_start_.inclinations = inclinations;
  refresh_nodes();
  if (!sweep_start_.centers.empty()) sweep_start_nodes_ = nodes_from_pose(spec_, sweep_start_);
  refresh_diagnostics();
}

void Estimator::recentre() {
  const auto& group = spec_.anchors().centroid_struts;
  if (group.empty()) return;
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (int s : group) c += pose_.centers[static_cast<std::size_t>(s)];
  c /= static_cast<double>(group.size());
  if (c.isZero(0.0)) return;
  for (auto& p : pose_.centers) p -= c;
  for (auto& n : nodes_.positions) n -= c;
}

void Estimator::step_full_batch() {
  const auto& g = gradients_;
  for (int i = 0; i < spec_.strut_count(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!all_finite(g.position[ui]) || !std::isfinite(g.yaw[ui])) {
      throw DivergenceError(steps_taken_ + 1, "non-finite gradient at strut " +
                                                  std::to_string(i + 1));
    }
    pose_.centers[ui] -= alpha_ * g.position[ui];
    pose_.yaws[ui] -= beta_ * g.yaw[ui];
  }
  refresh_nodes();
  recentre();
}

void Estimator::step_single_strut(int strut) {
  const bool jacobi = config_.sweep_update == SweepUpdate::kJacobi;
  if (jacobi && cursor_ == 0) {
    sweep_start_ = pose_;
    sweep_start_nodes_ = nodes_;
  }
  const StrutGradient g = jacobi ? strut_gradient(spec_, connectivity_, sweep_start_,
                                                  sweep_start_nodes_, strut)
                                 : strut_gradient(spec_, connectivity_, pose_, nodes_, strut);
  if (!all_finite(g.position) || !std::isfinite(g.yaw)) {
    throw DivergenceError(steps_taken_ + 1,
                          "non-finite gradient at strut " + std::to_string(strut + 1));
  }
  const auto ui = static_cast<std::size_t>(strut);
  const auto& s = spec_.strut(strut);
  if (!s.freeze_position) pose_.centers[ui] -= alpha_ * g.position;
  if (!s.freeze_yaw) pose_.yaws[ui] -= beta_ * g.yaw;

  const Eigen::Vector3d half =
      0.5 * s.length * direction_from_angles(pose_.inclinations[ui], pose_.yaws[ui]);
  nodes_.positions[ui] = pose_.centers[ui] + half;
  nodes_.positions[ui + static_cast<std::size_t>(spec_.strut_count())] = pose_.centers[ui] - half;
  recentre();

  for (int k : spec_.cables_of_strut(strut)) {
    const auto& c = spec_.cable(k);
    cable_cache_[static_cast<std::size_t>(k)] =
        cable_energy(c, (nodes_[c.node_b] - nodes_[c.node_a]).norm());
  }
}

StepRecord Estimator::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const PoseState before = config_.auto_backoff ? pose_ : PoseState{};
  const double energy_before = energy_;
  const std::vector<double> cache_before = config_.auto_backoff ? cable_cache_ : std::vector<double>{};

  StepRecord rec;
  if (config_.schedule == Schedule::kFullBatch) {
    step_full_batch();
  } else {
    rec.strut = order_[static_cast<std::size_t>(cursor_)];
    step_single_strut(rec.strut);
  }
  refresh_diagnostics();

  if (config_.auto_backoff) {
    if (energy_ > energy_before) {
      pose_ = before;
      cable_cache_ = cache_before;
      refresh_nodes();
      refresh_diagnostics();
      alpha_ *= 0.5;
      beta_ *= 0.5;
      backoff_streak_ = 0;
    } else if (++backoff_streak_ >= 20) {
      alpha_ = std::min(config_.position_rate, 2.0 * alpha_);
      beta_ = std::min(config_.yaw_rate, 2.0 * beta_);
      backoff_streak_ = 0;
    }
  }

  if (config_.schedule == Schedule::kFullBatch) {
    cable_cache_ = evaluate_energy(spec_, connectivity_, nodes_).energies;
  } else if (++cursor_ == spec_.strut_count()) {
    cursor_ = 0;
    if (config_.shuffle_order) std::shuffle(order_.begin(), order_.end(), rng_);
  }

  ++steps_taken_;
  rec.step = steps_taken_;
  rec.energy = energy_;
  rec.sweep_energy = std::accumulate(cable_cache_.begin(), cable_cache_.end(), 0.0);
  rec.grad_position_norm = gradients_.position_norm();
  rec.grad_yaw_norm = gradients_.yaw_norm();
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

std::pair<PoseState, StepRecord> step(const StructureSpec& spec,
                                      const ConnectivityMatrix& connectivity,
                                      const PoseState& pose, const EstimatorConfig& config,
                                      int step_index) {
  config.validate();
  StepRecord rec;
  rec.step = step_index + 1;
  PoseState out = pose;
  if (config.schedule == Schedule::kPerStrut) {
    const int mb = spec.strut_count();
    const int target = ((step_index % mb) + mb) % mb;
    const StrutGradient g =
        strut_gradient(spec, connectivity, pose, nodes_from_pose(spec, pose), target);
    if (!all_finite(g.position) || !std::isfinite(g.yaw)) {
      throw DivergenceError(rec.step, "non-finite gradient at strut " + std::to_string(target + 1));
    }
    const auto ut = static_cast<std::size_t>(target);
    if (!spec.strut(target).freeze_position) out.centers[ut] -= config.position_rate * g.position;
    if (!spec.strut(target).freeze_yaw) out.yaws[ut] -= config.yaw_rate * g.yaw;
    rec.strut = target;
  } else {
    const auto g = evaluate_gradients(spec, connectivity, pose, Masking::kAnchored);
    for (std::size_t i = 0; i < out.centers.size(); ++i) {
      if (!all_finite(g.position[i]) || !std::isfinite(g.yaw[i])) {
        throw DivergenceError(rec.step, "non-finite gradient at strut " + std::to_string(i + 1));
      }
      out.centers[i] -= config.position_rate * g.position[i];
      out.yaws[i] -= config.yaw_rate * g.yaw[i];
    }
  }
  apply_centroid_anchor(spec, out);
  rec.energy = evaluate_energy(spec, connectivity, out).total;
  rec.sweep_energy = rec.energy;
  const auto grads = evaluate_gradients(spec, connectivity, out, Masking::kAnchored);
  rec.grad_position_norm = grads.position_norm();
  rec.grad_yaw_norm = grads.yaw_norm();
  return {out, rec};
}

// ---------------------------------------------------------------------------

EstimationTrace run(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                    const EstimatorConfig& config, InclinationSource& source,
                    RunOptions options) {
  config.validate();
  auto fetch = [&](int step) {
    try {
      return source.inclinations(step);
    } catch (const SensorSourceError&) {
      throw;
    } catch (const std::exception& e) {
      throw SensorSourceError(step, e.what());
    }
  };

  EstimationTrace trace;
  Estimator est(spec, connectivity, config, initialize_pose(spec, config, fetch(0)));
  trace.initial_pose = est.pose();
  trace.initial_energy = est.energy();
  trace.steps.reserve(static_cast<std::size_t>(config.max_steps));
  double reference_energy = trace.initial_energy;

  const int mb = spec.strut_count();
  for (int s = 0; s < config.max_steps; ++s) {
    if (s > 0 && s % config.sensor_refresh_period == 0) {
      est.set_inclinations(fetch(s));
      reference_energy = std::max(reference_energy, est.energy());
    }
    StepRecord rec = est.step();
    trace.steps.push_back(rec);

    if (config.record_heatmap) {
      HeatmapRow row;
      row.position.resize(static_cast<std::size_t>(mb));
      row.yaw.resize(static_cast<std::size_t>(mb));
      const auto& g = est.gradients();
      for (std::size_t i = 0; i < static_cast<std::size_t>(mb); ++i) {
        row.position[i] = g.position[i].cwiseAbs().mean();
        row.yaw[i] = std::abs(g.yaw[i]);
      }
      trace.heatmap.push_back(std::move(row));
    }
    if (config.snapshot_every > 0 && rec.step % config.snapshot_every == 0) {
      trace.snapshots.push_back({rec.step, est.nodes()});
    }
    if (options.keep_poses) trace.poses.push_back(est.pose());

    if (!std::isfinite(rec.energy) ||
        rec.energy > config.divergence_factor * std::max(reference_energy, 1e-300)) {
      trace.final_pose = est.pose();
      throw DivergenceError(rec.step, "energy " + std::to_string(rec.energy) + " exceeds " +
                                          std::to_string(config.divergence_factor) +
                                          " x reference " + std::to_string(reference_energy));
    }
    if (convergence_check(est.gradients(), config.tol_position, config.tol_yaw)) {
      trace.converged = true;
      trace.steps_to_convergence = rec.step;
      break;
    }
  }
  trace.final_pose = est.pose();
  return trace;
}

// ---------------------------------------------------------------------------

Eigen::Vector3d GravityAxisTransform::apply(const Eigen::Vector3d& x) const {
  const double yy = reflected ? -x.y() : x.y();
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  return Eigen::Vector3d(c * x.x() - s * yy, s * x.x() + c * yy, x.z()) + translation;
}

NodeSet GravityAxisTransform::apply(const NodeSet& nodes) const {
  NodeSet out;
  out.positions.reserve(nodes.positions.size());
  for (const auto& n : nodes.positions) out.positions.push_back(apply(n));
  return out;
}

double mean_node_distance(const NodeSet& a, const NodeSet& b) {
  if (a.size() != b.size()) throw std::invalid_argument("node count mismatch");
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
  return sum / a.size();
}

namespace {

Alignment fit(const NodeSet& est, const NodeSet& ref, bool reflected) {
  const auto n = static_cast<double>(est.size());
  Eigen::Vector3d ce = Eigen::Vector3d::Zero();
  Eigen::Vector3d cr = Eigen::Vector3d::Zero();
  for (int i = 0; i < est.size(); ++i) {
    Eigen::Vector3d e = est[i];
    if (reflected) e.y() = -e.y();
    ce += e;
    cr += ref[i];
  }
  ce /= n;
  cr /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (int i = 0; i < est.size(); ++i) {
    Eigen::Vector3d e = est[i];
    if (reflected) e.y() = -e.y();
    const Eigen::Vector3d a = e - ce;
    const Eigen::Vector3d b = ref[i] - cr;
    sxx += a.x() * b.x() + a.y() * b.y();
    sxy += a.x() * b.y() - a.y() * b.x();
  }
  Alignment out;
  out.transform.rotation = std::atan2(sxy, sxx);
  out.transform.reflected = reflected;
  const double c = std::cos(out.transform.rotation);
  const double s = std::sin(out.transform.rotation);
  const Eigen::Vector3d rotated_centroid(c * ce.x() - s * ce.y(), s * ce.x() + c * ce.y(), ce.z());
  out.transform.translation = cr - rotated_centroid;
  out.aligned = out.transform.apply(est);
  out.mae = mean_node_distance(out.aligned, ref);
  return out;
}

}  // namespace

Alignment align_poses(const NodeSet& estimated, const NodeSet& reference, Reflection reflection) {
  if (estimated.size() != reference.size()) {
    throw std::invalid_argument("align_poses: node count mismatch (" +
                                std::to_string(estimated.size()) + " vs " +
                                std::to_string(reference.size()) + ")");
  }
  if (estimated.size() == 0) return {};
  Alignment best = fit(estimated, reference, false);
  if (reflection == Reflection::kAllow) {
    Alignment mirrored = fit(estimated, reference, true);
    auto ssd = [&](const Alignment& a) {
      double s = 0.0;
      for (int i = 0; i < reference.size(); ++i) s += (a.aligned[i] - reference[i]).squaredNorm();
      return s;
    };
    if (ssd(mirrored) < ssd(best)) best = std::move(mirrored);
  }
  return best;
}

}  // namespace tenshape
