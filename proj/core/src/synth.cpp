#include "tenshape/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "tenshape/energy.hpp"

namespace tenshape::synth {
namespace {

constexpr double kPi = std::numbers::pi;

// Unconstrained direction: same formula as direction_from_angles without the
// domain check, so the form-finder may step phi outside [0, pi].
Eigen::Vector3d raw_direction(double phi, double theta) {
  return {std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), std::cos(phi)};
}

// x = (p_x, p_y, p_z, phi, theta) per strut.
double full_energy(const StructureSpec& spec, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  const int mb = spec.strut_count();
  std::vector<Eigen::Vector3d> nodes(static_cast<std::size_t>(2 * mb));
  for (int i = 0; i < mb; ++i) {
    const Eigen::Vector3d p = x.segment<3>(5 * i);
    const Eigen::Vector3d q = raw_direction(x[5 * i + 3], x[5 * i + 4]);
    const double h = 0.5 * spec.strut(i).length;
    nodes[static_cast<std::size_t>(i)] = p + h * q;
    nodes[static_cast<std::size_t>(i + mb)] = p - h * q;
  }
  std::vector<Eigen::Vector3d> g(nodes.size(), Eigen::Vector3d::Zero());
  double e = 0.0;
  for (const auto& c : spec.cables()) {
    const Eigen::Vector3d v = nodes[static_cast<std::size_t>(c.node_b)] -
                              nodes[static_cast<std::size_t>(c.node_a)];
    const double m = v.norm();
    e += cable_energy(c, m);
    if (grad && m > kMinCableLength && m > c.natural_length) {
      const Eigen::Vector3d f = c.stiffness * (m - c.natural_length) / m * v;
      g[static_cast<std::size_t>(c.node_b)] += f;
      g[static_cast<std::size_t>(c.node_a)] -= f;
    }
  }
  if (grad) {
    grad->setZero(x.size());
    for (int i = 0; i < mb; ++i) {
      const auto& gp = g[static_cast<std::size_t>(i)];
      const auto& gm = g[static_cast<std::size_t>(i + mb)];
      const double phi = x[5 * i + 3];
      const double th = x[5 * i + 4];
      const Eigen::Vector3d gq = 0.5 * spec.strut(i).length * (gp - gm);
      const Eigen::Vector3d dphi(std::cos(phi) * std::cos(th), std::cos(phi) * std::sin(th),
                                 -std::sin(phi));
      const Eigen::Vector3d dth(-std::sin(phi) * std::sin(th), std::sin(phi) * std::cos(th), 0.0);
      grad->segment<3>(5 * i) = gp + gm;
      (*grad)[5 * i + 3] = gq.dot(dphi);
      (*grad)[5 * i + 4] = gq.dot(dth);
    }
  }
  return e;
}

std::vector<int> nodes_of_struts(int first, int count, int offset) {
  std::vector<int> out;
  for (int k = 0; k < count; ++k) out.push_back(first + k + offset);
  return out;
}

// Strut between two endpoint positions, upper end first.
void set_strut(PoseState& pose, int i, const Eigen::Vector3d& upper, const Eigen::Vector3d& lower) {
  const Eigen::Vector3d d = upper - lower;
  const auto ui = static_cast<std::size_t>(i);
  pose.centers[ui] = 0.5 * (upper + lower);
  pose.inclinations[ui] = std::acos(std::clamp(d.z() / d.norm(), -1.0, 1.0));
  pose.yaws[ui] = std::atan2(d.y(), d.x());
}

SyntheticScenario finish(StructureSpec spec, PoseState nominal, bool do_form_find,
                         std::vector<int> top, std::vector<int> base) {
  spec = StructureSpec(spec.name(), spec.struts(), spec.cables(), spec.anchors(), {top, base});
  SyntheticScenario s;
  s.nominal_pose = gauge_fix(spec, nominal);
  s.truth_pose = do_form_find ? form_find(spec, s.nominal_pose).pose : s.nominal_pose;
  s.truth_nodes = nodes_from_pose(spec, s.truth_pose);
  s.spec = std::move(spec);
  s.top_nodes = std::move(top);
  s.base_nodes = std::move(base);
  return s;
}

}  // namespace

PoseState gauge_fix(const StructureSpec& spec, PoseState pose) {
  for (int i = 0; i < spec.strut_count(); ++i) {
    if (spec.strut(i).freeze_yaw) {
      pose = rotate_about_gravity(pose, -pose.yaws[static_cast<std::size_t>(i)]);
      pose.yaws[static_cast<std::size_t>(i)] = 0.0;
      break;
    }
  }
  for (int i = 0; i < spec.strut_count(); ++i) {
    if (spec.strut(i).freeze_position) {
      const Eigen::Vector3d c = pose.centers[static_cast<std::size_t>(i)];
      for (auto& p : pose.centers) p -= c;
      break;
    }
  }
  apply_centroid_anchor(spec, pose);
  return pose;
}

FormFindResult form_find(const StructureSpec& spec, const PoseState& start,
                         const FormFindOptions& options) {
  const int mb = spec.strut_count();
  const Eigen::Index n = 5 * mb;
  Eigen::VectorXd x(n);
  for (int i = 0; i < mb; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    x.segment<3>(5 * i) = start.centers[ui];
    x[5 * i + 3] = start.inclinations[ui];
    x[5 * i + 4] = start.yaws[ui];
  }

  auto evaluate = [&](const Eigen::VectorXd& at, Eigen::VectorXd& grad) {
    const double value = full_energy(spec, at, &grad);
    if (!options.free_inclinations) {
      for (int i = 0; i < mb; ++i) grad[5 * i + 3] = 0.0;
    }
    return value;
  };
  Eigen::VectorXd g(n), g_new(n);
  double e = evaluate(x, g);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  int it = 0;
  for (; it < options.max_iterations && g.norm() > options.gradient_tolerance; ++it) {
    Eigen::VectorXd dir = -h_inv * g;
    if (dir.dot(g) >= 0.0) {
      h_inv.setIdentity();
      dir = -g;
    }
    double t = 1.0;
    Eigen::VectorXd x_new;
    double e_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      x_new = x + t * dir;
      e_new = full_energy(spec, x_new, nullptr);
      if (e_new <= e + 1e-4 * t * dir.dot(g)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (h_inv.isIdentity()) break;
      h_inv.setIdentity();
      continue;
    }
    evaluate(x_new, g_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-16 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += (rho * rho * y.dot(hy) + rho) * s * s.transpose() -
               rho * (hy * s.transpose() + s * hy.transpose());
    }
    x = x_new;
    g = g_new;
    e = e_new;
  }

  FormFindResult r;
  r.pose = PoseState(mb);
  for (int i = 0; i < mb; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    double phi = std::fmod(x[5 * i + 3], 2.0 * kPi);
    double th = x[5 * i + 4];
    if (phi < 0.0) phi += 2.0 * kPi;
    if (phi > kPi) {
      phi = 2.0 * kPi - phi;
      th += kPi;
    }
    r.pose.centers[ui] = x.segment<3>(5 * i);
    r.pose.inclinations[ui] = phi;
    r.pose.yaws[ui] = normalize_angle(th);
  }
  r.pose = gauge_fix(spec, r.pose);
  r.energy = e;
  r.gradient_norm = g.norm();
  r.iterations = it;
  return r;
}

SyntheticScenario make_prism(int strut_count, double radius, double height, double twist,
                             PrismOptions options) {
  if (strut_count < 3 || strut_count > 6) {
    throw std::invalid_argument("prism strut count must be in 3..6");
  }
  if (!(radius > 0.0) || !(height > 0.0) || !(twist > 0.0) || !(twist < 2.0 * kPi)) {
    throw std::invalid_argument("prism radius, height and twist must be positive");
  }
  if (!(options.ring_stiffness >= 0.0) || !(options.vertical_stiffness >= 0.0)) {
    throw std::invalid_argument("prism stiffness must be non-negative");
  }
  const int n = strut_count;
  PoseState nominal(n);
  std::vector<StrutSpec> struts;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    const Eigen::Vector3d lower(radius * std::cos(a), radius * std::sin(a), -0.5 * height);
    const Eigen::Vector3d upper(radius * std::cos(a + twist), radius * std::sin(a + twist),
                                0.5 * height);
    set_strut(nominal, i, upper, lower);
    StrutSpec s;
    s.length = (upper - lower).norm();
    s.label = "s" + std::to_string(i + 1);
    struts.push_back(s);
  }
  struts[0].freeze_yaw = true;

  std::vector<CableSpec> cables;
  auto add = [&](int a, int b, double k, const char* label) {
    CableSpec c;
    c.node_a = a;
    c.node_b = b;
    c.stiffness = k;
    c.cable_class = label[0] == 'v' ? CableClass::kActive : CableClass::kPassive;
    c.label = label;
    cables.push_back(c);
  };
  for (int i = 0; i < n; ++i) add(n + i, n + (i + 1) % n, options.ring_stiffness, "bottom");
  for (int i = 0; i < n; ++i) add(i, (i + 1) % n, options.ring_stiffness, "top");
  for (int i = 0; i < n; ++i) add(n + i, (i + n - 1) % n, options.vertical_stiffness, "vertical");

  AnchorSpec anchors;
  for (int i = 0; i < n; ++i) anchors.centroid_struts.push_back(i);
  StructureSpec spec("prism-" + std::to_string(n), std::move(struts), std::move(cables),
                     std::move(anchors));
  return finish(std::move(spec), std::move(nominal), options.form_find, nodes_of_struts(0, n, 0),
                nodes_of_struts(0, n, n));
}

SyntheticScenario make_tm40_like(int layers, int struts_per_layer, std::vector<double> lengths,
                                 Tm40Options options) {
  if (layers < 1) throw std::invalid_argument("need at least one layer");
  if (struts_per_layer < 3) throw std::invalid_argument("need at least 3 struts per layer");
  if (lengths.empty()) throw std::invalid_argument("need at least one strut length");
  for (double l : lengths) {
    if (!(l > 0.0)) throw std::invalid_argument("strut lengths must be positive");
  }
  const int n = struts_per_layer;
  const int mb = layers * n;
  auto module_length = [&](int j) { return j == layers - 1 ? lengths.back() : lengths.front(); };
  auto module_height = [&](int j) {
    return j == layers - 1 ? options.base_height : options.upper_height;
  };
  for (int j = 0; j < layers; ++j) {
    if (!(module_height(j) > 0.0) || !(module_height(j) < module_length(j))) {
      throw std::invalid_argument("module height must be positive and below the strut length");
    }
  }

  // Built from the base upwards; module j = 0 is the top.
  PoseState nominal(mb);
  std::vector<StrutSpec> struts(static_cast<std::size_t>(mb));
  std::vector<double> radius(static_cast<std::size_t>(layers));
  std::vector<double> upper_angle(static_cast<std::size_t>(layers));
  double z = 0.0;
  double psi = 0.0;
  for (int j = layers - 1; j >= 0; --j) {
    const double len = module_length(j);
    const double h = module_height(j);
    const double tw = ((layers - 1 - j) % 2 == 0 ? 1.0 : -1.0) * options.twist;
    const double r = std::sqrt(len * len - h * h) / (2.0 * std::abs(std::sin(0.5 * tw)));
    radius[static_cast<std::size_t>(j)] = r;
    upper_angle[static_cast<std::size_t>(j)] = psi + tw;
    for (int k = 0; k < n; ++k) {
      const int i = j * n + k;
      const double a = psi + 2.0 * kPi * k / n;
      const Eigen::Vector3d lower(r * std::cos(a), r * std::sin(a), z);
      const Eigen::Vector3d upper(r * std::cos(a + tw), r * std::sin(a + tw), z + h);
      set_strut(nominal, i, upper, lower);
      auto& s = struts[static_cast<std::size_t>(i)];
      s.length = len;
      s.label = "m" + std::to_string(j + 1) + "s" + std::to_string(k + 1);
    }
    z += h;
    psi += tw + kPi / n;
  }
  struts[static_cast<std::size_t>((layers - 1) * n)].freeze_yaw = true;

  std::vector<CableSpec> cables;
  auto add = [&](int a, int b, bool active, std::string label) {
    CableSpec c;
    c.node_a = a;
    c.node_b = b;
    c.stiffness = active ? options.active_stiffness : options.passive_stiffness;
    c.cable_class = active ? CableClass::kActive : CableClass::kPassive;
    c.label = std::move(label);
    cables.push_back(c);
  };
  const NodeSet nn = [&] {
    NodeSet s;
    s.positions.resize(static_cast<std::size_t>(2 * mb));
    for (int i = 0; i < mb; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Eigen::Vector3d q = raw_direction(nominal.inclinations[ui], nominal.yaws[ui]);
      const double h = 0.5 * struts[ui].length;
      s.positions[ui] = nominal.centers[ui] + h * q;
      s.positions[static_cast<std::size_t>(i + mb)] = nominal.centers[ui] - h * q;
    }
    return s;
  }();
  auto azimuth = [&](int node) { return std::atan2(nn[node].y(), nn[node].x()); };
  auto ring = [&](std::vector<int> ids, const std::string& label) {
    std::sort(ids.begin(), ids.end(), [&](int a, int b) { return azimuth(a) < azimuth(b); });
    for (std::size_t k = 0; k < ids.size(); ++k) {
      add(ids[k], ids[(k + 1) % ids.size()], false, label);
    }
  };

  const std::string top_label = "m1-top";
  ring(nodes_of_struts(0, n, 0), top_label);
  for (int j = 0; j + 1 < layers; ++j) {
    std::vector<int> ids = nodes_of_struts(j * n, n, mb);         // lower ends of module j
    const auto below = nodes_of_struts((j + 1) * n, n, 0);        // upper ends of module j + 1
    ids.insert(ids.end(), below.begin(), below.end());
    ring(ids, "m" + std::to_string(j + 1) + "-m" + std::to_string(j + 2));
  }
  ring(nodes_of_struts((layers - 1) * n, n, mb), "m" + std::to_string(layers) + "-bottom");

  for (int j = 0; j < layers; ++j) {
    for (int k = 0; k < n; ++k) {
      const int top = j * n + k;
      std::vector<int> lower;
      for (int kk = 0; kk < n; ++kk) {
        if (kk != k) lower.push_back(j * n + kk + mb);
      }
      std::stable_sort(lower.begin(), lower.end(), [&](int a, int b) {
        return (nn[a] - nn[top]).norm() < (nn[b] - nn[top]).norm() - 1e-12;
      });
      for (int c = 0; c < 2; ++c) add(top, lower[static_cast<std::size_t>(c)], true,
                                      "m" + std::to_string(j + 1) + "-active");
    }
  }

  AnchorSpec anchors;
  for (int k = 0; k < n; ++k) anchors.centroid_struts.push_back((layers - 1) * n + k);
  StructureSpec spec(layers == 5 && n == 4 ? "tm40-like" : "tm-like-" + std::to_string(layers) +
                                                               "x" + std::to_string(n),
                     std::move(struts), std::move(cables), std::move(anchors));
  return finish(std::move(spec), std::move(nominal), options.form_find, nodes_of_struts(0, n, 0),
                nodes_of_struts((layers - 1) * n, n, mb));
}

LearningRates recommended_rates(const StructureSpec& spec, const std::vector<double>& inclinations,
                                Schedule schedule) {
  double kp = 0.0;
  double ky = 0.0;
  for (int i = 0; i < spec.strut_count(); ++i) {
    double k = 0.0;
    for (int c : spec.cables_of_strut(i)) k += spec.cable(c).stiffness;
    const double lever = 0.5 * spec.strut(i).length *
                         std::sin(inclinations.at(static_cast<std::size_t>(i)));
    kp = std::max(kp, k);
    ky = std::max(ky, k * lever * lever);
  }
  LearningRates r;
  r.position = kp > 0.0 ? 1.0 / kp : 1.0;
  r.yaw = ky > 0.0 ? 1.0 / ky : r.position;
  if (schedule == Schedule::kFullBatch) {
    r.position *= 0.5;
    r.yaw *= 0.5;
  }
  return r;
}

std::vector<double> inclinations_of(const PoseState& pose) { return pose.inclinations; }

std::vector<ImuSample> emit_imu_stream(const SyntheticScenario& scenario, double rate_hz,
                                       double duration_s) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  const int mb = scenario.spec.strut_count();
  std::mt19937_64 rng(scenario.noise.seed);
  std::uniform_real_distribution<double> roll_dist(0.0, 2.0 * kPi);
  std::vector<double> roll(static_cast<std::size_t>(mb));
  for (auto& r : roll) r = roll_dist(rng);
  std::normal_distribution<double> unit(0.0, 1.0);

  const auto count = static_cast<long>(std::floor(duration_s * rate_hz + 1e-9));
  std::vector<ImuSample> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, count) * mb));
  constexpr double dt = 1e-5;
  for (long j = 0; j < count; ++j) {
    const double t = static_cast<double>(j) / rate_hz;
    const PoseState pose = scenario.pose_at(t);
    std::vector<double> rate(static_cast<std::size_t>(mb), 0.0);
    if (!scenario.is_static()) {
      const PoseState a = scenario.pose_at(t + dt);
      const PoseState b = scenario.pose_at(t - dt);
      for (int i = 0; i < mb; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        rate[ui] = (a.inclinations[ui] - b.inclinations[ui]) / (2.0 * dt);
      }
    }
    for (int i = 0; i < mb; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double phi = pose.inclinations[ui];
      const double c = std::cos(roll[ui]);
      const double s = std::sin(roll[ui]);
      ImuSample smp;
      smp.t = t;
      smp.strut = i;
      smp.accel = kGravity * Eigen::Vector3d(std::cos(phi), std::sin(phi) * c, std::sin(phi) * s);
      smp.gyro = rate[ui] * Eigen::Vector3d(0.0, -s, c);
      for (int a = 0; a < 3; ++a) {
        smp.accel[a] += scenario.noise.accel_sigma * unit(rng);
        smp.gyro[a] += scenario.noise.gyro_sigma * unit(rng);
      }
      out.push_back(smp);
    }
  }
  return out;
}

PosePath sinusoidal_tilt(PoseState base, double amplitude, double frequency_hz,
                         double phase_step) {
  return [base = std::move(base), amplitude, frequency_hz, phase_step](double t) {
    PoseState p = base;
    for (std::size_t i = 0; i < p.inclinations.size(); ++i) {
      const double phi = base.inclinations[i] +
                         amplitude * std::sin(2.0 * kPi * frequency_hz * t +
                                              phase_step * static_cast<double>(i));
      p.inclinations[i] = std::clamp(phi, 0.0, kPi);
    }
    return p;
  };
}

PosePath bend_path(const StructureSpec& spec, PoseState base, double amplitude, double period_s) {
  if (!(period_s > 0.0)) throw std::invalid_argument("bend period must be positive");
  const NodeSet nodes = nodes_from_pose(spec, base);
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  const auto& group = spec.anchors().centroid_struts;
  const int mb = spec.strut_count();
  double zmin = nodes[0].z();
  for (const auto& n : nodes.positions) zmin = std::min(zmin, n.z());
  for (int s : group) pivot += base.centers[static_cast<std::size_t>(s)];
  if (!group.empty()) pivot /= static_cast<double>(group.size());
  pivot.z() = zmin;
  std::vector<double> lengths;
  for (const auto& s : spec.struts()) lengths.push_back(s.length);

  return [base = std::move(base), pivot, amplitude, period_s, mb](double t) {
    const double kappa = amplitude * std::sin(2.0 * kPi * t / period_s);
    PoseState p = base;
    for (int i = 0; i < mb; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double gamma = kappa * (base.centers[ui].z() - pivot.z());
      const Eigen::Matrix3d r =
          Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitY()).toRotationMatrix();
      p.centers[ui] = pivot + r * (base.centers[ui] - pivot);
      const Eigen::Vector3d q =
          r * raw_direction(base.inclinations[ui], base.yaws[ui]);
      p.inclinations[ui] = std::acos(std::clamp(q.z(), -1.0, 1.0));
      const double yaw = std::atan2(q.y(), q.x());
      p.yaws[ui] = base.yaws[ui] + normalize_angle(yaw - base.yaws[ui]);
    }
    return p;
  };
}

PosePath hold_then(PosePath path, double hold_s) {
  if (hold_s < 0.0) throw std::invalid_argument("hold must be >= 0");
  return [path = std::move(path), hold_s](double t) { return path(std::max(0.0, t - hold_s)); };
}

NodeSet truth_nodes_at(const SyntheticScenario& scenario, double t) {
  if (scenario.is_static()) return scenario.truth_nodes;
  const FormFindOptions relax{false, 2000, 1e-8};
  return nodes_from_pose(scenario.spec, form_find(scenario.spec, scenario.pose_at(t), relax).pose);
}

double tip_offset_x(const SyntheticScenario& scenario, double t) {
  auto tip = [&](const PoseState& pose) {
    const NodeSet n = nodes_from_pose(scenario.spec, pose);
    double x = 0.0;
    for (int id : scenario.top_nodes) x += n[id].x();
    return x / static_cast<double>(scenario.top_nodes.size());
  };
  return tip(scenario.pose_at(t)) - tip(scenario.pose_at(0.0));
}

// ---------------------------------------------------------------------------

namespace {

// Energy of the cables attached to strut i with that strut moved to (p, theta).
double local_energy(const StructureSpec& spec, std::vector<Eigen::Vector3d>& nodes, int i,
                    const Eigen::Vector3d& p, double phi, double theta) {
  const int mb = spec.strut_count();
  const auto up = static_cast<std::size_t>(i);
  const auto down = static_cast<std::size_t>(i + mb);
  const Eigen::Vector3d keep_up = nodes[up];
  const Eigen::Vector3d keep_down = nodes[down];
  const Eigen::Vector3d q = raw_direction(phi, theta);
  nodes[up] = p + 0.5 * spec.strut(i).length * q;
  nodes[down] = p - 0.5 * spec.strut(i).length * q;
  double e = 0.0;
  for (int k : spec.cables_of_strut(i)) {
    const auto& c = spec.cable(k);
    e += cable_energy(c, (nodes[static_cast<std::size_t>(c.node_b)] -
                          nodes[static_cast<std::size_t>(c.node_a)])
                             .norm());
  }
  nodes[up] = keep_up;
  nodes[down] = keep_down;
  return e;
}

}  // namespace

OracleResult oracle_minimize(const StructureSpec& spec, const ConnectivityMatrix& connectivity,
                             const std::vector<double>& inclinations, int restarts,
                             std::uint64_t seed, const OracleOptions& options) {
  if (restarts < 1) throw std::invalid_argument("oracle needs at least one restart");
  const int mb = spec.strut_count();
  if (static_cast<int>(inclinations.size()) != mb) {
    throw std::invalid_argument("inclination count does not match structure");
  }
  const auto full = recommended_rates(spec, inclinations, Schedule::kFullBatch);
  const double step_p = options.step > 0.0 ? options.step : 0.25 * full.position;
  const double step_y = options.step > 0.0 ? options.step : 0.25 * full.yaw;
  const double h = options.difference_step;
  const DofMask mask = dof_mask(spec);

  double longest = 0.0;
  for (const auto& s : spec.struts()) longest = std::max(longest, s.length);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-longest, longest);
  std::uniform_real_distribution<double> yaw_dist(0.0, 2.0 * kPi);

  OracleResult best;
  best.energy = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    PoseState pose(mb);
    pose.inclinations = inclinations;
    for (int i = 0; i < mb; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      pose.centers[ui] = {box(rng), box(rng), box(rng)};
      pose.yaws[ui] = yaw_dist(rng);
      if (mask.position_frozen[ui]) pose.centers[ui].setZero();
      if (mask.yaw_frozen[ui]) pose.yaws[ui] = 0.0;
    }
    apply_centroid_anchor(spec, pose);

    std::vector<Eigen::Vector3d> gp(static_cast<std::size_t>(mb));
    std::vector<double> gy(static_cast<std::size_t>(mb));
    for (int it = 0; it < options.iterations; ++it) {
      std::vector<Eigen::Vector3d> nodes = nodes_from_pose(spec, pose).positions;
      double norm2 = 0.0;
      for (int i = 0; i < mb; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Eigen::Vector3d p = pose.centers[ui];
        const double phi = pose.inclinations[ui];
        const double th = pose.yaws[ui];
        gp[ui].setZero();
        gy[ui] = 0.0;
        if (!mask.position_frozen[ui]) {
          for (int a = 0; a < 3; ++a) {
            Eigen::Vector3d dp = Eigen::Vector3d::Zero();
            dp[a] = h;
            gp[ui][a] = (local_energy(spec, nodes, i, p + dp, phi, th) -
                         local_energy(spec, nodes, i, p - dp, phi, th)) /
                        (2.0 * h);
          }
        }
        if (!mask.yaw_frozen[ui]) {
          gy[ui] = (local_energy(spec, nodes, i, p, phi, th + h) -
                    local_energy(spec, nodes, i, p, phi, th - h)) /
                   (2.0 * h);
        }
        norm2 += gp[ui].squaredNorm() + gy[ui] * gy[ui];
      }
      if (std::sqrt(norm2) < options.gradient_tolerance) break;
      for (int i = 0; i < mb; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        pose.centers[ui] -= step_p * gp[ui];
        pose.yaws[ui] -= step_y * gy[ui];
      }
      apply_centroid_anchor(spec, pose);
    }
    const double e = evaluate_energy(spec, connectivity, pose).total;
    if (e < best.energy) {
      best.energy = e;
      best.pose = pose;
    }
  }
  best.nodes = nodes_from_pose(spec, best.pose);
  return best;
}

}  // namespace tenshape::synth
