#pragma once

// Shared fixtures and independent reference computations for the tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "tenshape/energy.hpp"
#include "tenshape/kinematics.hpp"
#include "tenshape/model.hpp"

namespace tenshape::test {

inline constexpr double kPi = 3.14159265358979323846;

inline StructureSpec two_strut_spec(double stiffness = 2.0, double natural = 0.0) {
  std::vector<StrutSpec> struts{{1.0, false, false, "a"}, {0.8, false, false, "b"}};
  std::vector<CableSpec> cables{{0, 1, stiffness, natural, CableClass::kPassive, "top"},
                                {2, 3, 1.5, natural, CableClass::kPassive, "bottom"},
                                {0, 3, 1.0, natural, CableClass::kActive, "cross1"},
                                {1, 2, 0.5, natural, CableClass::kActive, "cross2"}};
  return StructureSpec("two-strut", struts, cables);
}

// m_b struts with random lengths and a random cable set covering every node.
inline StructureSpec random_spec(std::mt19937_64& rng, int struts, bool natural_lengths) {
  std::uniform_real_distribution<double> len(0.2, 0.6);
  std::uniform_real_distribution<double> k(0.1, 3.0);
  std::uniform_real_distribution<double> b(0.0, 0.4);
  std::vector<StrutSpec> ss;
  for (int i = 0; i < struts; ++i) ss.push_back({len(rng), false, false, {}});
  const int n = 2 * struts;
  std::vector<CableSpec> cs;
  std::uniform_int_distribution<int> node(0, n - 1);
  auto add = [&](int a, int c) {
    cs.push_back({a, c, k(rng), natural_lengths ? b(rng) : 0.0, CableClass::kPassive, {}});
  };
  for (int a = 0; a < n; ++a) {
    int c = node(rng);
    while (c == a || c % struts == a % struts) c = node(rng);
    add(a, c);
  }
  for (int extra = 0; extra < struts; ++extra) {
    int a = node(rng), c = node(rng);
    while (c == a || c % struts == a % struts) c = node(rng);
    add(a, c);
  }
  return StructureSpec("random", ss, cs);
}

inline PoseState random_pose(std::mt19937_64& rng, int struts, double spread = 0.5) {
  std::uniform_real_distribution<double> pos(-spread, spread);
  std::uniform_real_distribution<double> phi(0.15, kPi - 0.15);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  PoseState p(struts);
  for (int i = 0; i < struts; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    p.centers[ui] = Eigen::Vector3d(pos(rng), pos(rng), pos(rng));
    p.inclinations[ui] = phi(rng);
    p.yaws[ui] = yaw(rng);
  }
  return p;
}

// Direct transcription of the energy: node positions from the angles by
// trigonometry, cable lengths by hand, no shared code with the library
// beyond the data types.
inline double naive_energy(const StructureSpec& spec, const PoseState& pose) {
  const int mb = spec.strut_count();
  std::vector<double> x(static_cast<std::size_t>(2 * mb)), y(x.size()), z(x.size());
  for (int i = 0; i < mb; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double half = spec.strut(i).length / 2.0;
    const double ph = pose.inclinations[ui], th = pose.yaws[ui];
    const double qx = std::sin(ph) * std::cos(th), qy = std::sin(ph) * std::sin(th),
                 qz = std::cos(ph);
    const auto& c = pose.centers[ui];
    x[ui] = c.x() + half * qx;
    y[ui] = c.y() + half * qy;
    z[ui] = c.z() + half * qz;
    x[ui + mb] = c.x() - half * qx;
    y[ui + mb] = c.y() - half * qy;
    z[ui + mb] = c.z() - half * qz;
  }
  double e = 0.0;
  for (const auto& c : spec.cables()) {
    const auto a = static_cast<std::size_t>(c.node_a), b = static_cast<std::size_t>(c.node_b);
    const double m = std::sqrt((x[b] - x[a]) * (x[b] - x[a]) + (y[b] - y[a]) * (y[b] - y[a]) +
                               (z[b] - z[a]) * (z[b] - z[a]));
    const double stretch = m - c.natural_length;
    if (stretch > 0.0) e += 0.5 * c.stiffness * stretch * stretch;
  }
  return e;
}

struct NumericGradient {
  std::vector<Eigen::Vector3d> position;
  std::vector<double> yaw;
};

// Fourth-order central differences of naive_energy.
inline NumericGradient central_difference(const StructureSpec& spec, const PoseState& pose,
                                          double h = 1e-3) {
  NumericGradient g;
  const int mb = spec.strut_count();
  g.position.assign(static_cast<std::size_t>(mb), Eigen::Vector3d::Zero());
  g.yaw.assign(static_cast<std::size_t>(mb), 0.0);
  auto stencil = [&](auto&& shifted) {
    return (-naive_energy(spec, shifted(2 * h)) + 8 * naive_energy(spec, shifted(h)) -
            8 * naive_energy(spec, shifted(-h)) + naive_energy(spec, shifted(-2 * h))) /
           (12 * h);
  };
  for (int i = 0; i < mb; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int a = 0; a < 3; ++a) {
      g.position[ui][a] = stencil([&](double d) {
        PoseState p = pose;
        p.centers[ui][a] += d;
        return p;
      });
    }
    g.yaw[ui] = stencil([&](double d) {
      PoseState p = pose;
      p.yaws[ui] += d;
      return p;
    });
  }
  return g;
}

// Temporary directory removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    path_ = (base / ("tenshape-" + tag + "-" + std::to_string(rd()))).string();
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

}  // namespace tenshape::test
