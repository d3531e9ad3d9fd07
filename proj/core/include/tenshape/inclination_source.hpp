#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tenshape {

// Supplies one inclination per strut (radians, [0, pi]) at refresh instants.
// Implementations must return a consistent per-strut snapshot.
class InclinationSource {
 public:
  virtual ~InclinationSource() = default;
  virtual std::vector<double> inclinations(int step) = 0;
};

class FixedInclinations final : public InclinationSource {
 public:
  explicit FixedInclinations(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> inclinations(int /*step*/) override { return values_; }

 private:
  std::vector<double> values_;
};

class SensorSourceError : public std::runtime_error {
 public:
  SensorSourceError(int step, const std::string& what)
      : std::runtime_error("sensor source failed at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace tenshape
