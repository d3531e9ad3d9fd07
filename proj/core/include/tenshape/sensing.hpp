#pragma once

// Inclination from 6-axis IMU samples. Sensor frame: x along the strut's
// longitudinal axis. The accelerometer-only inclination is fused with the
// gyro rate about the inclination-plane normal by a complementary filter.

#include <atomic>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "tenshape/inclination_source.hpp"

namespace tenshape {

struct ImuSample {
  double t = 0.0;  // seconds
  int strut = 0;   // 0-based (1-based on the wire)
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // rad/s
};

struct FilterConfig {
  double time_constant = 0.2;    // T_c, s
  double sample_period = 0.0125;  // T_s, s
  double min_accel_norm = 0.1;    // below this a sample is rejected (free fall)
  double min_perpendicular = 0.1;  // sqrt(a_y^2 + a_z^2) below this: rate unobservable

  // lambda = T_c / (T_c + T_s).
  double coefficient() const { return time_constant / (time_constant + sample_period); }
};

// arccos(a_x / |a|) with the argument clamped; nullopt when |a| <= min_norm.
std::optional<double> quasi_static_angle(const Eigen::Vector3d& accel, double min_norm = 0.1);

struct InclinationRate {
  double value = 0.0;  // rad/s
  bool degenerate = false;
};

// (a_y w_z - a_z w_y) / sqrt(a_y^2 + a_z^2); 0 with degenerate = true when
// the strut is (nearly) parallel to gravity.
InclinationRate inclination_rate(const Eigen::Vector3d& accel, const Eigen::Vector3d& gyro,
                                 double min_perpendicular = 0.1);

struct StrutFilterState {
  double inclination = 0.0;
  double last_t = 0.0;
  bool initialized = false;
  std::size_t samples = 0;
};

struct FilterState {
  FilterConfig config;
  std::vector<StrutFilterState> struts;

  FilterState() = default;
  FilterState(int strut_count, FilterConfig cfg = {})
      : config(cfg), struts(static_cast<std::size_t>(strut_count)) {}
};

enum class UpdateStatus { kApplied, kInitialized, kRejected };

class UnknownStrutError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// phi <- lambda (phi + T_s w) + (1 - lambda) phi_q, clamped to [0, pi].
// The first accepted sample of a strut initializes it to phi_q. Rejected
// samples leave the state unchanged. Throws UnknownStrutError.
UpdateStatus filter_update_in_place(FilterState& state, const ImuSample& sample);
FilterState filter_update(const FilterState& state, const ImuSample& sample);

struct StreamParseResult {
  std::vector<ImuSample> samples;
  std::size_t malformed = 0;
  std::size_t out_of_order = 0;
  std::vector<std::string> warnings;  // first few, with line numbers
};

// "t,strut_id,ax,ay,az,wx,wy,wz"; one record per line.
std::optional<ImuSample> parse_sensor_record(std::string_view line);
std::string format_sensor_record(const ImuSample& sample);

// strut_count > 0 additionally rejects ids outside [1, strut_count].
// Out-of-order samples (per strut) are counted and dropped.
StreamParseResult parse_sensor_stream(std::istream& in, int strut_count = 0);
StreamParseResult parse_sensor_stream(std::string_view text, int strut_count = 0);
void write_sensor_stream(std::ostream& out, const std::vector<ImuSample>& samples);

// Thread-safe per-strut filter bank; snapshot() never observes a torn update.
class FilterBank {
 public:
  FilterBank(int strut_count, FilterConfig config = {});

  UpdateStatus push(const ImuSample& sample);
  std::vector<double> snapshot() const;
  bool ready() const;  // every strut has at least one accepted sample
  std::size_t rejected() const;
  FilterState state() const;

 private:
  mutable std::mutex mutex_;
  FilterState state_;
  std::size_t rejected_ = 0;
};

// Replays a recorded stream against the estimator's clock: the inclinations
// returned for step s are the fused values after every sample with
// t <= t0 + lead_in + s * step_period, t0 being the first timestamp.
class StreamReplaySource final : public InclinationSource {
 public:
  StreamReplaySource(std::vector<ImuSample> samples, int strut_count, double step_period,
                     double lead_in = 0.0, FilterConfig config = {});

  std::vector<double> inclinations(int step) override;
  double time_at(int step) const { return t0_ + lead_in_ + step * step_period_; }

 private:
  std::vector<ImuSample> samples_;
  FilterBank bank_;
  std::size_t cursor_ = 0;
  double t0_ = 0.0;
  double step_period_;
  double lead_in_;
};

// Fuses a stream consumed by the caller (e.g. a socket reader thread) and
// serves snapshots. inclinations() blocks until every strut has data or the
// timeout expires.
class LiveSource final : public InclinationSource {
 public:
  LiveSource(int strut_count, FilterConfig config = {}, double ready_timeout_s = 10.0);

  FilterBank& bank() { return bank_; }
  std::vector<double> inclinations(int step) override;

 private:
  FilterBank bank_;
  double timeout_;
};

// Accepts one TCP connection on localhost:port and delivers it line by line.
class TcpLineServer {
 public:
  explicit TcpLineServer(int port);  // port 0 picks a free port
  ~TcpLineServer();
  TcpLineServer(const TcpLineServer&) = delete;
  TcpLineServer& operator=(const TcpLineServer&) = delete;

  int port() const { return port_; }
  // Blocks until the peer closes the connection; returns lines delivered.
  std::size_t serve(const std::function<void(std::string_view)>& on_line);

 private:
  int listen_fd_ = -1;
  int port_ = 0;
};

}  // namespace tenshape
