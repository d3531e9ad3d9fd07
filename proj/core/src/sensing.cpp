#include "tenshape/sensing.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tenshape/model.hpp"

namespace tenshape {

std::optional<double> quasi_static_angle(const Eigen::Vector3d& accel, double min_norm) {
  const double norm = accel.norm();
  if (!std::isfinite(norm) || norm <= min_norm) return std::nullopt;
  return std::acos(std::clamp(accel.x() / norm, -1.0, 1.0));
}

InclinationRate inclination_rate(const Eigen::Vector3d& accel, const Eigen::Vector3d& gyro,
                                 double min_perpendicular) {
  const double perp = std::hypot(accel.y(), accel.z());
  if (!(perp > min_perpendicular)) return {0.0, true};
  return {(accel.y() * gyro.z() - accel.z() * gyro.y()) / perp, false};
}

UpdateStatus filter_update_in_place(FilterState& state, const ImuSample& sample) {
  if (sample.strut < 0 || sample.strut >= static_cast<int>(state.struts.size())) {
    throw UnknownStrutError("unknown strut id " + std::to_string(sample.strut + 1));
  }
  const auto phi_q = quasi_static_angle(sample.accel, state.config.min_accel_norm);
  if (!phi_q || !sample.gyro.allFinite()) return UpdateStatus::kRejected;
  auto& s = state.struts[static_cast<std::size_t>(sample.strut)];
  if (s.initialized && sample.t < s.last_t) return UpdateStatus::kRejected;

  UpdateStatus status = UpdateStatus::kApplied;
  if (!s.initialized) {
    s.inclination = *phi_q;
    s.initialized = true;
    status = UpdateStatus::kInitialized;
  } else {
    const double lambda = state.config.coefficient();
    const double rate =
        inclination_rate(sample.accel, sample.gyro, state.config.min_perpendicular).value;
    const double fused =
        lambda * (s.inclination + state.config.sample_period * rate) + (1.0 - lambda) * *phi_q;
    s.inclination = std::clamp(fused, 0.0, std::numbers::pi);
  }
  s.last_t = sample.t;
  ++s.samples;
  return status;
}

FilterState filter_update(const FilterState& state, const ImuSample& sample) {
  FilterState next = state;
  filter_update_in_place(next, sample);
  return next;
}

// ---------------------------------------------------------------------------

namespace {

bool parse_field(std::string_view tok, double& out) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) {
    tok.remove_suffix(1);
  }
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size() && std::isfinite(out);
}

bool is_header(std::string_view line) { return line.rfind("t,strut_id", 0) == 0; }

}  // namespace

std::optional<ImuSample> parse_sensor_record(std::string_view line) {
  double f[8];
  int n = 0;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    const auto tok = line.substr(pos, comma == std::string_view::npos ? line.size() - pos
                                                                      : comma - pos);
    if (n == 8 || !parse_field(tok, f[n])) return std::nullopt;
    ++n;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (n != 8) return std::nullopt;
  if (f[1] != std::floor(f[1]) || f[1] < 1.0 || f[1] > std::numeric_limits<int>::max()) {
    return std::nullopt;
  }
  ImuSample s;
  s.t = f[0];
  s.strut = static_cast<int>(f[1]) - 1;
  s.accel = {f[2], f[3], f[4]};
  s.gyro = {f[5], f[6], f[7]};
  return s;
}

std::string format_sensor_record(const ImuSample& s) {
  std::string out = format_double(s.t);
  out += ',';
  out += std::to_string(s.strut + 1);
  for (int i = 0; i < 3; ++i) (out += ',') += format_double(s.accel[i]);
  for (int i = 0; i < 3; ++i) (out += ',') += format_double(s.gyro[i]);
  return out;
}

StreamParseResult parse_sensor_stream(std::istream& in, int strut_count) {
  StreamParseResult result;
  std::vector<double> last_t;
  std::string line;
  std::size_t line_no = 0;
  auto warn = [&](const std::string& msg) {
    if (result.warnings.size() < 20) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + msg);
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    while (!view.empty() && (view.back() == '\r' || view.back() == ' ')) view.remove_suffix(1);
    if (view.empty() || view.front() == '#' || is_header(view)) continue;
    auto sample = parse_sensor_record(view);
    if (!sample || (strut_count > 0 && sample->strut >= strut_count)) {
      ++result.malformed;
      warn("malformed record skipped");
      continue;
    }
    const auto idx = static_cast<std::size_t>(sample->strut);
    if (idx >= last_t.size()) last_t.resize(idx + 1, -std::numeric_limits<double>::infinity());
    if (sample->t < last_t[idx]) {
      ++result.out_of_order;
      warn("out-of-order timestamp for strut " + std::to_string(sample->strut + 1));
      continue;
    }
    last_t[idx] = sample->t;
    result.samples.push_back(*sample);
  }
  return result;
}

StreamParseResult parse_sensor_stream(std::string_view text, int strut_count) {
  std::istringstream in{std::string(text)};
  return parse_sensor_stream(in, strut_count);
}

void write_sensor_stream(std::ostream& out, const std::vector<ImuSample>& samples) {
  out << "t,strut_id,ax,ay,az,wx,wy,wz\n";
  for (const auto& s : samples) out << format_sensor_record(s) << '\n';
}

// ---------------------------------------------------------------------------

FilterBank::FilterBank(int strut_count, FilterConfig config) : state_(strut_count, config) {}

UpdateStatus FilterBank::push(const ImuSample& sample) {
  std::lock_guard lock(mutex_);
  const auto status = filter_update_in_place(state_, sample);
  if (status == UpdateStatus::kRejected) ++rejected_;
  return status;
}

std::vector<double> FilterBank::snapshot() const {
  std::lock_guard lock(mutex_);
  std::vector<double> out;
  out.reserve(state_.struts.size());
  for (const auto& s : state_.struts) out.push_back(s.inclination);
  return out;
}

bool FilterBank::ready() const {
  std::lock_guard lock(mutex_);
  return std::all_of(state_.struts.begin(), state_.struts.end(),
                     [](const StrutFilterState& s) { return s.initialized; });
}

std::size_t FilterBank::rejected() const {
  std::lock_guard lock(mutex_);
  return rejected_;
}

FilterState FilterBank::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

StreamReplaySource::StreamReplaySource(std::vector<ImuSample> samples, int strut_count,
                                       double step_period, double lead_in, FilterConfig config)
    : samples_(std::move(samples)),
      bank_(strut_count, config),
      step_period_(step_period),
      lead_in_(lead_in) {
  if (!(step_period > 0.0)) throw std::invalid_argument("step period must be positive");
  std::stable_sort(samples_.begin(), samples_.end(),
                   [](const ImuSample& a, const ImuSample& b) { return a.t < b.t; });
  if (!samples_.empty()) t0_ = samples_.front().t;
}

std::vector<double> StreamReplaySource::inclinations(int step) {
  const double t = time_at(step);
  while (cursor_ < samples_.size() && samples_[cursor_].t <= t) bank_.push(samples_[cursor_++]);
  if (!bank_.ready()) {
    throw std::runtime_error("no accepted IMU sample yet for every strut at t = " +
                             std::to_string(t) + " s");
  }
  return bank_.snapshot();
}

LiveSource::LiveSource(int strut_count, FilterConfig config, double ready_timeout_s)
    : bank_(strut_count, config), timeout_(ready_timeout_s) {}

std::vector<double> LiveSource::inclinations(int /*step*/) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_);
  while (!bank_.ready()) {
    if (std::chrono::steady_clock::now() > deadline) {
      throw std::runtime_error("timed out waiting for every strut to report");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return bank_.snapshot();
}

// ---------------------------------------------------------------------------

TcpLineServer::TcpLineServer(int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 1) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw std::runtime_error("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpLineServer::~TcpLineServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

std::size_t TcpLineServer::serve(const std::function<void(std::string_view)>& on_line) {
  const int fd = ::accept(listen_fd_, nullptr, nullptr);
  if (fd < 0) throw std::runtime_error(std::string("accept: ") + std::strerror(errno));
  std::string pending;
  std::size_t lines = 0;
  char buf[4096];
  while (true) {
    const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
    if (n <= 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (auto nl = pending.find('\n', start); nl != std::string::npos;
         nl = pending.find('\n', start)) {
      on_line(std::string_view(pending).substr(start, nl - start));
      ++lines;
      start = nl + 1;
    }
    pending.erase(0, start);
  }
  if (!pending.empty()) {
    on_line(pending);
    ++lines;
  }
  ::close(fd);
  return lines;
}

}  // namespace tenshape
