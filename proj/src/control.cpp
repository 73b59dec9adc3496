#include "followrl/control.hpp"

#include "followrl/csv.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace followrl {

PowertrainOutput powertrain_step(const PowertrainModel& model, double throttle, double brake, double v, double dt) {
  if (!(throttle >= 0 && throttle <= 1) || !(brake >= 0 && brake <= 1)) {
    throw ValidationError("powertrain_step: pedals must be in [0, 1]");
  }
  if (!(v >= 0) || !std::isfinite(v)) throw ValidationError("powertrain_step: speed must be >= 0");
  if (!(dt > 0)) throw ValidationError("powertrain_step: dt must be > 0");
  const double drive = model.c_throttle * throttle * (1.0 - v / model.v_max);
  const double roll = v > 0 ? model.c_roll : 0.0;
  const double accel = drive - model.c_brake * brake - roll - model.c_drag * v * v;
  return {accel, std::max(0.0, v + accel * dt)};
}

double max_drive_accel(const PowertrainModel& model, double v) {
  return powertrain_step(model, 1.0, 0.0, v, 1.0).accel;
}

double max_brake_accel(const PowertrainModel& model, double v) {
  return powertrain_step(model, 0.0, 1.0, v, 1.0).accel;
}

std::vector<ControlSample> collect_reverse_data(const PowertrainModel& model, double duration, double dt,
                                                std::uint64_t seed) {
  if (!(duration > 0)) throw ValidationError("collect_reverse_data: duration must be > 0");
  if (!(dt > 0)) throw ValidationError("collect_reverse_data: dt must be > 0");
  model.validate();
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> dwell(0.5, 3.0);

  std::vector<ControlSample> out;
  out.reserve(n);
  double v = 0;
  std::size_t left = 0;
  double throttle = 0;
  double brake = 0;
  while (out.size() < n) {
    if (left == 0) {
      left = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(dwell(rng) / dt)));
      const double mode = unit(rng);
      const double level = unit(rng);
      throttle = brake = 0;
      // keep the drive inside the speed range the plant is useful in
      const bool fast = v > 0.6 * model.v_max;
      if (!fast && mode < 0.5) {
        throttle = level;
      } else if (mode < 0.8) {
        brake = level * level;
      }
    }
    const auto step = powertrain_step(model, throttle, brake, v, dt);
    out.push_back({step.v_next, v, step.accel, throttle, brake});
    v = step.v_next;
    --left;
  }
  return out;
}

void write_control_csv(const std::filesystem::path& path, const std::vector<ControlSample>& samples) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "v_next_mps,v_mps,a_mps2,throttle,brake\n";
  for (const auto& s : samples) {
    out << csv::format(s.v_next) << ',' << csv::format(s.v) << ',' << csv::format(s.a) << ','
        << csv::format(s.throttle) << ',' << csv::format(s.brake) << '\n';
  }
}

std::vector<ControlSample> read_control_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, {"v_next_mps", "v_mps", "a_mps2", "throttle", "brake"}, path);
  std::vector<ControlSample> out;
  for (const auto& row : table.rows) {
    ControlSample s{csv::parse_double(row.cells[0], row.line, path), csv::parse_double(row.cells[1], row.line, path),
                    csv::parse_double(row.cells[2], row.line, path), csv::parse_double(row.cells[3], row.line, path),
                    csv::parse_double(row.cells[4], row.line, path)};
    if (s.throttle < 0 || s.throttle > 1 || s.brake < 0 || s.brake > 1) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": pedal outside [0, 1]");
    }
    out.push_back(s);
  }
  return out;
}

ControlNet::ControlNet(std::uint64_t seed) : net_({3, 16, 16, 2}, OutputActivation::Linear, seed) {}

ControlNet::ControlNet(MlpNet net, std::array<double, 3> mean, std::array<double, 3> stddev)
    : net_(std::move(net)) {
  if (net_.input_size() != 3 || net_.output_size() != 2) {
    throw ValidationError("ControlNet: network must map 3 inputs to 2 outputs");
  }
  set_scaling(mean, stddev);
}

void ControlNet::set_scaling(std::array<double, 3> mean, std::array<double, 3> stddev) {
  for (double s : stddev) {
    if (!(s > 0) || !std::isfinite(s)) throw ValidationError("ControlNet: scaling deviations must be > 0");
  }
  mean_ = mean;
  std_ = stddev;
}

Eigen::MatrixXd ControlNet::standardize(const Eigen::MatrixXd& features) const {
  Eigen::MatrixXd x = features;
  for (int r = 0; r < 3; ++r) x.row(r) = (x.row(r).array() - mean_[r]) / std_[r];
  return x;
}

Eigen::MatrixXd ControlNet::forward_raw(const Eigen::MatrixXd& features) const {
  return net_.forward(standardize(features));
}

std::array<double, 2> ControlNet::predict(double v_next, double v, double a) const {
  Eigen::MatrixXd x(3, 1);
  x << v_next, v, a;
  const auto y = forward_raw(x);
  return {std::clamp(y(0, 0), 0.0, 1.0), std::clamp(y(1, 0), 0.0, 1.0)};
}

void ControlNet::save(const std::filesystem::path& path) const {
  net_.save(path);
  nlohmann::json j;
  j["mean"] = mean_;
  j["std"] = std_;
  j["inputs"] = {"v_next_mps", "v_mps", "a_mps2"};
  j["outputs"] = {"throttle", "brake"};
  std::ofstream out(path.string() + ".scaling.json");
  if (!out) throw ValidationError("cannot write scaling for " + path.string());
  out << j.dump(2) << '\n';
}

ControlNet ControlNet::load(const std::filesystem::path& path) {
  auto net = MlpNet::load(path);
  std::ifstream in(path.string() + ".scaling.json");
  if (!in) throw ValidationError("missing scaling file for " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    return ControlNet(std::move(net), j.at("mean").get<std::array<double, 3>>(),
                      j.at("std").get<std::array<double, 3>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad scaling file for " + path.string() + ": " + e.what());
  }
}

ControlTrainResult train_control_net(ControlNet& cn, const std::vector<ControlSample>& samples,
                                     const ControlConfig& cfg) {
  if (samples.size() < 1000) throw ValidationError("train_control_net: need at least 1000 samples");
  if (cfg.epochs < 0 || !(cfg.learning_rate > 0)) throw ValidationError("train_control_net: bad settings");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(3, n);
  Eigen::MatrixXd y(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    x.col(i) << s.v_next, s.v, s.a;
    y.col(i) << s.throttle, s.brake;
  }
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
  for (int r = 0; r < 3; ++r) {
    mean[r] = x.row(r).mean();
    const double var = (x.row(r).array() - mean[r]).square().mean();
    stddev[r] = var > 0 ? std::sqrt(var) : 1.0;
  }
  cn.set_scaling(mean, stddev);
  const Eigen::MatrixXd xs = cn.standardize(x);

  MlpNet& net = cn.mutable_net();
  AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  Adam opt(net, adam);
  MlpNet::Cache cache;
  ControlTrainResult result;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Eigen::MatrixXd diff = net.forward(xs, cache) - y;
    result.loss.push_back(diff.squaredNorm() * inv_n);
    opt.step(net, net.backward(cache, 2.0 * inv_n * diff));
  }
  return result;
}

double control_mse(const ControlNet& cn, const std::vector<ControlSample>& samples) {
  if (samples.empty()) throw ValidationError("control_mse: no samples");
  double sq = 0;
  for (const auto& s : samples) {
    const auto p = cn.predict(s.v_next, s.v, s.a);
    sq += (p[0] - s.throttle) * (p[0] - s.throttle) + (p[1] - s.brake) * (p[1] - s.brake);
  }
  return sq / static_cast<double>(samples.size());
}

Pedals accel_to_pedals(const ControlNet& cn, const PowertrainModel& model, double v, double a_cmd, double dt) {
  const auto p = cn.predict(v + a_cmd * dt, v, a_cmd);
  Pedals out{p[0], p[1], false};
  const double vv = std::max(0.0, v);
  out.saturated = a_cmd > max_drive_accel(model, vv) || a_cmd < max_brake_accel(model, vv);
  return out;
}

TrackingResult track_square_wave(const ControlNet& cn, const PowertrainModel& model, double v0, double amplitude,
                                 double period, double duration, double dt) {
  if (!(period > 0) || !(duration > 0) || !(dt > 0)) throw ValidationError("track_square_wave: bad timing");
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  const double half = period / 2.0;
  TrackingResult r;
  double v = v0;
  double sq = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const auto phase = static_cast<long long>(std::floor(t / half + 1e-9));
    const double cmd = phase % 2 == 0 ? amplitude : -amplitude;
    const auto pedals = accel_to_pedals(cn, model, v, cmd, dt);
    if (pedals.saturated) ++r.saturations;
    const auto out = powertrain_step(model, pedals.throttle, pedals.brake, v, dt);
    sq += (out.accel - cmd) * (out.accel - cmd);
    r.command.push_back(cmd);
    r.achieved.push_back(out.accel);
    r.speed.push_back(v);
    v = out.v_next;
  }
  r.rmse = std::sqrt(sq / static_cast<double>(n));
  return r;
}

double stanley_steering(double heading_error, double lateral_error, double v, double gain) {
  return heading_error + std::atan(gain * lateral_error / std::max(v, 0.1));
}

}  // namespace followrl
