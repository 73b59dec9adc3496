#pragma once

#include "followrl/config.hpp"
#include "followrl/mlp.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace followrl {

struct PowertrainOutput {
  double accel = 0;
  double v_next = 0;
};

/// Surrogate longitudinal plant. Rejects pedals outside [0, 1] and v < 0.
PowertrainOutput powertrain_step(const PowertrainModel& model, double throttle, double brake, double v, double dt);

/// Extremes of the acceleration the plant can produce at speed v.
double max_drive_accel(const PowertrainModel& model, double v);
double max_brake_accel(const PowertrainModel& model, double v);

struct ControlSample {
  double v_next = 0;
  double v = 0;
  double a = 0;
  double throttle = 0;
  double brake = 0;

  bool operator==(const ControlSample&) const = default;
};

/// Random piecewise-constant pedal drive of the plant. Each segment lasts
/// 0.5 to 3 s and presses at most one pedal. One sample per dt.
std::vector<ControlSample> collect_reverse_data(const PowertrainModel& model, double duration, double dt,
                                                std::uint64_t seed);

void write_control_csv(const std::filesystem::path& path, const std::vector<ControlSample>& samples);
std::vector<ControlSample> read_control_csv(const std::filesystem::path& path);

struct Pedals {
  double throttle = 0;
  double brake = 0;
  bool saturated = false;  // command outside what the plant can deliver
};

/// Inverse plant model (v_next, v, a) -> (throttle, brake) with inputs
/// standardized by training statistics. Outputs are clipped to [0, 1].
class ControlNet {
 public:
  explicit ControlNet(std::uint64_t seed);
  ControlNet(MlpNet net, std::array<double, 3> mean, std::array<double, 3> stddev);

  std::array<double, 2> predict(double v_next, double v, double a) const;
  /// Raw (unclipped) outputs for a batch; columns are samples.
  Eigen::MatrixXd forward_raw(const Eigen::MatrixXd& features) const;
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& features) const;

  const MlpNet& net() const { return net_; }
  MlpNet& mutable_net() { return net_; }
  const std::array<double, 3>& mean() const { return mean_; }
  const std::array<double, 3>& stddev() const { return std_; }
  void set_scaling(std::array<double, 3> mean, std::array<double, 3> stddev);

  /// Network file plus `<path>.scaling.json`.
  void save(const std::filesystem::path& path) const;
  static ControlNet load(const std::filesystem::path& path);

 private:
  MlpNet net_;
  std::array<double, 3> mean_{0, 0, 0};
  std::array<double, 3> std_{1, 1, 1};
};

struct ControlTrainResult {
  std::vector<double> loss;  // full-batch MSE per epoch
};

/// Full-batch Adam regression of the pedals on standardized features.
ControlTrainResult train_control_net(ControlNet& cn, const std::vector<ControlSample>& samples,
                                     const ControlConfig& cfg);

double control_mse(const ControlNet& cn, const std::vector<ControlSample>& samples);

Pedals accel_to_pedals(const ControlNet& cn, const PowertrainModel& model, double v, double a_cmd, double dt);

struct TrackingResult {
  double rmse = 0;
  std::size_t saturations = 0;
  std::vector<double> command;
  std::vector<double> achieved;
  std::vector<double> speed;
};

/// Closed loop command -> pedals -> plant on a square wave of +-amplitude
/// starting positive.
TrackingResult track_square_wave(const ControlNet& cn, const PowertrainModel& model, double v0, double amplitude,
                                 double period, double duration, double dt);

/// Front-axle steering angle. Speeds below 0.1 m/s are floored.
double stanley_steering(double heading_error, double lateral_error, double v, double gain);

}  // namespace followrl
