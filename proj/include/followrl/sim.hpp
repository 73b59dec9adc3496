#pragma once

#include "followrl/config.hpp"
#include "followrl/reward.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace followrl {

/// Derives an independent generator seed for (stream, index) from a base
/// seed. Used so that episodes, evaluation runs and minibatch sampling never
/// share a random stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

/// Normalized 4-dim observation of the follower:
///   speed     = v / v_des
///   accel     = (a - a_min) / (a_max - a_min)
///   rel_speed = (v_l - v) / v_des
///   gap       = clamp(g, 0, g_max) / g_max
struct Observation {
  double speed = 0;
  double accel = 0;
  double rel_speed = 0;
  double gap = 0;

  std::array<double, 4> to_array() const { return {speed, accel, rel_speed, gap}; }
  static Observation from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
  bool operator==(const Observation&) const = default;
};

Observation normalize_state(double v, double a, double v_leader, double gap, const SimConfig& cfg);

struct OuParams {
  double theta = 0.15;
  double sigma = 0.2;
  double mu = 0.0;
  double x0 = 0.0;

  void validate() const;
};

/// Euler-Maruyama stepping of dx = theta (mu - x) dt + sigma dW.
class OuProcess {
 public:
  OuProcess(const OuParams& params, double dt, std::uint64_t seed);

  double value() const { return x_; }
  double next();
  void reset();
  void reset(std::uint64_t seed);

 private:
  OuParams params_;
  double dt_;
  double x_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// n_steps samples of an OU path; element 0 is x0.
std::vector<double> ou_path(const OuParams& params, std::size_t n_steps, double dt, std::uint64_t seed);

/// Speed trajectory sampled every dt, element k at t = k*dt.
struct SpeedProfile {
  double dt = 0.1;
  std::vector<double> speed;

  std::size_t size() const { return speed.size(); }
  double at(std::size_t k) const { return speed[std::min(k, speed.size() - 1)]; }
};

/// Random leader speed profile starting at rest. The OU path is clamped to
/// [0, v_des] and then rate-limited to [a_min, a_max].
SpeedProfile gen_leader_profile(std::uint64_t seed, double duration, const SimConfig& cfg);

/// CSV with header `t_s,v_mps`.
void write_profile_csv(const std::filesystem::path& path, const SpeedProfile& profile);
SpeedProfile read_profile_csv(const std::filesystem::path& path);

struct VehicleState {
  double position = 0;  // front bumper
  double speed = 0;
  double accel = 0;
};

struct StepInfo {
  double gap = 0;
  double leader_speed = 0;
  double follower_speed = 0;
  double applied_accel = 0;
  double jerk = 0;
  bool collided = false;
  bool gap_exceeded = false;
  bool truncated = false;
  RewardBreakdown reward{};
};

struct StepResult {
  Observation obs;
  double reward = 0;
  bool done = false;
  StepInfo info;

  /// done for a reason other than the step limit; such transitions must not
  /// bootstrap.
  bool terminal() const { return info.collided || info.gap_exceeded; }
};

/// One leader-follower pair on a 1-D road advanced in fixed dt steps.
class FollowEnv {
 public:
  FollowEnv(SimConfig cfg, RewardConfig reward_cfg);

  /// Both vehicles at rest, gap drawn uniformly from the configured
  /// initial-gap range using `seed`.
  Observation reset(SpeedProfile profile, std::uint64_t seed);

  /// Explicit initial condition; leader starts at profile speed 0.
  Observation reset_to(SpeedProfile profile, double gap, double follower_speed);

  /// Applies a commanded acceleration (clipped to [a_min, a_max], reduced
  /// further if it would drive the speed below zero).
  StepResult step(double action);

  Observation observe() const;
  double gap() const;
  bool done() const { return done_; }
  int step_index() const { return step_index_; }
  const VehicleState& leader() const { return leader_; }
  const VehicleState& follower() const { return follower_; }
  const SimConfig& config() const { return cfg_; }
  const RewardConfig& reward_config() const { return reward_cfg_; }

 private:
  SimConfig cfg_;
  RewardConfig reward_cfg_;
  VehicleState leader_{};
  VehicleState follower_{};
  SpeedProfile profile_{};
  int step_index_ = 0;
  double prev_accel_ = 0;
  bool done_ = true;
};

}  // namespace followrl
