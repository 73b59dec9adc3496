#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace followrl {

/// Thrown for any contract violation on inputs (bad parameters, malformed
/// files, calling an operation in the wrong state).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Longitudinal simulator settings. Defaults are the input-state constants
/// (dt, desired speed, acceleration range, normalization gap).
struct SimConfig {
  double dt = 0.1;
  double v_des = 20.0;
  double a_min = -9.0;
  double a_max = 5.0;
  double g_max = 200.0;
  double init_gap_low = 0.0;
  double init_gap_high = 100.0;
  int max_steps = 1000;
  double vehicle_length = 4.5;

  // OU process driving the leader speed.
  double leader_mean = 8.0;
  double leader_theta = 0.05;
  double leader_sigma = 1.5;

  void validate() const;
};

struct RewardConfig {
  double w_safe = 1.0;
  double w_gap = 0.5;
  double w_jerk = 0.004;
  double b_comf = 2.0;
  double time_gap = 1.5;
  double g_min = 2.0;
  double time_gap_limit = 15.0;
  double j_comf = 2.0;
  double a_min = -9.0;

  void validate() const;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct DdpgConfig {
  double gamma = 0.95;
  double tau = 0.001;
  int batch_size = 32;
  int buffer_capacity = 2000;
  int hidden = 32;
  AdamConfig adam{};
  double noise_theta = 0.15;
  double noise_sigma = 0.2;
  /// Weight of a quadratic penalty on the actor's output pre-activation.
  /// Keeps the tanh head out of saturation, where the critic's gradient
  /// can no longer move it.
  double actor_preact_penalty = 1.0;
  std::int64_t stage1_budget = 100000;
  std::int64_t stage2_budget = 50000;
  double ratio = 0.6;
  bool stage2_explore = true;
  /// Environment steps between greedy evaluation episodes in fully
  /// off-policy mode.
  std::int64_t offpolicy_eval_interval = 1000;
  /// Interactive training scores the greedy policy every this many
  /// environment steps and keeps the best collision-free snapshot. 0 turns
  /// selection off and returns the last parameters.
  std::int64_t checkpoint_interval = 5000;
  int checkpoint_episodes = 5;

  void validate() const;
};

/// Intelligent Driver Model parameters.
struct IdmParams {
  double v_des = 20.0;
  double time_gap = 1.0;
  double accel = 2.0;
  double b_comf = 2.0;
  double g_min = 2.5;
  double delta = 4.0;

  void validate() const;
};

struct BcConfig {
  int epochs = 20;
};

/// Surrogate throttle/brake plant.
struct PowertrainModel {
  double c_throttle = 4.0;
  double c_brake = 9.0;
  double c_drag = 0.0008;
  double c_roll = 0.1;
  double v_max = 40.0;

  void validate() const;
};

struct ControlConfig {
  double collect_duration = 600.0;
  int epochs = 3000;
  double learning_rate = 0.01;
  double stanley_gain = 2.5;
};

struct EvalConfig {
  double ttc_threshold = 10.0;
  double ttc_critical = 2.0;
  bool sample_std = false;
  /// Leader speed above which a step counts as cruising.
  double cruise_speed = 5.0;
  int suite_size = 20;
  double suite_duration = 100.0;
};

/// Every tunable of the project, loadable from a key=value file with one
/// section per struct: [sim] [reward] [ddpg] [idm] [bc] [powertrain]
/// [control] [eval].
struct Config {
  SimConfig sim{};
  RewardConfig reward{};
  DdpgConfig ddpg{};
  IdmParams idm{};
  BcConfig bc{};
  PowertrainModel powertrain{};
  ControlConfig control{};
  EvalConfig eval{};

  void validate() const;
};

Config load_config(const std::filesystem::path& path);
/// Parses config text; keys absent from the text keep their defaults.
Config parse_config(const std::string& text);
std::string format_config(const Config& cfg);
void save_config(const std::filesystem::path& path, const Config& cfg);

}  // namespace followrl
