#pragma once

#include "followrl/config.hpp"
#include "followrl/mlp.hpp"
#include "followrl/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace followrl {

/// One (s, a, r, s', done) tuple. `action` is the raw acceleration in m/s^2.
struct Transition {
  Observation state;
  double action = 0;
  double reward = 0;
  Observation next_state;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }

  /// i-th oldest transition currently held.
  const Transition& at(std::size_t i) const;
  /// Uniform draw (with replacement).
  const Transition& sample(std::mt19937_64& rng) const;
  std::size_t sample_index(std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t cursor_ = 0;  // next slot to overwrite once full
};

/// Affine map between the actor's tanh output u in [-1, 1] and an
/// acceleration in [a_min, a_max].
struct ActionScaler {
  double a_min = -9.0;
  double a_max = 5.0;

  double to_accel(double u) const { return a_min + 0.5 * (u + 1.0) * (a_max - a_min); }
  double to_unit(double a) const { return 2.0 * (a - a_min) / (a_max - a_min) - 1.0; }
  double half_range() const { return 0.5 * (a_max - a_min); }
};

struct TrainDiagnostics {
  double critic_loss = 0;
  double actor_objective = 0;
};

/// Actor-critic pair with slowly tracking target copies.
///
/// The actor maps the 4-dim observation through 32-32 rectifier layers to a
/// tanh unit action; the critic takes the observation concatenated with the
/// unit action and returns a linear value.
class DdpgAgent {
 public:
  DdpgAgent(const DdpgConfig& cfg, const SimConfig& sim, std::uint64_t seed);

  /// Deterministic policy action in m/s^2.
  double act(const Observation& obs) const;

  /// Policy action plus (when `explore`) one step of the OU noise, scaled
  /// from unit-action to acceleration range and clipped. The noise process
  /// is not touched when `explore` is false.
  double select_action(const Observation& obs, OuProcess& noise, bool explore) const;

  /// Exploration noise process in unit-action space.
  OuProcess make_noise(std::uint64_t seed) const;

  /// One critic regression step, one deterministic policy-gradient step on
  /// the actor, then soft target updates.
  TrainDiagnostics train_step(std::span<const Transition> batch);

  /// Bootstrapped critic targets r + gamma * (1 - done) * Q'(s', mu'(s')).
  Eigen::VectorXd critic_targets(std::span<const Transition> batch) const;
  double q_value(const Observation& obs, double accel) const;

  const MlpNet& actor() const { return actor_; }
  const MlpNet& critic() const { return critic_; }
  const MlpNet& actor_target() const { return actor_target_; }
  const MlpNet& critic_target() const { return critic_target_; }
  MlpNet& mutable_actor() { return actor_; }
  MlpNet& mutable_critic() { return critic_; }
  MlpNet& mutable_actor_target() { return actor_target_; }
  MlpNet& mutable_critic_target() { return critic_target_; }

  const DdpgConfig& config() const { return cfg_; }
  /// Fresh optimizer state, as after a load.
  void reset_optimizers();
  const ActionScaler& scaler() const { return scaler_; }

  /// Writes actor.bin, critic.bin, actor_target.bin, critic_target.bin.
  void save(const std::filesystem::path& dir) const;
  static DdpgAgent load(const std::filesystem::path& dir, const DdpgConfig& cfg, const SimConfig& sim);

 private:
  DdpgConfig cfg_;
  ActionScaler scaler_;
  double dt_;
  MlpNet actor_, critic_, actor_target_, critic_target_;
  Adam actor_opt_, critic_opt_;
};

/// Number of practical-buffer draws in a minibatch of B at ratio r,
/// round-half-up.
int practical_share(int batch_size, double ratio);

/// round(r*B) draws from `practical` and B - round(r*B) from `simulation`,
/// uniformly with replacement, then shuffled.
std::vector<Transition> sample_mixed(const ReplayBuffer* simulation, const ReplayBuffer* practical,
                                     int batch_size, double ratio, std::mt19937_64& rng);

struct EnvSpec {
  SimConfig sim{};
  RewardConfig reward{};
};

struct EpisodeStats {
  std::int64_t episode = 0;
  std::int64_t steps = 0;
  double mean_reward = 0;
  std::int64_t collisions = 0;
};

struct TrainingResult {
  std::vector<EpisodeStats> curve;
  std::int64_t env_steps = 0;
  std::int64_t gradient_steps = 0;
  /// Environment step of the snapshot that was kept; equals env_steps when
  /// the final parameters were kept.
  std::int64_t selected_step = 0;
  double selected_score = 0;
};

struct StageTwoConfig {
  double ratio = 0.6;
  std::int64_t steps = 50000;
  bool explore = true;
};

/// Pure simulator training: act with exploration, store, and once the
/// buffer holds a minibatch take one gradient step per environment step.
/// Each episode gets a fresh leader profile and initial gap. With
/// checkpoint selection on, the agent ends at the best scoring snapshot
/// (greedy mean reward, any collision disqualifies).
TrainingResult train_stage1(DdpgAgent& agent, ReplayBuffer& sim_buffer, const EnvSpec& env,
                            std::int64_t budget, std::uint64_t seed);

/// Continued interaction where every minibatch mixes the practical buffer
/// at ratio r with the simulation buffer.
TrainingResult train_stage2(DdpgAgent& agent, ReplayBuffer& sim_buffer, const ReplayBuffer& practical,
                            const StageTwoConfig& cfg, const EnvSpec& env, std::uint64_t seed);

/// Gradient steps on the practical buffer only, no interaction. The curve
/// holds one greedy evaluation episode every `eval_interval` gradient steps.
TrainingResult train_fully_offpolicy(DdpgAgent& agent, const ReplayBuffer& practical, std::int64_t budget,
                                     const EnvSpec& env, std::uint64_t seed);

struct GreedyEvaluation {
  std::vector<EpisodeStats> episodes;
  double mean_reward = 0;  // mean over all steps of all episodes
  std::int64_t collisions = 0;
};

/// Noise-free episodes on freshly generated leaders; deterministic in seed.
GreedyEvaluation evaluate_greedy(const DdpgAgent& agent, const EnvSpec& env, int episodes,
                                 std::uint64_t seed);

void write_curve_csv(const std::filesystem::path& path, const std::vector<EpisodeStats>& curve);
std::vector<EpisodeStats> read_curve_csv(const std::filesystem::path& path);

double mean_of_last(const std::vector<EpisodeStats>& curve, std::size_t n);

}  // namespace followrl
