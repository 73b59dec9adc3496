#include "followrl/ddpg.hpp"

#include "followrl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>

namespace followrl {

namespace {
constexpr double kSaturationOnset = 1.5;
}  // namespace

namespace {

constexpr int kObsDim = 4;

// Seed streams; keep these stable, they define run reproducibility.
enum Stream : std::uint64_t {
  kProfileStream = 1,
  kGapStream = 2,
  kNoiseStream = 3,
  kSampleStream = 4,
  kEvalStream = 5,
  kInitStream = 6,
  kCheckpointStream = 7,
};

Eigen::MatrixXd observations(std::span<const Transition> batch, bool next) {
  Eigen::MatrixXd m(kObsDim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto a = (next ? batch[i].next_state : batch[i].state).to_array();
    for (int r = 0; r < kObsDim; ++r) m(r, static_cast<Eigen::Index>(i)) = a[r];
  }
  return m;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& unit_action) {
  Eigen::MatrixXd m(obs.rows() + 1, obs.cols());
  m.topRows(obs.rows()) = obs;
  m.bottomRows(1) = unit_action;
  return m;
}

Eigen::MatrixXd single(const Observation& obs) {
  const auto a = obs.to_array();
  Eigen::MatrixXd m(kObsDim, 1);
  for (int r = 0; r < kObsDim; ++r) m(r, 0) = a[r];
  return m;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("ReplayBuffer: capacity must be > 0");
  data_.reserve(std::min<std::size_t>(capacity, 1u << 20));
}

void ReplayBuffer::push(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[cursor_] = t;
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw ValidationError("ReplayBuffer: index out of range");
  return data_[(cursor_ + i) % data_.size()];
}

std::size_t ReplayBuffer::sample_index(std::mt19937_64& rng) const {
  if (data_.empty()) throw ValidationError("ReplayBuffer: sampling from an empty buffer");
  return std::uniform_int_distribution<std::size_t>(0, data_.size() - 1)(rng);
}

const Transition& ReplayBuffer::sample(std::mt19937_64& rng) const { return data_[sample_index(rng)]; }

DdpgAgent::DdpgAgent(const DdpgConfig& cfg, const SimConfig& sim, std::uint64_t seed)
    : cfg_(cfg), scaler_{sim.a_min, sim.a_max}, dt_(sim.dt) {
  cfg_.validate();
  const int h = cfg_.hidden;
  actor_ = MlpNet({kObsDim, h, h, 1}, OutputActivation::Tanh, derive_seed(seed, kInitStream, 0));
  critic_ = MlpNet({kObsDim + 1, h, h, 1}, OutputActivation::Linear, derive_seed(seed, kInitStream, 1));
  actor_target_ = actor_;
  critic_target_ = critic_;
  actor_opt_ = Adam(actor_, cfg_.adam);
  critic_opt_ = Adam(critic_, cfg_.adam);
}

double DdpgAgent::act(const Observation& obs) const {
  return scaler_.to_accel(actor_.forward(single(obs))(0, 0));
}

double DdpgAgent::select_action(const Observation& obs, OuProcess& noise, bool explore) const {
  double a = act(obs);
  if (explore) a += noise.next() * scaler_.half_range();
  return std::clamp(a, scaler_.a_min, scaler_.a_max);
}

OuProcess DdpgAgent::make_noise(std::uint64_t seed) const {
  return OuProcess(OuParams{cfg_.noise_theta, cfg_.noise_sigma, 0.0, 0.0}, dt_, seed);
}

Eigen::VectorXd DdpgAgent::critic_targets(std::span<const Transition> batch) const {
  if (batch.empty()) throw ValidationError("critic_targets: empty batch");
  const Eigen::MatrixXd next = observations(batch, true);
  const Eigen::MatrixXd next_u = actor_target_.forward(next);
  const Eigen::MatrixXd next_q = critic_target_.forward(stack(next, next_u));
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    y(idx) = batch[i].done ? batch[i].reward : batch[i].reward + cfg_.gamma * next_q(0, idx);
  }
  return y;
}

double DdpgAgent::q_value(const Observation& obs, double accel) const {
  Eigen::MatrixXd u(1, 1);
  u(0, 0) = scaler_.to_unit(accel);
  return critic_.forward(stack(single(obs), u))(0, 0);
}

TrainDiagnostics DdpgAgent::train_step(std::span<const Transition> batch) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  TrainDiagnostics diag;

  const Eigen::VectorXd y = critic_targets(batch);
  const Eigen::MatrixXd states = observations(batch, false);
  Eigen::MatrixXd taken(1, n);
  for (Eigen::Index i = 0; i < n; ++i) taken(0, i) = scaler_.to_unit(batch[static_cast<std::size_t>(i)].action);

  MlpNet::Cache critic_cache;
  const Eigen::MatrixXd q = critic_.forward(stack(states, taken), critic_cache);
  const Eigen::MatrixXd residual = q - y.transpose();
  diag.critic_loss = residual.squaredNorm() * inv_n;
  critic_opt_.step(critic_, critic_.backward(critic_cache, 2.0 * inv_n * residual));

  MlpNet::Cache actor_cache;
  const Eigen::MatrixXd u = actor_.forward(states, actor_cache);
  MlpNet::Cache q_cache;
  const Eigen::MatrixXd q_pi = critic_.forward(stack(states, u), q_cache);
  diag.actor_objective = q_pi.mean();
  // ascend mean Q: loss = -mean Q
  const auto through_critic = critic_.backward(q_cache, Eigen::MatrixXd::Constant(1, n, -inv_n));
  // penalize only the saturated part of the pre-activation, beyond |z| = 2
  const Eigen::MatrixXd z = actor_cache.pre.back();
  const Eigen::MatrixXd excess = z.array().sign() * (z.array().abs() - kSaturationOnset).max(0.0);
  const Eigen::MatrixXd preact_grad = (2.0 * cfg_.actor_preact_penalty * inv_n) * excess;
  actor_opt_.step(actor_, actor_.backward(actor_cache, through_critic.input.bottomRows(1), preact_grad));

  soft_update(actor_target_, actor_, cfg_.tau);
  soft_update(critic_target_, critic_, cfg_.tau);
  return diag;
}

void DdpgAgent::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  actor_.save(dir / "actor.bin");
  critic_.save(dir / "critic.bin");
  actor_target_.save(dir / "actor_target.bin");
  critic_target_.save(dir / "critic_target.bin");
}

DdpgAgent DdpgAgent::load(const std::filesystem::path& dir, const DdpgConfig& cfg, const SimConfig& sim) {
  DdpgAgent agent(cfg, sim, 0);
  auto load_into = [&](MlpNet& net, const char* name) {
    MlpNet loaded = MlpNet::load(dir / name);
    if (!loaded.same_architecture(net)) {
      throw ValidationError((dir / name).string() + ": architecture does not match the agent config");
    }
    net = std::move(loaded);
  };
  load_into(agent.actor_, "actor.bin");
  load_into(agent.critic_, "critic.bin");
  load_into(agent.actor_target_, "actor_target.bin");
  load_into(agent.critic_target_, "critic_target.bin");
  agent.actor_opt_ = Adam(agent.actor_, cfg.adam);
  agent.critic_opt_ = Adam(agent.critic_, cfg.adam);
  return agent;
}

void DdpgAgent::reset_optimizers() {
  actor_opt_ = Adam(actor_, cfg_.adam);
  critic_opt_ = Adam(critic_, cfg_.adam);
}

int practical_share(int batch_size, double ratio) {
  if (!(ratio >= 0 && ratio <= 1)) throw ValidationError("mixing ratio must be in [0, 1]");
  return static_cast<int>(std::floor(ratio * batch_size + 0.5));
}

std::vector<Transition> sample_mixed(const ReplayBuffer* simulation, const ReplayBuffer* practical,
                                     int batch_size, double ratio, std::mt19937_64& rng) {
  if (batch_size <= 0) throw ValidationError("sample_mixed: batch size must be > 0");
  const int from_practical = practical_share(batch_size, ratio);
  const int from_simulation = batch_size - from_practical;
  if (from_practical > 0 && (practical == nullptr || practical->empty())) {
    throw ValidationError("sample_mixed: practical buffer is empty");
  }
  if (from_simulation > 0 && (simulation == nullptr || simulation->empty())) {
    throw ValidationError("sample_mixed: simulation buffer is empty");
  }
  std::vector<Transition> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < from_practical; ++i) batch.push_back(practical->sample(rng));
  for (int i = 0; i < from_simulation; ++i) batch.push_back(simulation->sample(rng));
  std::shuffle(batch.begin(), batch.end(), rng);
  return batch;
}

namespace {

/// Shared interaction loop of stage one and stage two.
TrainingResult interact_and_train(DdpgAgent& agent, ReplayBuffer& sim_buffer, const ReplayBuffer* practical,
                                  double ratio, bool explore, std::int64_t budget, const EnvSpec& spec,
                                  std::uint64_t seed, const std::function<void(std::int64_t)>& after_step = {}) {
  TrainingResult result;
  const int batch_size = agent.config().batch_size;
  const int from_practical = practical_share(batch_size, ratio);
  const int from_simulation = batch_size - from_practical;
  if (from_practical > 0 && (practical == nullptr || practical->empty())) {
    throw ValidationError("training: practical buffer is empty");
  }

  FollowEnv env(spec.sim, spec.reward);
  std::mt19937_64 sample_rng(derive_seed(seed, kSampleStream));
  const double episode_duration = spec.sim.max_steps * spec.sim.dt;

  std::int64_t episode = 0;
  while (result.env_steps < budget) {
    OuProcess noise = agent.make_noise(derive_seed(seed, kNoiseStream, episode));
    Observation obs = env.reset(gen_leader_profile(derive_seed(seed, kProfileStream, episode),
                                                   episode_duration, spec.sim),
                                derive_seed(seed, kGapStream, episode));
    EpisodeStats stats{episode, 0, 0.0, 0};
    double reward_sum = 0;
    bool done = false;
    while (!done && result.env_steps < budget) {
      const double action = agent.select_action(obs, noise, explore);
      const StepResult step = env.step(action);
      sim_buffer.push({obs, step.info.applied_accel, step.reward, step.obs, step.terminal()});
      obs = step.obs;
      done = step.done;
      reward_sum += step.reward;
      ++stats.steps;
      ++result.env_steps;
      if (step.info.collided) ++stats.collisions;

      const bool sim_ready = from_simulation == 0 ||
                             sim_buffer.size() >= static_cast<std::size_t>(batch_size);
      if (sim_ready) {
        const auto batch = sample_mixed(&sim_buffer, practical, batch_size, ratio, sample_rng);
        agent.train_step(batch);
        ++result.gradient_steps;
      }
      if (after_step) after_step(result.env_steps);
    }
    stats.mean_reward = reward_sum / static_cast<double>(stats.steps);
    result.curve.push_back(stats);
    ++episode;
  }
  return result;
}

struct Snapshot {
  MlpNet actor, critic, actor_target, critic_target;
};

class CheckpointSelector {
 public:
  CheckpointSelector(const EnvSpec& spec, std::uint64_t seed) : spec_(spec), seed_(derive_seed(seed, kCheckpointStream)) {}

  void consider(const DdpgAgent& agent, std::int64_t step) {
    const auto eval = evaluate_greedy(agent, spec_, agent.config().checkpoint_episodes, seed_);
    const double score = eval.collisions > 0 ? -std::numeric_limits<double>::infinity() : eval.mean_reward;
    if (!best_ || score > best_score_) {
      best_ = Snapshot{agent.actor(), agent.critic(), agent.actor_target(), agent.critic_target()};
      best_score_ = score;
      best_step_ = step;
    }
  }

  void restore(DdpgAgent& agent, TrainingResult& result) const {
    result.selected_step = best_step_;
    result.selected_score = best_score_;
    if (!best_ || best_step_ == result.env_steps) return;
    agent.mutable_actor() = best_->actor;
    agent.mutable_critic() = best_->critic;
    agent.mutable_actor_target() = best_->actor_target;
    agent.mutable_critic_target() = best_->critic_target;
    agent.reset_optimizers();
  }

 private:
  EnvSpec spec_;
  std::uint64_t seed_;
  std::optional<Snapshot> best_;
  double best_score_ = 0;
  std::int64_t best_step_ = 0;
};

TrainingResult train_with_selection(DdpgAgent& agent, ReplayBuffer& sim_buffer, const ReplayBuffer* practical,
                                    double ratio, bool explore, std::int64_t budget, const EnvSpec& spec,
                                    std::uint64_t seed) {
  const std::int64_t interval = agent.config().checkpoint_interval;
  if (interval <= 0 || budget <= interval) {
    auto r = interact_and_train(agent, sim_buffer, practical, ratio, explore, budget, spec, seed);
    r.selected_step = r.env_steps;
    return r;
  }
  CheckpointSelector selector(spec, seed);
  TrainingResult result = interact_and_train(agent, sim_buffer, practical, ratio, explore, budget, spec, seed,
                                             [&](std::int64_t step) {
                                               if (step % interval == 0 || step == budget) selector.consider(agent, step);
                                             });
  selector.restore(agent, result);
  return result;
}

EpisodeStats run_greedy_episode(const DdpgAgent& agent, FollowEnv& env, const SimConfig& sim,
                                std::uint64_t seed, std::int64_t index) {
  Observation obs = env.reset(gen_leader_profile(derive_seed(seed, kProfileStream, static_cast<std::uint64_t>(index)),
                                                 sim.max_steps * sim.dt, sim),
                              derive_seed(seed, kGapStream, static_cast<std::uint64_t>(index)));
  EpisodeStats stats{index, 0, 0.0, 0};
  double sum = 0;
  bool done = false;
  while (!done) {
    const StepResult step = env.step(agent.act(obs));
    obs = step.obs;
    done = step.done;
    sum += step.reward;
    ++stats.steps;
    if (step.info.collided) ++stats.collisions;
  }
  stats.mean_reward = sum / static_cast<double>(stats.steps);
  return stats;
}

}  // namespace

TrainingResult train_stage1(DdpgAgent& agent, ReplayBuffer& sim_buffer, const EnvSpec& env,
                            std::int64_t budget, std::uint64_t seed) {
  return train_with_selection(agent, sim_buffer, nullptr, 0.0, true, budget, env, seed);
}

TrainingResult train_stage2(DdpgAgent& agent, ReplayBuffer& sim_buffer, const ReplayBuffer& practical,
                            const StageTwoConfig& cfg, const EnvSpec& env, std::uint64_t seed) {
  if (practical.empty()) throw ValidationError("train_stage2: practical buffer is empty");
  return train_with_selection(agent, sim_buffer, &practical, cfg.ratio, cfg.explore, cfg.steps, env, seed);
}

TrainingResult train_fully_offpolicy(DdpgAgent& agent, const ReplayBuffer& practical, std::int64_t budget,
                                     const EnvSpec& env, std::uint64_t seed) {
  if (practical.empty()) throw ValidationError("train_fully_offpolicy: practical buffer is empty");
  TrainingResult result;
  std::mt19937_64 sample_rng(derive_seed(seed, kSampleStream));
  FollowEnv eval_env(env.sim, env.reward);
  const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);
  const std::int64_t interval = agent.config().offpolicy_eval_interval;
  const int batch_size = agent.config().batch_size;
  for (std::int64_t step = 1; step <= budget; ++step) {
    const auto batch = sample_mixed(nullptr, &practical, batch_size, 1.0, sample_rng);
    agent.train_step(batch);
    ++result.gradient_steps;
    if (step % interval == 0) {
      const auto index = static_cast<std::int64_t>(result.curve.size());
      result.curve.push_back(run_greedy_episode(agent, eval_env, env.sim, eval_seed, index));
    }
  }
  return result;
}

GreedyEvaluation evaluate_greedy(const DdpgAgent& agent, const EnvSpec& env, int episodes,
                                 std::uint64_t seed) {
  GreedyEvaluation out;
  FollowEnv eval_env(env.sim, env.reward);
  double sum = 0;
  std::int64_t steps = 0;
  for (int e = 0; e < episodes; ++e) {
    const auto stats = run_greedy_episode(agent, eval_env, env.sim, seed, e);
    sum += stats.mean_reward * static_cast<double>(stats.steps);
    steps += stats.steps;
    out.collisions += stats.collisions;
    out.episodes.push_back(stats);
  }
  out.mean_reward = steps > 0 ? sum / static_cast<double>(steps) : 0.0;
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<EpisodeStats>& curve) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "episode,steps,mean_reward,collisions\n";
  for (const auto& e : curve) {
    out << e.episode << ',' << e.steps << ',' << csv::format(e.mean_reward) << ',' << e.collisions << '\n';
  }
}

std::vector<EpisodeStats> read_curve_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, {"episode", "steps", "mean_reward", "collisions"}, path);
  std::vector<EpisodeStats> curve;
  for (const auto& row : table.rows) {
    curve.push_back({static_cast<std::int64_t>(csv::parse_double(row.cells[0], row.line, path)),
                     static_cast<std::int64_t>(csv::parse_double(row.cells[1], row.line, path)),
                     csv::parse_double(row.cells[2], row.line, path),
                     static_cast<std::int64_t>(csv::parse_double(row.cells[3], row.line, path))});
  }
  return curve;
}

double mean_of_last(const std::vector<EpisodeStats>& curve, std::size_t n) {
  if (curve.empty()) return 0.0;
  const std::size_t k = std::min(n, curve.size());
  double sum = 0;
  for (std::size_t i = curve.size() - k; i < curve.size(); ++i) sum += curve[i].mean_reward;
  return sum / static_cast<double>(k);
}

}  // namespace followrl
