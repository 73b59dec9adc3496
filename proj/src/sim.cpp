#include "followrl/sim.hpp"

#include "followrl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace followrl {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 finalizer over a mixed key
  std::uint64_t z = base ^ (stream * 0x9E3779B97F4A7C15ULL) ^ (index * 0xD1B54A32D192ED03ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Observation normalize_state(double v, double a, double v_leader, double gap, const SimConfig& cfg) {
  if (!std::isfinite(v) || !std::isfinite(a) || !std::isfinite(v_leader) || !std::isfinite(gap)) {
    throw ValidationError("normalize_state: non-finite input");
  }
  const double g = std::clamp(gap, 0.0, cfg.g_max);
  return {v / cfg.v_des, (a - cfg.a_min) / (cfg.a_max - cfg.a_min), (v_leader - v) / cfg.v_des,
          g / cfg.g_max};
}

void OuParams::validate() const {
  if (!std::isfinite(theta) || !std::isfinite(sigma) || !std::isfinite(mu) || !std::isfinite(x0)) {
    throw ValidationError("OU parameters must be finite");
  }
  if (theta < 0 || sigma < 0) throw ValidationError("OU theta and sigma must be >= 0");
}

OuProcess::OuProcess(const OuParams& params, double dt, std::uint64_t seed)
    : params_(params), dt_(dt), x_(params.x0), rng_(seed) {
  params_.validate();
  if (!(dt > 0)) throw ValidationError("OU dt must be > 0");
}

double OuProcess::next() {
  const double xi = normal_(rng_);
  x_ += params_.theta * (params_.mu - x_) * dt_ + params_.sigma * std::sqrt(dt_) * xi;
  return x_;
}

void OuProcess::reset() {
  x_ = params_.x0;
  normal_.reset();
}

void OuProcess::reset(std::uint64_t seed) {
  rng_.seed(seed);
  reset();
}

std::vector<double> ou_path(const OuParams& params, std::size_t n_steps, double dt, std::uint64_t seed) {
  if (n_steps < 1) throw ValidationError("ou_path: n_steps must be >= 1");
  OuProcess process(params, dt, seed);
  std::vector<double> out;
  out.reserve(n_steps);
  out.push_back(process.value());
  while (out.size() < n_steps) out.push_back(process.next());
  return out;
}

SpeedProfile gen_leader_profile(std::uint64_t seed, double duration, const SimConfig& cfg) {
  if (!(duration > 0)) throw ValidationError("gen_leader_profile: duration must be > 0");
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(duration / cfg.dt)));
  const OuParams params{cfg.leader_theta, cfg.leader_sigma, cfg.leader_mean, 0.0};
  const auto raw = ou_path(params, n, cfg.dt, seed);

  SpeedProfile profile{cfg.dt, {}};
  profile.speed.reserve(n);
  profile.speed.push_back(0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double prev = profile.speed.back();
    const double v = std::clamp(raw[k], 0.0, cfg.v_des);
    profile.speed.push_back(std::clamp(v, prev + cfg.a_min * cfg.dt, prev + cfg.a_max * cfg.dt));
  }
  return profile;
}

void write_profile_csv(const std::filesystem::path& path, const SpeedProfile& profile) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "t_s,v_mps\n";
  for (std::size_t k = 0; k < profile.size(); ++k) {
    out << csv::format(static_cast<double>(k) * profile.dt) << ',' << csv::format(profile.speed[k])
        << '\n';
  }
}

SpeedProfile read_profile_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, {"t_s", "v_mps"}, path);
  if (table.rows.empty()) throw ValidationError(path.string() + ": no samples");
  SpeedProfile profile;
  std::vector<double> t;
  for (const auto& row : table.rows) {
    t.push_back(csv::parse_double(row.cells[0], row.line, path));
    const double v = csv::parse_double(row.cells[1], row.line, path);
    if (v < 0) throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": negative speed");
    profile.speed.push_back(v);
  }
  profile.dt = t.size() > 1 ? t[1] - t[0] : 0.1;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (std::abs((t[k] - t[k - 1]) - profile.dt) > 1e-6) {
      throw ValidationError(path.string() + ":" + std::to_string(table.rows[k].line) +
                            ": non-uniform time step");
    }
  }
  if (!(profile.dt > 0)) throw ValidationError(path.string() + ": time must increase");
  return profile;
}

FollowEnv::FollowEnv(SimConfig cfg, RewardConfig reward_cfg)
    : cfg_(cfg), reward_cfg_(reward_cfg) {
  cfg_.validate();
  reward_cfg_.validate();
}

Observation FollowEnv::reset(SpeedProfile profile, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double gap = cfg_.init_gap_low;
  if (cfg_.init_gap_high > cfg_.init_gap_low) {
    gap = std::uniform_real_distribution<double>(cfg_.init_gap_low, cfg_.init_gap_high)(rng);
  }
  return reset_to(std::move(profile), gap, 0.0);
}

Observation FollowEnv::reset_to(SpeedProfile profile, double gap, double follower_speed) {
  if (profile.size() < static_cast<std::size_t>(cfg_.max_steps)) {
    throw ValidationError("FollowEnv: leader profile shorter than the episode (" +
                          std::to_string(profile.size()) + " < " + std::to_string(cfg_.max_steps) +
                          ")");
  }
  if (std::abs(profile.dt - cfg_.dt) > 1e-9) throw ValidationError("FollowEnv: profile dt mismatch");
  if (!std::isfinite(gap) || gap < 0) throw ValidationError("FollowEnv: initial gap must be >= 0");
  if (!std::isfinite(follower_speed) || follower_speed < 0) {
    throw ValidationError("FollowEnv: initial follower speed must be >= 0");
  }
  profile_ = std::move(profile);
  follower_ = {0.0, follower_speed, 0.0};
  leader_ = {cfg_.vehicle_length + gap, profile_.at(0), 0.0};
  step_index_ = 0;
  prev_accel_ = 0.0;
  done_ = false;
  return observe();
}

double FollowEnv::gap() const { return leader_.position - follower_.position - cfg_.vehicle_length; }

Observation FollowEnv::observe() const {
  return normalize_state(follower_.speed, follower_.accel, leader_.speed, gap(), cfg_);
}

StepResult FollowEnv::step(double action) {
  if (done_) throw ValidationError("FollowEnv: step after episode end; call reset first");
  if (!std::isfinite(action)) throw ValidationError("FollowEnv: non-finite action");

  const double dt = cfg_.dt;
  double a = std::clamp(action, cfg_.a_min, cfg_.a_max);
  const double v = follower_.speed;
  double v_next = v + a * dt;
  if (v_next < 0) {
    a = -v / dt;
    v_next = 0.0;
  }
  follower_.position += v * dt + 0.5 * a * dt * dt;
  follower_.speed = v_next;
  follower_.accel = a;

  const auto k = static_cast<std::size_t>(step_index_);
  const double vl = profile_.at(k);
  const double vl_next = profile_.at(k + 1);
  leader_.position += 0.5 * (vl + vl_next) * dt;
  leader_.speed = vl_next;
  leader_.accel = (vl_next - vl) / dt;

  const double jerk = step_index_ == 0 ? 0.0 : (a - prev_accel_) / dt;
  prev_accel_ = a;
  ++step_index_;

  StepResult out;
  out.info.gap = gap();
  out.info.leader_speed = leader_.speed;
  out.info.follower_speed = follower_.speed;
  out.info.applied_accel = a;
  out.info.jerk = jerk;
  out.info.collided = out.info.gap <= 0;
  out.info.gap_exceeded = out.info.gap > cfg_.g_max;
  out.info.truncated = step_index_ >= cfg_.max_steps;
  out.info.reward = transition_reward(v_next, vl_next, out.info.gap, jerk, reward_cfg_);
  out.reward = out.info.reward.total;
  out.done = out.info.collided || out.info.gap_exceeded || out.info.truncated;
  out.obs = observe();
  done_ = out.done;
  return out;
}

}  // namespace followrl
