#include "followrl/baselines.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>

namespace followrl {

double idm_desired_gap(double v, double v_leader, const IdmParams& p) {
  const double dv = v - v_leader;
  const double dynamic = v * p.time_gap + v * dv / (2.0 * std::sqrt(p.accel * p.b_comf));
  return p.g_min + std::max(0.0, dynamic);
}

double idm_accel(double v, double v_leader, double gap, const IdmParams& p, double a_min, double a_max) {
  if (!std::isfinite(gap) || gap <= 0) throw ValidationError("idm_accel: gap must be > 0 (collision state)");
  if (!std::isfinite(v) || !std::isfinite(v_leader)) throw ValidationError("idm_accel: non-finite speed");
  const double s = idm_desired_gap(v, v_leader, p) / gap;
  const double a = p.accel * (1.0 - std::pow(v / p.v_des, p.delta) - s * s);
  return std::clamp(a, a_min, a_max);
}

double idm_equilibrium_gap(double v, const IdmParams& p) {
  if (!(v > 0)) throw ValidationError("idm_equilibrium_gap: speed must be > 0");
  if (v >= p.v_des) throw ValidationError("idm_equilibrium_gap: no finite equilibrium at or above v_des");
  return (p.g_min + v * p.time_gap) / std::sqrt(1.0 - std::pow(v / p.v_des, p.delta));
}

ReplayFit idm_replay(const FollowingEpisode& episode, const IdmParams& p, const SimConfig& sim) {
  const auto& rec = episode.records;
  if (rec.size() < 2) throw ValidationError("idm_replay: episode needs >= 2 rows");
  SimConfig cfg = sim;
  cfg.max_steps = static_cast<int>(rec.size() - 1);
  cfg.g_max = std::numeric_limits<double>::max();
  cfg.init_gap_low = cfg.init_gap_high = 0;

  SpeedProfile profile;
  profile.dt = cfg.dt;
  for (const auto& r : rec) profile.speed.push_back(r.v_leader);

  FollowEnv env(cfg, RewardConfig{});
  env.reset_to(std::move(profile), rec[0].gap, rec[0].v_follower);
  ReplayFit fit;
  double sq = 0;
  for (std::size_t k = 1; k < rec.size(); ++k) {
    if (env.gap() <= 0) {
      fit.collided = true;
      break;
    }
    const auto res = env.step(idm_accel(env.follower().speed, env.leader().speed, env.gap(), p, cfg.a_min, cfg.a_max));
    const double err = res.info.gap - rec[k].gap;
    sq += err * err;
    ++fit.steps;
    if (res.info.collided) {
      fit.collided = true;
      break;
    }
    if (res.done) break;
  }
  fit.gap_rmse = fit.steps > 0 ? std::sqrt(sq / static_cast<double>(fit.steps)) : 0.0;
  return fit;
}

CalibrationResult calibrate_idm(const std::vector<FollowingEpisode>& episodes, const IdmParams& start,
                                const SimConfig& sim) {
  if (episodes.empty()) throw ValidationError("calibrate_idm: no episodes");
  start.validate();
  const std::vector<double> time_gaps = {0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6};
  const std::vector<double> accels = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  const std::vector<double> brakes = {1.0, 1.5, 2.0, 2.5, 3.0};
  const std::vector<double> min_gaps = {1.0, 1.5, 2.0, 2.5, 3.0, 4.0};

  CalibrationResult best;
  best.params = start;
  best.gap_rmse = std::numeric_limits<double>::infinity();
  for (double T : time_gaps) {
    for (double a : accels) {
      for (double b : brakes) {
        for (double g0 : min_gaps) {
          IdmParams p = start;
          p.time_gap = T;
          p.accel = a;
          p.b_comf = b;
          p.g_min = g0;
          double sq = 0;
          std::size_t n = 0;
          bool ok = true;
          for (const auto& ep : episodes) {
            const auto fit = idm_replay(ep, p, sim);
            if (fit.collided) {
              ok = false;
              break;
            }
            sq += fit.gap_rmse * fit.gap_rmse * static_cast<double>(fit.steps);
            n += fit.steps;
          }
          ++best.evaluated;
          if (!ok || n == 0) continue;
          const double rmse = std::sqrt(sq / static_cast<double>(n));
          if (rmse < best.gap_rmse) {
            best.gap_rmse = rmse;
            best.params = p;
          }
        }
      }
    }
  }
  if (!std::isfinite(best.gap_rmse)) throw ValidationError("calibrate_idm: every candidate collided");
  return best;
}

std::vector<FollowingEpisode> idm_demonstrations(const IdmParams& p, int episodes, double duration,
                                                 std::uint64_t seed, const SimConfig& sim) {
  if (episodes <= 0 || !(duration > 0)) throw ValidationError("idm_demonstrations: need episodes > 0, duration > 0");
  p.validate();
  SimConfig cfg = sim;
  cfg.max_steps = static_cast<int>(std::llround(duration / cfg.dt));
  FollowEnv env(cfg, RewardConfig{});
  std::vector<FollowingEpisode> out;
  for (int e = 0; e < episodes; ++e) {
    const auto idx = static_cast<std::uint64_t>(e);
    std::mt19937_64 rng(derive_seed(seed, 21, idx));
    const double gap0 = std::uniform_real_distribution<double>(10.0, 50.0)(rng);
    env.reset_to(gen_leader_profile(derive_seed(seed, 20, idx), duration + cfg.dt, cfg), gap0, 0.0);
    FollowingEpisode ep;
    char id[32];
    std::snprintf(id, sizeof id, "idm_%03d", e);
    ep.id = id;
    ep.source = EpisodeSource::Synthetic;
    ep.records.push_back({0.0, env.leader().speed, env.follower().speed, env.gap()});
    while (!env.done()) {
      const auto res = env.step(idm_accel(env.follower().speed, env.leader().speed, env.gap(), p, cfg.a_min, cfg.a_max));
      if (res.info.collided) throw ValidationError("idm_demonstrations: IDM follower collided in episode " + ep.id);
      ep.records.push_back({static_cast<double>(env.step_index()) * cfg.dt, res.info.leader_speed,
                            res.info.follower_speed, res.info.gap});
    }
    out.push_back(std::move(ep));
  }
  return out;
}

BcPolicy::BcPolicy(int hidden, const SimConfig& sim, std::uint64_t seed)
    : net_({4, hidden, hidden, 1}, OutputActivation::Tanh, seed), a_min_(sim.a_min), a_max_(sim.a_max) {}

BcPolicy::BcPolicy(MlpNet net, const SimConfig& sim) : net_(std::move(net)), a_min_(sim.a_min), a_max_(sim.a_max) {
  if (net_.input_size() != 4 || net_.output_size() != 1 || net_.output_activation() != OutputActivation::Tanh) {
    throw ValidationError("BcPolicy: network must map 4 inputs to one tanh output");
  }
}

double BcPolicy::act(const Observation& obs) const {
  const auto s = obs.to_array();
  Eigen::MatrixXd x(4, 1);
  x << s[0], s[1], s[2], s[3];
  return ActionScaler{a_min_, a_max_}.to_accel(net_.forward(x)(0, 0));
}

BcPolicy BcPolicy::load(const std::filesystem::path& path, const SimConfig& sim) {
  return BcPolicy(MlpNet::load(path), sim);
}

namespace {

Eigen::MatrixXd states_of(const RelabeledDataset& data, std::span<const std::size_t> idx) {
  Eigen::MatrixXd x(4, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto s = data.transitions[idx[j]].state.to_array();
    for (int r = 0; r < 4; ++r) x(r, static_cast<Eigen::Index>(j)) = s[r];
  }
  return x;
}

}  // namespace

BcTrainResult bc_train(BcPolicy& policy, const RelabeledDataset& train, const BcConfig& cfg, int batch_size,
                       const AdamConfig& adam, std::uint64_t seed) {
  if (train.empty()) throw ValidationError("bc_train: empty training split");
  if (batch_size <= 0) throw ValidationError("bc_train: batch size must be > 0");
  if (cfg.epochs < 0) throw ValidationError("bc_train: epochs must be >= 0");
  std::mt19937_64 rng(seed);
  MlpNet& net = policy.mutable_net();
  Adam opt(net, adam);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  BcTrainResult result;
  MlpNet::Cache cache;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sq = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const auto x = states_of(train, idx);
      const auto u = net.forward(x, cache);
      Eigen::MatrixXd grad(1, x.cols());
      const double n = static_cast<double>(x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double pred = policy.act_from_unit(u(0, j));
        const double err = pred - train.transitions[idx[static_cast<std::size_t>(j)]].action;
        sq += err * err;
        grad(0, j) = 2.0 * err * policy.half_range() / n;
      }
      opt.step(net, net.backward(cache, grad));
    }
    result.epoch_loss.push_back(sq / static_cast<double>(order.size()));
  }
  return result;
}

double bc_mse(const BcPolicy& policy, const RelabeledDataset& data) {
  if (data.empty()) throw ValidationError("bc_mse: empty dataset");
  double sq = 0;
  for (const auto& t : data.transitions) {
    const double err = policy.act(t.state) - t.action;
    sq += err * err;
  }
  return sq / static_cast<double>(data.size());
}

}  // namespace followrl
