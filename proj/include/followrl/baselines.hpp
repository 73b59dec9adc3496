#pragma once

#include "followrl/config.hpp"
#include "followrl/dataset.hpp"
#include "followrl/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace followrl {

/// IDM desired dynamic gap s*(v, dv). The dynamic term is floored at zero so
/// a fast-approaching leader never pulls s* below g_min.
double idm_desired_gap(double v, double v_leader, const IdmParams& p);

/// IDM acceleration clipped to [a_min, a_max]. Rejects g <= 0.
double idm_accel(double v, double v_leader, double gap, const IdmParams& p, double a_min, double a_max);

/// Steady-state gap of an IDM follower at speed v behind an equal-speed
/// leader. Requires 0 < v < v_des.
double idm_equilibrium_gap(double v, const IdmParams& p);

/// Closed-loop IDM replay of a recorded episode: the leader follows the
/// recorded speeds, the follower starts from the recorded state.
struct ReplayFit {
  double gap_rmse = 0;
  std::size_t steps = 0;
  bool collided = false;
};
ReplayFit idm_replay(const FollowingEpisode& episode, const IdmParams& p, const SimConfig& sim);

struct CalibrationResult {
  IdmParams params{};
  double gap_rmse = 0;
  std::size_t evaluated = 0;
};

/// Grid search over time gap, max acceleration, comfortable deceleration
/// and standstill gap minimizing pooled gap RMSE across the episodes.
/// Candidates that collide on any episode are skipped.
CalibrationResult calibrate_idm(const std::vector<FollowingEpisode>& episodes, const IdmParams& start,
                                const SimConfig& sim);

/// Synthetic "human" recordings: closed-loop IDM followers behind seeded OU
/// leaders, starting at rest with initial gaps drawn from [10, 50] m. The
/// first row is the initial state.
std::vector<FollowingEpisode> idm_demonstrations(const IdmParams& p, int episodes, double duration,
                                                 std::uint64_t seed, const SimConfig& sim);

/// Behavior-cloned policy with the actor's architecture and output scaling.
class BcPolicy {
 public:
  BcPolicy(int hidden, const SimConfig& sim, std::uint64_t seed);
  BcPolicy(MlpNet net, const SimConfig& sim);

  double act(const Observation& obs) const;
  double act_from_unit(double u) const { return ActionScaler{a_min_, a_max_}.to_accel(u); }
  double half_range() const { return ActionScaler{a_min_, a_max_}.half_range(); }
  const MlpNet& net() const { return net_; }
  MlpNet& mutable_net() { return net_; }

  void save(const std::filesystem::path& path) const { net_.save(path); }
  static BcPolicy load(const std::filesystem::path& path, const SimConfig& sim);

 private:
  MlpNet net_;
  double a_min_;
  double a_max_;
};

struct BcTrainResult {
  std::vector<double> epoch_loss;  // mean squared error in (m/s^2)^2
};

/// Minibatch regression of dataset actions from states. Each epoch visits a
/// fresh permutation of the data in batches of `batch_size`.
BcTrainResult bc_train(BcPolicy& policy, const RelabeledDataset& train, const BcConfig& cfg, int batch_size,
                       const AdamConfig& adam, std::uint64_t seed);

/// Mean squared action error of the policy on a dataset.
double bc_mse(const BcPolicy& policy, const RelabeledDataset& data);

}  // namespace followrl
