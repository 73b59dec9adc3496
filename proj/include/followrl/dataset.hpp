#pragma once

#include "followrl/config.hpp"
#include "followrl/ddpg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace followrl {

/// One timestamped row of a leader-follower recording.
struct TrajectoryRecord {
  double t = 0;
  double v_leader = 0;
  double v_follower = 0;
  double gap = 0;  // bumper to bumper

  bool operator==(const TrajectoryRecord&) const = default;
};

enum class EpisodeSource { Napoli, Ngsim, Synthetic };

const char* to_string(EpisodeSource source);
EpisodeSource parse_source(const std::string& name);

struct FollowingEpisode {
  std::string id;
  std::vector<TrajectoryRecord> records;
  EpisodeSource source = EpisodeSource::Synthetic;

  double dt() const { return records.size() > 1 ? records[1].t - records[0].t : 0.0; }
};

/// Reads `t_s,v_leader_mps,v_follower_mps,gap_m`. Rejects negative speeds or
/// gaps, non-uniform timestamps (1e-6 s tolerance) and a spacing other than
/// `expected_dt`; errors name the offending line.
FollowingEpisode parse_trajectory_csv(const std::filesystem::path& path, double expected_dt = 0.1,
                                      EpisodeSource source = EpisodeSource::Synthetic);
void write_trajectory_csv(const std::filesystem::path& path, const FollowingEpisode& episode);

/// Reward histogram over [-1, 0.5] in 0.05 bins plus under/overflow.
struct RewardHistogram {
  static constexpr double kLow = -1.0;
  static constexpr double kHigh = 0.5;
  static constexpr double kWidth = 0.05;
  static constexpr std::size_t kBins = 30;

  std::vector<std::size_t> counts = std::vector<std::size_t>(kBins, 0);
  std::size_t underflow = 0;
  std::size_t overflow = 0;
  std::size_t total = 0;
  double fraction_good = 0;  // r >= 0.4
  double fraction_zero = 0;  // |r| <= 1e-9

  static std::size_t bin_of(double r);
  std::size_t mass() const;
};

/// Transitions rebuilt from recordings with the simulator's reward.
struct RelabeledDataset {
  std::vector<Transition> transitions;
  std::vector<std::string> episode_ids;
  std::vector<std::uint32_t> episode_of;  // per transition, index into episode_ids
  std::size_t clipped_actions = 0;
  RewardHistogram histogram{};

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
  void append(const RelabeledDataset& other);
};

/// Action a_t = (v_{t+1} - v_t)/dt clipped to the action range, jerk from
/// the previous recovered action, reward through transition_reward. An
/// episode of N rows yields N - 2 transitions; the last one is done.
RelabeledDataset build_transitions(const FollowingEpisode& episode, const SimConfig& cfg,
                                   const RewardConfig& reward_cfg);

/// Episode-level split when there are at least 20 episodes (evaluation gets
/// the smallest shuffled prefix of episodes holding >= (1 - frac) of the
/// transitions); otherwise one seeded contiguous block per episode.
std::pair<RelabeledDataset, RelabeledDataset> split_train_eval(const RelabeledDataset& data, double frac,
                                                               std::uint64_t seed);

RewardHistogram reward_histogram(const RelabeledDataset& data);

ReplayBuffer to_replay_buffer(const RelabeledDataset& data);

/// Binary transition store plus `<path>.json` manifest.
void save_store(const std::filesystem::path& path, const RelabeledDataset& data);
RelabeledDataset load_store(const std::filesystem::path& path);

/// Files matching a shell wildcard pattern, sorted.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace followrl
