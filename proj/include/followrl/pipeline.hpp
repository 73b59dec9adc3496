#pragma once

#include "followrl/config.hpp"
#include "followrl/ddpg.hpp"
#include "followrl/eval.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace followrl {

enum class TrainMode { Pure, TwoStage, OffPolicy, Bc };

TrainMode parse_train_mode(const std::string& name);
const char* to_string(TrainMode mode);

struct TrainRequest {
  TrainMode mode = TrainMode::Pure;
  std::uint64_t seed = 0;
  /// Main-stage budget: stage 1 for pure, stage 2 for two-stage, gradient
  /// steps for off-policy. Falls back to the config when unset.
  std::optional<std::int64_t> budget;
  /// Stage-1 budget when two-stage starts from scratch.
  std::optional<std::int64_t> stage1_budget;
  std::optional<double> ratio;
  std::optional<std::filesystem::path> dataset;  // transition store
  std::optional<std::filesystem::path> init;     // stage-1 agent directory
  double train_fraction = 0.95;
  std::filesystem::path out;
};

struct TrainSummary {
  TrainMode mode = TrainMode::Pure;
  std::int64_t env_steps = 0;
  std::int64_t gradient_steps = 0;
  std::size_t episodes = 0;
  double last50_reward = 0;
  std::size_t practical_size = 0;
};

/// Runs one training mode end to end and writes parameter files, the reward
/// curve (rewards.csv), config.ini and run.json into `req.out`.
TrainSummary run_training(const Config& cfg, const TrainRequest& req);

/// Agent list like "pure=ddpg:runs/a,idm,bc=bc:runs/b/bc.bin,zero,const:1.5,human".
/// Kinds: ddpg:DIR, bc:FILE, idm, zero, const:ACCEL, human (replay only).
struct AgentSpec {
  std::string label;
  std::string kind;
  std::string arg;
};
std::vector<AgentSpec> parse_agent_specs(const std::string& text);

/// Builds a controller; `human` yields nullptr.
std::unique_ptr<Controller> make_controller(const AgentSpec& spec, const Config& cfg);

/// "builtin:s53", "suite:synthetic" or "replay:FILE".
std::vector<Scenario> resolve_scenarios(const std::string& spec, const Config& cfg, std::uint64_t seed);

/// Runs every agent on every scenario. A single scenario reports straight
/// into `out`; several get one subdirectory each plus suite_summary.csv.
std::vector<SummaryRow> run_evaluation(const Config& cfg, const std::vector<AgentSpec>& agents,
                                       const std::vector<Scenario>& scenarios, const std::filesystem::path& out);

}  // namespace followrl
