#pragma once

#include "followrl/baselines.hpp"
#include "followrl/config.hpp"
#include "followrl/dataset.hpp"
#include "followrl/mlp.hpp"
#include "followrl/sim.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace followrl {

/// Time to collision; none unless the follower is closing in. Rejects gap <= 0.
std::optional<double> ttc(double gap, double v_follower, double v_leader);

struct TtcSummary {
  double threshold = 10.0;
  std::size_t count = 0;  // finite values <= threshold
  bool defined = false;   // false when count == 0; statistics are then NaN
  double minimum = 0;
  double mean = 0;
  double median = 0;
  double stddev = 0;
  std::size_t count_critical = 0;  // strictly below the critical time
};

TtcSummary ttc_summary(const std::vector<std::optional<double>>& values, const EvalConfig& cfg);

struct Scenario {
  std::string name;
  SpeedProfile leader;
  double initial_gap = 0;
  double initial_speed = 0;
  double duration = 0;
  /// Human follower of a replayed recording, if any.
  std::optional<FollowingEpisode> recording;

  std::size_t steps() const;
};

struct RunTrace {
  std::string agent;
  std::string scenario;
  std::vector<double> t;
  std::vector<double> v_leader;
  std::vector<double> v_follower;
  std::vector<double> gap;
  std::vector<double> accel;
  std::vector<double> jerk;
  std::vector<double> reward;
  std::vector<std::optional<double>> ttc;
  bool collided = false;

  std::size_t size() const { return t.size(); }
};

TtcSummary ttc_summary(const RunTrace& trace, const EvalConfig& cfg);

/// What a controller sees each step: the normalized observation plus the
/// raw quantities it was built from.
struct ControllerInput {
  Observation obs;
  double speed = 0;
  double accel = 0;
  double leader_speed = 0;
  double gap = 0;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Commanded acceleration in m/s^2.
  virtual double act(const ControllerInput& in) const = 0;
};

class IdmController : public Controller {
 public:
  IdmController(std::string name, IdmParams params, const SimConfig& sim);
  std::string name() const override { return name_; }
  double act(const ControllerInput& in) const override;

 private:
  std::string name_;
  IdmParams params_;
  double a_min_, a_max_;
};

/// A 4 -> ... -> 1 tanh network mapped onto the acceleration range (DDPG
/// actor or behavior-cloned policy).
class PolicyNetController : public Controller {
 public:
  PolicyNetController(std::string name, MlpNet net, const SimConfig& sim);
  std::string name() const override { return name_; }
  double act(const ControllerInput& in) const override;

 private:
  std::string name_;
  MlpNet net_;
  double a_min_, a_max_;
};

class ConstantController : public Controller {
 public:
  ConstantController(std::string name, double accel) : name_(std::move(name)), accel_(accel) {}
  std::string name() const override { return name_; }
  double act(const ControllerInput&) const override { return accel_; }

 private:
  std::string name_;
  double accel_;
};

/// Noise-free rollout through the simulator. A collision ends the trace and
/// sets `collided`; leaving the gap range ends it without a flag.
RunTrace run_scenario(const Controller& controller, const Scenario& scenario, const SimConfig& sim,
                      const RewardConfig& reward_cfg);

/// The recorded human follower of a replay scenario as a trace.
RunTrace recorded_trace(const Scenario& scenario, const SimConfig& sim, const RewardConfig& reward_cfg);

/// Leader stands, accelerates at 2 m/s^2 from 18 s to 18 m/s, cruises, brakes
/// at -5 m/s^2 from 48 s to a stop, then drives two 2 m/s^2 trapezoids (to
/// 10 and 14 m/s). 120 s, initial gap 50 m, follower at rest.
Scenario self_defined_profile(double dt = 0.1);

/// Seeded OU leaders with initial gaps drawn from [20, 60] m and the
/// follower at rest.
std::vector<Scenario> synthetic_suite(std::uint64_t seed, const EvalConfig& cfg, const SimConfig& sim);

Scenario replay_scenario(const FollowingEpisode& episode);

struct TraceMetrics {
  double mean_reward = 0;
  double mean_gap = 0;
  double cruise_gap = 0;  // mean gap while the leader is above cruise speed; NaN if never
  double min_gap = 0;
  std::optional<double> min_ttc;
  bool collided = false;
};

TraceMetrics trace_metrics(const RunTrace& trace, const EvalConfig& cfg);

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);
RunTrace read_trace_csv(const std::filesystem::path& path);

struct SummaryRow {
  std::string agent;
  std::string scenario;
  TtcSummary ttc;
  TraceMetrics metrics;
};

/// Writes trace_<agent>.csv per trace, ttc_summary.csv and long.csv into
/// `dir`; returns the summary rows in trace order.
std::vector<SummaryRow> compare_report(const std::vector<RunTrace>& traces, const std::filesystem::path& dir,
                                       const EvalConfig& cfg);

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

/// Aggregate of one agent across a scenario suite.
struct SuiteAggregate {
  std::string agent;
  std::size_t scenarios = 0;
  std::size_t collisions = 0;
  std::optional<double> min_ttc;
  double mean_cruise_gap = 0;
  double mean_gap = 0;
  double mean_reward = 0;
};

std::vector<SuiteAggregate> aggregate_suite(const std::vector<SummaryRow>& rows);
void write_suite_csv(const std::filesystem::path& path, const std::vector<SuiteAggregate>& rows);

}  // namespace followrl
