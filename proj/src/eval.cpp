#include "followrl/eval.hpp"

#include "followrl/csv.hpp"
#include "followrl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace followrl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) { return std::isfinite(v) ? csv::format(v) : std::string(); }
std::string cell(const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); }

double parse_or_nan(const std::string& s, std::size_t line, const std::filesystem::path& path) {
  return s.empty() ? kNaN : csv::parse_double(s, line, path);
}

std::optional<double> parse_optional(const std::string& s, std::size_t line, const std::filesystem::path& path) {
  if (s.empty()) return std::nullopt;
  return csv::parse_double(s, line, path);
}

std::string file_safe(const std::string& name) {
  std::string out = name;
  for (auto& c : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

void push_row(RunTrace& tr, double t, double vl, double vf, double gap, double accel, double jerk, double reward) {
  tr.t.push_back(t);
  tr.v_leader.push_back(vl);
  tr.v_follower.push_back(vf);
  tr.gap.push_back(gap);
  tr.accel.push_back(accel);
  tr.jerk.push_back(jerk);
  tr.reward.push_back(reward);
  tr.ttc.push_back(gap > 0 ? ttc(gap, vf, vl) : std::nullopt);
}

const std::vector<std::string> kTraceHeader = {"t_s",        "v_leader_mps", "v_follower_mps", "gap_m",
                                               "accel_mps2", "jerk_mps3",    "reward",         "ttc_s"};

const std::vector<std::string> kSummaryHeader = {
    "agent",        "scenario",  "ttc_count",  "ttc_min_s",    "ttc_mean_s", "ttc_median_s", "ttc_std_s",
    "ttc_below_2s", "collided",  "mean_reward", "mean_gap_m", "cruise_gap_m", "min_gap_m",   "min_ttc_s"};

}  // namespace

std::optional<double> ttc(double gap, double v_follower, double v_leader) {
  if (!(gap > 0)) throw ValidationError("ttc: gap must be > 0");
  if (v_follower > v_leader) return gap / (v_follower - v_leader);
  return std::nullopt;
}

TtcSummary ttc_summary(const std::vector<std::optional<double>>& values, const EvalConfig& cfg) {
  TtcSummary s;
  s.threshold = cfg.ttc_threshold;
  std::vector<double> kept;
  for (const auto& v : values) {
    if (v && std::isfinite(*v) && *v <= cfg.ttc_threshold) kept.push_back(*v);
  }
  s.count = kept.size();
  if (kept.empty()) {
    s.minimum = s.mean = s.median = s.stddev = kNaN;
    return s;
  }
  s.defined = true;
  std::sort(kept.begin(), kept.end());
  const auto n = kept.size();
  s.minimum = kept.front();
  s.mean = std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 == 1 ? kept[n / 2] : 0.5 * (kept[n / 2 - 1] + kept[n / 2]);
  double sq = 0;
  for (double v : kept) sq += (v - s.mean) * (v - s.mean);
  const double denom = cfg.sample_std ? static_cast<double>(n) - 1.0 : static_cast<double>(n);
  s.stddev = denom > 0 ? std::sqrt(sq / denom) : 0.0;
  s.count_critical = static_cast<std::size_t>(
      std::count_if(kept.begin(), kept.end(), [&](double v) { return v < cfg.ttc_critical; }));
  return s;
}

TtcSummary ttc_summary(const RunTrace& trace, const EvalConfig& cfg) {
  if (trace.size() == 0) throw ValidationError("ttc_summary: empty trace");
  return ttc_summary(trace.ttc, cfg);
}

std::size_t Scenario::steps() const {
  return static_cast<std::size_t>(std::llround(duration / leader.dt));
}

IdmController::IdmController(std::string name, IdmParams params, const SimConfig& sim)
    : name_(std::move(name)), params_(params), a_min_(sim.a_min), a_max_(sim.a_max) {
  params_.validate();
}

double IdmController::act(const ControllerInput& in) const {
  return idm_accel(in.speed, in.leader_speed, in.gap, params_, a_min_, a_max_);
}

PolicyNetController::PolicyNetController(std::string name, MlpNet net, const SimConfig& sim)
    : name_(std::move(name)), net_(std::move(net)), a_min_(sim.a_min), a_max_(sim.a_max) {
  if (net_.input_size() != 4 || net_.output_size() != 1 || net_.output_activation() != OutputActivation::Tanh) {
    throw ValidationError("PolicyNetController: expected a 4-input, 1-output tanh network");
  }
}

double PolicyNetController::act(const ControllerInput& in) const {
  const auto s = in.obs.to_array();
  Eigen::MatrixXd x(4, 1);
  x << s[0], s[1], s[2], s[3];
  return ActionScaler{a_min_, a_max_}.to_accel(net_.forward(x)(0, 0));
}

RunTrace run_scenario(const Controller& controller, const Scenario& scenario, const SimConfig& sim,
                      const RewardConfig& reward_cfg) {
  const std::size_t n = scenario.steps();
  if (n == 0) throw ValidationError("run_scenario: scenario " + scenario.name + " has no steps");
  SimConfig cfg = sim;
  cfg.max_steps = static_cast<int>(n);
  FollowEnv env(cfg, reward_cfg);
  env.reset_to(scenario.leader, scenario.initial_gap, scenario.initial_speed);

  RunTrace tr;
  tr.agent = controller.name();
  tr.scenario = scenario.name;
  while (!env.done()) {
    const ControllerInput in{env.observe(), env.follower().speed, env.follower().accel, env.leader().speed,
                             env.gap()};
    const auto res = env.step(controller.act(in));
    const auto& info = res.info;
    push_row(tr, static_cast<double>(env.step_index()) * cfg.dt, info.leader_speed, info.follower_speed, info.gap,
             info.applied_accel, info.jerk, res.reward);
    if (info.collided) tr.collided = true;
  }
  return tr;
}

RunTrace recorded_trace(const Scenario& scenario, const SimConfig& sim, const RewardConfig& reward_cfg) {
  if (!scenario.recording) throw ValidationError("recorded_trace: scenario " + scenario.name + " has no recording");
  const auto& rec = scenario.recording->records;
  const double dt = sim.dt;
  RunTrace tr;
  tr.agent = "human";
  tr.scenario = scenario.name;
  double prev_accel = 0;
  for (std::size_t k = 1; k < rec.size(); ++k) {
    const double accel = (rec[k].v_follower - rec[k - 1].v_follower) / dt;
    const double jerk = k == 1 ? 0.0 : (accel - prev_accel) / dt;
    prev_accel = accel;
    const auto r = transition_reward(rec[k].v_follower, rec[k].v_leader, rec[k].gap, jerk, reward_cfg);
    push_row(tr, rec[k].t - rec[0].t, rec[k].v_leader, rec[k].v_follower, rec[k].gap, accel, jerk, r.total);
    if (rec[k].gap <= 0) {
      tr.collided = true;
      break;
    }
  }
  return tr;
}

Scenario self_defined_profile(double dt) {
  if (!(dt > 0)) throw ValidationError("self_defined_profile: dt must be > 0");
  auto speed = [](double t) {
    if (t < 18) return 0.0;
    if (t < 27) return 2.0 * (t - 18);
    if (t < 48) return 18.0;
    if (t < 51.6) return 18.0 - 5.0 * (t - 48);
    if (t < 60) return 0.0;
    if (t < 65) return 2.0 * (t - 60);
    if (t < 80) return 10.0;
    if (t < 85) return 10.0 - 2.0 * (t - 80);
    if (t < 92) return 2.0 * (t - 85);
    if (t < 108) return 14.0;
    if (t < 115) return 14.0 - 2.0 * (t - 108);
    return 0.0;
  };
  Scenario sc;
  sc.name = "s53";
  sc.duration = 120.0;
  sc.initial_gap = 50.0;
  sc.initial_speed = 0.0;
  sc.leader.dt = dt;
  const auto n = static_cast<std::size_t>(std::llround(sc.duration / dt));
  for (std::size_t k = 0; k <= n; ++k) sc.leader.speed.push_back(std::max(0.0, speed(static_cast<double>(k) * dt)));
  return sc;
}

std::vector<Scenario> synthetic_suite(std::uint64_t seed, const EvalConfig& cfg, const SimConfig& sim) {
  if (cfg.suite_size <= 0 || !(cfg.suite_duration > 0)) throw ValidationError("synthetic_suite: bad suite size");
  std::vector<Scenario> out;
  for (int i = 0; i < cfg.suite_size; ++i) {
    Scenario sc;
    char name[32];
    std::snprintf(name, sizeof name, "synthetic_%02d", i);
    sc.name = name;
    sc.duration = cfg.suite_duration;
    sc.leader = gen_leader_profile(derive_seed(seed, 11, static_cast<std::uint64_t>(i)),
                                   cfg.suite_duration + sim.dt, sim);
    std::mt19937_64 rng(derive_seed(seed, 12, static_cast<std::uint64_t>(i)));
    sc.initial_gap = std::uniform_real_distribution<double>(20.0, 60.0)(rng);
    sc.initial_speed = 0.0;
    out.push_back(std::move(sc));
  }
  return out;
}

Scenario replay_scenario(const FollowingEpisode& episode) {
  const auto& rec = episode.records;
  if (rec.size() < 2) throw ValidationError("replay_scenario: episode needs >= 2 rows");
  Scenario sc;
  sc.name = episode.id;
  sc.leader.dt = episode.dt();
  for (const auto& r : rec) sc.leader.speed.push_back(r.v_leader);
  sc.initial_gap = rec[0].gap;
  sc.initial_speed = rec[0].v_follower;
  sc.duration = static_cast<double>(rec.size() - 1) * sc.leader.dt;
  sc.recording = episode;
  return sc;
}

TraceMetrics trace_metrics(const RunTrace& trace, const EvalConfig& cfg) {
  if (trace.size() == 0) throw ValidationError("trace_metrics: empty trace");
  TraceMetrics m;
  const auto n = static_cast<double>(trace.size());
  m.mean_reward = std::accumulate(trace.reward.begin(), trace.reward.end(), 0.0) / n;
  m.mean_gap = std::accumulate(trace.gap.begin(), trace.gap.end(), 0.0) / n;
  m.min_gap = *std::min_element(trace.gap.begin(), trace.gap.end());
  double cruise = 0;
  std::size_t cruise_n = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace.v_leader[i] >= cfg.cruise_speed) {
      cruise += trace.gap[i];
      ++cruise_n;
    }
    if (trace.ttc[i] && (!m.min_ttc || *trace.ttc[i] < *m.min_ttc)) m.min_ttc = trace.ttc[i];
  }
  m.cruise_gap = cruise_n > 0 ? cruise / static_cast<double>(cruise_n) : kNaN;
  m.collided = trace.collided;
  return m;
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (std::size_t i = 0; i < kTraceHeader.size(); ++i) out << (i ? "," : "") << kTraceHeader[i];
  out << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << csv::format(trace.t[i]) << ',' << csv::format(trace.v_leader[i]) << ','
        << csv::format(trace.v_follower[i]) << ',' << csv::format(trace.gap[i]) << ','
        << csv::format(trace.accel[i]) << ',' << csv::format(trace.jerk[i]) << ',' << csv::format(trace.reward[i])
        << ',' << cell(trace.ttc[i]) << '\n';
  }
}

RunTrace read_trace_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, kTraceHeader, path);
  RunTrace tr;
  std::string stem = path.stem().string();
  tr.agent = stem.rfind("trace_", 0) == 0 ? stem.substr(6) : stem;
  for (const auto& row : table.rows) {
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < 7; ++c) v[c] = csv::parse_double(row.cells[c], row.line, path);
    tr.t.push_back(v[0]);
    tr.v_leader.push_back(v[1]);
    tr.v_follower.push_back(v[2]);
    tr.gap.push_back(v[3]);
    tr.accel.push_back(v[4]);
    tr.jerk.push_back(v[5]);
    tr.reward.push_back(v[6]);
    tr.ttc.push_back(parse_optional(row.cells[7], row.line, path));
  }
  tr.collided = !tr.gap.empty() && tr.gap.back() <= 0;
  return tr;
}

std::vector<SummaryRow> compare_report(const std::vector<RunTrace>& traces, const std::filesystem::path& dir,
                                       const EvalConfig& cfg) {
  if (traces.empty()) throw ValidationError("compare_report: no traces");
  std::filesystem::create_directories(dir);
  std::vector<SummaryRow> rows;
  std::ofstream long_out(dir / "long.csv");
  if (!long_out) throw ValidationError("cannot write " + (dir / "long.csv").string());
  long_out << "t,agent,series,value\n";
  for (const auto& tr : traces) {
    write_trace_csv(dir / ("trace_" + file_safe(tr.agent) + ".csv"), tr);
    rows.push_back({tr.agent, tr.scenario, ttc_summary(tr, cfg), trace_metrics(tr, cfg)});
    const std::pair<const char*, const std::vector<double>*> series[] = {
        {"v_leader", &tr.v_leader}, {"v_follower", &tr.v_follower}, {"gap", &tr.gap},
        {"accel", &tr.accel},       {"jerk", &tr.jerk},             {"reward", &tr.reward}};
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const std::string t = csv::format(tr.t[i]);
      for (const auto& [label, values] : series) {
        long_out << t << ',' << tr.agent << ',' << label << ',' << csv::format((*values)[i]) << '\n';
      }
      if (tr.ttc[i]) long_out << t << ',' << tr.agent << ",ttc," << csv::format(*tr.ttc[i]) << '\n';
    }
  }
  write_summary_csv(dir / "ttc_summary.csv", rows);
  return rows;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (std::size_t i = 0; i < kSummaryHeader.size(); ++i) out << (i ? "," : "") << kSummaryHeader[i];
  out << '\n';
  for (const auto& r : rows) {
    const auto& s = r.ttc;
    const auto& m = r.metrics;
    out << r.agent << ',' << r.scenario << ',' << s.count << ',' << cell(s.minimum) << ',' << cell(s.mean) << ','
        << cell(s.median) << ',' << cell(s.stddev) << ',' << s.count_critical << ',' << (m.collided ? 1 : 0) << ','
        << cell(m.mean_reward) << ',' << cell(m.mean_gap) << ',' << cell(m.cruise_gap) << ',' << cell(m.min_gap)
        << ',' << cell(m.min_ttc) << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::expect_header(table, kSummaryHeader, path);
  std::vector<SummaryRow> rows;
  for (const auto& row : table.rows) {
    const auto& c = row.cells;
    auto num = [&](std::size_t i) { return parse_or_nan(c[i], row.line, path); };
    SummaryRow r;
    r.agent = c[0];
    r.scenario = c[1];
    r.ttc.count = static_cast<std::size_t>(csv::parse_double(c[2], row.line, path));
    r.ttc.defined = r.ttc.count > 0;
    r.ttc.minimum = num(3);
    r.ttc.mean = num(4);
    r.ttc.median = num(5);
    r.ttc.stddev = num(6);
    r.ttc.count_critical = static_cast<std::size_t>(csv::parse_double(c[7], row.line, path));
    r.metrics.collided = csv::parse_double(c[8], row.line, path) != 0;
    r.metrics.mean_reward = num(9);
    r.metrics.mean_gap = num(10);
    r.metrics.cruise_gap = num(11);
    r.metrics.min_gap = num(12);
    r.metrics.min_ttc = parse_optional(c[13], row.line, path);
    rows.push_back(r);
  }
  return rows;
}

std::vector<SuiteAggregate> aggregate_suite(const std::vector<SummaryRow>& rows) {
  std::vector<SuiteAggregate> out;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> cruise_n;
  for (const auto& r : rows) {
    auto [it, fresh] = index.emplace(r.agent, out.size());
    if (fresh) {
      SuiteAggregate a;
      a.agent = r.agent;
      out.push_back(a);
      cruise_n.push_back(0);
    }
    auto& a = out[it->second];
    ++a.scenarios;
    if (r.metrics.collided) ++a.collisions;
    if (r.metrics.min_ttc && (!a.min_ttc || *r.metrics.min_ttc < *a.min_ttc)) a.min_ttc = r.metrics.min_ttc;
    if (std::isfinite(r.metrics.cruise_gap)) {
      a.mean_cruise_gap += r.metrics.cruise_gap;
      ++cruise_n[it->second];
    }
    a.mean_gap += r.metrics.mean_gap;
    a.mean_reward += r.metrics.mean_reward;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& a = out[i];
    a.mean_cruise_gap = cruise_n[i] > 0 ? a.mean_cruise_gap / static_cast<double>(cruise_n[i]) : kNaN;
    a.mean_gap /= static_cast<double>(a.scenarios);
    a.mean_reward /= static_cast<double>(a.scenarios);
  }
  return out;
}

void write_suite_csv(const std::filesystem::path& path, const std::vector<SuiteAggregate>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "agent,scenarios,collisions,min_ttc_s,mean_cruise_gap_m,mean_gap_m,mean_reward\n";
  for (const auto& a : rows) {
    out << a.agent << ',' << a.scenarios << ',' << a.collisions << ',' << cell(a.min_ttc) << ','
        << cell(a.mean_cruise_gap) << ',' << cell(a.mean_gap) << ',' << cell(a.mean_reward) << '\n';
  }
}

}  // namespace followrl
