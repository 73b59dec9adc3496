// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Pass criterion numbers as arguments to run a subset.

#include "followrl/baselines.hpp"
#include "followrl/control.hpp"
#include "followrl/dataset.hpp"
#include "followrl/ddpg.hpp"
#include "followrl/eval.hpp"
#include "followrl/reward.hpp"

#include "../support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

using namespace followrl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr std::int64_t kBudget = 100000;

// ---------------------------------------------------------------- 1
Outcome gradient_correctness() {
  struct Arch {
    std::vector<int> sizes;
    OutputActivation out;
  };
  const Arch archs[] = {{{4, 32, 32, 1}, OutputActivation::Tanh},
                        {{5, 32, 32, 1}, OutputActivation::Linear},
                        {{3, 16, 16, 2}, OutputActivation::Linear},
                        {{4, 32, 32, 1}, OutputActivation::Tanh}};
  double worst = 0;
  std::size_t checked = 0;
  for (std::size_t a = 0; a < std::size(archs); ++a) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const MlpNet net(archs[a].sizes, archs[a].out, 1000 * (a + 1) + s);
      const auto r = testing::gradient_check(net, s);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
  }
  return {worst <= 1e-4, fmt("max relative error %.2e over %zu derivatives", worst, checked)};
}

// ---------------------------------------------------------------- 2
Outcome reward_supremum() {
  const RewardConfig cfg;
  double best = -std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> V(0, 40), G(0.01, 250), J(-150, 150);
  std::size_t n = 0;
  auto visit = [&](double v, double vl, double g, double j) {
    best = std::max(best, reward_total(v, vl, g, j, cfg).total);
    ++n;
  };
  for (int i = 0; i < 1000000; ++i) visit(V(rng), V(rng), G(rng), J(rng));
  for (int a = 0; a <= 40; ++a) {
    for (int b = 0; b <= 40; ++b) {
      for (int c = 1; c <= 200; ++c) visit(a, b, 0.5 * c, 0.0);
    }
  }
  double opt_worst = 0;
  for (double v = 0; v <= 30; v += 0.5) {
    const double g = cfg.time_gap * v + cfg.g_min;
    opt_worst = std::max(opt_worst, std::abs(reward_total(v, v, g, 0, cfg).total - 0.5));
  }
  return {best <= 0.5 + 1e-9 && opt_worst <= 1e-6,
          fmt("max over %zu states %.12f; optimum off by %.1e", n, best, opt_worst)};
}

// ---------------------------------------------------------------- 3
Outcome soft_update_law() {
  const double tau = 0.001;
  MlpNet src({5, 32, 32, 1}, OutputActivation::Linear, 31);
  MlpNet tgt({5, 32, 32, 1}, OutputActivation::Linear, 32);
  const double d0 = tgt.max_abs_difference(src);
  double worst = 0;
  for (int k = 1; k <= 10000; ++k) {
    soft_update(tgt, src, tau);
    worst = std::max(worst, std::abs(tgt.max_abs_difference(src) - std::pow(1 - tau, k) * d0));
  }
  return {worst <= 1e-9, fmt("worst deviation from the geometric law %.2e", worst)};
}

// ---------------------------------------------------------------- shared agents
struct PureRun {
  std::optional<DdpgAgent> agent;
  double last50 = 0;
  GreedyEvaluation greedy;
};

std::uint64_t eval_seed(std::uint64_t seed) { return derive_seed(seed, 0xace); }

const std::map<std::uint64_t, PureRun>& pure_agents() {
  static const std::map<std::uint64_t, PureRun> runs = [] {
    std::map<std::uint64_t, PureRun> out;
    const EnvSpec env{};
    for (auto seed : kSeeds) {
      PureRun r;
      r.agent.emplace(DdpgConfig{}, SimConfig{}, seed);
      ReplayBuffer buf(2000);
      const auto res = train_stage1(*r.agent, buf, env, kBudget, seed);
      r.last50 = mean_of_last(res.curve, 50);
      r.greedy = evaluate_greedy(*r.agent, env, 20, eval_seed(seed));
      out.emplace(seed, std::move(r));
    }
    return out;
  }();
  return runs;
}

// ---------------------------------------------------------------- 4
Outcome stage1_learning() {
  bool pass = true;
  std::ostringstream os;
  for (const auto& [seed, r] : pure_agents()) {
    pass = pass && r.last50 >= 0.3 && r.greedy.collisions == 0;
    os << fmt("seed %llu: last50 %.3f greedy %.3f collisions %lld; ", static_cast<unsigned long long>(seed), r.last50,
              r.greedy.mean_reward, static_cast<long long>(r.greedy.collisions));
  }
  return {pass, os.str()};
}

// synthetic human recordings, relabeled
RelabeledDataset human_dataset(const IdmParams& p, std::uint64_t seed) {
  const SimConfig sim;
  RelabeledDataset all;
  for (const auto& e : idm_demonstrations(p, 40, 100, seed, sim)) all.append(build_transitions(e, sim, RewardConfig{}));
  return split_train_eval(all, 0.95, seed).first;
}

// ---------------------------------------------------------------- 5
Outcome extrapolation_failure() {
  const auto data = to_replay_buffer(human_dataset(IdmParams{}, 5));
  const EnvSpec env{};
  bool pass = true;
  std::ostringstream os;
  for (const auto& [seed, pure] : pure_agents()) {
    DdpgAgent agent(DdpgConfig{}, SimConfig{}, seed);
    train_fully_offpolicy(agent, data, kBudget, env, seed);
    const auto g = evaluate_greedy(agent, env, 20, eval_seed(seed));
    const double bound = 0.5 * pure.greedy.mean_reward;
    pass = pass && g.mean_reward <= bound;
    os << fmt("seed %llu: off-policy %.3f vs bound %.3f; ", static_cast<unsigned long long>(seed), g.mean_reward,
              bound);
  }
  return {pass, os.str()};
}

// ---------------------------------------------------------------- 6
SuiteAggregate on_suite(const DdpgAgent& agent, const std::string& label) {
  const SimConfig sim;
  const EvalConfig ecfg;
  const PolicyNetController ctl(label, agent.actor(), sim);
  std::vector<SummaryRow> rows;
  for (const auto& sc : synthetic_suite(6, ecfg, sim)) {
    const auto tr = run_scenario(ctl, sc, sim, RewardConfig{});
    rows.push_back({label, sc.name, ttc_summary(tr, ecfg), trace_metrics(tr, ecfg)});
  }
  return aggregate_suite(rows).front();
}

Outcome two_stage_gains() {
  IdmParams tight;
  tight.time_gap = 1.0;
  const auto practical = to_replay_buffer(human_dataset(tight, 6));
  const EnvSpec env{};
  const auto& base = *pure_agents().at(kSeeds[0]).agent;
  auto stage2 = [&](double ratio) {
    DdpgAgent a = base;
    a.reset_optimizers();
    ReplayBuffer buf(2000);
    train_stage2(a, buf, practical, StageTwoConfig{ratio, DdpgConfig{}.stage2_budget, true}, env, 66);
    return a;
  };
  const auto pure = on_suite(base, "pure");
  const auto r06 = on_suite(stage2(0.6), "r0.6");
  const auto r10 = on_suite(stage2(1.0), "r1.0");
  const double inf = std::numeric_limits<double>::infinity();
  const double ttc_pure = pure.min_ttc.value_or(inf), ttc_two = r06.min_ttc.value_or(inf);
  const bool a = ttc_two >= ttc_pure;
  const bool b = r06.mean_cruise_gap < pure.mean_cruise_gap;
  const bool c = r10.mean_gap >= r06.mean_gap;
  return {a && b && c,
          fmt("(a) min ttc %.2f vs %.2f %s; (b) cruise gap %.2f vs %.2f %s; (c) mean gap r1.0 %.2f vs r0.6 %.2f %s",
              ttc_two, ttc_pure, a ? "ok" : "no", r06.mean_cruise_gap, pure.mean_cruise_gap, b ? "ok" : "no",
              r10.mean_gap, r06.mean_gap, c ? "ok" : "no")};
}

// ---------------------------------------------------------------- 7
Outcome batch_mix() {
  ReplayBuffer sim(500), prac(500);
  for (int i = 0; i < 500; ++i) {
    sim.push({{}, 0, 1.0, {}, false});
    prac.push({{}, 0, -1.0, {}, false});
  }
  std::mt19937_64 rng(7);
  long violations = 0;
  for (int tenth = 1; tenth <= 10; ++tenth) {
    const double r = tenth / 10.0;
    const int want = static_cast<int>(std::lround(r * 32));
    for (int b = 0; b < 10000; ++b) {
      const auto batch = sample_mixed(&sim, &prac, 32, r, rng);
      int p = 0;
      for (const auto& t : batch) p += t.reward < 0 ? 1 : 0;
      if (p != want || static_cast<int>(batch.size()) - p != 32 - want) ++violations;
    }
  }
  return {violations == 0, fmt("%ld violations in 100000 batches", violations)};
}

// ---------------------------------------------------------------- 8
Outcome idm_equilibrium() {
  SimConfig sim;
  sim.max_steps = 1200;
  sim.g_max = 1e6;
  Scenario sc;
  sc.name = "const10";
  sc.leader = {0.1, std::vector<double>(1201, 10.0)};
  sc.initial_gap = 40;
  sc.initial_speed = 10;
  sc.duration = 120;
  const auto tr = run_scenario(IdmController("idm", IdmParams{}, sim), sc, sim, RewardConfig{});
  // s* = 2.5 + 10 * 1 at zero closing speed, and g = s* / sqrt(1 - (10/20)^4)
  const double ge = 12.5 / std::sqrt(1.0 - 0.0625);
  const double err = std::abs(tr.gap.back() - ge) / ge;
  return {!tr.collided && err <= 0.01 && std::abs(ge - 12.9099) < 1e-4,
          fmt("gap at 120 s %.4f, equilibrium %.4f, rel err %.2e", tr.gap.back(), ge, err)};
}

// ---------------------------------------------------------------- 9
TtcSummary brute_ttc(const std::vector<std::optional<double>>& values) {
  std::multiset<double> kept;
  for (const auto& v : values) {
    if (v && *v <= 10.0) kept.insert(*v);
  }
  TtcSummary s;
  s.count = kept.size();
  s.defined = s.count > 0;
  if (!s.defined) return s;
  const std::vector<double> sorted(kept.begin(), kept.end());
  s.minimum = sorted.front();
  double sum = 0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  const auto n = sorted.size();
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sq = 0;
  for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(n));
  for (double v : sorted) s.count_critical += v < 2.0;
  return s;
}

bool same(const TtcSummary& a, const TtcSummary& b) {
  if (a.count != b.count || a.defined != b.defined || a.count_critical != b.count_critical) return false;
  if (!a.defined) return true;
  return a.minimum == b.minimum && a.mean == b.mean && a.median == b.median && a.stddev == b.stddev;
}

Outcome ttc_oracle() {
  const EvalConfig cfg;
  const std::vector<std::optional<double>> hand = {1.0, 3.0, 11.0, std::nullopt};
  const auto h = ttc_summary(hand, cfg);
  bool pass = same(h, brute_ttc(hand)) && h.count == 2 && h.minimum == 1 && h.mean == 2 && h.median == 2 &&
              h.stddev == 1 && h.count_critical == 1;
  // random traces from the simulator under noisy IDM control
  const SimConfig sim;
  std::mt19937_64 rng(9);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    Scenario sc;
    sc.name = "r";
    sc.duration = 60;
    sc.leader = gen_leader_profile(derive_seed(9, 1, static_cast<std::uint64_t>(i)), 60.1, sim);
    sc.initial_gap = std::uniform_real_distribution<double>(5, 60)(rng);
    sc.initial_speed = std::uniform_real_distribution<double>(0, 15)(rng);
    IdmParams p;
    p.time_gap = std::uniform_real_distribution<double>(0.3, 2.0)(rng);
    const auto tr = run_scenario(IdmController("idm", p, sim), sc, sim, RewardConfig{});
    if (!same(ttc_summary(tr, cfg), brute_ttc(tr.ttc))) ++mismatches;
  }
  pass = pass && mismatches == 0;
  return {pass, fmt("hand case ok=%d, %d mismatches on 100 traces", same(h, brute_ttc(hand)) ? 1 : 0, mismatches)};
}

// ---------------------------------------------------------------- 10
Outcome control_inversion() {
  const ControlConfig cfg;
  auto rmse_for = [&](const PowertrainModel& m, std::uint64_t seed) {
    ControlNet cn(seed);
    train_control_net(cn, collect_reverse_data(m, cfg.collect_duration, 0.1, seed), cfg);
    double worst = 0;
    for (double v0 : {5.0, 12.0}) worst = std::max(worst, track_square_wave(cn, m, v0, 2.0, 4.0, 40.0, 0.1).rmse);
    return worst;
  };
  const PowertrainModel nominal;
  const double r0 = rmse_for(nominal, 1);
  bool pass = r0 <= 0.3;
  std::string detail = fmt("nominal %.3f", r0);
  for (double f : {0.75, 1.25}) {
    PowertrainModel m = nominal;
    m.c_throttle *= f;
    m.c_brake *= f;
    m.c_drag *= f;
    m.c_roll *= f;
    const double r = rmse_for(m, 2);
    pass = pass && r <= 0.3;
    detail += fmt(", x%.2f %.3f", f, r);
  }
  return {pass, detail + " m/s^2"};
}

// ---------------------------------------------------------------- 11
bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return std::filesystem::exists(a) && testing::slurp(a) == testing::slurp(b);
}

Outcome determinism() {
  testing::TempDir dir("determinism");
  const std::string cli = FOLLOWRL_CLI;
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
  };
  const auto d = dir.path().string();
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    run("train --mode pure --budget 6000 --seed 5 --out " + d + "/train_" + t);
    run("eval --agents ddpg=ddpg:" + d + "/train_a,idm --scenario builtin:s53 --seed 5 --out " + d + "/eval_" + t);
  }
  int differing = 0, compared = 0;
  for (const char* f : {"actor.bin", "critic.bin", "actor_target.bin", "critic_target.bin", "rewards.csv"}) {
    ++compared;
    if (!same_bytes(dir / ("train_a/" + std::string(f)), dir / ("train_b/" + std::string(f)))) ++differing;
  }
  for (const char* f : {"trace_ddpg.csv", "trace_idm.csv", "ttc_summary.csv"}) {
    ++compared;
    if (!same_bytes(dir / ("eval_a/" + std::string(f)), dir / ("eval_b/" + std::string(f)))) ++differing;
  }
  return {differing == 0, fmt("%d of %d output files differ between repeated runs", differing, compared)};
}

// ---------------------------------------------------------------- 12
Outcome data_pipeline() {
  testing::TempDir dir("pipeline");
  const SimConfig sim;
  const RewardConfig rcfg;
  const IdmParams idm;
  // simulator episode under a noisy IDM, logged as a recording
  FollowEnv env(sim, rcfg);
  env.reset_to(gen_leader_profile(12, 100, sim), 30, 0);
  FollowingEpisode ep;
  ep.id = "simulated";
  std::vector<double> rewards;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0, 0.7);
  auto log_row = [&] {
    ep.records.push_back({static_cast<double>(env.step_index()) * sim.dt, env.leader().speed, env.follower().speed,
                          env.gap()});
  };
  log_row();
  while (!env.done()) {
    const double a = idm_accel(env.follower().speed, env.leader().speed, env.gap(), idm, sim.a_min, sim.a_max);
    rewards.push_back(env.step(a + noise(rng)).reward);
    log_row();
  }
  write_trajectory_csv(dir / "simulated.csv", ep);
  const auto relabeled = build_transitions(parse_trajectory_csv(dir / "simulated.csv"), sim, rcfg);
  double worst = 0;
  for (std::size_t i = 0; i < relabeled.size(); ++i) {
    worst = std::max(worst, std::abs(relabeled.transitions[i].reward - rewards[i + 1]));
  }
  const bool rewards_ok = relabeled.size() == rewards.size() - 1 && worst <= 1e-9;

  // 40 episodes of 52 rows -> 50 transitions each; 5% of 2000 is exactly 2 episodes
  RelabeledDataset many;
  for (int i = 0; i < 40; ++i) {
    FollowingEpisode e;
    e.id = fmt("e%02d", i);
    for (int k = 0; k < 52; ++k) e.records.push_back({0.1 * k, 10.0, 10.0 + 0.01 * (k % 3), 20.0 + 0.1 * i});
    many.append(build_transitions(e, sim, rcfg));
  }
  const auto [train, eval] = split_train_eval(many, 0.95, 3);
  std::set<std::string> train_ids, eval_ids;
  for (auto e : train.episode_of) train_ids.insert(train.episode_ids[e]);
  for (auto e : eval.episode_of) eval_ids.insert(eval.episode_ids[e]);
  bool disjoint = eval_ids.size() == 2 && train_ids.size() == 38;
  for (const auto& id : eval_ids) disjoint = disjoint && !train_ids.count(id);
  const bool split_ok = train.size() == 1900 && eval.size() == 100 && disjoint;

  std::size_t mass = 0;
  const auto hist = reward_histogram(many);
  mass = hist.underflow + hist.overflow;
  for (auto c : hist.counts) mass += c;
  const auto hist2 = reward_histogram(relabeled);
  std::size_t mass2 = hist2.underflow + hist2.overflow;
  for (auto c : hist2.counts) mass2 += c;
  const bool hist_ok = mass == many.size() && mass2 == relabeled.size();

  return {rewards_ok && split_ok && hist_ok,
          fmt("reward err %.1e over %zu transitions; split %zu/%zu; histogram mass %zu/%zu", worst, relabeled.size(),
              train.size(), eval.size(), mass + mass2, many.size() + relabeled.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"reward supremum", reward_supremum},
      {"soft-update law", soft_update_law},
      {"stage-1 learning", stage1_learning},
      {"extrapolation-error failure", extrapolation_failure},
      {"two-stage directional gains", two_stage_gains},
      {"batch-mix exactness", batch_mix},
      {"idm equilibrium", idm_equilibrium},
      {"ttc oracle equality", ttc_oracle},
      {"control-net inversion", control_inversion},
      {"determinism", determinism},
      {"data pipeline", data_pipeline},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
