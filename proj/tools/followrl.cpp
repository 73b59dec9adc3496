#include "followrl/baselines.hpp"
#include "followrl/config.hpp"
#include "followrl/control.hpp"
#include "followrl/csv.hpp"
#include "followrl/dataset.hpp"
#include "followrl/eval.hpp"
#include "followrl/pipeline.hpp"
#include "followrl/reward.hpp"
#include "followrl/sim.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>

using namespace followrl;

namespace {

// display only; files keep full precision
std::string fmt(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void print_histogram(const RewardHistogram& h) {
  std::cout << "reward histogram (" << h.total << " transitions, bin width " << RewardHistogram::kWidth << ")\n";
  for (std::size_t b = 0; b < RewardHistogram::kBins; ++b) {
    const double lo = RewardHistogram::kLow + static_cast<double>(b) * RewardHistogram::kWidth;
    std::printf("  [%6.2f, %6.2f) %zu\n", lo, lo + RewardHistogram::kWidth, h.counts[b]);
  }
  std::printf("  underflow %zu  overflow %zu\n", h.underflow, h.overflow);
  std::printf("  fraction r >= 0.4: %.4f  fraction r == 0: %.4f\n", h.fraction_good, h.fraction_zero);
}

void print_rows(const std::vector<SummaryRow>& rows) {
  std::printf("%-14s %-14s %6s %9s %9s %9s %9s %6s %5s %10s\n", "agent", "scenario", "n", "min", "mean", "median",
              "std", "<2s", "coll", "cruise_gap");
  for (const auto& r : rows) {
    std::printf("%-14s %-14s %6zu %9s %9s %9s %9s %6zu %5d %10s\n", r.agent.c_str(), r.scenario.c_str(),
                r.ttc.count, fmt(r.ttc.minimum).c_str(), fmt(r.ttc.mean).c_str(), fmt(r.ttc.median).c_str(),
                fmt(r.ttc.stddev).c_str(), r.ttc.count_critical, r.metrics.collided ? 1 : 0,
                fmt(r.metrics.cruise_gap).c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Car-following reinforcement learning toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Config file (key=value, one section per component)");

  auto load = [&] {
    Config cfg = config_path.empty() ? Config{} : load_config(config_path);
    cfg.validate();
    return cfg;
  };

  // gen-leader
  auto* gen = app.add_subcommand("gen-leader", "Generate an OU leader speed profile");
  std::uint64_t gen_seed = 0;
  double gen_duration = 100;
  std::string gen_out;
  gen->add_option("--seed", gen_seed)->required();
  gen->add_option("--duration-s", gen_duration)->required();
  gen->add_option("--out", gen_out)->required();
  gen->callback([&] {
    const auto cfg = load();
    write_profile_csv(gen_out, gen_leader_profile(gen_seed, gen_duration, cfg.sim));
  });

  // reward-probe
  auto* probe = app.add_subcommand("reward-probe", "Print the reward terms for one state");
  double p_v = 0, p_vl = 0, p_gap = 1, p_jerk = 0;
  probe->add_option("--v", p_v)->required();
  probe->add_option("--vl,--v-leader", p_vl)->required();
  probe->add_option("--g,--gap", p_gap)->required();
  probe->add_option("--jerk", p_jerk);
  probe->callback([&] {
    const auto cfg = load();
    const auto r = reward_total(p_v, p_vl, p_gap, p_jerk, cfg.reward);
    std::cout << "r_safe " << csv::format(r.r_safe) << "\nr_gap " << csv::format(r.r_gap) << "\nr_jerk "
              << csv::format(r.r_jerk) << "\ntotal " << csv::format(r.total) << "\nb_kin " << csv::format(r.b_kin)
              << "\ng_opt " << csv::format(r.g_opt) << "\ng_lim " << csv::format(r.g_lim) << '\n';
  });

  // train
  auto* train = app.add_subcommand("train", "Train an agent");
  std::string t_mode = "pure";
  TrainRequest req;
  std::int64_t t_budget = -1, t_stage1 = -1;
  double t_ratio = -1;
  std::string t_dataset, t_init, t_out;
  train->add_option("--mode", t_mode, "pure | two-stage | off-policy | bc")->check(CLI::IsMember({"pure", "two-stage", "off-policy", "bc"}));
  train->add_option("--ratio", t_ratio, "Practical share of each minibatch in stage 2");
  train->add_option("--budget", t_budget, "Steps for the main stage");
  train->add_option("--stage1-budget", t_stage1, "Stage-1 steps when two-stage starts from scratch");
  train->add_option("--seed", req.seed);
  train->add_option("--dataset", t_dataset, "Transition store from `ingest`");
  train->add_option("--init", t_init, "Stage-1 agent directory to continue from");
  train->add_option("--train-fraction", req.train_fraction);
  train->add_option("--out", t_out)->required();
  train->callback([&] {
    const auto cfg = load();
    req.mode = parse_train_mode(t_mode);
    if (t_budget >= 0) req.budget = t_budget;
    if (t_stage1 >= 0) req.stage1_budget = t_stage1;
    if (t_ratio >= 0) req.ratio = t_ratio;
    if (!t_dataset.empty()) req.dataset = t_dataset;
    if (!t_init.empty()) req.init = t_init;
    req.out = t_out;
    const auto s = run_training(cfg, req);
    std::cout << "mode " << to_string(s.mode) << "  env steps " << s.env_steps << "  gradient steps "
              << s.gradient_steps << "  episodes " << s.episodes << "  last-50 reward " << fmt(s.last50_reward)
              << '\n';
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Relabel trajectory CSVs into a transition store");
  std::string i_in, i_out, i_source = "synthetic";
  double i_dt = 0.1;
  ingest->add_option("--in", i_in, "Glob of trajectory CSV files")->required();
  ingest->add_option("--out", i_out)->required();
  ingest->add_option("--dt", i_dt);
  ingest->add_option("--source", i_source)->check(CLI::IsMember({"napoli", "ngsim", "synthetic"}));
  ingest->callback([&] {
    auto cfg = load();
    cfg.sim.dt = i_dt;
    const auto files = expand_glob(i_in);
    if (files.empty()) throw ValidationError("no files match " + i_in);
    RelabeledDataset all;
    for (const auto& f : files) {
      all.append(build_transitions(parse_trajectory_csv(f, i_dt, parse_source(i_source)), cfg.sim, cfg.reward));
    }
    save_store(i_out, all);
    std::cout << files.size() << " episodes, " << all.size() << " transitions, " << all.clipped_actions
              << " clipped actions\n";
    print_histogram(all.histogram);
  });

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "Write IDM follower recordings as trajectory CSVs");
  std::string s_out;
  int s_episodes = 20;
  double s_duration = 100, s_time_gap = -1;
  std::uint64_t s_seed = 0;
  synth->add_option("--out", s_out, "Output directory")->required();
  synth->add_option("--episodes", s_episodes);
  synth->add_option("--duration-s", s_duration);
  synth->add_option("--seed", s_seed);
  synth->add_option("--time-gap", s_time_gap, "IDM time gap override");
  synth->callback([&] {
    const auto cfg = load();
    IdmParams p = cfg.idm;
    if (s_time_gap > 0) p.time_gap = s_time_gap;
    std::filesystem::create_directories(s_out);
    for (const auto& ep : idm_demonstrations(p, s_episodes, s_duration, s_seed, cfg.sim)) {
      write_trajectory_csv(std::filesystem::path(s_out) / (ep.id + ".csv"), ep);
    }
  });

  // calibrate-idm
  auto* calib = app.add_subcommand("calibrate-idm", "Grid-search IDM parameters against recordings");
  std::string c_dataset;
  calib->add_option("--dataset", c_dataset, "Glob of trajectory CSV files")->required();
  calib->callback([&] {
    const auto cfg = load();
    std::vector<FollowingEpisode> eps;
    for (const auto& f : expand_glob(c_dataset)) eps.push_back(parse_trajectory_csv(f, cfg.sim.dt));
    if (eps.empty()) throw ValidationError("no files match " + c_dataset);
    const auto r = calibrate_idm(eps, cfg.idm, cfg.sim);
    std::cout << "[idm]\nv_des = " << csv::format(r.params.v_des) << "\ntime_gap = " << csv::format(r.params.time_gap)
              << "\naccel = " << csv::format(r.params.accel) << "\nb_comf = " << csv::format(r.params.b_comf)
              << "\ng_min = " << csv::format(r.params.g_min) << "\ndelta = " << csv::format(r.params.delta)
              << "\n# gap rmse " << csv::format(r.gap_rmse) << " m over " << r.evaluated << " candidates\n";
  });

  // control
  auto* control = app.add_subcommand("control", "Inverse powertrain network");
  control->require_subcommand(1);
  auto* c_collect = control->add_subcommand("collect", "Drive the surrogate plant with random pedals");
  std::string cc_out;
  std::uint64_t cc_seed = 0;
  double cc_duration = -1, cc_scale = 1.0;
  c_collect->add_option("--out", cc_out)->required();
  c_collect->add_option("--seed", cc_seed);
  c_collect->add_option("--duration-s", cc_duration);
  c_collect->add_option("--throttle-scale", cc_scale, "Multiply the plant's throttle gain");
  c_collect->callback([&] {
    auto cfg = load();
    cfg.powertrain.c_throttle *= cc_scale;
    const double d = cc_duration > 0 ? cc_duration : cfg.control.collect_duration;
    write_control_csv(cc_out, collect_reverse_data(cfg.powertrain, d, cfg.sim.dt, cc_seed));
  });
  auto* c_train = control->add_subcommand("train", "Fit the inverse network");
  std::string ct_data, ct_out;
  std::uint64_t ct_seed = 0;
  c_train->add_option("--data", ct_data)->required();
  c_train->add_option("--out", ct_out)->required();
  c_train->add_option("--seed", ct_seed);
  c_train->callback([&] {
    const auto cfg = load();
    ControlNet cn(ct_seed);
    const auto samples = read_control_csv(ct_data);
    const auto res = train_control_net(cn, samples, cfg.control);
    cn.save(ct_out);
    std::cout << "final mse " << fmt(res.loss.empty() ? 0.0 : res.loss.back()) << '\n';
  });
  auto* c_probe = control->add_subcommand("probe", "Closed-loop square-wave tracking");
  std::string cp_net;
  double cp_scale = 1.0, cp_amp = 2.0, cp_period = 4.0, cp_duration = 40.0, cp_v0 = 5.0;
  c_probe->add_option("--net", cp_net)->required();
  c_probe->add_option("--throttle-scale", cp_scale);
  c_probe->add_option("--amplitude", cp_amp);
  c_probe->add_option("--period-s", cp_period);
  c_probe->add_option("--duration-s", cp_duration);
  c_probe->add_option("--v0", cp_v0);
  c_probe->callback([&] {
    auto cfg = load();
    cfg.powertrain.c_throttle *= cp_scale;
    const auto r = track_square_wave(ControlNet::load(cp_net), cfg.powertrain, cp_v0, cp_amp, cp_period, cp_duration,
                                     cfg.sim.dt);
    std::cout << "rmse " << csv::format(r.rmse) << " m/s^2  saturations " << r.saturations << '\n';
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Run agents on scenarios and write reports");
  std::string e_agents, e_scenario, e_out;
  std::uint64_t e_seed = 0;
  eval->add_option("--agents", e_agents, "e.g. pure=ddpg:runs/a,idm,human")->required();
  eval->add_option("--scenario", e_scenario, "builtin:s53 | suite:synthetic | replay:FILE")->required();
  eval->add_option("--out", e_out)->required();
  eval->add_option("--seed", e_seed, "Suite seed");
  eval->callback([&] {
    const auto cfg = load();
    const auto rows = run_evaluation(cfg, parse_agent_specs(e_agents), resolve_scenarios(e_scenario, cfg, e_seed), e_out);
    print_rows(rows);
  });

  // report
  auto* report = app.add_subcommand("report", "Print and re-check a report directory");
  std::string r_in;
  report->add_option("--in", r_in)->required();
  report->callback([&] {
    const auto cfg = load();
    const std::filesystem::path dir(r_in);
    const auto rows = read_summary_csv(dir / "ttc_summary.csv");
    print_rows(rows);
    std::size_t checked = 0;
    for (const auto& row : rows) {
      auto trace_dir = std::filesystem::exists(dir / row.scenario) ? dir / row.scenario : dir;
      const auto path = trace_dir / ("trace_" + row.agent + ".csv");
      if (!std::filesystem::exists(path)) continue;
      const auto s = ttc_summary(read_trace_csv(path), cfg.eval);
      const bool same = s.count == row.ttc.count && s.count_critical == row.ttc.count_critical &&
                        (!s.defined || (s.minimum == row.ttc.minimum && s.mean == row.ttc.mean &&
                                        s.median == row.ttc.median && s.stddev == row.ttc.stddev));
      if (!same) throw ValidationError("summary row for " + row.agent + " does not match " + path.string());
      ++checked;
    }
    std::cout << checked << " summary rows re-derived from traces\n";
    if (std::filesystem::exists(dir / "suite_summary.csv")) {
      std::cout << "\nsuite aggregate:\n";
      for (const auto& a : aggregate_suite(rows)) {
        std::printf("%-14s scenarios %zu collisions %zu min_ttc %s cruise_gap %s reward %s\n", a.agent.c_str(),
                    a.scenarios, a.collisions, a.min_ttc ? csv::format(*a.min_ttc).c_str() : "-",
                    fmt(a.mean_cruise_gap).c_str(), fmt(a.mean_reward).c_str());
      }
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
