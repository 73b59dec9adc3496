#include "followrl/pipeline.hpp"

#include "followrl/baselines.hpp"
#include "followrl/csv.hpp"
#include "followrl/dataset.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace followrl {

namespace {

constexpr std::uint64_t kSplitStream = 30;
constexpr std::uint64_t kStageTwoStream = 31;
constexpr std::uint64_t kBcInitStream = 32;

struct PracticalData {
  RelabeledDataset train;
  RelabeledDataset eval;
};

PracticalData load_practical(const TrainRequest& req) {
  if (!req.dataset) throw ValidationError("train: this mode needs --dataset");
  const auto data = load_store(*req.dataset);
  auto [train, eval] = split_train_eval(data, req.train_fraction, derive_seed(req.seed, kSplitStream));
  if (train.empty()) throw ValidationError("train: training split is empty");
  return {std::move(train), std::move(eval)};
}

void write_run_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

TrainMode parse_train_mode(const std::string& name) {
  if (name == "pure") return TrainMode::Pure;
  if (name == "two-stage") return TrainMode::TwoStage;
  if (name == "off-policy") return TrainMode::OffPolicy;
  if (name == "bc") return TrainMode::Bc;
  throw ValidationError("unknown training mode '" + name + "' (pure|two-stage|off-policy|bc)");
}

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Pure:
      return "pure";
    case TrainMode::TwoStage:
      return "two-stage";
    case TrainMode::OffPolicy:
      return "off-policy";
    case TrainMode::Bc:
      return "bc";
  }
  return "pure";
}

TrainSummary run_training(const Config& cfg, const TrainRequest& req) {
  cfg.validate();
  if (req.out.empty()) throw ValidationError("train: output directory required");
  if (req.budget && *req.budget < 0) throw ValidationError("train: budget must be >= 0");
  std::filesystem::create_directories(req.out);
  save_config(req.out / "config.ini", cfg);
  const EnvSpec env{cfg.sim, cfg.reward};

  TrainSummary summary;
  summary.mode = req.mode;
  nlohmann::json run;
  run["mode"] = to_string(req.mode);
  run["seed"] = req.seed;
  if (req.dataset) run["dataset"] = req.dataset->string();

  auto finish_ddpg = [&](const DdpgAgent& agent, const TrainingResult& res) {
    agent.save(req.out);
    write_curve_csv(req.out / "rewards.csv", res.curve);
    summary.env_steps = res.env_steps;
    summary.gradient_steps = res.gradient_steps;
    summary.episodes = res.curve.size();
    summary.last50_reward = res.curve.empty() ? 0.0 : mean_of_last(res.curve, 50);
    if (res.env_steps > 0) {
      run["selected_step"] = res.selected_step;
      if (std::isfinite(res.selected_score)) run["selected_score"] = res.selected_score;
    }
  };

  switch (req.mode) {
    case TrainMode::Pure: {
      DdpgAgent agent(cfg.ddpg, cfg.sim, req.seed);
      ReplayBuffer buffer(static_cast<std::size_t>(cfg.ddpg.buffer_capacity));
      const auto budget = req.budget.value_or(cfg.ddpg.stage1_budget);
      run["budget"] = budget;
      finish_ddpg(agent, train_stage1(agent, buffer, env, budget, req.seed));
      break;
    }
    case TrainMode::TwoStage: {
      const auto practical_data = load_practical(req);
      const auto practical = to_replay_buffer(practical_data.train);
      summary.practical_size = practical.size();
      ReplayBuffer buffer(static_cast<std::size_t>(cfg.ddpg.buffer_capacity));
      std::optional<DdpgAgent> agent;
      if (req.init) {
        agent.emplace(DdpgAgent::load(*req.init, cfg.ddpg, cfg.sim));
        run["init"] = req.init->string();
      } else {
        agent.emplace(cfg.ddpg, cfg.sim, req.seed);
        const auto s1_budget = req.stage1_budget.value_or(cfg.ddpg.stage1_budget);
        const auto s1 = train_stage1(*agent, buffer, env, s1_budget, req.seed);
        write_curve_csv(req.out / "stage1_rewards.csv", s1.curve);
        run["stage1_budget"] = s1_budget;
      }
      StageTwoConfig s2;
      s2.ratio = req.ratio.value_or(cfg.ddpg.ratio);
      s2.steps = req.budget.value_or(cfg.ddpg.stage2_budget);
      s2.explore = cfg.ddpg.stage2_explore;
      run["ratio"] = s2.ratio;
      run["budget"] = s2.steps;
      finish_ddpg(*agent, train_stage2(*agent, buffer, practical, s2, env, derive_seed(req.seed, kStageTwoStream)));
      break;
    }
    case TrainMode::OffPolicy: {
      const auto practical_data = load_practical(req);
      const auto practical = to_replay_buffer(practical_data.train);
      summary.practical_size = practical.size();
      DdpgAgent agent(cfg.ddpg, cfg.sim, req.seed);
      const auto budget = req.budget.value_or(cfg.ddpg.stage1_budget);
      run["budget"] = budget;
      finish_ddpg(agent, train_fully_offpolicy(agent, practical, budget, env, req.seed));
      break;
    }
    case TrainMode::Bc: {
      const auto practical_data = load_practical(req);
      summary.practical_size = practical_data.train.size();
      BcPolicy policy(cfg.ddpg.hidden, cfg.sim, derive_seed(req.seed, kBcInitStream));
      const auto res = bc_train(policy, practical_data.train, cfg.bc, cfg.ddpg.batch_size, cfg.ddpg.adam, req.seed);
      policy.save(req.out / "bc.bin");
      std::ofstream loss(req.out / "bc_loss.csv");
      loss << "epoch,mse\n";
      for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) loss << e << ',' << csv::format(res.epoch_loss[e]) << '\n';
      run["epochs"] = cfg.bc.epochs;
      if (!practical_data.eval.empty()) run["eval_mse"] = bc_mse(policy, practical_data.eval);
      summary.gradient_steps = static_cast<std::int64_t>(
          cfg.bc.epochs * ((practical_data.train.size() + static_cast<std::size_t>(cfg.ddpg.batch_size) - 1) /
                           static_cast<std::size_t>(cfg.ddpg.batch_size)));
      break;
    }
  }
  run["env_steps"] = summary.env_steps;
  run["gradient_steps"] = summary.gradient_steps;
  run["episodes"] = summary.episodes;
  run["last50_reward"] = summary.last50_reward;
  run["practical_size"] = summary.practical_size;
  write_run_json(req.out / "run.json", run);
  return summary;
}

std::vector<AgentSpec> parse_agent_specs(const std::string& text) {
  std::vector<AgentSpec> out;
  std::set<std::string> labels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    AgentSpec spec;
    std::string body = item;
    if (const auto eq = item.find('='); eq != std::string::npos) {
      spec.label = item.substr(0, eq);
      body = item.substr(eq + 1);
    }
    const auto colon = body.find(':');
    spec.kind = body.substr(0, colon);
    if (colon != std::string::npos) spec.arg = body.substr(colon + 1);
    if (spec.label.empty()) spec.label = spec.kind;
    static const std::set<std::string> kinds = {"ddpg", "bc", "idm", "zero", "const", "human"};
    if (!kinds.count(spec.kind)) throw ValidationError("unknown agent kind '" + spec.kind + "' in '" + item + "'");
    if ((spec.kind == "ddpg" || spec.kind == "bc" || spec.kind == "const") && spec.arg.empty()) {
      throw ValidationError("agent '" + item + "' needs an argument");
    }
    if (!labels.insert(spec.label).second) throw ValidationError("duplicate agent label '" + spec.label + "'");
    out.push_back(spec);
  }
  if (out.empty()) throw ValidationError("no agents given");
  return out;
}

std::unique_ptr<Controller> make_controller(const AgentSpec& spec, const Config& cfg) {
  if (spec.kind == "ddpg") {
    return std::make_unique<PolicyNetController>(spec.label, MlpNet::load(std::filesystem::path(spec.arg) / "actor.bin"),
                                                 cfg.sim);
  }
  if (spec.kind == "bc") return std::make_unique<PolicyNetController>(spec.label, MlpNet::load(spec.arg), cfg.sim);
  if (spec.kind == "idm") {
    IdmParams p = cfg.idm;
    if (!spec.arg.empty()) p.time_gap = std::stod(spec.arg);
    return std::make_unique<IdmController>(spec.label, p, cfg.sim);
  }
  if (spec.kind == "zero") return std::make_unique<ConstantController>(spec.label, 0.0);
  if (spec.kind == "const") return std::make_unique<ConstantController>(spec.label, std::stod(spec.arg));
  return nullptr;
}

std::vector<Scenario> resolve_scenarios(const std::string& spec, const Config& cfg, std::uint64_t seed) {
  if (spec == "builtin:s53") return {self_defined_profile(cfg.sim.dt)};
  if (spec == "suite:synthetic") return synthetic_suite(seed, cfg.eval, cfg.sim);
  if (spec.rfind("replay:", 0) == 0) {
    const auto files = expand_glob(spec.substr(7));
    if (files.empty()) throw ValidationError("no trajectory files match " + spec.substr(7));
    std::vector<Scenario> out;
    for (const auto& f : files) out.push_back(replay_scenario(parse_trajectory_csv(f, cfg.sim.dt)));
    return out;
  }
  throw ValidationError("unknown scenario '" + spec + "' (builtin:s53|suite:synthetic|replay:FILE)");
}

std::vector<SummaryRow> run_evaluation(const Config& cfg, const std::vector<AgentSpec>& agents,
                                       const std::vector<Scenario>& scenarios, const std::filesystem::path& out) {
  if (scenarios.empty()) throw ValidationError("run_evaluation: no scenarios");
  std::vector<std::unique_ptr<Controller>> controllers;
  for (const auto& a : agents) controllers.push_back(make_controller(a, cfg));

  std::vector<SummaryRow> all;
  for (const auto& sc : scenarios) {
    std::vector<RunTrace> traces;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (controllers[i]) {
        traces.push_back(run_scenario(*controllers[i], sc, cfg.sim, cfg.reward));
      } else {
        auto tr = recorded_trace(sc, cfg.sim, cfg.reward);
        tr.agent = agents[i].label;
        traces.push_back(std::move(tr));
      }
    }
    const auto dir = scenarios.size() == 1 ? out : out / sc.name;
    auto rows = compare_report(traces, dir, cfg.eval);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  if (scenarios.size() > 1) {
    std::filesystem::create_directories(out);
    write_summary_csv(out / "ttc_summary.csv", all);
    write_suite_csv(out / "suite_summary.csv", aggregate_suite(all));
  }
  return all;
}

}  // namespace followrl
