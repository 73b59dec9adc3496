#include "followrl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

namespace followrl {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

using FieldRef = std::variant<double*, int*, std::int64_t*, bool*>;

struct Field {
  std::string section;
  std::string key;
  FieldRef ref;
};

std::vector<Field> bind_fields(Config& c) {
  return {
      {"sim", "dt", &c.sim.dt},
      {"sim", "v_des", &c.sim.v_des},
      {"sim", "a_min", &c.sim.a_min},
      {"sim", "a_max", &c.sim.a_max},
      {"sim", "g_max", &c.sim.g_max},
      {"sim", "init_gap_low", &c.sim.init_gap_low},
      {"sim", "init_gap_high", &c.sim.init_gap_high},
      {"sim", "max_steps", &c.sim.max_steps},
      {"sim", "vehicle_length", &c.sim.vehicle_length},
      {"sim", "leader_mean", &c.sim.leader_mean},
      {"sim", "leader_theta", &c.sim.leader_theta},
      {"sim", "leader_sigma", &c.sim.leader_sigma},
      {"reward", "w_safe", &c.reward.w_safe},
      {"reward", "w_gap", &c.reward.w_gap},
      {"reward", "w_jerk", &c.reward.w_jerk},
      {"reward", "b_comf", &c.reward.b_comf},
      {"reward", "time_gap", &c.reward.time_gap},
      {"reward", "g_min", &c.reward.g_min},
      {"reward", "time_gap_limit", &c.reward.time_gap_limit},
      {"reward", "j_comf", &c.reward.j_comf},
      {"reward", "a_min", &c.reward.a_min},
      {"ddpg", "gamma", &c.ddpg.gamma},
      {"ddpg", "tau", &c.ddpg.tau},
      {"ddpg", "batch_size", &c.ddpg.batch_size},
      {"ddpg", "buffer_capacity", &c.ddpg.buffer_capacity},
      {"ddpg", "hidden", &c.ddpg.hidden},
      {"ddpg", "learning_rate", &c.ddpg.adam.learning_rate},
      {"ddpg", "adam_beta1", &c.ddpg.adam.beta1},
      {"ddpg", "adam_beta2", &c.ddpg.adam.beta2},
      {"ddpg", "adam_epsilon", &c.ddpg.adam.epsilon},
      {"ddpg", "noise_theta", &c.ddpg.noise_theta},
      {"ddpg", "noise_sigma", &c.ddpg.noise_sigma},
      {"ddpg", "actor_preact_penalty", &c.ddpg.actor_preact_penalty},
      {"ddpg", "stage1_budget", &c.ddpg.stage1_budget},
      {"ddpg", "stage2_budget", &c.ddpg.stage2_budget},
      {"ddpg", "ratio", &c.ddpg.ratio},
      {"ddpg", "stage2_explore", &c.ddpg.stage2_explore},
      {"ddpg", "offpolicy_eval_interval", &c.ddpg.offpolicy_eval_interval},
      {"ddpg", "checkpoint_interval", &c.ddpg.checkpoint_interval},
      {"ddpg", "checkpoint_episodes", &c.ddpg.checkpoint_episodes},
      {"idm", "v_des", &c.idm.v_des},
      {"idm", "time_gap", &c.idm.time_gap},
      {"idm", "accel", &c.idm.accel},
      {"idm", "b_comf", &c.idm.b_comf},
      {"idm", "g_min", &c.idm.g_min},
      {"idm", "delta", &c.idm.delta},
      {"bc", "epochs", &c.bc.epochs},
      {"powertrain", "c_throttle", &c.powertrain.c_throttle},
      {"powertrain", "c_brake", &c.powertrain.c_brake},
      {"powertrain", "c_drag", &c.powertrain.c_drag},
      {"powertrain", "c_roll", &c.powertrain.c_roll},
      {"powertrain", "v_max", &c.powertrain.v_max},
      {"control", "collect_duration", &c.control.collect_duration},
      {"control", "epochs", &c.control.epochs},
      {"control", "learning_rate", &c.control.learning_rate},
      {"control", "stanley_gain", &c.control.stanley_gain},
      {"eval", "ttc_threshold", &c.eval.ttc_threshold},
      {"eval", "ttc_critical", &c.eval.ttc_critical},
      {"eval", "sample_std", &c.eval.sample_std},
      {"eval", "cruise_speed", &c.eval.cruise_speed},
      {"eval", "suite_size", &c.eval.suite_size},
      {"eval", "suite_duration", &c.eval.suite_duration},
  };
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw ValidationError("config: cannot parse '" + text + "' for " + where);
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError("config: cannot parse '" + text + "' as bool for " + where);
}

}  // namespace

void SimConfig::validate() const {
  require(std::isfinite(dt) && dt > 0, "sim.dt must be > 0");
  require(a_min < 0 && a_max > 0, "sim: need a_min < 0 < a_max");
  require(v_des > 0, "sim.v_des must be > 0");
  require(g_max > 0, "sim.g_max must be > 0");
  require(init_gap_low >= 0 && init_gap_low <= init_gap_high && init_gap_high <= g_max,
          "sim: need 0 <= init_gap_low <= init_gap_high <= g_max");
  require(max_steps > 0, "sim.max_steps must be > 0");
  require(vehicle_length >= 0, "sim.vehicle_length must be >= 0");
  require(leader_theta >= 0 && leader_sigma >= 0, "sim: leader OU theta, sigma must be >= 0");
}

void RewardConfig::validate() const {
  require(w_safe >= 0 && w_gap >= 0 && w_jerk >= 0, "reward weights must be >= 0");
  require(b_comf > 0, "reward.b_comf must be > 0");
  require(time_gap >= 0 && g_min > 0, "reward: need time_gap >= 0, g_min > 0");
  require(time_gap_limit > time_gap, "reward: need time_gap_limit > time_gap");
  require(j_comf > 0, "reward.j_comf must be > 0");
  require(a_min < 0, "reward.a_min must be < 0");
}

void DdpgConfig::validate() const {
  require(gamma >= 0 && gamma <= 1, "ddpg.gamma must be in [0, 1]");
  require(tau >= 0 && tau <= 1, "ddpg.tau must be in [0, 1]");
  require(batch_size > 0, "ddpg.batch_size must be > 0");
  require(buffer_capacity > 0, "ddpg.buffer_capacity must be > 0");
  require(hidden > 0, "ddpg.hidden must be > 0");
  require(adam.learning_rate > 0, "ddpg.learning_rate must be > 0");
  require(actor_preact_penalty >= 0, "ddpg.actor_preact_penalty must be >= 0");
  require(noise_theta >= 0 && noise_sigma >= 0, "ddpg noise parameters must be >= 0");
  require(ratio >= 0 && ratio <= 1, "ddpg.ratio must be in [0, 1]");
  require(stage1_budget >= 0 && stage2_budget >= 0, "ddpg budgets must be >= 0");
  require(offpolicy_eval_interval > 0, "ddpg.offpolicy_eval_interval must be > 0");
  require(checkpoint_interval >= 0, "ddpg.checkpoint_interval must be >= 0");
  require(checkpoint_episodes > 0, "ddpg.checkpoint_episodes must be > 0");
}

void IdmParams::validate() const {
  require(v_des > 0 && time_gap > 0 && accel > 0 && b_comf > 0 && g_min > 0 && delta > 0,
          "idm parameters must all be positive");
}

void PowertrainModel::validate() const {
  require(c_throttle >= 0 && c_brake >= 0 && c_drag >= 0 && c_roll >= 0 && v_max > 0,
          "powertrain coefficients must be non-negative");
}

void Config::validate() const {
  sim.validate();
  reward.validate();
  ddpg.validate();
  idm.validate();
  powertrain.validate();
  require(bc.epochs > 0, "bc.epochs must be > 0");
  require(control.epochs > 0 && control.learning_rate > 0, "control training settings must be > 0");
  require(eval.ttc_threshold > 0 && eval.suite_size > 0 && eval.suite_duration > 0,
          "eval settings must be > 0");
}

Config parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }

  Config cfg;
  auto fields = bind_fields(cfg);
  std::map<std::string, const Field*> index;
  for (const auto& f : fields) index[f.section + "." + f.key] = &f;

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ValidationError("config: key '" + section + "' outside of any section");
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      auto it = index.find(name);
      if (it == index.end()) throw ValidationError("config: unknown key " + name);
      const std::string value = node.data();
      std::visit(
          [&](auto* ptr) {
            using T = std::remove_pointer_t<decltype(ptr)>;
            if constexpr (std::is_same_v<T, bool>) {
              *ptr = parse_bool(value, name);
            } else {
              *ptr = parse_number<T>(value, name);
            }
          },
          it->second->ref);
    }
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const Config& cfg) {
  Config copy = cfg;
  std::ostringstream out;
  out << std::setprecision(17);
  std::string section;
  for (const auto& f : bind_fields(copy)) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = ";
    std::visit(
        [&](auto* ptr) {
          using T = std::remove_pointer_t<decltype(ptr)>;
          if constexpr (std::is_same_v<T, bool>) {
            out << (*ptr ? "true" : "false");
          } else {
            out << *ptr;
          }
        },
        f.ref);
    out << '\n';
  }
  return out.str();
}

void save_config(const std::filesystem::path& path, const Config& cfg) {
  std::ofstream out(path);
  if (!out) throw ValidationError("config: cannot write " + path.string());
  out << format_config(cfg);
}

}  // namespace followrl
