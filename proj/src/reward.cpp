#include "followrl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace followrl {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw ValidationError(std::string("reward: non-finite ") + what);
}

double kinematic_deceleration(double v, double v_leader, double gap) {
  return v > v_leader ? (v - v_leader) / gap : 0.0;
}

}  // namespace

double reward_safe(double v, double v_leader, double gap, const RewardConfig& cfg) {
  require_finite(v, "speed");
  require_finite(v_leader, "leader speed");
  require_finite(gap, "gap");
  if (gap <= 0) throw ValidationError("reward_safe: gap must be > 0");
  const double b_kin = kinematic_deceleration(v, v_leader, gap);
  if (!(b_kin > cfg.b_comf)) return 0.0;
  return -std::tanh((b_kin - cfg.b_comf) / (-cfg.a_min));
}

double reward_gap(double v, double gap, const RewardConfig& cfg) {
  require_finite(v, "speed");
  require_finite(gap, "gap");
  if (v < 0 || gap < 0) throw ValidationError("reward_gap: need v >= 0 and gap >= 0");
  const double g_opt = v * cfg.time_gap + cfg.g_min;
  const double g_var = 0.5 * g_opt;
  const double g_lim = v * cfg.time_gap_limit + 2.0 * cfg.g_min;
  const double z = (gap - g_opt) / g_var;
  // phi(z) / phi(0)
  double value = std::exp(-0.5 * z * z);
  if (gap >= g_opt) value *= 1.0 - (gap - g_opt) / (g_lim - g_opt);
  return std::max(0.0, value);
}

double reward_jerk(double jerk, const RewardConfig& cfg) {
  require_finite(jerk, "jerk");
  const double x = jerk / cfg.j_comf;
  return -x * x;
}

RewardBreakdown reward_total(double v, double v_leader, double gap, double jerk,
                             const RewardConfig& cfg) {
  RewardBreakdown out;
  out.r_safe = reward_safe(v, v_leader, gap, cfg);
  out.r_gap = reward_gap(v, gap, cfg);
  out.r_jerk = reward_jerk(jerk, cfg);
  out.total = cfg.w_safe * out.r_safe + cfg.w_gap * out.r_gap + cfg.w_jerk * out.r_jerk;
  out.b_kin = kinematic_deceleration(v, v_leader, gap);
  out.g_opt = v * cfg.time_gap + cfg.g_min;
  out.g_lim = v * cfg.time_gap_limit + 2.0 * cfg.g_min;
  return out;
}

RewardBreakdown transition_reward(double v, double v_leader, double gap, double jerk,
                                  const RewardConfig& cfg) {
  require_finite(gap, "gap");
  if (gap > 0) return reward_total(v, v_leader, gap, jerk, cfg);
  RewardBreakdown out;
  out.r_safe = -1.0;
  out.r_gap = 0.0;
  out.r_jerk = reward_jerk(jerk, cfg);
  out.total = cfg.w_safe * out.r_safe + cfg.w_jerk * out.r_jerk;
  out.b_kin = std::numeric_limits<double>::infinity();
  out.g_opt = v * cfg.time_gap + cfg.g_min;
  out.g_lim = v * cfg.time_gap_limit + 2.0 * cfg.g_min;
  return out;
}

}  // namespace followrl
