#pragma once

#include "followrl/config.hpp"

namespace followrl {

/// Weighted car-following reward split into its three terms.
struct RewardBreakdown {
  double r_safe = 0;
  double r_gap = 0;
  double r_jerk = 0;
  double total = 0;

  double b_kin = 0;  // (v - v_l) / g when closing, else 0
  double g_opt = 0;
  double g_lim = 0;
};

/// Penalty when the kinematically needed deceleration exceeds the
/// comfortable one. In (-1, 0]. Requires g > 0.
double reward_safe(double v, double v_leader, double gap, const RewardConfig& cfg);

/// Gaussian peak at the optimal gap v*T + g_min, tapering linearly to zero
/// at the limit gap v*T_lim + 2*g_min and clamped at 0 beyond it.
double reward_gap(double v, double gap, const RewardConfig& cfg);

double reward_jerk(double jerk, const RewardConfig& cfg);

RewardBreakdown reward_total(double v, double v_leader, double gap, double jerk,
                             const RewardConfig& cfg);

/// Reward for a transition landing in (v, v_leader, gap) with the given
/// jerk. Identical to reward_total for gap > 0; a collision (gap <= 0)
/// scores the saturated safety penalty -1 with no gap term. The simulator
/// and dataset relabeling both call this.
RewardBreakdown transition_reward(double v, double v_leader, double gap, double jerk,
                                  const RewardConfig& cfg);

}  // namespace followrl
