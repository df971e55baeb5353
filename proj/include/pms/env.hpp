#pragma once

#include "pms/mdp.hpp"

#include <cstdint>
#include <vector>

namespace pms {

/// FrozenLake-style grid. Cells are row-major ids; rewards attach to the
/// cell a transition lands in (goal_reward / hole_reward / step_reward).
struct GridworldSpec {
  int width = 4;
  int height = 4;
  std::vector<int> hole_cells;
  int goal_cell = 15;
  int start_cell = 0;
  double slip_prob = 0.0;  // probability of moving perpendicular to the intent
  double step_reward = 0.0;
  double goal_reward = 1.0;
  double hole_reward = 0.0;
  bool absorbing = true;  // holes/goal become zero-reward self-loops
};

enum class InitDistMode { Start, UniformNonTerminal };

/// Small ergodic chain for fast tests: action 0 steps forward with
/// forward_prob (else stays), action 1 steps back; reward_at_end is paid on
/// entering the last state.
struct ChainSpec {
  int n_states = 5;
  double forward_prob = 0.8;
  double reward_at_end = 1.0;
};

// Gridworld actions, in this order.
enum GridAction { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };

TabularMdp build_gridworld(const GridworldSpec& spec, double gamma, InitDistMode init_mode);

TabularMdp build_chain(const ChainSpec& spec, double gamma,
                       InitDistMode init_mode = InitDistMode::Start);

/// Epsilon-soft mixture b(a|s) = (1 - eps) base(a|s) + eps / |A|.
Policy make_behavior_policy(const Policy& base, double epsilon);

/// Roll out n_episodes of length horizon under `behavior`. Episodes are
/// seeded independently from (seed, episode index), so collection order
/// never changes the result. reward_noise > 0 adds N(0, noise^2) to each
/// observed reward; the default observes the expected reward exactly.
Dataset collect_trajectories(const TabularMdp& mdp, const Policy& behavior, int n_episodes,
                             int horizon, std::uint64_t seed, double reward_noise = 0.0);

}  // namespace pms
