#include "pms/env.hpp"

#include "pms/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace pms {

namespace {

struct Move {
  int dr, dc;
};

// Indexed by GridAction.
constexpr Move kMoves[4] = {{-1, 0}, {1, 0}, {0, 1}, {0, -1}};
// Perpendicular pair for each action: N/S slip to E/W, E/W slip to N/S.
constexpr int kPerp[4][2] = {{kEast, kWest}, {kEast, kWest}, {kNorth, kSouth}, {kNorth, kSouth}};

void check_grid_spec(const GridworldSpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw std::invalid_argument("grid must be non-empty");
  const int n = spec.width * spec.height;
  auto in_grid = [n](int cell) { return cell >= 0 && cell < n; };
  if (!in_grid(spec.goal_cell)) throw std::invalid_argument("goal cell outside grid");
  if (!in_grid(spec.start_cell)) throw std::invalid_argument("start cell outside grid");
  for (int h : spec.hole_cells) {
    if (!in_grid(h)) throw std::invalid_argument("hole cell outside grid");
  }
  if (spec.slip_prob < 0.0 || spec.slip_prob > 1.0) {
    throw std::invalid_argument("slip_prob must lie in [0, 1]");
  }
}

}  // namespace

TabularMdp build_gridworld(const GridworldSpec& spec, double gamma, InitDistMode init_mode) {
  check_grid_spec(spec);
  const int n = spec.width * spec.height;
  std::vector<bool> is_hole(n, false);
  for (int h : spec.hole_cells) is_hole[h] = true;
  auto terminal = [&](int cell) { return spec.absorbing && (cell == spec.goal_cell || is_hole[cell]); };
  auto cell_reward = [&](int cell) {
    if (cell == spec.goal_cell) return spec.goal_reward;
    if (is_hole[cell]) return spec.hole_reward;
    return spec.step_reward;
  };
  // Walls reflect: a blocked move keeps the agent in place.
  auto land = [&](int cell, int action) {
    int r = cell / spec.width + kMoves[action].dr;
    int c = cell % spec.width + kMoves[action].dc;
    if (r < 0 || r >= spec.height || c < 0 || c >= spec.width) return cell;
    return r * spec.width + c;
  };

  TabularMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = 4;
  mdp.gamma = gamma;
  mdp.transition.assign(4, Matrix::Zero(n, n));
  mdp.reward = Matrix::Zero(n, 4);

  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 4; ++a) {
      if (terminal(s)) {
        mdp.transition[a](s, s) = 1.0;
        continue;
      }
      mdp.transition[a](s, land(s, a)) += 1.0 - spec.slip_prob;
      mdp.transition[a](s, land(s, kPerp[a][0])) += spec.slip_prob / 2.0;
      mdp.transition[a](s, land(s, kPerp[a][1])) += spec.slip_prob / 2.0;
      for (int s2 = 0; s2 < n; ++s2) {
        if (mdp.transition[a](s, s2) > 0.0) {
          mdp.reward(s, a) += mdp.transition[a](s, s2) * cell_reward(s2);
        }
      }
    }
  }

  mdp.init_dist = Vector::Zero(n);
  if (init_mode == InitDistMode::Start) {
    mdp.init_dist(spec.start_cell) = 1.0;
  } else {
    int live = 0;
    for (int s = 0; s < n; ++s) {
      if (!terminal(s)) ++live;
    }
    for (int s = 0; s < n; ++s) {
      if (!terminal(s)) mdp.init_dist(s) = 1.0 / live;
    }
  }
  mdp.validate();
  return mdp;
}

TabularMdp build_chain(const ChainSpec& spec, double gamma, InitDistMode init_mode) {
  if (spec.n_states < 2) throw std::invalid_argument("chain needs at least 2 states");
  if (spec.forward_prob < 0.0 || spec.forward_prob > 1.0) {
    throw std::invalid_argument("forward_prob must lie in [0, 1]");
  }
  const int n = spec.n_states;
  const int last = n - 1;
  TabularMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.transition.assign(2, Matrix::Zero(n, n));
  mdp.reward = Matrix::Zero(n, 2);
  for (int s = 0; s < n; ++s) {
    int fwd = std::min(s + 1, last);
    int back = std::max(s - 1, 0);
    mdp.transition[0](s, fwd) += spec.forward_prob;
    mdp.transition[0](s, s) += 1.0 - spec.forward_prob;
    mdp.transition[1](s, back) = 1.0;
    if (s != last) {
      mdp.reward(s, 0) = mdp.transition[0](s, last) * spec.reward_at_end;
      mdp.reward(s, 1) = mdp.transition[1](s, last) * spec.reward_at_end;
    }
  }
  mdp.init_dist = Vector::Zero(n);
  if (init_mode == InitDistMode::Start) {
    mdp.init_dist(0) = 1.0;
  } else {
    mdp.init_dist.setConstant(1.0 / n);
  }
  mdp.validate();
  return mdp;
}

Policy make_behavior_policy(const Policy& base, double epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must lie in [0, 1]");
  Policy b;
  const auto n_actions = base.probs.cols();
  b.probs = (1.0 - epsilon) * base.probs +
            Matrix::Constant(base.probs.rows(), n_actions, epsilon / static_cast<double>(n_actions));
  return b;
}

Dataset collect_trajectories(const TabularMdp& mdp, const Policy& behavior, int n_episodes,
                             int horizon, std::uint64_t seed, double reward_noise) {
  mdp.validate();
  behavior.validate(mdp.n_states, mdp.n_actions);
  if (n_episodes < 1 || horizon < 1) {
    throw std::invalid_argument("need n_episodes >= 1 and horizon >= 1");
  }

  Dataset data;
  data.n_episodes = n_episodes;
  data.horizon = horizon;
  data.seed = seed;
  data.transitions.resize(static_cast<std::size_t>(n_episodes) * horizon);

  for (int i = 0; i < n_episodes; ++i) {
    std::mt19937_64 gen(rng::derive(seed, static_cast<std::uint64_t>(i)));
    int s = rng::sample_categorical(mdp.init_dist.data(), mdp.n_states, gen);
    for (int t = 0; t < horizon; ++t) {
      // Policy rows are row-major slices of a column-major matrix; copy out.
      Vector action_probs = behavior.probs.row(s).transpose();
      int a = rng::sample_categorical(action_probs.data(), mdp.n_actions, gen);
      double r = mdp.reward(s, a);
      if (reward_noise > 0.0) r += reward_noise * rng::gaussian(gen);
      Vector next_probs = mdp.transition[a].row(s).transpose();
      int s2 = rng::sample_categorical(next_probs.data(), mdp.n_states, gen);
      data.transitions[static_cast<std::size_t>(i) * horizon + t] = {i, t, s, a, r, s2};
      s = s2;
    }
  }
  return data;
}

}  // namespace pms
