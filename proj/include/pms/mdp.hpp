#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace pms {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Finite MDP with dense integer state/action ids.
///
/// transition[a](s, s') is the probability of landing in s' after taking
/// action a in state s; reward(s, a) is the expected immediate reward; and
/// init_dist is the reference distribution nu over states used for policy
/// values and discounted visitation.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Matrix> transition;  // one S x S row-stochastic matrix per action
  Matrix reward;                   // S x A
  double gamma = 0.0;              // in [0, 1)
  Vector init_dist;                // length S, sums to 1

  void validate() const;  // throws std::invalid_argument when malformed
};

/// Stationary Markovian policy; probs(s, a) = pi(a | s).
struct Policy {
  Matrix probs;

  void validate(int n_states, int n_actions) const;
};

Policy uniform_policy(int n_states, int n_actions);

/// One logged step of an episode.
struct Transition {
  int episode = 0;
  int time = 0;
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
};

/// N x T logged transitions in episode-major, time-ascending order.
struct Dataset {
  std::vector<Transition> transitions;
  int n_episodes = 0;
  int horizon = 0;
  std::string env_id;
  std::string behavior_meta;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ordered split of a dataset into equal-size chunks of contiguous time
/// blocks shared across episodes. Chunk o holds (i, t) for every episode i
/// and t in the o-th block of width floor(T / O); the trailing T mod O
/// steps of every episode are dropped and counted in `dropped`.
struct ChunkPartition {
  std::vector<std::vector<std::size_t>> chunks;  // indices into Dataset::transitions
  int block_width = 0;
  std::size_t dropped = 0;

  std::size_t retained() const;
};

/// Exact discounted visitation ratio table. defined(s, a) is false where the
/// time-averaged behavior occupancy in the denominator is zero; omega is not
/// meaningful there and callers must not read it.
struct RatioTable {
  Matrix omega;  // S x A
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
};

/// State values V^pi from the linear system V = r_pi + gamma * P_pi V.
Vector state_values_exact(const TabularMdp& mdp, const Policy& pi);

/// Scalar policy value (1 - gamma) * sum_s nu(s) V^pi(s).
double policy_value_exact(const TabularMdp& mdp, const Policy& pi);

/// Exact Q^pi, S x A.
Matrix q_value_exact(const TabularMdp& mdp, const Policy& pi);

/// Optimal Q* by value iteration run to sup-norm tolerance `tol`.
Matrix optimal_q_exact(const TabularMdp& mdp, double tol = 1e-13);

/// Greedy (deterministic) policy for a Q table; ties go to the lowest action.
Policy greedy_from_q_table(const Matrix& q);

/// Stationary distribution over (s, a) of the chain induced by pi.
/// Requires a single recurrent class; throws otherwise.
Matrix stationary_distribution(const TabularMdp& mdp, const Policy& pi);

/// Discounted visitation d^pi(s, a) = (1 - gamma) sum_t gamma^t p_t^pi(s, a),
/// started from init_dist. Computed by a direct linear solve.
Matrix discounted_visitation(const TabularMdp& mdp, const Policy& pi);

/// Time-averaged occupancy (1/T) sum_{t=0}^{T-1} p_t^b(s, a), started from
/// init_dist.
Matrix average_occupancy(const TabularMdp& mdp, const Policy& behavior, int horizon);

/// Ratio omega(s, a) = d^pi(s, a) / [(1/T) sum_t p_t^b(s, a)].
RatioTable visitation_ratio_exact(const TabularMdp& mdp, const Policy& pi,
                                  const Policy& behavior, int horizon);

ChunkPartition partition_dataset(const Dataset& data, int n_chunks);

}  // namespace pms
