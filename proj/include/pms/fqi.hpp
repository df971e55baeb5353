#pragma once

#include "pms/features.hpp"
#include "pms/mdp.hpp"

#include <string>
#include <vector>

namespace pms {

/// One point of the hyperparameter grid: a feature class, an iteration
/// budget and a ridge penalty.
struct CandidateConfig {
  std::string id;
  FeatureKind feature_kind = FeatureKind::TabularOneHot;
  int tile_size = 1;
  int iterations = 100;  // K
  double ridge = 1e-6;
  double gamma = 0.95;

  FeatureMap features(int n_states, int n_actions) const;
};

/// Linear-in-features Q estimate.
struct QApprox {
  Vector weights;
  FeatureMap features;

  double evaluate(int state, int action) const { return weights(features.active_index(state, action)); }
};

/// Fitted Q-iteration over a one-hot feature class. Starts from Q == 0 and
/// runs up to config.iterations ridge regressions of R + gamma max_a' Q(S', a')
/// onto the features of (S, A); stops early once the weight update is below
/// machine-level tolerance. Deterministic.
QApprox fqi_fit(const std::vector<Transition>& data, const CandidateConfig& config,
                int n_states, int n_actions);

/// Deterministic argmax policy; ties go to the lowest action index.
Policy greedy_policy(const QApprox& q, int n_states, int n_actions);

struct GridSpec {
  std::vector<int> iterations;
  std::vector<double> ridges;
  // Feature axis: (kind, tile_size) pairs.
  std::vector<std::pair<FeatureKind, int>> features;
  double gamma = 0.95;
};

/// Cartesian product of the grid axes in a stable order with unique ids.
std::vector<CandidateConfig> candidate_grid(const GridSpec& spec);

}  // namespace pms
