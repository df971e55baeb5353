#pragma once

#include <Eigen/Dense>

#include <string>

namespace pms {

enum class FeatureKind { TabularOneHot, CoarseTiles };

/// One-hot feature map over state-action pairs. TabularOneHot indexes each
/// (s, a) pair separately; CoarseTiles groups tile_size consecutive state
/// ids, deliberately aliasing states to give weaker function classes.
struct FeatureMap {
  FeatureKind kind = FeatureKind::TabularOneHot;
  int n_states = 0;
  int n_actions = 0;
  int tile_size = 1;

  int dimension() const;
  int active_index(int state, int action) const;  // index of the single 1 entry
  Eigen::VectorXd encode(int state, int action) const;
  std::string describe() const;
};

FeatureMap make_tabular_features(int n_states, int n_actions);
FeatureMap make_coarse_features(int n_states, int n_actions, int tile_size);

}  // namespace pms
