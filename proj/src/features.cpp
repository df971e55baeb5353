#include "pms/features.hpp"

#include <stdexcept>

namespace pms {

int FeatureMap::dimension() const {
  if (kind == FeatureKind::TabularOneHot) return n_states * n_actions;
  int n_tiles = (n_states + tile_size - 1) / tile_size;
  return n_tiles * n_actions;
}

int FeatureMap::active_index(int state, int action) const {
  if (state < 0 || state >= n_states || action < 0 || action >= n_actions) {
    throw std::out_of_range("state/action outside the feature map's range");
  }
  if (kind == FeatureKind::TabularOneHot) return state * n_actions + action;
  return (state / tile_size) * n_actions + action;
}

Eigen::VectorXd FeatureMap::encode(int state, int action) const {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(dimension());
  phi(active_index(state, action)) = 1.0;
  return phi;
}

std::string FeatureMap::describe() const {
  if (kind == FeatureKind::TabularOneHot) return "tabular";
  return "coarse" + std::to_string(tile_size);
}

FeatureMap make_tabular_features(int n_states, int n_actions) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("empty feature range");
  return {FeatureKind::TabularOneHot, n_states, n_actions, 1};
}

FeatureMap make_coarse_features(int n_states, int n_actions, int tile_size) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("empty feature range");
  if (tile_size < 1) throw std::invalid_argument("tile_size must be >= 1");
  return {FeatureKind::CoarseTiles, n_states, n_actions, tile_size};
}

}  // namespace pms
