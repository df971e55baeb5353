#include "pms/fqi.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pms {

FeatureMap CandidateConfig::features(int n_states, int n_actions) const {
  if (feature_kind == FeatureKind::TabularOneHot) return make_tabular_features(n_states, n_actions);
  return make_coarse_features(n_states, n_actions, tile_size);
}

QApprox fqi_fit(const std::vector<Transition>& data, const CandidateConfig& config,
                int n_states, int n_actions) {
  if (data.empty()) throw std::invalid_argument("fqi_fit needs a nonempty transition set");
  if (config.iterations < 0) throw std::invalid_argument("iteration count must be >= 0");
  if (config.ridge < 0.0) throw std::invalid_argument("ridge penalty must be >= 0");

  FeatureMap features = config.features(n_states, n_actions);
  const int dim = features.dimension();

  // One-hot features make the Gram matrix diagonal, so the regression
  // reduces to per-feature averages. Aggregate sufficient statistics once
  // and iterate on them instead of on raw samples.
  Vector counts = Vector::Zero(dim);
  Vector reward_sums = Vector::Zero(dim);
  Matrix next_counts = Matrix::Zero(dim, n_states);
  for (const Transition& tr : data) {
    int f = features.active_index(tr.state, tr.action);
    counts(f) += 1.0;
    reward_sums(f) += tr.reward;
    next_counts(f, tr.next_state) += 1.0;
  }
  if (config.ridge == 0.0 && (counts.array() == 0.0).any()) {
    throw std::invalid_argument(
        "normal equations are singular: some features receive no data; set ridge lambda > 0");
  }

  QApprox q{Vector::Zero(dim), features};
  Vector max_next(n_states);
  for (int k = 0; k < config.iterations; ++k) {
    for (int s = 0; s < n_states; ++s) {
      double best = q.evaluate(s, 0);
      for (int a = 1; a < n_actions; ++a) best = std::max(best, q.evaluate(s, a));
      max_next(s) = best;
    }
    Vector target_sums = reward_sums + config.gamma * (next_counts * max_next);
    Vector next_weights(dim);
    for (int f = 0; f < dim; ++f) {
      next_weights(f) = counts(f) > 0.0 || config.ridge > 0.0
                            ? target_sums(f) / (counts(f) + config.ridge)
                            : 0.0;
    }
    double delta = (next_weights - q.weights).cwiseAbs().maxCoeff();
    q.weights = next_weights;
    if (delta <= 1e-13) break;  // fixed point reached; further sweeps are no-ops
  }
  return q;
}

Policy greedy_policy(const QApprox& q, int n_states, int n_actions) {
  Policy pi;
  pi.probs = Matrix::Zero(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    int best = 0;
    for (int a = 1; a < n_actions; ++a) {
      if (q.evaluate(s, a) > q.evaluate(s, best)) best = a;
    }
    pi.probs(s, best) = 1.0;
  }
  return pi;
}

namespace {

std::string feature_label(FeatureKind kind, int tile_size) {
  return kind == FeatureKind::TabularOneHot ? "tab" : "tile" + std::to_string(tile_size);
}

std::string ridge_label(double ridge) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", ridge);
  return buf;
}

}  // namespace

std::vector<CandidateConfig> candidate_grid(const GridSpec& spec) {
  if (spec.iterations.empty() || spec.ridges.empty() || spec.features.empty()) {
    throw std::invalid_argument("every grid axis needs at least one value");
  }
  std::vector<CandidateConfig> grid;
  grid.reserve(spec.features.size() * spec.iterations.size() * spec.ridges.size());
  for (const auto& [kind, tile] : spec.features) {
    for (int k : spec.iterations) {
      for (double ridge : spec.ridges) {
        CandidateConfig config;
        config.feature_kind = kind;
        config.tile_size = tile;
        config.iterations = k;
        config.ridge = ridge;
        config.gamma = spec.gamma;
        config.id = feature_label(kind, tile) + "-K" + std::to_string(k) + "-r" + ridge_label(ridge);
        grid.push_back(std::move(config));
      }
    }
  }
  return grid;
}

}  // namespace pms
