#include "pms/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace pms {

double compute_regret(const std::vector<double>& true_values, int chosen) {
  if (true_values.empty()) throw std::invalid_argument("no candidate values");
  if (chosen < 0 || chosen >= static_cast<int>(true_values.size())) {
    throw std::out_of_range("chosen index outside the candidate set");
  }
  return *std::max_element(true_values.begin(), true_values.end()) - true_values[chosen];
}

std::vector<int> top_k_indices(const std::vector<double>& values, int k) {
  if (k < 1 || k > static_cast<int>(values.size())) {
    throw std::invalid_argument("k must lie in [1, L]");
  }
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return values[i] > values[j]; });
  order.resize(k);
  return order;
}

TopkMetrics topk_metrics(const std::vector<double>& true_values,
                         const std::vector<int>& selected, int k) {
  if (static_cast<int>(selected.size()) != k) {
    throw std::invalid_argument("selected set must hold exactly k indices");
  }
  TopkMetrics out;
  double best_selected = -std::numeric_limits<double>::infinity();
  for (int idx : selected) {
    if (idx < 0 || idx >= static_cast<int>(true_values.size())) {
      throw std::out_of_range("selected index outside the candidate set");
    }
    best_selected = std::max(best_selected, true_values[idx]);
  }
  out.regret = *std::max_element(true_values.begin(), true_values.end()) - best_selected;

  std::vector<int> truth = top_k_indices(true_values, k);
  std::unordered_set<int> truth_set(truth.begin(), truth.end());
  int hits = 0;
  for (int idx : selected) hits += truth_set.count(idx) ? 1 : 0;
  out.precision = static_cast<double>(hits) / k;
  return out;
}

}  // namespace pms
