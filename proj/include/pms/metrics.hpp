#pragma once

#include <vector>

namespace pms {

/// max_l true_values[l] - true_values[chosen]; always >= 0.
double compute_regret(const std::vector<double>& true_values, int chosen);

struct TopkMetrics {
  double regret = 0.0;     // best regret among the selected set
  double precision = 0.0;  // overlap with the true top-k, in [0, 1]
};

/// True top-k is taken by value with ties broken toward the lower index.
TopkMetrics topk_metrics(const std::vector<double>& true_values,
                         const std::vector<int>& selected, int k);

/// Indices of the k largest entries (ties toward the lower index).
std::vector<int> top_k_indices(const std::vector<double>& values, int k);

}  // namespace pms
