#pragma once

#include "pms/env.hpp"
#include "pms/fqi.hpp"
#include "pms/metrics.hpp"
#include "pms/selection.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace pms {

/// Reference distribution nu: a point mass at the start cell, uniform over
/// non-terminal states, or the stationary state distribution of the behavior
/// chain. Stationary starts make the logged pairs time-homogeneous, which is
/// the regime the sequential confidence intervals are built for; they require
/// a single recurrent class (so no absorbing cells).
enum class NuMode { Start, Uniform, Stationary };

struct EnvConfig {
  std::string kind = "gridworld";  // "gridworld" | "chain"
  GridworldSpec grid;
  ChainSpec chain;
  double gamma = 0.95;
  NuMode init = NuMode::Start;

  std::string id() const;
};

TabularMdp build_env(const EnvConfig& config);

struct BehaviorConfig {
  std::string mode = "eps-optimal";  // "eps-optimal" | "uniform"
  double epsilon = 0.3;

  std::string describe() const;
};

/// eps-optimal mixes the exact optimal greedy policy of the simulator with
/// the uniform policy; this is the data-generating process, not an estimator.
Policy build_behavior(const TabularMdp& mdp, const BehaviorConfig& config);

/// build_env followed by the behavior construction; resolves a Stationary nu
/// against the induced behavior chain.
std::pair<TabularMdp, Policy> build_env_and_behavior(const EnvConfig& env,
                                                     const BehaviorConfig& behavior);

struct DataConfig {
  int n_episodes = 200;
  int horizon = 100;
  double reward_noise = 0.0;
};

struct SweepConfig {
  std::vector<int> n_episodes;
  std::vector<double> alphas;
  std::vector<int> chunk_counts;
};

struct ExperimentConfig {
  EnvConfig env;
  BehaviorConfig behavior;
  DataConfig data;
  GridSpec candidates;
  SelectionConfig selection;
  std::vector<std::string> selectors{"pms", "lepski", "combined", "naive", "is", "wis"};
  int replications = 100;
  int top_k = 0;  // 0 resolves to 10% of the grid, at least 1
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  SweepConfig sweep;
};

/// Everything measured in one replication. wall_clock_s is informational
/// only and excluded from serialization and equality so reports stay
/// byte-deterministic.
struct MetricsRecord {
  int replication = 0;
  std::uint64_t seed = 0;
  std::vector<double> true_values;  // exact value of each candidate's final policy
  std::map<std::string, int> chosen;
  std::map<std::string, double> regret;
  std::map<std::string, TopkMetrics> topk;             // ranked selectors only
  std::map<std::string, std::vector<int>> topk_chosen;  // the k indices behind topk
  std::vector<int> covered;                 // per-candidate CI coverage indicator
  int corollary1_event = 0;
  double wall_clock_s = 0.0;

  bool operator==(const MetricsRecord& other) const;
};

struct ReplicationError {
  int replication = 0;
  std::string message;
};

struct BenchmarkResult {
  std::vector<MetricsRecord> records;
  std::vector<ReplicationError> errors;
};

int resolved_top_k(const ExperimentConfig& config, int n_candidates);

/// One dataset -> selection -> metrics pass. All selectors read the same
/// dataset and the same candidate evaluations.
MetricsRecord run_replication(const ExperimentConfig& config, const TabularMdp& mdp,
                              const Policy& behavior,
                              const std::vector<CandidateConfig>& candidates, int replication);

/// Replications run concurrently on derived seeds; failures are recorded
/// per replication rather than aborting the run.
BenchmarkResult run_benchmark(const ExperimentConfig& config);

/// Empirical per-candidate rate of the CI covering the exact value.
std::vector<double> coverage_rates(const BenchmarkResult& result, int n_candidates);
double corollary1_frequency(const BenchmarkResult& result);

std::vector<double> coverage_experiment(const ExperimentConfig& config);
double corollary1_experiment(const ExperimentConfig& config);

struct SweepPoint {
  double axis_value = 0.0;
  std::map<std::string, double> mean_regret;
  std::map<std::string, double> se_regret;
};

std::vector<SweepPoint> sweep_data_size(const ExperimentConfig& config);
std::vector<SweepPoint> sweep_alpha(const ExperimentConfig& config);
std::vector<SweepPoint> sweep_chunks(const ExperimentConfig& config);

/// Index-parallel loop; worker count comes from PMS_THREADS (default: all
/// hardware threads). fn must not throw. Results must be written to
/// per-index slots so the outcome is independent of scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);
int configured_threads();

}  // namespace pms
