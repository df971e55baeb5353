#include "pms/harness.hpp"

#include "pms/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pms {

std::string EnvConfig::id() const {
  std::ostringstream out;
  if (kind == "gridworld") {
    out << "gridworld:" << grid.width << "x" << grid.height << ":slip" << grid.slip_prob;
  } else {
    out << "chain:" << chain.n_states << ":fwd" << chain.forward_prob;
  }
  return out.str();
}

TabularMdp build_env(const EnvConfig& config) {
  // A Stationary nu is resolved later against the behavior chain; the
  // builders see a start-state placeholder.
  InitDistMode mode = config.init == NuMode::Uniform ? InitDistMode::UniformNonTerminal
                                                     : InitDistMode::Start;
  if (config.kind == "gridworld") return build_gridworld(config.grid, config.gamma, mode);
  if (config.kind == "chain") return build_chain(config.chain, config.gamma, mode);
  throw std::invalid_argument("unknown env kind: " + config.kind);
}

std::string BehaviorConfig::describe() const {
  std::ostringstream out;
  out << mode << ":eps" << epsilon;
  return out.str();
}

Policy build_behavior(const TabularMdp& mdp, const BehaviorConfig& config) {
  if (config.mode == "uniform") return uniform_policy(mdp.n_states, mdp.n_actions);
  if (config.mode == "eps-optimal") {
    Policy base = greedy_from_q_table(optimal_q_exact(mdp));
    return make_behavior_policy(base, config.epsilon);
  }
  throw std::invalid_argument("unknown behavior mode: " + config.mode);
}

std::pair<TabularMdp, Policy> build_env_and_behavior(const EnvConfig& env,
                                                     const BehaviorConfig& behavior_config) {
  TabularMdp mdp = build_env(env);
  Policy behavior = build_behavior(mdp, behavior_config);
  if (env.init == NuMode::Stationary) {
    Vector states = stationary_distribution(mdp, behavior).rowwise().sum();
    mdp.init_dist = states / states.sum();
  }
  return {std::move(mdp), std::move(behavior)};
}

bool MetricsRecord::operator==(const MetricsRecord& other) const {
  return replication == other.replication && seed == other.seed &&
         true_values == other.true_values && chosen == other.chosen && regret == other.regret &&
         topk_chosen == other.topk_chosen && covered == other.covered &&
         corollary1_event == other.corollary1_event &&
         [&] {
           if (topk.size() != other.topk.size()) return false;
           for (const auto& [key, val] : topk) {
             auto it = other.topk.find(key);
             if (it == other.topk.end()) return false;
             if (val.regret != it->second.regret || val.precision != it->second.precision)
               return false;
           }
           return true;
         }();
}

int resolved_top_k(const ExperimentConfig& config, int n_candidates) {
  if (config.top_k > 0) return std::min(config.top_k, n_candidates);
  return std::max(1, static_cast<int>(std::llround(0.1 * n_candidates)));
}

namespace {

bool has_selector(const ExperimentConfig& config, const std::string& name) {
  return std::find(config.selectors.begin(), config.selectors.end(), name) !=
         config.selectors.end();
}

void check_selectors(const ExperimentConfig& config) {
  static const std::vector<std::string> known{"pms", "lepski", "combined", "naive", "is", "wis"};
  if (config.selectors.empty()) throw std::invalid_argument("selector set is empty");
  for (const auto& s : config.selectors) {
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw std::invalid_argument("unknown selector: " + s);
    }
  }
}

int argmax_score(const std::vector<double>& scores) {
  int best = 0;
  for (int l = 1; l < static_cast<int>(scores.size()); ++l) {
    if (scores[l] > scores[best]) best = l;
  }
  return best;
}

constexpr std::uint64_t kReplicationStream = 0x7265706cULL;  // distinct seed stream tag

}  // namespace

MetricsRecord run_replication(const ExperimentConfig& config, const TabularMdp& mdp,
                              const Policy& behavior,
                              const std::vector<CandidateConfig>& candidates, int replication) {
  auto started = std::chrono::steady_clock::now();

  MetricsRecord rec;
  rec.replication = replication;
  rec.seed = rng::derive(config.seed, kReplicationStream + static_cast<std::uint64_t>(replication));

  Dataset data = collect_trajectories(mdp, behavior, config.data.n_episodes, config.data.horizon,
                                      rec.seed, config.data.reward_noise);
  data.env_id = config.env.id();
  data.behavior_meta = config.behavior.describe();

  SelectionReport report = pessimistic_select(data, mdp, candidates, config.selection);
  const int n_candidates = static_cast<int>(candidates.size());

  rec.true_values.resize(n_candidates);
  for (int l = 0; l < n_candidates; ++l) {
    rec.true_values[l] = policy_value_exact(mdp, report.final_policies[l]);
  }

  // Ranking scores per selector; the chosen index is the score argmax except
  // for the two refinement rules, which come straight from the report.
  std::map<std::string, std::vector<double>> scores;
  if (has_selector(config, "pms")) {
    std::vector<double>& s = scores["pms"];
    for (const auto& cand : report.candidates) s.push_back(cand.lower_bound);
  }
  if (has_selector(config, "naive")) {
    std::vector<double>& s = scores["naive"];
    for (int l = 0; l < n_candidates; ++l) {
      s.push_back(naive_greedy_score(report.final_q[l], report.final_policies[l], mdp.init_dist));
    }
  }
  if (has_selector(config, "is") || has_selector(config, "wis")) {
    FeatureMap ratio_features =
        config.selection.ratio.feature_kind == FeatureKind::TabularOneHot
            ? make_tabular_features(mdp.n_states, mdp.n_actions)
            : make_coarse_features(mdp.n_states, mdp.n_actions, config.selection.ratio.tile_size);
    for (int l = 0; l < n_candidates; ++l) {
      RatioApprox omega = fit_ratio(data.transitions, report.final_policies[l], mdp,
                                    ratio_features, candidates[l].gamma,
                                    config.selection.ratio.lambda, config.selection.ratio.clip_min,
                                    config.selection.ratio.clip_max);
      if (has_selector(config, "is")) scores["is"].push_back(marginal_is_value(omega, data));
      if (has_selector(config, "wis")) scores["wis"].push_back(wis_value(omega, data));
    }
  }

  for (const std::string& sel : config.selectors) {
    int chosen;
    if (sel == "lepski") {
      chosen = report.chosen.lepski;
    } else if (sel == "combined") {
      chosen = report.chosen.combined;
    } else if (sel == "pms") {
      chosen = report.chosen.pms;
    } else {
      chosen = argmax_score(scores.at(sel));
    }
    rec.chosen[sel] = chosen;
    rec.regret[sel] = compute_regret(rec.true_values, chosen);
  }

  const int k = resolved_top_k(config, n_candidates);
  for (const auto& [sel, sel_scores] : scores) {
    std::vector<int> picks = top_k_indices(sel_scores, k);
    rec.topk[sel] = topk_metrics(rec.true_values, picks, k);
    rec.topk_chosen[sel] = std::move(picks);
  }

  rec.covered.resize(n_candidates);
  double worst_lcb = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < n_candidates; ++l) {
    const CandidateSummary& cand = report.candidates[l];
    double half = report.z_half_alpha * cand.se;
    rec.covered[l] = std::abs(rec.true_values[l] - cand.value) <= half ? 1 : 0;
    worst_lcb = std::max(worst_lcb, rec.true_values[l] - 2.0 * report.z_half_alpha * cand.se);
  }
  rec.corollary1_event = rec.true_values[report.chosen.pms] >= worst_lcb ? 1 : 0;

  rec.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

BenchmarkResult run_benchmark(const ExperimentConfig& config) {
  check_selectors(config);
  if (config.replications < 1) throw std::invalid_argument("need at least one replication");
  auto [mdp, behavior] = build_env_and_behavior(config.env, config.behavior);
  std::vector<CandidateConfig> candidates = candidate_grid(config.candidates);

  const std::size_t n_reps = static_cast<std::size_t>(config.replications);
  std::vector<std::optional<MetricsRecord>> slots(n_reps);
  std::vector<std::string> failures(n_reps);
  parallel_for(n_reps, [&](std::size_t r) {
    try {
      slots[r] = run_replication(config, mdp, behavior, candidates, static_cast<int>(r));
    } catch (const std::exception& e) {
      failures[r] = e.what();
    }
  });

  BenchmarkResult result;
  for (std::size_t r = 0; r < n_reps; ++r) {
    if (slots[r]) {
      result.records.push_back(std::move(*slots[r]));
    } else {
      result.errors.push_back({static_cast<int>(r), failures[r]});
    }
  }
  return result;
}

std::vector<double> coverage_rates(const BenchmarkResult& result, int n_candidates) {
  std::vector<double> rates(n_candidates, 0.0);
  if (result.records.empty()) return rates;
  for (const MetricsRecord& rec : result.records) {
    for (int l = 0; l < n_candidates; ++l) rates[l] += rec.covered[l];
  }
  for (double& r : rates) r /= static_cast<double>(result.records.size());
  return rates;
}

double corollary1_frequency(const BenchmarkResult& result) {
  if (result.records.empty()) return 0.0;
  double total = 0.0;
  for (const MetricsRecord& rec : result.records) total += rec.corollary1_event;
  return total / static_cast<double>(result.records.size());
}

std::vector<double> coverage_experiment(const ExperimentConfig& config) {
  BenchmarkResult result = run_benchmark(config);
  return coverage_rates(result, static_cast<int>(candidate_grid(config.candidates).size()));
}

double corollary1_experiment(const ExperimentConfig& config) {
  return corollary1_frequency(run_benchmark(config));
}

namespace {

SweepPoint summarize_point(const BenchmarkResult& result, const ExperimentConfig& config,
                           double axis_value) {
  SweepPoint point;
  point.axis_value = axis_value;
  for (const std::string& sel : config.selectors) {
    double mean = 0.0;
    for (const MetricsRecord& rec : result.records) mean += rec.regret.at(sel);
    const double n = static_cast<double>(result.records.size());
    mean /= n;
    double var = 0.0;
    for (const MetricsRecord& rec : result.records) {
      double d = rec.regret.at(sel) - mean;
      var += d * d;
    }
    var = n > 1 ? var / (n - 1) : 0.0;
    point.mean_regret[sel] = mean;
    point.se_regret[sel] = std::sqrt(var / n);
  }
  return point;
}

}  // namespace

std::vector<SweepPoint> sweep_data_size(const ExperimentConfig& config) {
  std::vector<SweepPoint> points;
  for (int n : config.sweep.n_episodes) {
    ExperimentConfig local = config;
    local.data.n_episodes = n;
    points.push_back(summarize_point(run_benchmark(local), local, static_cast<double>(n)));
  }
  return points;
}

std::vector<SweepPoint> sweep_alpha(const ExperimentConfig& config) {
  std::vector<SweepPoint> points;
  for (double alpha : config.sweep.alphas) {
    ExperimentConfig local = config;
    local.selection.alpha = alpha;
    points.push_back(summarize_point(run_benchmark(local), local, alpha));
  }
  return points;
}

std::vector<SweepPoint> sweep_chunks(const ExperimentConfig& config) {
  std::vector<SweepPoint> points;
  for (int chunks : config.sweep.chunk_counts) {
    ExperimentConfig local = config;
    local.selection.n_chunks = chunks;
    points.push_back(summarize_point(run_benchmark(local), local, static_cast<double>(chunks)));
  }
  return points;
}

int configured_threads() {
  if (const char* env = std::getenv("PMS_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  std::size_t n_threads = std::min<std::size_t>(configured_threads(), count);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace pms
