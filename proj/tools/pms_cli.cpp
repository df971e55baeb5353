// Command-line harness: dataset generation, candidate training, pessimistic
// selection, exact evaluation, Monte Carlo benchmarks and sensitivity sweeps.

#include "pms/harness.hpp"
#include "pms/serialize.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;
using namespace pms;

std::string output_dir_for(const ExperimentConfig& config, const std::string& cli_override) {
  if (!cli_override.empty()) return cli_override;
  if (const char* env = std::getenv("PMS_OUTPUT_DIR")) return env;
  return config.output_dir;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

int cmd_gen_data(const ExperimentConfig& config, const std::string& out_path) {
  auto [mdp, behavior] = build_env_and_behavior(config.env, config.behavior);
  Dataset data = collect_trajectories(mdp, behavior, config.data.n_episodes, config.data.horizon,
                                      config.seed, config.data.reward_noise);
  data.env_id = config.env.id();
  data.behavior_meta = config.behavior.describe();
  write_dataset_file(data, out_path);
  std::cout << "wrote " << data.transitions.size() << " transitions to " << out_path << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& config, const std::string& data_path,
              const std::string& out_path) {
  TabularMdp mdp = build_env_and_behavior(config.env, config.behavior).first;
  Dataset data = read_dataset_file(data_path);
  std::vector<CandidateConfig> candidates = candidate_grid(config.candidates);
  std::vector<QApprox> fits(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t l) {
    fits[l] = fqi_fit(data.transitions, candidates[l], mdp.n_states, mdp.n_actions);
  });
  write_json_file(models_to_json(candidates, fits), out_path);
  std::cout << "trained " << candidates.size() << " candidates -> " << out_path << "\n";
  return 0;
}

int cmd_select(const ExperimentConfig& config, const std::string& data_path,
               const std::string& out_path) {
  TabularMdp mdp = build_env_and_behavior(config.env, config.behavior).first;
  Dataset data = read_dataset_file(data_path);
  std::vector<CandidateConfig> candidates = candidate_grid(config.candidates);
  SelectionReport report = pessimistic_select(data, mdp, candidates, config.selection);
  write_json_file(selection_report_to_json(report), out_path);

  const CandidateSummary& pick = report.candidates[report.chosen.pms];
  std::cout << "pms chose [" << report.chosen.pms << "] " << pick.id
            << "  value=" << pick.value << "  lcb=" << pick.lower_bound
            << "\nlepski chose [" << report.chosen.lepski << "] "
            << report.candidates[report.chosen.lepski].id << "\ncombined chose ["
            << report.chosen.combined << "] " << report.candidates[report.chosen.combined].id
            << "\nreport -> " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& config, const std::string& report_path,
                 const std::string& out_path) {
  TabularMdp mdp = build_env_and_behavior(config.env, config.behavior).first;
  std::ifstream in(report_path);
  if (!in) throw std::runtime_error("cannot open report: " + report_path);
  SelectionReport report = selection_report_from_json(json::parse(in));
  if (report.final_policies.empty()) {
    throw std::runtime_error("report carries no policies to evaluate");
  }

  std::vector<double> true_values;
  for (const Policy& pi : report.final_policies) {
    true_values.push_back(policy_value_exact(mdp, pi));
  }
  json per_candidate = json::array();
  for (std::size_t l = 0; l < true_values.size(); ++l) {
    per_candidate.push_back({{"id", report.candidates[l].id},
                             {"true_value", true_values[l]},
                             {"estimate", report.candidates[l].value},
                             {"regret", compute_regret(true_values, static_cast<int>(l))}});
  }
  json out{{"schema", 1},
           {"env", config.env.id()},
           {"candidates", std::move(per_candidate)},
           {"regret",
            {{"pms", compute_regret(true_values, report.chosen.pms)},
             {"lepski", compute_regret(true_values, report.chosen.lepski)},
             {"combined", compute_regret(true_values, report.chosen.combined)}}}};
  write_json_file(out, out_path);
  std::cout << "pms regret " << out["regret"]["pms"] << " -> " << out_path << "\n";
  return 0;
}

int cmd_bench(const ExperimentConfig& config, const std::string& out_dir) {
  BenchmarkResult result = run_benchmark(config);
  std::vector<std::string> paths = emit_report(result, config, out_dir);
  std::cout << result.records.size() << "/" << config.replications << " replications ok";
  if (!result.errors.empty()) std::cout << " (" << result.errors.size() << " failed)";
  std::cout << "\n";
  for (const std::string& p : paths) std::cout << "  " << p << "\n";
  double total = 0.0;
  for (const MetricsRecord& rec : result.records) total += rec.wall_clock_s;
  std::cout << "replication cpu time " << total << " s\n";
  return result.errors.empty() ? 0 : 2;
}

int cmd_sweep(const ExperimentConfig& config, const std::string& axis,
              const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  bool ran = false;
  if ((axis.empty() || axis == "n") && !config.sweep.n_episodes.empty()) {
    write_sweep_csv(sweep_data_size(config), "n_episodes", config.selectors,
                    out_dir + "/sweep_n.csv");
    std::cout << "  " << out_dir << "/sweep_n.csv\n";
    ran = true;
  }
  if ((axis.empty() || axis == "alpha") && !config.sweep.alphas.empty()) {
    write_sweep_csv(sweep_alpha(config), "alpha", config.selectors, out_dir + "/sweep_alpha.csv");
    std::cout << "  " << out_dir << "/sweep_alpha.csv\n";
    ran = true;
  }
  if ((axis.empty() || axis == "chunks") && !config.sweep.chunk_counts.empty()) {
    write_sweep_csv(sweep_chunks(config), "chunks", config.selectors,
                    out_dir + "/sweep_chunks.csv");
    std::cout << "  " << out_dir << "/sweep_chunks.csv\n";
    ran = true;
  }
  if (!ran) throw std::runtime_error("config declares no sweep axis" +
                                     (axis.empty() ? "" : " named '" + axis + "'"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pessimistic model selection for offline RL on tabular MDPs"};
  app.require_subcommand(1);

  std::string config_path, data_path, report_path, out_path, out_dir, axis;
  std::uint64_t seed_override = 0;
  bool has_seed = false;

  app.add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { has_seed = true; });

  CLI::App* gen = app.add_subcommand("gen-data", "collect a seeded offline dataset");
  gen->add_option("-o,--out", out_path, "dataset path (JSON lines)");

  CLI::App* train = app.add_subcommand("train", "fit the candidate grid on a dataset");
  train->add_option("-d,--data", data_path, "dataset path")->required();
  train->add_option("-o,--out", out_path, "models output path");

  CLI::App* select = app.add_subcommand("select", "run pessimistic selection on a dataset");
  select->add_option("-d,--data", data_path, "dataset path")->required();
  select->add_option("-o,--out", out_path, "selection report path");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a selection report exactly");
  evaluate->add_option("-r,--report", report_path, "selection report path")->required();
  evaluate->add_option("-o,--out", out_path, "evaluation output path");

  CLI::App* bench = app.add_subcommand("bench", "Monte Carlo replication benchmark");
  bench->add_option("--out-dir", out_dir, "report directory");

  CLI::App* sweep = app.add_subcommand("sweep", "sensitivity sweep (data size / alpha / chunks)");
  sweep->add_option("--axis", axis, "one of: n, alpha, chunks (default: all configured)");
  sweep->add_option("--out-dir", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config = pms::load_config_file(config_path);
    if (has_seed) config.seed = seed_override;

    if (gen->parsed()) {
      return cmd_gen_data(config, out_path.empty() ? "dataset.jsonl" : out_path);
    }
    if (train->parsed()) {
      return cmd_train(config, data_path, out_path.empty() ? "models.json" : out_path);
    }
    if (select->parsed()) {
      return cmd_select(config, data_path, out_path.empty() ? "selection.json" : out_path);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(config, report_path, out_path.empty() ? "evaluation.json" : out_path);
    }
    if (bench->parsed()) {
      return cmd_bench(config, output_dir_for(config, out_dir));
    }
    if (sweep->parsed()) {
      return cmd_sweep(config, axis, output_dir_for(config, out_dir));
    }
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
