#include "pms/serialize.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pms {

namespace {

using nlohmann::json;

std::string feature_kind_name(FeatureKind kind) {
  return kind == FeatureKind::TabularOneHot ? "tabular" : "coarse";
}

FeatureKind feature_kind_parse(const std::string& name) {
  if (name == "tabular") return FeatureKind::TabularOneHot;
  if (name == "coarse") return FeatureKind::CoarseTiles;
  throw std::invalid_argument("unknown feature kind: " + name);
}

std::string init_mode_name(NuMode mode) {
  switch (mode) {
    case NuMode::Start: return "start";
    case NuMode::Uniform: return "uniform";
    case NuMode::Stationary: return "stationary";
  }
  throw std::logic_error("unreachable init mode");
}

NuMode init_mode_parse(const std::string& name) {
  if (name == "start") return NuMode::Start;
  if (name == "uniform") return NuMode::Uniform;
  if (name == "stationary") return NuMode::Stationary;
  throw std::invalid_argument("unknown init mode: " + name);
}

json policy_to_json(const Policy& pi) {
  json rows = json::array();
  for (int s = 0; s < pi.probs.rows(); ++s) {
    json row = json::array();
    for (int a = 0; a < pi.probs.cols(); ++a) row.push_back(pi.probs(s, a));
    rows.push_back(std::move(row));
  }
  return rows;
}

Policy policy_from_json(const json& j) {
  Policy pi;
  const auto rows = j.size();
  const auto cols = rows ? j.at(0).size() : 0;
  pi.probs = Matrix::Zero(static_cast<int>(rows), static_cast<int>(cols));
  for (std::size_t s = 0; s < rows; ++s) {
    for (std::size_t a = 0; a < cols; ++a) pi.probs(s, a) = j.at(s).at(a).get<double>();
  }
  return pi;
}

json qapprox_to_json(const QApprox& q) {
  json weights = json::array();
  for (int i = 0; i < q.weights.size(); ++i) weights.push_back(q.weights(i));
  return json{{"weights", std::move(weights)},
              {"features",
               {{"kind", feature_kind_name(q.features.kind)},
                {"n_states", q.features.n_states},
                {"n_actions", q.features.n_actions},
                {"tile_size", q.features.tile_size}}}};
}

QApprox qapprox_from_json(const json& j) {
  QApprox q;
  const json& f = j.at("features");
  q.features.kind = feature_kind_parse(f.at("kind").get<std::string>());
  q.features.n_states = f.at("n_states").get<int>();
  q.features.n_actions = f.at("n_actions").get<int>();
  q.features.tile_size = f.at("tile_size").get<int>();
  const json& w = j.at("weights");
  q.weights = Vector::Zero(static_cast<int>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) q.weights(static_cast<int>(i)) = w.at(i).get<double>();
  return q;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

// Shortest round-trip formatting, same as the JSON emitter uses.
std::string fmt(double x) { return json(x).dump(); }

double percentile(std::vector<double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  double pos = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

void write_dataset(const Dataset& data, std::ostream& out) {
  json header{{"type", "header"},       {"schema", 1},
              {"n_episodes", data.n_episodes}, {"horizon", data.horizon},
              {"env", data.env_id},     {"behavior", data.behavior_meta},
              {"seed", data.seed}};
  out << header.dump() << '\n';
  for (const Transition& tr : data.transitions) {
    json line{{"episode", tr.episode}, {"t", tr.time},
              {"state", tr.state},     {"action", tr.action},
              {"reward", tr.reward},   {"next_state", tr.next_state}};
    out << line.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset stream is empty");
  json header = json::parse(line);
  if (header.value("type", "") != "header") {
    throw std::runtime_error("dataset must start with a header record");
  }
  Dataset data;
  data.n_episodes = header.at("n_episodes").get<int>();
  data.horizon = header.at("horizon").get<int>();
  data.env_id = header.value("env", "");
  data.behavior_meta = header.value("behavior", "");
  data.seed = header.value("seed", std::uint64_t{0});
  data.transitions.reserve(static_cast<std::size_t>(data.n_episodes) * data.horizon);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Transition tr;
    tr.episode = j.at("episode").get<int>();
    tr.time = j.at("t").get<int>();
    tr.state = j.at("state").get<int>();
    tr.action = j.at("action").get<int>();
    tr.reward = j.at("reward").get<double>();
    tr.next_state = j.at("next_state").get<int>();
    data.transitions.push_back(tr);
  }
  data.validate();
  return data;
}

void write_dataset_file(const Dataset& data, const std::string& path) {
  auto out = open_for_write(path);
  write_dataset(data, out);
  if (!out) throw std::runtime_error("failed while writing " + path);
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return read_dataset(in);
}

std::string dataset_to_string(const Dataset& data) {
  std::ostringstream out;
  write_dataset(data, out);
  return out.str();
}

json selection_report_to_json(const SelectionReport& report) {
  json candidates = json::array();
  for (std::size_t l = 0; l < report.candidates.size(); ++l) {
    const CandidateSummary& row = report.candidates[l];
    json chunk_evals = json::array();
    for (const ChunkEvaluation& e : report.evaluations[l].chunk_evals) {
      chunk_evals.push_back(
          {{"chunk", e.chunk}, {"value", e.value}, {"sigma", e.sigma}, {"clamped", e.clamped}});
    }
    json cand{{"id", row.id},
              {"value", row.value},
              {"sigma", row.sigma},
              {"se", row.se},
              {"lower_bound", row.lower_bound},
              {"interval", {row.interval_lo, row.interval_hi}},
              {"chunk_evals", std::move(chunk_evals)}};
    if (l < report.final_policies.size()) cand["policy"] = policy_to_json(report.final_policies[l]);
    if (l < report.final_q.size()) cand["q"] = qapprox_to_json(report.final_q[l]);
    candidates.push_back(std::move(cand));
  }
  return json{{"schema", 1},
              {"alpha", report.alpha},
              {"chunks", report.n_chunks},
              {"retained_transitions", report.retained_transitions},
              {"z_half_alpha", report.z_half_alpha},
              {"z_lepski", report.z_lepski},
              {"se_scale", report.se_scale},
              {"candidates", std::move(candidates)},
              {"sigma_order", report.sigma_order},
              {"lepski_prefix", report.lepski_prefix},
              {"chosen",
               {{"pms", report.chosen.pms},
                {"lepski", report.chosen.lepski},
                {"combined", report.chosen.combined}}}};
}

SelectionReport selection_report_from_json(const json& j) {
  SelectionReport report;
  report.alpha = j.at("alpha").get<double>();
  report.n_chunks = j.at("chunks").get<int>();
  report.retained_transitions = j.at("retained_transitions").get<std::size_t>();
  report.z_half_alpha = j.at("z_half_alpha").get<double>();
  report.z_lepski = j.at("z_lepski").get<double>();
  report.se_scale = j.at("se_scale").get<double>();
  report.lepski_prefix = j.at("lepski_prefix").get<int>();
  report.sigma_order = j.at("sigma_order").get<std::vector<int>>();
  report.chosen.pms = j.at("chosen").at("pms").get<int>();
  report.chosen.lepski = j.at("chosen").at("lepski").get<int>();
  report.chosen.combined = j.at("chosen").at("combined").get<int>();
  for (const json& cand : j.at("candidates")) {
    CandidateSummary row;
    row.id = cand.at("id").get<std::string>();
    row.value = cand.at("value").get<double>();
    row.sigma = cand.at("sigma").get<double>();
    row.se = cand.at("se").get<double>();
    row.lower_bound = cand.at("lower_bound").get<double>();
    row.interval_lo = cand.at("interval").at(0).get<double>();
    row.interval_hi = cand.at("interval").at(1).get<double>();
    report.candidates.push_back(row);

    CandidateEvaluation eval;
    eval.candidate_id = row.id;
    for (const json& e : cand.at("chunk_evals")) {
      eval.chunk_evals.push_back({e.at("chunk").get<int>(), e.at("value").get<double>(),
                                  e.at("sigma").get<double>(), e.at("clamped").get<bool>()});
    }
    eval.value_agg = row.value;
    eval.sigma_agg = row.sigma;
    report.evaluations.push_back(std::move(eval));

    if (cand.contains("policy")) report.final_policies.push_back(policy_from_json(cand["policy"]));
    if (cand.contains("q")) report.final_q.push_back(qapprox_from_json(cand["q"]));
  }
  return report;
}

json models_to_json(const std::vector<CandidateConfig>& candidates,
                    const std::vector<QApprox>& fits) {
  json models = json::array();
  for (std::size_t l = 0; l < candidates.size(); ++l) {
    json m = qapprox_to_json(fits[l]);
    m["id"] = candidates[l].id;
    m["iterations"] = candidates[l].iterations;
    m["ridge"] = candidates[l].ridge;
    m["gamma"] = candidates[l].gamma;
    models.push_back(std::move(m));
  }
  return json{{"schema", 1}, {"models", std::move(models)}};
}

json config_to_json(const ExperimentConfig& config) {
  json env;
  env["kind"] = config.env.kind;
  env["gamma"] = config.env.gamma;
  env["init"] = init_mode_name(config.env.init);
  if (config.env.kind == "gridworld") {
    env["width"] = config.env.grid.width;
    env["height"] = config.env.grid.height;
    env["holes"] = config.env.grid.hole_cells;
    env["goal"] = config.env.grid.goal_cell;
    env["start"] = config.env.grid.start_cell;
    env["slip_prob"] = config.env.grid.slip_prob;
    env["step_reward"] = config.env.grid.step_reward;
    env["goal_reward"] = config.env.grid.goal_reward;
    env["hole_reward"] = config.env.grid.hole_reward;
    env["absorbing"] = config.env.grid.absorbing;
  } else {
    env["n_states"] = config.env.chain.n_states;
    env["forward_prob"] = config.env.chain.forward_prob;
    env["reward_at_end"] = config.env.chain.reward_at_end;
  }

  json features = json::array();
  for (const auto& [kind, tile] : config.candidates.features) {
    json f{{"kind", feature_kind_name(kind)}};
    if (kind == FeatureKind::CoarseTiles) f["tile_size"] = tile;
    features.push_back(std::move(f));
  }

  return json{
      {"schema", 1},
      {"seed", config.seed},
      {"env", std::move(env)},
      {"behavior", {{"mode", config.behavior.mode}, {"epsilon", config.behavior.epsilon}}},
      {"data",
       {{"n_episodes", config.data.n_episodes},
        {"horizon", config.data.horizon},
        {"reward_noise", config.data.reward_noise}}},
      {"candidates",
       {{"gamma", config.candidates.gamma},
        {"iterations", config.candidates.iterations},
        {"ridge", config.candidates.ridges},
        {"features", std::move(features)}}},
      {"selection",
       {{"chunks", config.selection.n_chunks},
        {"alpha", config.selection.alpha},
        {"refit_full", config.selection.refit_full},
        {"ratio_lambda", config.selection.ratio.lambda},
        {"ratio_clip", {config.selection.ratio.clip_min, config.selection.ratio.clip_max}},
        {"ratio_features",
         {{"kind", feature_kind_name(config.selection.ratio.feature_kind)},
          {"tile_size", config.selection.ratio.tile_size}}},
        {"sigma_floor", config.selection.sigma_floor}}},
      {"selectors", config.selectors},
      {"replications", config.replications},
      {"top_k", config.top_k},
      {"output", {{"dir", config.output_dir}}},
      {"sweep",
       {{"n_episodes", config.sweep.n_episodes},
        {"alpha", config.sweep.alphas},
        {"chunks", config.sweep.chunk_counts}}}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig config;
  config.seed = j.value("seed", std::uint64_t{1});

  if (j.contains("env")) {
    const json& env = j.at("env");
    config.env.kind = env.value("kind", "gridworld");
    config.env.gamma = env.value("gamma", 0.95);
    config.env.init = init_mode_parse(env.value("init", "start"));
    if (config.env.kind == "gridworld") {
      GridworldSpec& g = config.env.grid;
      g.width = env.value("width", 4);
      g.height = env.value("height", 4);
      g.hole_cells = env.value("holes", std::vector<int>{5, 7, 11, 12});
      g.goal_cell = env.value("goal", g.width * g.height - 1);
      g.start_cell = env.value("start", 0);
      g.slip_prob = env.value("slip_prob", 0.2);
      g.step_reward = env.value("step_reward", 0.0);
      g.goal_reward = env.value("goal_reward", 1.0);
      g.hole_reward = env.value("hole_reward", 0.0);
      g.absorbing = env.value("absorbing", true);
    } else if (config.env.kind == "chain") {
      ChainSpec& c = config.env.chain;
      c.n_states = env.value("n_states", 5);
      c.forward_prob = env.value("forward_prob", 0.8);
      c.reward_at_end = env.value("reward_at_end", 1.0);
    } else {
      throw std::invalid_argument("unknown env kind: " + config.env.kind);
    }
  }

  if (j.contains("behavior")) {
    config.behavior.mode = j.at("behavior").value("mode", "eps-optimal");
    config.behavior.epsilon = j.at("behavior").value("epsilon", 0.3);
  }
  if (j.contains("data")) {
    config.data.n_episodes = j.at("data").value("n_episodes", 200);
    config.data.horizon = j.at("data").value("horizon", 100);
    config.data.reward_noise = j.at("data").value("reward_noise", 0.0);
  }

  const json cand = j.value("candidates", json::object());
  config.candidates.gamma = cand.value("gamma", config.env.gamma);
  config.candidates.iterations = cand.value("iterations", std::vector<int>{1, 5, 20, 100});
  config.candidates.ridges = cand.value("ridge", std::vector<double>{1e-4, 1e-1});
  config.candidates.features.clear();
  if (cand.contains("features")) {
    for (const json& f : cand.at("features")) {
      FeatureKind kind = feature_kind_parse(f.at("kind").get<std::string>());
      config.candidates.features.emplace_back(kind, f.value("tile_size", 4));
    }
  } else {
    config.candidates.features = {{FeatureKind::TabularOneHot, 1}, {FeatureKind::CoarseTiles, 4}};
  }

  if (j.contains("selection")) {
    const json& sel = j.at("selection");
    config.selection.n_chunks = sel.value("chunks", 20);
    config.selection.alpha = sel.value("alpha", 0.01);
    config.selection.refit_full = sel.value("refit_full", true);
    config.selection.ratio.lambda = sel.value("ratio_lambda", 1e-6);
    if (sel.contains("ratio_clip")) {
      config.selection.ratio.clip_min = sel.at("ratio_clip").at(0).get<double>();
      config.selection.ratio.clip_max = sel.at("ratio_clip").at(1).get<double>();
    }
    if (sel.contains("ratio_features")) {
      config.selection.ratio.feature_kind =
          feature_kind_parse(sel.at("ratio_features").value("kind", "tabular"));
      config.selection.ratio.tile_size = sel.at("ratio_features").value("tile_size", 1);
    }
    config.selection.sigma_floor = sel.value("sigma_floor", kDefaultSigmaFloor);
  }

  config.selectors = j.value(
      "selectors", std::vector<std::string>{"pms", "lepski", "combined", "naive", "is", "wis"});
  config.replications = j.value("replications", 100);
  config.top_k = j.value("top_k", 0);
  if (j.contains("output")) config.output_dir = j.at("output").value("dir", "out");
  if (j.contains("sweep")) {
    const json& sweep = j.at("sweep");
    config.sweep.n_episodes = sweep.value("n_episodes", std::vector<int>{});
    config.sweep.alphas = sweep.value("alpha", std::vector<double>{});
    config.sweep.chunk_counts = sweep.value("chunks", std::vector<int>{});
  }
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j = json::parse(in);
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string dump = config_to_json(config).dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << hash;
  return out.str();
}

json metrics_record_to_json(const MetricsRecord& rec) {
  json topk = json::object();
  for (const auto& [sel, m] : rec.topk) {
    topk[sel] = {{"regret", m.regret}, {"precision", m.precision}};
  }
  return json{{"replication", rec.replication},
              {"seed", rec.seed},
              {"true_values", rec.true_values},
              {"chosen", rec.chosen},
              {"regret", rec.regret},
              {"topk", std::move(topk)},
              {"topk_chosen", rec.topk_chosen},
              {"covered", rec.covered},
              {"corollary1_event", rec.corollary1_event}};
}

MetricsRecord metrics_record_from_json(const json& j) {
  MetricsRecord rec;
  rec.replication = j.at("replication").get<int>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.true_values = j.at("true_values").get<std::vector<double>>();
  rec.chosen = j.at("chosen").get<std::map<std::string, int>>();
  rec.regret = j.at("regret").get<std::map<std::string, double>>();
  for (const auto& [sel, m] : j.at("topk").items()) {
    rec.topk[sel] = {m.at("regret").get<double>(), m.at("precision").get<double>()};
  }
  rec.topk_chosen = j.at("topk_chosen").get<std::map<std::string, std::vector<int>>>();
  rec.covered = j.at("covered").get<std::vector<int>>();
  rec.corollary1_event = j.at("corollary1_event").get<int>();
  return rec;
}

namespace {

json summary_json(const BenchmarkResult& result, const ExperimentConfig& config) {
  json regret_summary = json::object();
  for (const std::string& sel : config.selectors) {
    std::vector<double> values;
    values.reserve(result.records.size());
    for (const MetricsRecord& rec : result.records) {
      auto it = rec.regret.find(sel);
      if (it != rec.regret.end()) values.push_back(it->second);
    }
    std::sort(values.begin(), values.end());
    double mean = 0.0;
    for (double v : values) mean += v;
    if (!values.empty()) mean /= static_cast<double>(values.size());
    regret_summary[sel] = {{"count", values.size()},
                           {"mean", mean},
                           {"median", percentile(values, 0.5)},
                           {"q25", percentile(values, 0.25)},
                           {"q75", percentile(values, 0.75)},
                           {"min", values.empty() ? 0.0 : values.front()},
                           {"max", values.empty() ? 0.0 : values.back()}};
  }
  int n_candidates = result.records.empty() ? 0 : static_cast<int>(result.records[0].covered.size());
  return json{{"regret", std::move(regret_summary)},
              {"coverage", coverage_rates(result, n_candidates)},
              {"corollary1_frequency", corollary1_frequency(result)}};
}

}  // namespace

json benchmark_report_json(const BenchmarkResult& result, const ExperimentConfig& config) {
  json records = json::array();
  for (const MetricsRecord& rec : result.records) records.push_back(metrics_record_to_json(rec));
  json errors = json::array();
  for (const ReplicationError& err : result.errors) {
    errors.push_back({{"replication", err.replication}, {"message", err.message}});
  }
  return json{{"schema", 1},
              {"config", config_to_json(config)},
              {"config_hash", config_hash(config)},
              {"seed", config.seed},
              {"records", std::move(records)},
              {"errors", std::move(errors)},
              {"summary", summary_json(result, config)}};
}

BenchmarkResult benchmark_report_parse(const json& j) {
  BenchmarkResult result;
  for (const json& rec : j.at("records")) result.records.push_back(metrics_record_from_json(rec));
  for (const json& err : j.at("errors")) {
    result.errors.push_back({err.at("replication").get<int>(), err.at("message").get<std::string>()});
  }
  return result;
}

std::vector<std::string> emit_report(const BenchmarkResult& result,
                                     const ExperimentConfig& config,
                                     const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> paths;

  const std::string report_path = out_dir + "/report.json";
  {
    auto out = open_for_write(report_path);
    out << benchmark_report_json(result, config).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed while writing " + report_path);
  }
  paths.push_back(report_path);

  const std::string metrics_path = out_dir + "/metrics.csv";
  {
    auto out = open_for_write(metrics_path);
    out << "replication,seed";
    for (const std::string& sel : config.selectors) out << ",chosen_" << sel << ",regret_" << sel;
    out << ",corollary1_event\n";
    for (const MetricsRecord& rec : result.records) {
      out << rec.replication << ',' << rec.seed;
      for (const std::string& sel : config.selectors) {
        out << ',' << rec.chosen.at(sel) << ',' << fmt(rec.regret.at(sel));
      }
      out << ',' << rec.corollary1_event << '\n';
    }
    if (!out) throw std::runtime_error("failed while writing " + metrics_path);
  }
  paths.push_back(metrics_path);

  const std::string box_path = out_dir + "/boxplot.csv";
  {
    auto out = open_for_write(box_path);
    out << "selector,replication,regret\n";
    for (const std::string& sel : config.selectors) {
      for (const MetricsRecord& rec : result.records) {
        out << sel << ',' << rec.replication << ',' << fmt(rec.regret.at(sel)) << '\n';
      }
    }
    if (!out) throw std::runtime_error("failed while writing " + box_path);
  }
  paths.push_back(box_path);
  return paths;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& axis_name,
                     const std::vector<std::string>& selectors, const std::string& path) {
  auto out = open_for_write(path);
  out << axis_name << ",selector,mean_regret,se_regret\n";
  for (const SweepPoint& point : points) {
    for (const std::string& sel : selectors) {
      out << fmt(point.axis_value) << ',' << sel << ',' << fmt(point.mean_regret.at(sel)) << ','
          << fmt(point.se_regret.at(sel)) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed while writing " + path);
}

}  // namespace pms
