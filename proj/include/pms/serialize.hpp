#pragma once

#include "pms/harness.hpp"
#include "pms/selection.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace pms {

// --- Dataset: JSON lines, one transition per line after a header record ---

void write_dataset(const Dataset& data, std::ostream& out);
Dataset read_dataset(std::istream& in);
void write_dataset_file(const Dataset& data, const std::string& path);
Dataset read_dataset_file(const std::string& path);
std::string dataset_to_string(const Dataset& data);

// --- Selection reports ---

nlohmann::json selection_report_to_json(const SelectionReport& report);
SelectionReport selection_report_from_json(const nlohmann::json& j);

// --- Fitted models (weights + feature spec) ---

nlohmann::json models_to_json(const std::vector<CandidateConfig>& candidates,
                              const std::vector<QApprox>& fits);

// --- Experiment config ---

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

/// FNV-1a hash of the canonical config serialization, as a hex string.
std::string config_hash(const ExperimentConfig& config);

// --- Benchmark metrics ---

nlohmann::json metrics_record_to_json(const MetricsRecord& rec);
MetricsRecord metrics_record_from_json(const nlohmann::json& j);

nlohmann::json benchmark_report_json(const BenchmarkResult& result,
                                     const ExperimentConfig& config);
BenchmarkResult benchmark_report_parse(const nlohmann::json& j);

/// Writes report.json, metrics.csv and boxplot.csv under out_dir; returns
/// the paths written. Valid (empty-schema) files come out of empty results.
std::vector<std::string> emit_report(const BenchmarkResult& result,
                                     const ExperimentConfig& config,
                                     const std::string& out_dir);

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& axis_name,
                     const std::vector<std::string>& selectors, const std::string& path);

}  // namespace pms
