#pragma once

#include <string>
#include <vector>

#include "fedcd/config.hpp"
#include "fedcd/metrics.hpp"

#include <nlohmann/json.hpp>

namespace fedcd {

// One seed's outcome: the metric report plus where its artifacts went.
struct SeedResult {
    std::uint64_t seed = 0;
    MetricReport report;
    std::string report_path;
    std::string per_client_path;
    std::string loss_trace_path;
};

struct RunRecord {
    ExperimentConfig config;
    std::vector<SeedResult> seed_results;
    double wall_clock_seconds = 0.0;
    std::string record_path;
};

nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

// Runs the full pipeline (ingest or generate, filter, split, protocol or
// centralized training, evaluation) once per seed and writes all artifacts
// under config.output_dir. Deterministic for a fixed config.
RunRecord run_experiment(const ExperimentConfig& config);

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord load_run_record(const std::string& path);

struct Comparison {
    std::vector<std::string> labels;
    // school id -> per-record mean test accuracy across seeds
    std::vector<std::pair<std::string, std::vector<double>>> per_school_acc;
    std::vector<double> pooled_acc;  // per record
    std::vector<double> gf;          // per record
};

// Joins run records that share a data source into a per-school accuracy
// table plus pooled accuracy and group-fairness rows.
Comparison compare_runs(const std::vector<RunRecord>& records);
Comparison compare_run_files(const std::vector<std::string>& record_paths);

nlohmann::json comparison_to_json(const Comparison& comparison);
std::string comparison_to_csv(const Comparison& comparison);

}  // namespace fedcd
