// Command-line front end: generate synthetic datasets, run experiment
// configs, and compare finished runs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fedcd/config.hpp"
#include "fedcd/error.hpp"
#include "fedcd/harness.hpp"
#include "fedcd/synthetic.hpp"

namespace {

using nlohmann::json;

int fail(const fedcd::Error& e) {
    std::cerr << json{{"error", e.what()}, {"stage", e.stage()}}.dump() << '\n';
    return 1;
}

int fail(const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"stage", "unexpected"}}.dump() << '\n';
    return 1;
}

fedcd::SyntheticSpec spec_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw fedcd::Error("config", "cannot open spec file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw fedcd::Error("config", path + " is not valid JSON: " + std::string(e.what()));
    }
    // Reuse the experiment-config parser so unknown keys fail the same way.
    json wrapped = {{"data", {{"source", "synthetic"}, {"synthetic", j}}}};
    return fedcd::config_from_json(wrapped).synthetic;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const auto comma = text.find(',', begin);
        const std::string part =
            text.substr(begin, comma == std::string::npos ? comma : comma - begin);
        if (!part.empty()) seeds.push_back(std::stoull(part));
        if (comma == std::string::npos) break;
        begin = comma + 1;
    }
    if (seeds.empty()) throw fedcd::Error("config", "empty seed list");
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedcd: federated cognitive-diagnosis simulator"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "write a synthetic dataset to disk");
    std::string generate_spec;
    std::string generate_out = "dataset";
    std::uint64_t generate_seed = 1;
    generate->add_option("--spec", generate_spec, "synthetic spec JSON file")->required();
    generate->add_option("--seed", generate_seed, "generator seed");
    generate->add_option("--out", generate_out, "output directory");

    // run
    auto* run = app.add_subcommand("run", "run an experiment config");
    std::string run_config;
    std::string run_out;
    std::string run_seeds;
    std::vector<std::string> run_sets;
    run->add_option("--config", run_config, "experiment config JSON file")->required();
    run->add_option("--seeds", run_seeds, "comma-separated seed list override");
    run->add_option("--out", run_out, "output directory override");
    run->add_option("--set", run_sets, "dotted-path override, e.g. strategy.gamma=0.3");

    // compare
    auto* compare = app.add_subcommand("compare", "tabulate finished runs side by side");
    std::vector<std::string> compare_records;
    std::string compare_out;
    compare->add_option("records", compare_records, "run_record.json paths")->required();
    compare->add_option("--out", compare_out, "write comparison.csv and comparison.json here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            const fedcd::SyntheticSpec spec = spec_from_file(generate_spec);
            const auto dataset = fedcd::generate_synthetic(spec, generate_seed);
            const auto paths = fedcd::write_dataset_files(dataset, generate_out);
            for (const auto& path : paths) std::cout << path << '\n';
            return 0;
        }
        if (*run) {
            std::ifstream f(run_config);
            if (!f) throw fedcd::Error("config", "cannot open config file: " + run_config);
            json j;
            try {
                f >> j;
            } catch (const json::parse_error& e) {
                throw fedcd::Error("config",
                                   run_config + " is not valid JSON: " + std::string(e.what()));
            }
            for (const auto& assignment : run_sets) fedcd::apply_override(j, assignment);
            if (!run_seeds.empty()) j["seeds"] = parse_seed_list(run_seeds);
            if (!run_out.empty()) j["output_dir"] = run_out;
            const fedcd::ExperimentConfig config = fedcd::config_from_json(j);

            const fedcd::RunRecord record = fedcd::run_experiment(config);
            std::cout << record.record_path << '\n';
            for (const auto& seed_result : record.seed_results)
                std::cout << seed_result.report_path << '\n';
            return 0;
        }
        if (*compare) {
            const fedcd::Comparison comparison = fedcd::compare_run_files(compare_records);
            const std::string csv = fedcd::comparison_to_csv(comparison);
            std::cout << csv;
            if (!compare_out.empty()) {
                std::filesystem::create_directories(compare_out);
                const auto base = std::filesystem::path(compare_out);
                std::ofstream((base / "comparison.csv").string()) << csv;
                std::ofstream((base / "comparison.json").string())
                    << fedcd::comparison_to_json(comparison).dump(2) << '\n';
                std::cout << (base / "comparison.csv").string() << '\n'
                          << (base / "comparison.json").string() << '\n';
            }
            return 0;
        }
    } catch (const fedcd::Error& e) {
        return fail(e);
    } catch (const std::exception& e) {
        return fail(e);
    }
    return 0;
}
