#include "fedcd/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedcd/error.hpp"

namespace fedcd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json optional_to_json(const std::optional<double>& value) {
    return value ? json(*value) : json(nullptr);
}

std::optional<double> optional_from_json(const json& j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error("io", "cannot write " + path);
    f << text;
}

struct PreparedData {
    EntityCatalog catalog;
    QMatrix qmatrix;
    std::vector<ClientDataset> clients;
};

// ingest or generate, then filter, then per-school stratified splits.
PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed) {
    EntityCatalog catalog;
    QMatrix qmatrix;
    std::vector<ResponseLog> logs;
    if (config.data_source == "files") {
        IngestResult ingested = ingest_logs(config.logs_file, config.qmatrix_file);
        catalog = std::move(ingested.catalog);
        qmatrix = std::move(ingested.qmatrix);
        logs = std::move(ingested.logs);
    } else {
        SyntheticDataset dataset =
            generate_synthetic(config.synthetic, mix_seed(seed, streams::kDataGen));
        catalog = std::move(dataset.catalog);
        qmatrix = std::move(dataset.qmatrix);
        logs = std::move(dataset.logs);
    }

    FilterResult filtered =
        filter_dataset(logs, catalog, config.min_student_logs, config.min_school_logs);

    PreparedData out;
    out.catalog = std::move(filtered.catalog);
    out.qmatrix = std::move(qmatrix);
    const auto parts = partition_by_school(filtered.logs, out.catalog);
    for (int school = 0; school < out.catalog.num_schools; ++school)
        out.clients.push_back(split_client(parts[school], out.catalog, config.train_fraction,
                                           mix_seed(seed, streams::kSplitBase + school)));
    return out;
}

int resolve_dim(const ExperimentConfig& config, const QMatrix& q) {
    const int k = q.num_concepts();
    if (config.dim != 0 && config.dim != k)
        throw Error("config", "model.dim must equal the concept count (" + std::to_string(k) +
                                  ") for " + to_string(config.model_kind));
    return k;
}

std::string per_client_csv(const MetricReport& report) {
    std::ostringstream out;
    out << "school_id,n_test,acc,rmse,auc\n";
    char buffer[64];
    for (const auto& [school_id, metrics] : report.per_client) {
        out << school_id << ',' << metrics.n_test << ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", metrics.acc);
        out << buffer << ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", metrics.rmse);
        out << buffer << ',';
        if (metrics.auc) {
            std::snprintf(buffer, sizeof buffer, "%.17g", *metrics.auc);
            out << buffer;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace

json report_to_json(const MetricReport& report) {
    json per_client = json::object();
    for (const auto& [school_id, metrics] : report.per_client) {
        per_client[school_id] = {{"acc", metrics.acc},
                                 {"rmse", metrics.rmse},
                                 {"auc", optional_to_json(metrics.auc)},
                                 {"n_test", metrics.n_test}};
    }
    return json{{"pooled",
                 {{"acc", report.pooled_acc},
                  {"rmse", report.pooled_rmse},
                  {"auc", optional_to_json(report.pooled_auc)}}},
                {"per_client", per_client},
                {"gf", optional_to_json(report.gf)},
                {"doa", optional_to_json(report.doa)}};
}

MetricReport report_from_json(const json& j) {
    MetricReport report;
    report.pooled_acc = j.at("pooled").at("acc").get<double>();
    report.pooled_rmse = j.at("pooled").at("rmse").get<double>();
    report.pooled_auc = optional_from_json(j.at("pooled").at("auc"));
    for (const auto& [school_id, m] : j.at("per_client").items()) {
        ClientMetrics metrics;
        metrics.acc = m.at("acc").get<double>();
        metrics.rmse = m.at("rmse").get<double>();
        metrics.auc = optional_from_json(m.at("auc"));
        metrics.n_test = m.at("n_test").get<long>();
        report.per_client.emplace(school_id, metrics);
    }
    report.gf = optional_from_json(j.at("gf"));
    report.doa = optional_from_json(j.at("doa"));
    return report;
}

RunRecord run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();

    RunRecord record;
    record.config = config;
    fs::create_directories(config.output_dir);

    for (const std::uint64_t seed : config.seeds) {
        PreparedData data = prepare_data(config, seed);
        const int dim = resolve_dim(config, data.qmatrix);
        (void)dim;

        const fs::path seed_dir = fs::path(config.output_dir) / ("seed_" + std::to_string(seed));
        fs::create_directories(seed_dir);

        FederationOptions options;
        options.rounds = config.rounds;
        options.local_epochs = config.local_epochs;
        options.batch_size = config.batch_size;
        options.learning_rate = config.learning_rate;
        options.clip_fc_nonneg = config.clip_fc_nonneg;
        options.parallel_clients = config.parallel_clients;
        options.checkpoint_every = config.checkpoint_every;
        options.checkpoint_dir = (seed_dir / "checkpoints").string();

        SeedResult seed_result;
        seed_result.seed = seed;
        EvaluateOptions evaluate_options{config.compute_doa};

        if (config.centralized) {
            ClientDataset pooled = pool_clients(data.clients);
            ModelParams params = run_centralized(pooled, data.qmatrix, config.model_kind,
                                                 config.rounds * config.local_epochs,
                                                 config.batch_size, config.learning_rate,
                                                 config.clip_fc_nonneg, seed);
            // Evaluation machinery wants client states; wrap the pooled model
            // as a one-client federation over a merged catalog view.
            EntityCatalog pooled_catalog = data.catalog;
            pooled_catalog.num_schools = 1;
            pooled_catalog.school_ids = {"pooled"};
            std::fill(pooled_catalog.student_to_school.begin(),
                      pooled_catalog.student_to_school.end(), 0);
            std::vector<ClientState> clients;
            AdamState optimizer = init_adam(params);
            clients.push_back(ClientState{0, std::move(params), std::move(optimizer),
                                          std::move(pooled), Rng(0)});
            EvaluationResult evaluated = evaluate(clients, data.qmatrix, pooled_catalog,
                                                  evaluate_options);
            seed_result.report = std::move(evaluated.report);
        } else {
            ProtocolResult protocol = run_protocol(data.catalog, std::move(data.clients),
                                                   data.qmatrix, config.model_kind,
                                                   config.strategy, options, seed);
            EvaluationResult evaluated =
                evaluate(protocol.clients, data.qmatrix, data.catalog, evaluate_options);
            seed_result.report = std::move(evaluated.report);

            seed_result.loss_trace_path = (seed_dir / "loss_trace.csv").string();
            write_loss_trace(protocol.trace, data.catalog, seed_result.loss_trace_path);
        }

        json report_json = report_to_json(seed_result.report);
        report_json["config"] = config_to_json(config);
        report_json["seed"] = seed;
        seed_result.report_path = (seed_dir / "report.json").string();
        write_text(seed_result.report_path, report_json.dump(2) + "\n");

        seed_result.per_client_path = (seed_dir / "per_client.csv").string();
        write_text(seed_result.per_client_path, per_client_csv(seed_result.report));

        record.seed_results.push_back(std::move(seed_result));
    }

    record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.record_path = (fs::path(config.output_dir) / "run_record.json").string();
    write_text(record.record_path, run_record_to_json(record).dump(2) + "\n");
    return record;
}

namespace {

json mean_std(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return json{{"mean", mean}, {"std", std::sqrt(var)}};
}

}  // namespace

json run_record_to_json(const RunRecord& record) {
    json reports = json::array();
    std::vector<double> accs, rmses, aucs, gfs;
    for (const auto& seed_result : record.seed_results) {
        json entry = report_to_json(seed_result.report);
        entry["seed"] = seed_result.seed;
        entry["report_path"] = seed_result.report_path;
        entry["per_client_path"] = seed_result.per_client_path;
        entry["loss_trace_path"] = seed_result.loss_trace_path;
        reports.push_back(std::move(entry));
        accs.push_back(seed_result.report.pooled_acc);
        rmses.push_back(seed_result.report.pooled_rmse);
        if (seed_result.report.pooled_auc) aucs.push_back(*seed_result.report.pooled_auc);
        if (seed_result.report.gf) gfs.push_back(*seed_result.report.gf);
    }
    json aggregate;
    aggregate["acc"] = mean_std(accs);
    aggregate["rmse"] = mean_std(rmses);
    if (!aucs.empty()) aggregate["auc"] = mean_std(aucs);
    if (!gfs.empty()) aggregate["gf"] = mean_std(gfs);
    return json{{"config", config_to_json(record.config)},
                {"reports", reports},
                {"aggregate", aggregate},
                {"wall_clock_seconds", record.wall_clock_seconds}};
}

RunRecord load_run_record(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("io", "cannot open run record: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw Error("io", path + " is not valid JSON: " + e.what());
    }
    RunRecord record;
    record.config = config_from_json(j.at("config"));
    for (const auto& entry : j.at("reports")) {
        SeedResult seed_result;
        seed_result.seed = entry.at("seed").get<std::uint64_t>();
        seed_result.report = report_from_json(entry);
        seed_result.report_path = entry.at("report_path").get<std::string>();
        seed_result.per_client_path = entry.at("per_client_path").get<std::string>();
        seed_result.loss_trace_path = entry.at("loss_trace_path").get<std::string>();
        record.seed_results.push_back(std::move(seed_result));
    }
    record.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    record.record_path = path;
    return record;
}

Comparison compare_runs(const std::vector<RunRecord>& records) {
    if (records.empty()) throw Error("compare", "no run records");

    // Comparable only when the data pipeline is identical.
    const json reference = {
        {"data", config_to_json(records.front().config).at("data")},
        {"seeds", records.front().config.seeds},
    };
    for (const auto& record : records) {
        const json mine = {
            {"data", config_to_json(record.config).at("data")},
            {"seeds", record.config.seeds},
        };
        if (mine != reference)
            throw Error("compare", "run records use different data sources or seeds");
    }

    Comparison comparison;
    std::vector<std::string> schools;
    for (const auto& [school_id, unused] : records.front().seed_results.front().report.per_client)
        schools.push_back(school_id);

    for (const auto& record : records) {
        comparison.labels.push_back(record.config.label);
        double pooled = 0.0, gf = 0.0;
        long gf_n = 0;
        for (const auto& seed_result : record.seed_results) {
            pooled += seed_result.report.pooled_acc;
            if (seed_result.report.gf) {
                gf += *seed_result.report.gf;
                ++gf_n;
            }
        }
        comparison.pooled_acc.push_back(pooled / static_cast<double>(record.seed_results.size()));
        comparison.gf.push_back(gf_n ? gf / static_cast<double>(gf_n) : 0.0);
    }

    for (const auto& school_id : schools) {
        std::vector<double> row;
        for (const auto& record : records) {
            double acc = 0.0;
            long n = 0;
            for (const auto& seed_result : record.seed_results) {
                auto it = seed_result.report.per_client.find(school_id);
                if (it == seed_result.report.per_client.end())
                    throw Error("compare", "school " + school_id + " missing from record '" +
                                               record.config.label + "'");
                acc += it->second.acc;
                ++n;
            }
            row.push_back(acc / static_cast<double>(n));
        }
        comparison.per_school_acc.emplace_back(school_id, std::move(row));
    }
    return comparison;
}

Comparison compare_run_files(const std::vector<std::string>& record_paths) {
    std::vector<RunRecord> records;
    records.reserve(record_paths.size());
    for (const auto& path : record_paths) records.push_back(load_run_record(path));
    return compare_runs(records);
}

json comparison_to_json(const Comparison& comparison) {
    json per_school = json::array();
    for (const auto& [school_id, accs] : comparison.per_school_acc)
        per_school.push_back(json{{"school_id", school_id}, {"acc", accs}});
    return json{{"labels", comparison.labels},
                {"per_school_acc", per_school},
                {"pooled_acc", comparison.pooled_acc},
                {"gf", comparison.gf}};
}

std::string comparison_to_csv(const Comparison& comparison) {
    std::ostringstream out;
    out << "school_id";
    for (const auto& label : comparison.labels) out << ',' << label;
    out << '\n';
    char buffer[64];
    auto emit_row = [&](const std::string& name, const std::vector<double>& values) {
        out << name;
        for (double v : values) {
            std::snprintf(buffer, sizeof buffer, "%.6f", v);
            out << ',' << buffer;
        }
        out << '\n';
    };
    for (const auto& [school_id, accs] : comparison.per_school_acc) emit_row(school_id, accs);
    emit_row("pooled", comparison.pooled_acc);
    emit_row("gf", comparison.gf);
    return out.str();
}

}  // namespace fedcd
