#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedcd/config.hpp"
#include "fedcd/error.hpp"
#include "fedcd/federation.hpp"
#include "fedcd/harness.hpp"
#include "fedcd/metrics.hpp"
#include "fedcd/synthetic.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::vector<fedcd::PredictionRecord> to_records(const std::vector<double>& scores,
                                                const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw fedcd::Error("metrics", "scores and labels must have equal length");
    std::vector<fedcd::PredictionRecord> records(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        records[i].score = scores[i];
        records[i].label = labels[i];
    }
    return records;
}

}  // namespace

PYBIND11_MODULE(_fedcd, m) {
    m.doc() = "Federated cognitive-diagnosis simulator core";

    py::register_exception<fedcd::Error>(m, "FedcdError");

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const auto config = fedcd::parse_config_text(config_json);
            const auto record = fedcd::run_experiment(config);
            return fedcd::run_record_to_json(record).dump(2);
        },
        py::arg("config_json"),
        "Run a full experiment from a config JSON string; returns the run record as JSON.");

    m.def(
        "generate_dataset",
        [](const std::string& spec_json, std::uint64_t seed, const std::string& out_dir) {
            json wrapped = {{"data", {{"source", "synthetic"}, {"synthetic", json::parse(spec_json)}}}};
            const auto spec = fedcd::config_from_json(wrapped).synthetic;
            const auto dataset = fedcd::generate_synthetic(spec, seed);
            return fedcd::write_dataset_files(dataset, out_dir);
        },
        py::arg("spec_json"), py::arg("seed"), py::arg("out_dir"),
        "Generate a synthetic dataset and write logs.csv, qmatrix.csv, latents.csv.");

    m.def(
        "accuracy",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            const auto records = to_records(scores, labels);
            return fedcd::accuracy(records);
        },
        py::arg("scores"), py::arg("labels"));

    m.def(
        "rmse",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            const auto records = to_records(scores, labels);
            return fedcd::rmse(records);
        },
        py::arg("scores"), py::arg("labels"));

    m.def(
        "auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            const auto records = to_records(scores, labels);
            return fedcd::auc(records);
        },
        py::arg("scores"), py::arg("labels"));

    m.def("group_fairness", &fedcd::group_fairness, py::arg("per_client_acc"));

    m.def(
        "fairness_weights",
        [](const std::vector<double>& losses, double gamma) {
            fedcd::StrategyConfig strategy;
            strategy.aggregator = fedcd::Aggregator::FairnessSoftmax;
            strategy.gamma = gamma;
            const std::vector<long> sizes(losses.size(), 1);
            const std::vector<const fedcd::Matrix*> uploads(losses.size(), nullptr);
            return fedcd::compute_weights(strategy, losses, sizes, uploads, fedcd::Matrix());
        },
        py::arg("losses"), py::arg("gamma") = 0.1,
        "Loss-weighted softmax aggregation weights.");

    m.def(
        "compare_runs",
        [](const std::vector<std::string>& record_paths) {
            return fedcd::comparison_to_json(fedcd::compare_run_files(record_paths)).dump(2);
        },
        py::arg("record_paths"));

    m.attr("__version__") = "0.1.0";
}
