#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedcd/federation.hpp"
#include "fedcd/model.hpp"
#include "fedcd/synthetic.hpp"

#include <nlohmann/json.hpp>

namespace fedcd {

// A full experiment description. Serialized as JSON with nested sections;
// parsing is strict (unknown keys are errors) and parse -> serialize -> parse
// is the identity, so the config echo inside every report reproduces the run.
struct ExperimentConfig {
    std::string label = "run";

    // data
    std::string data_source = "synthetic";  // "synthetic" | "files"
    std::string logs_file;
    std::string qmatrix_file;
    SyntheticSpec synthetic;
    int min_student_logs = 5;
    int min_school_logs = 1000;
    double train_fraction = 0.8;

    // model
    ModelKind model_kind = ModelKind::Ncd;
    int dim = 0;  // 0 means "use the concept count"
    bool clip_fc_nonneg = true;

    StrategyConfig strategy;

    // federation
    int rounds = 100;
    int local_epochs = 5;
    int batch_size = 128;
    double learning_rate = 1e-3;
    bool centralized = false;
    bool parallel_clients = false;
    int checkpoint_every = 0;

    bool compute_doa = false;

    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string output_dir = "out";

    void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
nlohmann::json config_to_json(const ExperimentConfig& config);

// Applies a dotted-path override such as "strategy.gamma=0.3" or
// "federation.rounds=10"; the value is parsed as JSON when possible and as a
// bare string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace fedcd
