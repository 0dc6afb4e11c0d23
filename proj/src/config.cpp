#include "fedcd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "fedcd/error.hpp"

namespace fedcd {

using nlohmann::json;

namespace {

// Rejects keys that are not in the schema, so a typo fails loudly instead of
// silently running defaults.
void check_keys(const json& object, const std::string& section,
                const std::set<std::string>& allowed) {
    if (!object.is_object()) throw Error("config", "section '" + section + "' must be an object");
    for (const auto& [key, value] : object.items())
        if (!allowed.contains(key))
            throw Error("config", "unknown config key '" +
                                      (section.empty() ? key : section + "." + key) + "'");
}

template <typename T>
void read(const json& object, const char* key, T& into) {
    if (object.contains(key)) into = object.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (data_source != "synthetic" && data_source != "files")
        throw Error("config", "data.source must be 'synthetic' or 'files'");
    if (data_source == "files" && (logs_file.empty() || qmatrix_file.empty()))
        throw Error("config", "data.source 'files' requires data.logs_file and data.qmatrix_file");
    if (data_source == "synthetic") synthetic.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error("config", "data.train_fraction must lie in (0, 1)");
    if (min_student_logs < 0 || min_school_logs < 0)
        throw Error("config", "filter thresholds must be >= 0");
    if (dim < 0) throw Error("config", "model.dim must be >= 0");
    if (rounds < 1) throw Error("config", "federation.rounds must be >= 1");
    if (local_epochs < 1) throw Error("config", "federation.local_epochs must be >= 1");
    if (batch_size < 1) throw Error("config", "federation.batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("config", "federation.learning_rate must be > 0");
    if (checkpoint_every < 0) throw Error("config", "federation.checkpoint_every must be >= 0");
    if (!std::isfinite(strategy.gamma)) throw Error("config", "strategy.gamma must be finite");
    if (!(strategy.dp_scale >= 0.0) || !std::isfinite(strategy.dp_scale))
        throw Error("config", "strategy.dp_scale must be finite and >= 0");
    if (!std::isfinite(strategy.attention_step))
        throw Error("config", "strategy.attention_step must be finite");
    if (seeds.empty()) throw Error("config", "seeds must not be empty");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    check_keys(j, "", {"label", "data", "model", "strategy", "federation", "metrics", "seeds",
                       "output_dir"});
    read(j, "label", c.label);

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, "data",
                   {"source", "logs_file", "qmatrix_file", "synthetic", "min_student_logs",
                    "min_school_logs", "train_fraction"});
        read(d, "source", c.data_source);
        read(d, "logs_file", c.logs_file);
        read(d, "qmatrix_file", c.qmatrix_file);
        read(d, "min_student_logs", c.min_student_logs);
        read(d, "min_school_logs", c.min_school_logs);
        read(d, "train_fraction", c.train_fraction);
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            check_keys(s, "data.synthetic",
                       {"schools", "students_per_school", "exercises", "concepts",
                        "school_ability_offsets", "logs_per_student", "mastery_sd",
                        "difficulty_sd", "discrimination"});
            read(s, "schools", c.synthetic.schools);
            read(s, "students_per_school", c.synthetic.students_per_school);
            read(s, "exercises", c.synthetic.exercises);
            read(s, "concepts", c.synthetic.concepts);
            read(s, "school_ability_offsets", c.synthetic.school_ability_offsets);
            read(s, "logs_per_student", c.synthetic.logs_per_student);
            read(s, "mastery_sd", c.synthetic.mastery_sd);
            read(s, "difficulty_sd", c.synthetic.difficulty_sd);
            read(s, "discrimination", c.synthetic.discrimination);
        }
    }
    if (c.synthetic.school_ability_offsets.empty())
        c.synthetic.school_ability_offsets.assign(c.synthetic.schools, 0.0);

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, "model", {"kind", "dim", "clip_fc_nonneg"});
        std::string kind = to_string(c.model_kind);
        read(m, "kind", kind);
        c.model_kind = model_kind_from_string(kind);
        read(m, "dim", c.dim);
        read(m, "clip_fc_nonneg", c.clip_fc_nonneg);
    }

    if (j.contains("strategy")) {
        const json& s = j.at("strategy");
        check_keys(s, "strategy",
                   {"personalization", "aggregator", "gamma", "dp_scale", "attention_step",
                    "client_loss"});
        std::string personalization = to_string(c.strategy.personalization);
        read(s, "personalization", personalization);
        c.strategy.personalization = personalization_from_string(personalization);
        std::string aggregator = to_string(c.strategy.aggregator);
        read(s, "aggregator", aggregator);
        c.strategy.aggregator = aggregator_from_string(aggregator);
        read(s, "gamma", c.strategy.gamma);
        read(s, "dp_scale", c.strategy.dp_scale);
        read(s, "attention_step", c.strategy.attention_step);
        std::string loss_mode =
            c.strategy.loss_mode == ClientLossMode::MeanEpoch ? "mean" : "sum";
        read(s, "client_loss", loss_mode);
        if (loss_mode == "mean")
            c.strategy.loss_mode = ClientLossMode::MeanEpoch;
        else if (loss_mode == "sum")
            c.strategy.loss_mode = ClientLossMode::SumEpoch;
        else
            throw Error("config", "strategy.client_loss must be 'mean' or 'sum'");
    }

    if (j.contains("federation")) {
        const json& f = j.at("federation");
        check_keys(f, "federation",
                   {"rounds", "local_epochs", "batch_size", "learning_rate", "centralized",
                    "parallel_clients", "checkpoint_every"});
        read(f, "rounds", c.rounds);
        read(f, "local_epochs", c.local_epochs);
        read(f, "batch_size", c.batch_size);
        read(f, "learning_rate", c.learning_rate);
        read(f, "centralized", c.centralized);
        read(f, "parallel_clients", c.parallel_clients);
        read(f, "checkpoint_every", c.checkpoint_every);
    }

    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        check_keys(m, "metrics", {"doa"});
        read(m, "doa", c.compute_doa);
    }

    read(j, "seeds", c.seeds);
    read(j, "output_dir", c.output_dir);

    c.validate();
    return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error("config", std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("config", "cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["label"] = c.label;
    j["data"] = {
        {"source", c.data_source},
        {"logs_file", c.logs_file},
        {"qmatrix_file", c.qmatrix_file},
        {"synthetic",
         {{"schools", c.synthetic.schools},
          {"students_per_school", c.synthetic.students_per_school},
          {"exercises", c.synthetic.exercises},
          {"concepts", c.synthetic.concepts},
          {"school_ability_offsets", c.synthetic.school_ability_offsets},
          {"logs_per_student", c.synthetic.logs_per_student},
          {"mastery_sd", c.synthetic.mastery_sd},
          {"difficulty_sd", c.synthetic.difficulty_sd},
          {"discrimination", c.synthetic.discrimination}}},
        {"min_student_logs", c.min_student_logs},
        {"min_school_logs", c.min_school_logs},
        {"train_fraction", c.train_fraction},
    };
    j["model"] = {{"kind", to_string(c.model_kind)},
                  {"dim", c.dim},
                  {"clip_fc_nonneg", c.clip_fc_nonneg}};
    j["strategy"] = {
        {"personalization", to_string(c.strategy.personalization)},
        {"aggregator", to_string(c.strategy.aggregator)},
        {"gamma", c.strategy.gamma},
        {"dp_scale", c.strategy.dp_scale},
        {"attention_step", c.strategy.attention_step},
        {"client_loss", c.strategy.loss_mode == ClientLossMode::MeanEpoch ? "mean" : "sum"},
    };
    j["federation"] = {
        {"rounds", c.rounds},
        {"local_epochs", c.local_epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"centralized", c.centralized},
        {"parallel_clients", c.parallel_clients},
        {"checkpoint_every", c.checkpoint_every},
    };
    j["metrics"] = {{"doa", c.compute_doa}};
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    return j;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw Error("config", "override must look like section.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &config;
    std::size_t begin = 0;
    while (true) {
        const auto dot = path.find('.', begin);
        const std::string part = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
        if (part.empty()) throw Error("config", "bad override path: " + path);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[part];
        begin = dot + 1;
    }
}

}  // namespace fedcd
