#include "fedcd/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fedcd/error.hpp"

namespace fedcd {

void SyntheticSpec::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw Error("generate", std::string(name) + " must be >= 1");
    };
    positive(schools, "schools");
    positive(students_per_school, "students_per_school");
    positive(exercises, "exercises");
    positive(concepts, "concepts");
    positive(logs_per_student, "logs_per_student");
    if (logs_per_student > exercises)
        throw Error("generate", "logs_per_student exceeds the number of exercises");
    if (static_cast<int>(school_ability_offsets.size()) != schools)
        throw Error("generate", "school_ability_offsets length must equal schools");
    for (double offset : school_ability_offsets)
        if (!std::isfinite(offset)) throw Error("generate", "school ability offsets must be finite");
    if (!(mastery_sd >= 0.0) || !std::isfinite(mastery_sd))
        throw Error("generate", "mastery_sd must be finite and >= 0");
    if (!(difficulty_sd >= 0.0) || !std::isfinite(difficulty_sd))
        throw Error("generate", "difficulty_sd must be finite and >= 0");
    if (!(discrimination > 0.0) || !std::isfinite(discrimination))
        throw Error("generate", "discrimination must be finite and > 0");
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t rng_seed) {
    spec.validate();
    Rng rng(rng_seed);

    SyntheticDataset out;
    const int n = spec.schools * spec.students_per_school;
    out.catalog.num_students = n;
    out.catalog.num_exercises = spec.exercises;
    out.catalog.num_concepts = spec.concepts;
    out.catalog.num_schools = spec.schools;
    for (int t = 0; t < spec.schools; ++t) out.catalog.school_ids.push_back(std::to_string(t));
    for (int i = 0; i < n; ++i) {
        out.catalog.student_ids.push_back(std::to_string(i));
        out.catalog.student_to_school.push_back(i / spec.students_per_school);
    }
    for (int j = 0; j < spec.exercises; ++j) out.catalog.exercise_ids.push_back(std::to_string(j));
    for (int k = 0; k < spec.concepts; ++k) out.catalog.concept_ids.push_back(std::to_string(k));

    // Latent mastery, school-major.
    out.true_mastery = Matrix(n, spec.concepts);
    for (int i = 0; i < n; ++i) {
        const double offset = spec.school_ability_offsets[out.catalog.student_to_school[i]];
        for (int k = 0; k < spec.concepts; ++k)
            out.true_mastery(i, k) = rng.normal(offset, spec.mastery_sd);
    }

    // Exercises: difficulty plus 1-3 required concepts.
    out.qmatrix.entries = Matrix(spec.exercises, spec.concepts, 0.0);
    out.exercise_difficulty.resize(spec.exercises);
    std::vector<int> concept_pool(spec.concepts);
    for (int j = 0; j < spec.exercises; ++j) {
        out.exercise_difficulty[j] = spec.difficulty_sd > 0.0 ? rng.normal(0.0, spec.difficulty_sd) : 0.0;
        const int max_concepts = std::min(3, spec.concepts);
        const int count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_concepts)));
        std::iota(concept_pool.begin(), concept_pool.end(), 0);
        rng.shuffle(concept_pool);
        for (int c = 0; c < count; ++c) out.qmatrix.entries(j, concept_pool[c]) = 1.0;
    }

    // Responses: per student, a without-replacement sample of exercises.
    std::vector<int> exercise_pool(spec.exercises);
    for (int i = 0; i < n; ++i) {
        std::iota(exercise_pool.begin(), exercise_pool.end(), 0);
        for (int drawn = 0; drawn < spec.logs_per_student; ++drawn) {
            const int pick = drawn + static_cast<int>(rng.below(
                                         static_cast<std::uint64_t>(spec.exercises - drawn)));
            std::swap(exercise_pool[drawn], exercise_pool[pick]);
            const int j = exercise_pool[drawn];

            double mastery_sum = 0.0;
            int required = 0;
            for (int k = 0; k < spec.concepts; ++k) {
                if (out.qmatrix.has_concept(j, k)) {
                    mastery_sum += out.true_mastery(i, k);
                    ++required;
                }
            }
            const double logit =
                spec.discrimination * (mastery_sum / required - out.exercise_difficulty[j]);
            const double p = 1.0 / (1.0 + std::exp(-logit));
            out.logs.push_back({i, j, rng.bernoulli(p) ? 1 : 0});
        }
    }
    return out;
}

std::vector<std::string> write_dataset_files(const SyntheticDataset& dataset,
                                             const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string logs_path = (fs::path(out_dir) / "logs.csv").string();
    const std::string q_path = (fs::path(out_dir) / "qmatrix.csv").string();
    const std::string latents_path = (fs::path(out_dir) / "latents.csv").string();

    {
        std::ofstream f(logs_path);
        if (!f) throw Error("io", "cannot write " + logs_path);
        f << "school_id,student_id,exercise_id,correct\n";
        for (const auto& log : dataset.logs) {
            f << dataset.catalog.school_ids[dataset.catalog.student_to_school[log.student]] << ','
              << dataset.catalog.student_ids[log.student] << ','
              << dataset.catalog.exercise_ids[log.exercise] << ',' << log.correct << '\n';
        }
    }
    {
        std::ofstream f(q_path);
        if (!f) throw Error("io", "cannot write " + q_path);
        f << "exercise_id,concept_ids\n";
        for (int j = 0; j < dataset.qmatrix.num_exercises(); ++j) {
            f << dataset.catalog.exercise_ids[j] << ',';
            bool first = true;
            for (int k = 0; k < dataset.qmatrix.num_concepts(); ++k) {
                if (dataset.qmatrix.has_concept(j, k)) {
                    if (!first) f << ';';
                    f << dataset.catalog.concept_ids[k];
                    first = false;
                }
            }
            f << '\n';
        }
    }
    {
        std::ofstream f(latents_path);
        if (!f) throw Error("io", "cannot write " + latents_path);
        f << "student_id,concept_id,mastery\n";
        char buffer[64];
        for (int i = 0; i < static_cast<int>(dataset.true_mastery.rows()); ++i) {
            for (int k = 0; k < static_cast<int>(dataset.true_mastery.cols()); ++k) {
                std::snprintf(buffer, sizeof buffer, "%.17g", dataset.true_mastery(i, k));
                f << dataset.catalog.student_ids[i] << ',' << dataset.catalog.concept_ids[k] << ','
                  << buffer << '\n';
            }
        }
    }
    return {logs_path, q_path, latents_path};
}

}  // namespace fedcd
