#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedcd/data.hpp"

namespace fedcd {

// Knobs for the synthetic response generator. Schools differ by a mean
// ability offset, which is what produces the per-school correct-rate
// disparity the fairness experiments need.
struct SyntheticSpec {
    int schools = 4;
    int students_per_school = 40;
    int exercises = 60;
    int concepts = 8;
    std::vector<double> school_ability_offsets;  // length == schools
    int logs_per_student = 40;                   // <= exercises, sampled without replacement
    double mastery_sd = 1.0;                     // per-concept spread around the school offset
    double difficulty_sd = 1.0;                  // 0 makes every exercise equally hard
    double discrimination = 1.0;                 // response slope on (mastery - difficulty)

    void validate() const;
};

struct SyntheticDataset {
    EntityCatalog catalog;
    QMatrix qmatrix;
    std::vector<ResponseLog> logs;
    Matrix true_mastery;                      // N x K ground-truth latents
    std::vector<double> exercise_difficulty;  // M
};

// Students draw per-concept mastery around their school's offset, exercises
// draw a difficulty and 1-3 concepts, and responses are Bernoulli under a
// logistic model of (mean mastery on required concepts - difficulty).
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t rng_seed);

// Writes logs.csv, qmatrix.csv and latents.csv under out_dir (created if
// missing); returns the three paths in that order.
std::vector<std::string> write_dataset_files(const SyntheticDataset& dataset,
                                             const std::string& out_dir);

}  // namespace fedcd
