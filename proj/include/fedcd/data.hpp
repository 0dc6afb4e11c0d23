#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedcd/matrix.hpp"
#include "fedcd/rng.hpp"

namespace fedcd {

// One (student, exercise, correctness) interaction, the atomic training record.
struct ResponseLog {
    int student = 0;   // global dense index
    int exercise = 0;  // dense index into the Q-matrix
    int correct = 0;   // 0 or 1
    bool operator==(const ResponseLog&) const = default;
};

// Dense index space for one dataset: N students across T schools, M exercises,
// K concepts. The original string ids are kept for reporting only; all code
// works on the dense indices.
struct EntityCatalog {
    int num_students = 0;
    int num_exercises = 0;
    int num_concepts = 0;
    int num_schools = 0;
    std::vector<int> student_to_school;  // size num_students, values in [0, num_schools)
    std::vector<std::string> student_ids;
    std::vector<std::string> school_ids;
    std::vector<std::string> exercise_ids;
    std::vector<std::string> concept_ids;

    // Checks the mapping is total and every school owns at least one student.
    void validate() const;
};

// Binary exercise-to-concept incidence matrix. Rows with no concept are
// rejected at ingestion, so every row has at least one 1.
struct QMatrix {
    Matrix entries;  // M x K, entries in {0, 1}

    int num_exercises() const { return static_cast<int>(entries.rows()); }
    int num_concepts() const { return static_cast<int>(entries.cols()); }
    bool has_concept(int exercise, int concept_index) const {
        return entries(exercise, concept_index) != 0.0;
    }
};

struct IngestResult {
    EntityCatalog catalog;
    QMatrix qmatrix;
    std::vector<ResponseLog> logs;
    std::size_t dropped_rows = 0;    // rows with missing fields
    std::size_t duplicate_rows = 0;  // exact duplicate triplets removed
};

// Reads a response-log file and a Q-matrix file (formats documented in the
// README), drops rows with missing fields, removes exact duplicates and
// returns densely re-indexed entities. Throws on malformed rows (with line
// number), all-zero Q-matrix rows, and logs referencing unknown exercises.
IngestResult ingest_logs(const std::string& log_path, const std::string& qmatrix_path);

struct FilterResult {
    EntityCatalog catalog;
    std::vector<ResponseLog> logs;
    int removed_students = 0;
    int removed_schools = 0;
};

// Iteratively removes students with fewer than min_student_logs logs and
// schools with fewer than min_school_logs logs until a fixed point, then
// re-densifies student and school indices. Exercises are untouched.
FilterResult filter_dataset(const std::vector<ResponseLog>& logs, const EntityCatalog& catalog,
                            int min_student_logs = 5, int min_school_logs = 1000);

// One school's private dataset. Logs keep global student indices; the local
// index is a bijection onto dense rows [0, N_t), ordered by global index.
struct ClientDataset {
    int school = 0;
    std::vector<ResponseLog> train_logs;
    std::vector<ResponseLog> test_logs;
    std::vector<int> local_to_global;
    std::unordered_map<int, int> global_to_local;

    int num_local_students() const { return static_cast<int>(local_to_global.size()); }
    int local_index(int global_student) const;  // throws if the student is foreign
};

// Per-student stratified shuffle split. Every student with >= 2 logs keeps at
// least one train and one test log; single-log students go entirely to train.
// Logs sharing a (student, exercise) pair always land on the same side.
ClientDataset split_client(const std::vector<ResponseLog>& logs, const EntityCatalog& catalog,
                           double train_fraction, std::uint64_t rng_seed);

// Groups logs by owning school, preserving input order within each school.
std::vector<std::vector<ResponseLog>> partition_by_school(const std::vector<ResponseLog>& logs,
                                                          const EntityCatalog& catalog);

// Pools per-school splits into a single-client dataset (for centralized runs),
// keeping each log on the side its per-school split assigned.
ClientDataset pool_clients(const std::vector<ClientDataset>& clients);

}  // namespace fedcd
