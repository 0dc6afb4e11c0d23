#include "fedcd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fedcd/error.hpp"

namespace fedcd {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string current;
    for (char ch : line) {
        if (ch == sep) {
            fields.push_back(current);
            current.clear();
        } else {
            current += ch;
        }
    }
    fields.push_back(current);
    return fields;
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Interns an id string, assigning dense indices in order of first appearance.
struct IdTable {
    std::unordered_map<std::string, int> index;
    std::vector<std::string> ids;

    int intern(const std::string& id) {
        auto [it, inserted] = index.try_emplace(id, static_cast<int>(ids.size()));
        if (inserted) ids.push_back(id);
        return it->second;
    }
    const int* find(const std::string& id) const {
        auto it = index.find(id);
        return it == index.end() ? nullptr : &it->second;
    }
};

struct TripletHash {
    std::size_t operator()(const ResponseLog& log) const {
        std::uint64_t h = static_cast<std::uint64_t>(log.student);
        h = h * 0x100000001b3ULL ^ static_cast<std::uint64_t>(log.exercise);
        h = h * 0x100000001b3ULL ^ static_cast<std::uint64_t>(log.correct);
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

void EntityCatalog::validate() const {
    if (static_cast<int>(student_to_school.size()) != num_students)
        throw Error("data", "catalog: student_to_school size does not match student count");
    std::vector<int> owned(num_schools, 0);
    for (int s = 0; s < num_students; ++s) {
        const int school = student_to_school[s];
        if (school < 0 || school >= num_schools)
            throw Error("data", "catalog: student " + std::to_string(s) + " maps to invalid school");
        ++owned[school];
    }
    for (int t = 0; t < num_schools; ++t)
        if (owned[t] == 0)
            throw Error("data", "catalog: school " + std::to_string(t) + " owns no students");
}

IngestResult ingest_logs(const std::string& log_path, const std::string& qmatrix_path) {
    IngestResult out;

    // Q-matrix first: logs are validated against it.
    std::ifstream qin(qmatrix_path);
    if (!qin) throw Error("ingest", "cannot open Q-matrix file: " + qmatrix_path);

    IdTable exercises, concepts;
    std::vector<std::vector<int>> rows;  // per exercise, concept indices
    {
        std::string line;
        std::size_t line_no = 0;
        bool header_seen = false;
        while (std::getline(qin, line)) {
            ++line_no;
            if (strip(line).empty()) continue;
            if (!header_seen) {  // header row
                header_seen = true;
                continue;
            }
            auto fields = split_line(line, ',');
            if (fields.size() != 2)
                throw Error("ingest", qmatrix_path + ":" + std::to_string(line_no) +
                                          ": expected 2 columns, got " + std::to_string(fields.size()));
            const std::string ex_id = strip(fields[0]);
            if (ex_id.empty())
                throw Error("ingest", qmatrix_path + ":" + std::to_string(line_no) + ": empty exercise id");
            if (exercises.find(ex_id))
                throw Error("ingest", qmatrix_path + ":" + std::to_string(line_no) +
                                          ": duplicate exercise id '" + ex_id + "'");
            std::vector<int> row;
            for (const auto& c : split_line(fields[1], ';')) {
                const std::string cid = strip(c);
                if (!cid.empty()) row.push_back(concepts.intern(cid));
            }
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
            if (row.empty())
                throw Error("ingest", qmatrix_path + ":" + std::to_string(line_no) +
                                          ": exercise '" + ex_id + "' has no concepts (all-zero row)");
            exercises.intern(ex_id);
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw Error("ingest", "no records in Q-matrix file: " + qmatrix_path);
    }

    // Logs.
    std::ifstream lin(log_path);
    if (!lin) throw Error("ingest", "cannot open log file: " + log_path);

    IdTable students, schools;
    std::vector<int> student_to_school;
    std::vector<ResponseLog> raw;
    {
        std::string line;
        std::size_t line_no = 0;
        bool header_seen = false;
        while (std::getline(lin, line)) {
            ++line_no;
            if (strip(line).empty()) continue;
            if (!header_seen) {
                header_seen = true;
                continue;
            }
            auto fields = split_line(line, ',');
            if (fields.size() != 4)
                throw Error("ingest", log_path + ":" + std::to_string(line_no) +
                                          ": expected 4 columns, got " + std::to_string(fields.size()));
            const std::string school_id = strip(fields[0]);
            const std::string student_id = strip(fields[1]);
            const std::string exercise_id = strip(fields[2]);
            const std::string correct_str = strip(fields[3]);
            if (school_id.empty() || student_id.empty() || exercise_id.empty() || correct_str.empty()) {
                ++out.dropped_rows;  // null value: drop, count
                continue;
            }
            int correct;
            if (correct_str == "0") {
                correct = 0;
            } else if (correct_str == "1") {
                correct = 1;
            } else {
                throw Error("ingest", log_path + ":" + std::to_string(line_no) +
                                          ": correct must be 0 or 1, got '" + correct_str + "'");
            }
            const int* exercise = exercises.find(exercise_id);
            if (!exercise)
                throw Error("ingest", log_path + ":" + std::to_string(line_no) +
                                          ": exercise '" + exercise_id + "' not present in Q-matrix");
            const int school = schools.intern(school_id);
            const int student = students.intern(student_id);
            if (student == static_cast<int>(student_to_school.size())) {
                student_to_school.push_back(school);
            } else if (student_to_school[student] != school) {
                throw Error("ingest", log_path + ":" + std::to_string(line_no) + ": student '" +
                                          student_id + "' appears under multiple schools");
            }
            raw.push_back({student, *exercise, correct});
        }
    }
    if (raw.empty()) throw Error("ingest", "no records in log file: " + log_path);

    // Exact-duplicate removal, first occurrence kept.
    std::unordered_map<ResponseLog, int, TripletHash> seen;
    out.logs.reserve(raw.size());
    for (const auto& log : raw) {
        auto [it, inserted] = seen.try_emplace(log, 1);
        if (inserted)
            out.logs.push_back(log);
        else
            ++out.duplicate_rows;
    }

    out.catalog.num_students = static_cast<int>(students.ids.size());
    out.catalog.num_exercises = static_cast<int>(exercises.ids.size());
    out.catalog.num_concepts = static_cast<int>(concepts.ids.size());
    out.catalog.num_schools = static_cast<int>(schools.ids.size());
    out.catalog.student_to_school = std::move(student_to_school);
    out.catalog.student_ids = std::move(students.ids);
    out.catalog.school_ids = std::move(schools.ids);
    out.catalog.exercise_ids = std::move(exercises.ids);
    out.catalog.concept_ids = std::move(concepts.ids);
    out.catalog.validate();

    out.qmatrix.entries = Matrix(rows.size(), out.catalog.num_concepts, 0.0);
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (int k : rows[j]) out.qmatrix.entries(j, k) = 1.0;

    return out;
}

FilterResult filter_dataset(const std::vector<ResponseLog>& logs, const EntityCatalog& catalog,
                            int min_student_logs, int min_school_logs) {
    if (min_student_logs < 0 || min_school_logs < 0)
        throw Error("filter", "thresholds must be non-negative");
    catalog.validate();

    std::vector<bool> student_alive(catalog.num_students, true);
    std::vector<bool> school_alive(catalog.num_schools, true);

    auto log_alive = [&](const ResponseLog& log) {
        return student_alive[log.student] && school_alive[catalog.student_to_school[log.student]];
    };

    // Students first, then schools, to a fixed point.
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<long> per_student(catalog.num_students, 0);
        for (const auto& log : logs)
            if (log_alive(log)) ++per_student[log.student];
        for (int s = 0; s < catalog.num_students; ++s) {
            if (student_alive[s] && per_student[s] < min_student_logs) {
                student_alive[s] = false;
                changed = true;
            }
        }
        std::vector<long> per_school(catalog.num_schools, 0);
        for (const auto& log : logs)
            if (log_alive(log)) ++per_school[catalog.student_to_school[log.student]];
        for (int t = 0; t < catalog.num_schools; ++t) {
            if (school_alive[t] && per_school[t] < min_school_logs) {
                school_alive[t] = false;
                changed = true;
            }
        }
    }

    // A student whose school died is gone even if individually above threshold.
    for (int s = 0; s < catalog.num_students; ++s)
        if (!school_alive[catalog.student_to_school[s]]) student_alive[s] = false;

    FilterResult out;
    std::vector<int> new_student(catalog.num_students, -1);
    std::vector<int> new_school(catalog.num_schools, -1);
    for (int t = 0; t < catalog.num_schools; ++t) {
        if (school_alive[t]) {
            new_school[t] = out.catalog.num_schools++;
            out.catalog.school_ids.push_back(catalog.school_ids[t]);
        } else {
            ++out.removed_schools;
        }
    }
    for (int s = 0; s < catalog.num_students; ++s) {
        if (student_alive[s]) {
            new_student[s] = out.catalog.num_students++;
            out.catalog.student_ids.push_back(catalog.student_ids[s]);
            out.catalog.student_to_school.push_back(new_school[catalog.student_to_school[s]]);
        } else {
            ++out.removed_students;
        }
    }
    out.catalog.num_exercises = catalog.num_exercises;
    out.catalog.num_concepts = catalog.num_concepts;
    out.catalog.exercise_ids = catalog.exercise_ids;
    out.catalog.concept_ids = catalog.concept_ids;

    for (const auto& log : logs)
        if (log_alive(log)) out.logs.push_back({new_student[log.student], log.exercise, log.correct});

    if (out.logs.empty()) throw Error("filter", "filtering removed all data");
    out.catalog.validate();
    return out;
}

int ClientDataset::local_index(int global_student) const {
    auto it = global_to_local.find(global_student);
    if (it == global_to_local.end())
        throw Error("data", "student " + std::to_string(global_student) + " does not belong to school " +
                                std::to_string(school));
    return it->second;
}

ClientDataset split_client(const std::vector<ResponseLog>& logs, const EntityCatalog& catalog,
                           double train_fraction, std::uint64_t rng_seed) {
    if (logs.size() < 2) throw Error("split", "client needs at least 2 logs to split");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error("split", "train_fraction must lie in (0, 1)");

    ClientDataset out;
    out.school = catalog.student_to_school[logs.front().student];
    for (const auto& log : logs)
        if (catalog.student_to_school[log.student] != out.school)
            throw Error("split", "logs span multiple schools");

    std::map<int, std::vector<ResponseLog>> by_student;
    for (const auto& log : logs) by_student[log.student].push_back(log);
    for (const auto& [g, unused] : by_student) {
        out.global_to_local.emplace(g, static_cast<int>(out.local_to_global.size()));
        out.local_to_global.push_back(g);
    }

    // Per-student groups of logs sharing a (student, exercise) pair; a pair is
    // indivisible so train and test stay disjoint as (student, exercise) sets.
    Rng rng(rng_seed);
    for (const auto& [g, mine] : by_student) {
        std::vector<std::vector<ResponseLog>> groups;
        std::unordered_map<int, int> group_of_exercise;
        for (const auto& log : mine) {
            auto [it, inserted] = group_of_exercise.try_emplace(log.exercise, static_cast<int>(groups.size()));
            if (inserted) groups.emplace_back();
            groups[it->second].push_back(log);
        }

        const long n = static_cast<long>(mine.size());
        if (n == 1 || groups.size() < 2) {  // nothing to hold out
            out.train_logs.insert(out.train_logs.end(), mine.begin(), mine.end());
            continue;
        }
        long target = std::lround(train_fraction * static_cast<double>(n));
        target = std::clamp(target, 1L, n - 1);

        rng.shuffle(groups);
        long in_train = 0;
        std::vector<std::vector<ResponseLog>*> train_groups, test_groups;
        for (auto& group : groups) {
            if (in_train < target) {
                train_groups.push_back(&group);
                in_train += static_cast<long>(group.size());
            } else {
                test_groups.push_back(&group);
            }
        }
        if (test_groups.empty()) {  // target swallowed everything; hold the last group out
            test_groups.push_back(train_groups.back());
            train_groups.pop_back();
        }
        for (auto* group : train_groups)
            out.train_logs.insert(out.train_logs.end(), group->begin(), group->end());
        for (auto* group : test_groups)
            out.test_logs.insert(out.test_logs.end(), group->begin(), group->end());
    }
    return out;
}

std::vector<std::vector<ResponseLog>> partition_by_school(const std::vector<ResponseLog>& logs,
                                                          const EntityCatalog& catalog) {
    std::vector<std::vector<ResponseLog>> parts(catalog.num_schools);
    for (const auto& log : logs) parts[catalog.student_to_school[log.student]].push_back(log);
    return parts;
}

ClientDataset pool_clients(const std::vector<ClientDataset>& clients) {
    ClientDataset pooled;
    pooled.school = 0;
    std::set<int> students;
    for (const auto& c : clients) {
        pooled.train_logs.insert(pooled.train_logs.end(), c.train_logs.begin(), c.train_logs.end());
        pooled.test_logs.insert(pooled.test_logs.end(), c.test_logs.begin(), c.test_logs.end());
        students.insert(c.local_to_global.begin(), c.local_to_global.end());
    }
    for (int g : students) {
        pooled.global_to_local.emplace(g, static_cast<int>(pooled.local_to_global.size()));
        pooled.local_to_global.push_back(g);
    }
    return pooled;
}

}  // namespace fedcd
