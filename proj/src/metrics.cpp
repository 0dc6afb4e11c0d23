#include "fedcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "fedcd/error.hpp"
#include "fedcd/model.hpp"

namespace fedcd {

double accuracy(std::span<const PredictionRecord> records) {
    if (records.empty()) throw Error("metrics", "accuracy of empty input");
    long correct = 0;
    for (const auto& r : records) {
        const int predicted = r.score >= 0.5 ? 1 : 0;
        if (predicted == r.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

double rmse(std::span<const PredictionRecord> records) {
    if (records.empty()) throw Error("metrics", "rmse of empty input");
    double acc = 0.0;
    for (const auto& r : records) {
        const double d = r.score - static_cast<double>(r.label);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(records.size()));
}

double auc(std::span<const PredictionRecord> records) {
    long n_pos = 0, n_neg = 0;
    for (const auto& r : records) (r.label ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw Error("metrics", "AUC undefined: single-class input");

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&records](std::size_t a, std::size_t b) {
        return records[a].score < records[b].score;
    });

    // Midranks over tie runs; the positive rank sum gives the pair count.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && records[order[j + 1]].score == records[order[i]].score) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            if (records[order[k]].label) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double u = rank_sum_pos -
                     static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double group_fairness(const std::vector<double>& per_client_acc) {
    const std::size_t n = per_client_acc.size();
    if (n < 2) throw Error("metrics", "group fairness needs at least 2 clients");
    double mean = 0.0;
    for (double a : per_client_acc) mean += a;
    mean /= static_cast<double>(n);

    double above_sum = 0.0, below_sum = 0.0;
    long above_n = 0, below_n = 0;
    for (double a : per_client_acc) {
        if (a >= mean) {
            above_sum += a;
            ++above_n;
        } else {
            below_sum += a;
            ++below_n;
        }
    }
    if (above_n == 0 || below_n == 0) return 0.0;
    return std::fabs(below_sum / static_cast<double>(below_n) -
                     above_sum / static_cast<double>(above_n));
}

double degree_of_agreement(const Matrix& proficiency, const QMatrix& q,
                           const std::vector<ResponseLog>& logs) {
    const int n = static_cast<int>(proficiency.rows());
    const int k_count = q.num_concepts();
    for (const auto& log : logs)
        if (log.student < 0 || log.student >= n)
            throw Error("metrics", "proficiency missing for student " + std::to_string(log.student));

    // Last response wins for duplicated (student, exercise) pairs.
    std::vector<std::unordered_map<int, int>> response(n);  // student -> exercise -> correct
    for (const auto& log : logs) response[log.student][log.exercise] = log.correct;

    double doa_sum = 0.0;
    int usable_concepts = 0;
    std::vector<int> exercises_on_concept;
    for (int k = 0; k < k_count; ++k) {
        exercises_on_concept.clear();
        for (int j = 0; j < q.num_exercises(); ++j)
            if (q.has_concept(j, k)) exercises_on_concept.push_back(j);

        double pair_sum = 0.0;
        long usable_pairs = 0;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (!(proficiency(a, k) > proficiency(b, k))) continue;
                long shared = 0, concordant = 0;
                for (int j : exercises_on_concept) {
                    const auto ra = response[a].find(j);
                    if (ra == response[a].end()) continue;
                    const auto rb = response[b].find(j);
                    if (rb == response[b].end()) continue;
                    ++shared;
                    if (ra->second > rb->second) ++concordant;
                }
                if (shared == 0) continue;  // pair never met on this concept
                pair_sum += static_cast<double>(concordant) / static_cast<double>(shared);
                ++usable_pairs;
            }
        }
        if (usable_pairs > 0) {
            doa_sum += pair_sum / static_cast<double>(usable_pairs);
            ++usable_concepts;
        }
    }
    if (usable_concepts == 0) throw Error("metrics", "DOA undefined: no usable concept");
    return doa_sum / static_cast<double>(usable_concepts);
}

EvaluationResult evaluate(const std::vector<ClientState>& clients, const QMatrix& q,
                          const EntityCatalog& catalog, const EvaluateOptions& options) {
    if (clients.empty()) throw Error("evaluate", "no clients");

    EvaluationResult out;
    std::vector<std::pair<int, ClientMetrics>> per_client;  // school -> metrics
    std::vector<double> client_accs;

    for (const auto& client : clients) {
        std::vector<PredictionRecord> records;
        records.reserve(client.dataset.test_logs.size());
        for (const auto& log : client.dataset.test_logs) {
            const int local = client.dataset.local_index(log.student);
            const double score = forward(client.params, q, local, log.exercise);
            records.push_back({client.school, log.student, log.exercise, log.correct, score});
        }
        if (records.empty())
            throw Error("evaluate", "school " + catalog.school_ids[client.school] + " has no test logs");

        ClientMetrics metrics;
        metrics.acc = accuracy(records);
        metrics.rmse = rmse(records);
        metrics.n_test = static_cast<long>(records.size());
        bool has_pos = false, has_neg = false;
        for (const auto& r : records) (r.label ? has_pos : has_neg) = true;
        if (has_pos && has_neg) metrics.auc = auc(records);

        client_accs.push_back(metrics.acc);
        per_client.emplace_back(client.school, metrics);
        out.records.insert(out.records.end(), records.begin(), records.end());
    }

    out.report.pooled_acc = accuracy(out.records);
    out.report.pooled_rmse = rmse(out.records);
    {
        bool has_pos = false, has_neg = false;
        for (const auto& r : out.records) (r.label ? has_pos : has_neg) = true;
        if (has_pos && has_neg) out.report.pooled_auc = auc(out.records);
    }
    for (const auto& [school, metrics] : per_client)
        out.report.per_client.emplace(catalog.school_ids[school], metrics);
    if (client_accs.size() >= 2) out.report.gf = group_fairness(client_accs);

    if (options.compute_doa) {
        Matrix proficiency(catalog.num_students, q.num_concepts(), 0.0);
        for (const auto& client : clients) {
            for (std::size_t local = 0; local < client.dataset.local_to_global.size(); ++local) {
                const int global = client.dataset.local_to_global[local];
                for (int k = 0; k < q.num_concepts(); ++k)
                    proficiency(global, k) = sigmoid(client.params.student(local, k));
            }
        }
        std::vector<ResponseLog> test_logs;
        for (const auto& client : clients)
            test_logs.insert(test_logs.end(), client.dataset.test_logs.begin(),
                             client.dataset.test_logs.end());
        out.report.doa = degree_of_agreement(proficiency, q, test_logs);
    }
    return out;
}

}  // namespace fedcd
