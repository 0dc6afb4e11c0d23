#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcd/data.hpp"
#include "fedcd/federation.hpp"
#include "fedcd/matrix.hpp"

namespace fedcd {

struct PredictionRecord {
    int school = 0;
    int student = 0;  // global index
    int exercise = 0;
    int label = 0;
    double score = 0.0;  // in (0, 1)
};

struct ClientMetrics {
    double acc = 0.0;
    double rmse = 0.0;
    std::optional<double> auc;  // absent when the client's test set is single-class
    long n_test = 0;
};

struct MetricReport {
    double pooled_acc = 0.0;
    double pooled_rmse = 0.0;
    std::optional<double> pooled_auc;
    std::map<std::string, ClientMetrics> per_client;  // keyed by school id string
    std::optional<double> gf;   // needs >= 2 clients
    std::optional<double> doa;  // only when proficiency matrices are supplied
};

// Fraction of records whose thresholded score matches the label. A score of
// exactly 0.5 predicts positive.
double accuracy(std::span<const PredictionRecord> records);

double rmse(std::span<const PredictionRecord> records);

// Rank-sum (Mann-Whitney) AUC with midrank tie handling; equals the all-pairs
// count with 0.5 credit for score ties. Throws on single-class input.
double auc(std::span<const PredictionRecord> records);

// Splits clients into the group at-or-above the mean accuracy and the group
// below it, and returns the absolute difference of the two group means.
// Zero when all accuracies are equal.
double group_fairness(const std::vector<double>& per_client_acc);

// Concordance between the proficiency ordering and the observed response
// ordering. For each concept, ordered student pairs (a, b) with a diagnosed
// strictly higher count the fraction of shared exercises on that concept
// where a answered correctly and b did not; pairs sharing no such exercise
// are skipped, as are concepts with no usable pair. Duplicate (student,
// exercise) responses resolve to the last occurrence. Returns the mean over
// usable concepts; throws if no concept is usable.
double degree_of_agreement(const Matrix& proficiency, const QMatrix& q,
                           const std::vector<ResponseLog>& logs);

struct EvaluateOptions {
    bool compute_doa = false;
};

struct EvaluationResult {
    MetricReport report;
    std::vector<PredictionRecord> records;
};

// Scores every client's test logs with that client's own parameters and
// assembles pooled plus per-client metrics, group fairness over per-client
// accuracy, and (optionally) the proficiency-agreement score over test logs,
// with proficiency sigma(student embedding).
EvaluationResult evaluate(const std::vector<ClientState>& clients, const QMatrix& q,
                          const EntityCatalog& catalog, const EvaluateOptions& options = {});

}  // namespace fedcd
