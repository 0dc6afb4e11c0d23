#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedcd/data.hpp"
#include "fedcd/model.hpp"
#include "fedcd/rng.hpp"

namespace fedcd {

enum class Aggregator {
    FairnessSoftmax,    // softmax over gamma-scaled client losses
    UniformAverage,     // 1/T each
    DataSizeAverage,    // |D_t| / sum |D_j|
    AttentionDistance,  // softmax over negated distance to the previous global
};

enum class Personalization {
    Full,   // student + diagnostic stay on the client
    NoPdp,  // diagnostic also shared and aggregated
    None,   // everything shared (plain federated-averaging mode)
};

enum class ClientLossMode {
    MeanEpoch,  // mean per-example loss of the final local epoch (default)
    SumEpoch,   // literal sum; overflows the softmax for large clients
};

std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& name);
std::string to_string(Personalization p);
Personalization personalization_from_string(const std::string& name);

struct StrategyConfig {
    Personalization personalization = Personalization::Full;
    Aggregator aggregator = Aggregator::FairnessSoftmax;
    double gamma = 0.1;           // loss-weight sharpness
    double dp_scale = 0.0;        // Laplace noise scale on uploads, 0 disables
    double attention_step = 1.0;  // blend toward the weighted sum; 1 = replace
    ClientLossMode loss_mode = ClientLossMode::MeanEpoch;
};

// One school's in-memory state. The rng stream is private to this client so
// clients can train concurrently with reproducible results.
struct ClientState {
    int school = 0;
    ModelParams params;
    AdamState optimizer;
    ClientDataset dataset;
    Rng rng;
};

// What leaves a client each round. Under full personalization only the
// exercise block and the scalar loss are populated; the optional blocks exist
// for the ablation modes that share more.
struct ClientUpload {
    int school = 0;
    Matrix exercise_block;  // post-noise copy
    double client_loss = 0.0;
    long data_size = 0;
    std::optional<DiagnosticParams> diagnostic_block;
    std::optional<Matrix> student_rows;  // local-order rows, paired with student_globals
    std::vector<int> student_globals;
};

struct ServerState {
    Matrix global_exercise;
    Matrix previous_global;  // value the clients trained from last round
    std::optional<DiagnosticParams> global_diagnostic;  // no_pdp / none modes
    std::optional<Matrix> global_student;               // none mode only
    int round = 0;
    StrategyConfig strategy;
    std::vector<double> last_weights;  // per school, for the loss trace
};

// Aggregation weights, non-negative and summing to 1. Softmax normalizers sum
// exp terms in value order, so permuting clients permutes weights exactly.
std::vector<double> compute_weights(const StrategyConfig& strategy,
                                    const std::vector<double>& losses,
                                    const std::vector<long>& data_sizes,
                                    const std::vector<const Matrix*>& uploads,
                                    const Matrix& previous_global);

// Entry-wise i.i.d. Laplace(0, delta) noise; delta = 0 returns the input
// untouched without consuming the stream.
Matrix apply_dp_noise(const Matrix& block, double delta, Rng& rng);

// Weighted-sums the uploaded exercise blocks into a new global, updates the
// shared ablation blocks when present, advances the round counter.
void aggregate(ServerState& server, const std::vector<ClientUpload>& uploads);

struct FederationOptions {
    int rounds = 100;
    int local_epochs = 5;
    int batch_size = 128;
    double learning_rate = 1e-3;
    bool clip_fc_nonneg = true;
    bool parallel_clients = false;
    int checkpoint_every = 0;  // 0 disables; otherwise every n-th round
    std::string checkpoint_dir;
};

struct TraceRow {
    int round = 0;
    int school = 0;
    double client_loss = 0.0;
    double weight = 0.0;
};

// One communication round: broadcast, local training, upload (with noise),
// aggregate. Returns the per-client losses in school order.
std::vector<double> run_round(ServerState& server, std::vector<ClientState>& clients,
                              const QMatrix& q, const FederationOptions& options);

struct ProtocolResult {
    ServerState server;
    std::vector<ClientState> clients;
    std::vector<TraceRow> trace;
};

// Full protocol: a shared random parameter template is drawn on the server
// and broadcast, then `rounds` rounds run. Private blocks persist on each
// client across rounds; a final broadcast leaves every client holding the
// latest shared parameters for evaluation.
ProtocolResult run_protocol(const EntityCatalog& catalog, std::vector<ClientDataset> datasets,
                            const QMatrix& q, ModelKind kind, const StrategyConfig& strategy,
                            const FederationOptions& options, std::uint64_t seed);

// Baseline without federation: one pooled client trained for `epochs` epochs
// under the same seeding scheme, so a single-client protocol run with one
// round reproduces it exactly.
ModelParams run_centralized(const ClientDataset& pooled, const QMatrix& q, ModelKind kind,
                            int epochs, int batch_size, double learning_rate,
                            bool clip_fc_nonneg, std::uint64_t seed);

// Writes the loss trace as delimited text: round, school_id, client_loss,
// aggregation_weight.
void write_loss_trace(const std::vector<TraceRow>& trace, const EntityCatalog& catalog,
                      const std::string& path);

// Serializes server / client state using the checkpoint format, one file per
// entity: server.ckpt and client_<school>.ckpt under dir.
void save_round_checkpoints(const ServerState& server, const std::vector<ClientState>& clients,
                            int num_concepts, const std::string& dir);

}  // namespace fedcd
