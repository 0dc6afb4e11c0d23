#include "fedcd/federation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>

#include "fedcd/checkpoint.hpp"
#include "fedcd/error.hpp"

namespace fedcd {

std::string to_string(Aggregator a) {
    switch (a) {
        case Aggregator::FairnessSoftmax: return "fairness_softmax";
        case Aggregator::UniformAverage: return "uniform";
        case Aggregator::DataSizeAverage: return "data_size";
        case Aggregator::AttentionDistance: return "attention_distance";
    }
    return "?";
}

Aggregator aggregator_from_string(const std::string& name) {
    if (name == "fairness_softmax") return Aggregator::FairnessSoftmax;
    if (name == "uniform") return Aggregator::UniformAverage;
    if (name == "data_size") return Aggregator::DataSizeAverage;
    if (name == "attention_distance") return Aggregator::AttentionDistance;
    throw Error("config", "unknown aggregator '" + name + "'");
}

std::string to_string(Personalization p) {
    switch (p) {
        case Personalization::Full: return "full";
        case Personalization::NoPdp: return "no_pdp";
        case Personalization::None: return "none";
    }
    return "?";
}

Personalization personalization_from_string(const std::string& name) {
    if (name == "full") return Personalization::Full;
    if (name == "no_pdp") return Personalization::NoPdp;
    if (name == "none") return Personalization::None;
    throw Error("config", "unknown personalization mode '" + name + "'");
}

namespace {

// Softmax with the usual max-shift for stability. The normalizer sums the
// exp terms in ascending value order, which makes the result independent of
// client ordering (permutation equivariance is tested to the last bit).
std::vector<double> stable_softmax(const std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> exps(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) exps[i] = std::exp(logits[i] - mx);
    std::vector<double> sorted = exps;
    std::sort(sorted.begin(), sorted.end());
    double norm = 0.0;
    for (double e : sorted) norm += e;
    for (double& e : exps) e /= norm;
    return exps;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

std::vector<double> compute_weights(const StrategyConfig& strategy,
                                    const std::vector<double>& losses,
                                    const std::vector<long>& data_sizes,
                                    const std::vector<const Matrix*>& uploads,
                                    const Matrix& previous_global) {
    const std::size_t n = losses.size();
    if (n == 0) throw Error("aggregate", "no clients to weight");
    if (data_sizes.size() != n || uploads.size() != n)
        throw Error("aggregate", "weight inputs disagree on client count");
    for (double loss : losses)
        if (!std::isfinite(loss)) throw Error("aggregate", "non-finite client loss");

    switch (strategy.aggregator) {
        case Aggregator::FairnessSoftmax: {
            std::vector<double> logits(n);
            for (std::size_t i = 0; i < n; ++i) logits[i] = strategy.gamma * losses[i];
            return stable_softmax(logits);
        }
        case Aggregator::UniformAverage:
            return std::vector<double>(n, 1.0 / static_cast<double>(n));
        case Aggregator::DataSizeAverage: {
            long total = 0;
            for (long s : data_sizes) {
                if (s <= 0) throw Error("aggregate", "data sizes must be positive");
                total += s;
            }
            std::vector<double> w(n);
            for (std::size_t i = 0; i < n; ++i)
                w[i] = static_cast<double>(data_sizes[i]) / static_cast<double>(total);
            return w;
        }
        case Aggregator::AttentionDistance: {
            std::vector<double> logits(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (!uploads[i] || !uploads[i]->same_shape(previous_global))
                    throw Error("aggregate", "upload shape mismatch for attention weights");
                logits[i] = -frobenius_distance(*uploads[i], previous_global);
            }
            return stable_softmax(logits);
        }
    }
    throw Error("aggregate", "unreachable aggregator");
}

Matrix apply_dp_noise(const Matrix& block, double delta, Rng& rng) {
    if (delta < 0.0 || !std::isfinite(delta))
        throw Error("aggregate", "dp noise scale must be finite and >= 0");
    Matrix out = block;
    if (delta == 0.0) return out;
    for (double& x : out.data()) x += rng.laplace(delta);
    return out;
}

void aggregate(ServerState& server, const std::vector<ClientUpload>& uploads) {
    if (uploads.empty()) throw Error("aggregate", "no uploads");
    std::vector<const ClientUpload*> ordered;
    ordered.reserve(uploads.size());
    for (const auto& upload : uploads) ordered.push_back(&upload);
    std::sort(ordered.begin(), ordered.end(),
              [](const ClientUpload* a, const ClientUpload* b) { return a->school < b->school; });
    for (std::size_t i = 1; i < ordered.size(); ++i)
        if (ordered[i]->school == ordered[i - 1]->school)
            throw Error("aggregate", "duplicate upload for school " + std::to_string(ordered[i]->school));

    std::vector<double> losses;
    std::vector<long> sizes;
    std::vector<const Matrix*> blocks;
    for (const auto* upload : ordered) {
        if (!upload->exercise_block.same_shape(server.global_exercise))
            throw Error("aggregate", "exercise block shape mismatch from school " +
                                         std::to_string(upload->school));
        losses.push_back(upload->client_loss);
        sizes.push_back(upload->data_size);
        blocks.push_back(&upload->exercise_block);
    }

    const auto weights =
        compute_weights(server.strategy, losses, sizes, blocks, server.global_exercise);

    auto weighted_sum = [&](auto&& block_of) {
        Matrix acc(block_of(*ordered.front()).rows(), block_of(*ordered.front()).cols(), 0.0);
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            const Matrix& block = block_of(*ordered[i]);
            for (std::size_t k = 0; k < acc.size(); ++k)
                acc.data()[k] += weights[i] * block.data()[k];
        }
        return acc;
    };

    Matrix mixed = weighted_sum([](const ClientUpload& u) -> const Matrix& { return u.exercise_block; });
    const double step = server.strategy.aggregator == Aggregator::AttentionDistance
                            ? server.strategy.attention_step
                            : 1.0;
    Matrix next = mixed;
    if (step != 1.0) {
        for (std::size_t k = 0; k < next.size(); ++k)
            next.data()[k] = server.global_exercise.data()[k] +
                             step * (mixed.data()[k] - server.global_exercise.data()[k]);
    }
    server.previous_global = server.global_exercise;
    server.global_exercise = std::move(next);

    if (server.global_diagnostic) {
        for (const auto* upload : ordered)
            if (!upload->diagnostic_block)
                throw Error("aggregate", "shared-diagnostic mode but school " +
                                             std::to_string(upload->school) + " sent none");
        DiagnosticParams agg;
        agg.w_disc = weighted_sum([](const ClientUpload& u) -> const Matrix& { return u.diagnostic_block->w_disc; });
        agg.w_fc1 = weighted_sum([](const ClientUpload& u) -> const Matrix& { return u.diagnostic_block->w_fc1; });
        agg.w_fc2 = weighted_sum([](const ClientUpload& u) -> const Matrix& { return u.diagnostic_block->w_fc2; });
        agg.w_fc3 = weighted_sum([](const ClientUpload& u) -> const Matrix& { return u.diagnostic_block->w_fc3; });
        server.global_diagnostic = std::move(agg);
    }
    if (server.global_student) {
        // Student rows are owned by single clients; each row passes through
        // from its owner rather than being shrunk by a global average.
        for (const auto* upload : ordered) {
            if (!upload->student_rows)
                throw Error("aggregate", "shared-student mode but school " +
                                             std::to_string(upload->school) + " sent none");
            const Matrix& rows = *upload->student_rows;
            for (std::size_t local = 0; local < upload->student_globals.size(); ++local) {
                const int global = upload->student_globals[local];
                for (std::size_t c = 0; c < rows.cols(); ++c)
                    (*server.global_student)(global, c) = rows(local, c);
            }
        }
    }

    server.last_weights = weights;
    ++server.round;
}

namespace {

void broadcast_into(ClientState& client, const ServerState& server) {
    client.params.exercise = server.global_exercise;
    if (server.global_diagnostic) client.params.diagnostic = *server.global_diagnostic;
    if (server.global_student) {
        for (std::size_t local = 0; local < client.dataset.local_to_global.size(); ++local) {
            const int global = client.dataset.local_to_global[local];
            for (std::size_t c = 0; c < client.params.student.cols(); ++c)
                client.params.student(local, c) = (*server.global_student)(global, c);
        }
    }
}

ClientUpload make_upload(ClientState& client, double mean_loss, const StrategyConfig& strategy) {
    ClientUpload upload;
    upload.school = client.school;
    upload.data_size = static_cast<long>(client.dataset.train_logs.size());
    upload.client_loss = strategy.loss_mode == ClientLossMode::SumEpoch
                             ? mean_loss * static_cast<double>(upload.data_size)
                             : mean_loss;
    upload.exercise_block = apply_dp_noise(client.params.exercise, strategy.dp_scale, client.rng);
    if (strategy.personalization != Personalization::Full)
        upload.diagnostic_block = client.params.diagnostic;
    if (strategy.personalization == Personalization::None) {
        upload.student_rows = client.params.student;
        upload.student_globals = client.dataset.local_to_global;
    }
    return upload;
}

}  // namespace

std::vector<double> run_round(ServerState& server, std::vector<ClientState>& clients,
                              const QMatrix& q, const FederationOptions& options) {
    if (clients.empty()) throw Error("train", "no clients");
    const TrainOptions train_options{options.local_epochs, options.batch_size,
                                     options.clip_fc_nonneg};

    std::vector<ClientUpload> uploads(clients.size());
    std::vector<double> losses(clients.size());

    auto client_task = [&](std::size_t idx) {
        ClientState& client = clients[idx];
        broadcast_into(client, server);
        const double loss =
            train_local(client.params, client.optimizer, client.dataset, q, train_options, client.rng);
        losses[idx] = loss;
        uploads[idx] = make_upload(client, loss, server.strategy);
    };

    if (options.parallel_clients && clients.size() > 1) {
        std::vector<std::future<void>> tasks;
        tasks.reserve(clients.size());
        for (std::size_t i = 0; i < clients.size(); ++i)
            tasks.push_back(std::async(std::launch::async, client_task, i));
        for (auto& task : tasks) task.get();
    } else {
        for (std::size_t i = 0; i < clients.size(); ++i) client_task(i);
    }

    aggregate(server, uploads);
    return losses;
}

ProtocolResult run_protocol(const EntityCatalog& catalog, std::vector<ClientDataset> datasets,
                            const QMatrix& q, ModelKind kind, const StrategyConfig& strategy,
                            const FederationOptions& options, std::uint64_t seed) {
    if (options.rounds < 1) throw Error("train", "rounds must be >= 1");
    if (datasets.empty()) throw Error("train", "no client datasets");
    std::sort(datasets.begin(), datasets.end(),
              [](const ClientDataset& a, const ClientDataset& b) { return a.school < b.school; });

    const int dim = q.num_concepts();

    // One shared random template, broadcast to everyone. Clients slice their
    // own rows out of the template's full student matrix.
    Rng init_rng(mix_seed(seed, streams::kServerInit));
    const ModelParams tmpl = init_params(kind, catalog.num_students, q.num_exercises(), dim, init_rng);

    ProtocolResult result;
    result.server.global_exercise = tmpl.exercise;
    result.server.previous_global = tmpl.exercise;
    result.server.strategy = strategy;
    if (strategy.personalization != Personalization::Full)
        result.server.global_diagnostic = tmpl.diagnostic;
    if (strategy.personalization == Personalization::None)
        result.server.global_student = tmpl.student;

    result.clients.reserve(datasets.size());
    for (auto& dataset : datasets) {
        ModelParams params;
        params.kind = kind;
        params.student = Matrix(dataset.local_to_global.size(), dim);
        for (std::size_t local = 0; local < dataset.local_to_global.size(); ++local) {
            const int global = dataset.local_to_global[local];
            for (int c = 0; c < dim; ++c) params.student(local, c) = tmpl.student(global, c);
        }
        params.exercise = tmpl.exercise;
        params.diagnostic = tmpl.diagnostic;
        const int school = dataset.school;
        AdamState optimizer = init_adam(params, options.learning_rate);
        result.clients.push_back(ClientState{school, std::move(params), std::move(optimizer),
                                             std::move(dataset),
                                             Rng(mix_seed(seed, streams::kClientBase + school))});
    }

    for (int round = 1; round <= options.rounds; ++round) {
        const auto losses = run_round(result.server, result.clients, q, options);
        for (std::size_t i = 0; i < result.clients.size(); ++i)
            result.trace.push_back({round, result.clients[i].school, losses[i],
                                    result.server.last_weights[i]});
        if (options.checkpoint_every > 0 && round % options.checkpoint_every == 0) {
            namespace fs = std::filesystem;
            const auto dir = fs::path(options.checkpoint_dir) / ("round_" + std::to_string(round));
            save_round_checkpoints(result.server, result.clients, q.num_concepts(), dir.string());
        }
    }

    // Final distribution so evaluation sees personalized + shared parameters.
    for (auto& client : result.clients) broadcast_into(client, result.server);
    return result;
}

ModelParams run_centralized(const ClientDataset& pooled, const QMatrix& q, ModelKind kind,
                            int epochs, int batch_size, double learning_rate,
                            bool clip_fc_nonneg, std::uint64_t seed) {
    const int dim = q.num_concepts();
    Rng init_rng(mix_seed(seed, streams::kServerInit));
    ModelParams params =
        init_params(kind, pooled.num_local_students(), q.num_exercises(), dim, init_rng);
    AdamState optimizer = init_adam(params, learning_rate);
    Rng rng(mix_seed(seed, streams::kClientBase + pooled.school));
    const TrainOptions options{epochs, batch_size, clip_fc_nonneg};
    train_local(params, optimizer, pooled, q, options, rng);
    return params;
}

void write_loss_trace(const std::vector<TraceRow>& trace, const EntityCatalog& catalog,
                      const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("io", "cannot write loss trace: " + path);
    f << "round,school_id,client_loss,aggregation_weight\n";
    char buffer[64];
    for (const auto& row : trace) {
        f << row.round << ',' << catalog.school_ids[row.school] << ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", row.client_loss);
        f << buffer << ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", row.weight);
        f << buffer << '\n';
    }
}

void save_round_checkpoints(const ServerState& server, const std::vector<ClientState>& clients,
                            int num_concepts, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string kind = clients.empty() ? "ncd" : to_string(clients.front().params.kind);

    Checkpoint sc;
    sc.entity = "server";
    sc.kind = kind;
    sc.num_students = server.global_student ? static_cast<int>(server.global_student->rows()) : 0;
    sc.num_exercises = static_cast<int>(server.global_exercise.rows());
    sc.dim = static_cast<int>(server.global_exercise.cols());
    sc.num_concepts = num_concepts;
    sc.blocks.push_back({"exercise", server.global_exercise});
    if (server.global_diagnostic) {
        sc.blocks.push_back({"disc", server.global_diagnostic->w_disc});
        sc.blocks.push_back({"fc1", server.global_diagnostic->w_fc1});
        sc.blocks.push_back({"fc2", server.global_diagnostic->w_fc2});
        sc.blocks.push_back({"fc3", server.global_diagnostic->w_fc3});
    }
    if (server.global_student) sc.blocks.push_back({"student", *server.global_student});
    save_checkpoint(sc, (fs::path(dir) / "server.ckpt").string());

    for (const auto& client : clients) {
        Checkpoint cc = params_checkpoint(client.params, num_concepts);
        cc.entity = "client";
        save_checkpoint(cc, (fs::path(dir) / ("client_" + std::to_string(client.school) + ".ckpt")).string());
    }
}

}  // namespace fedcd
