#pragma once

#include <string>

#include "fedcd/data.hpp"
#include "fedcd/matrix.hpp"
#include "fedcd/rng.hpp"

namespace fedcd {

enum class ModelKind { Ncd, Dina };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Interaction-function weights for the neural model, embedding dimension D:
//   w_disc D x 1, w_fc1 D x 4D, w_fc2 4D x 2D, w_fc3 2D x 1.
// No bias terms. With non-negativity clipping enabled the fc blocks stay
// >= 0 after every optimizer step.
struct DiagnosticParams {
    Matrix w_disc;
    Matrix w_fc1;
    Matrix w_fc2;
    Matrix w_fc3;

    bool empty() const { return w_disc.empty(); }
    bool operator==(const DiagnosticParams&) const = default;
};

// Per-client model parameters. The three blocks are deliberately separate:
// `exercise` is the globally shared block, `student` and `diagnostic` are the
// private ones and never leave the client under full personalization.
struct ModelParams {
    ModelKind kind = ModelKind::Ncd;
    Matrix student;               // N_t x D
    Matrix exercise;              // M x D; for dina, M x 2 guess/slip pre-activations
    DiagnosticParams diagnostic;  // empty for dina

    int dim() const { return static_cast<int>(student.cols()); }
    bool operator==(const ModelParams&) const = default;
};

// All entries i.i.d. uniform in [-0.1, 0.1], drawn in block order
// student, exercise, w_disc, w_fc1, w_fc2, w_fc3.
ModelParams init_params(ModelKind kind, int num_students, int num_exercises, int dim, Rng& rng);

ModelParams zeros_like(const ModelParams& params);

double sigmoid(double x);

// Activations kept by the forward pass for the analytic backward pass.
struct ForwardCache {
    int student = 0;
    int exercise = 0;
    double prediction = 0.0;
    // ncd
    std::vector<double> f_s;     // sigma(h_S)
    std::vector<double> f_diff;  // sigma(h_E)
    double f_disc = 0.0;         // sigma(h_E . w_disc)
    std::vector<double> y;       // mask (f_s - f_diff) * f_disc
    std::vector<double> a1;      // sigma(y W1)
    std::vector<double> a2;      // sigma(a1 W2)
    // dina
    std::vector<double> sig_theta;  // sigma(student row), required concepts only contribute
    double guess = 0.0;             // 0.5 sigma(ghat)
    double slip = 0.0;              // 0.5 sigma(shat)
    double eta = 0.0;               // prod over required concepts of sigma(theta)
};

// Neural diagnosis forward pass:
//   f_S = sigma(h_S), f_diff = sigma(h_E), f_disc = sigma(h_E w_disc)
//   y = h_C (.) (f_S - f_diff) * f_disc
//   p = sigma(sigma(sigma(y W1) W2) W3)
// h_C is the exercise's Q-matrix row, which zeroes untested concepts.
double ncd_forward(const ModelParams& params, const QMatrix& q, int student, int exercise,
                   ForwardCache* cache = nullptr);

// Differentiable slip/guess model:
//   g = 0.5 sigma(ghat), s = 0.5 sigma(shat)
//   eta = prod over required concepts of sigma(theta_ik)
//   p = g + (1 - s - g) eta
double dina_forward(const ModelParams& params, const QMatrix& q, int student, int exercise,
                    ForwardCache* cache = nullptr);

double forward(const ModelParams& params, const QMatrix& q, int student, int exercise,
               ForwardCache* cache = nullptr);

// -(r log p + (1-r) log(1-p)), with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(double prediction, int label);

// Adds the exact gradient of bce_loss(forward(...)) for one example into
// `grad` (params-shaped). Rows not touched by the example are left alone.
void accumulate_backward(const ModelParams& params, const QMatrix& q, const ForwardCache& cache,
                         int label, ModelParams& grad);

ModelParams backward(const ModelParams& params, const QMatrix& q, const ForwardCache& cache,
                     int label);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    ModelParams m;  // first-moment accumulators, params-shaped
    ModelParams v;  // second-moment accumulators
};

AdamState init_adam(const ModelParams& params, double learning_rate = 1e-3);

// Standard Adam update with bias correction. When clip_fc_nonneg is set
// (ncd only) negative fc entries are zeroed after the step.
void adam_step(AdamState& state, ModelParams& params, const ModelParams& grad,
               bool clip_fc_nonneg);

struct TrainOptions {
    int epochs = 5;
    int batch_size = 128;
    bool clip_fc_nonneg = true;
};

// Mini-batch training over the client's train logs, reshuffled per epoch from
// the client's own stream. Returns the mean per-example loss of the final
// epoch, which the server uses as this client's loss.
double train_local(ModelParams& params, AdamState& optimizer, const ClientDataset& dataset,
                   const QMatrix& q, const TrainOptions& options, Rng& rng);

}  // namespace fedcd
