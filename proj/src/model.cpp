#include "fedcd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcd/error.hpp"

namespace fedcd {

namespace {
constexpr double kLossClip = 1e-7;

void check_indices(const ModelParams& params, const QMatrix& q, int student, int exercise) {
    if (student < 0 || student >= static_cast<int>(params.student.rows()))
        throw Error("model", "student index out of range: " + std::to_string(student));
    if (exercise < 0 || exercise >= static_cast<int>(params.exercise.rows()))
        throw Error("model", "exercise index out of range: " + std::to_string(exercise));
    if (params.kind == ModelKind::Ncd && params.dim() != q.num_concepts())
        throw Error("model", "ncd requires embedding dimension equal to the concept count");
    if (params.kind == ModelKind::Dina && params.dim() != q.num_concepts())
        throw Error("model", "dina requires embedding dimension equal to the concept count");
}
}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::Ncd ? "ncd" : "dina"; }

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "ncd") return ModelKind::Ncd;
    if (name == "dina") return ModelKind::Dina;
    throw Error("config", "unknown model kind '" + name + "' (expected ncd or dina)");
}

ModelParams init_params(ModelKind kind, int num_students, int num_exercises, int dim, Rng& rng) {
    auto draw = [&rng](Matrix& m) {
        for (double& x : m.data()) x = rng.uniform(-0.1, 0.1);
    };
    ModelParams params;
    params.kind = kind;
    params.student = Matrix(num_students, dim);
    draw(params.student);
    if (kind == ModelKind::Ncd) {
        params.exercise = Matrix(num_exercises, dim);
        draw(params.exercise);
        params.diagnostic.w_disc = Matrix(dim, 1);
        params.diagnostic.w_fc1 = Matrix(dim, 4 * dim);
        params.diagnostic.w_fc2 = Matrix(4 * dim, 2 * dim);
        params.diagnostic.w_fc3 = Matrix(2 * dim, 1);
        draw(params.diagnostic.w_disc);
        draw(params.diagnostic.w_fc1);
        draw(params.diagnostic.w_fc2);
        draw(params.diagnostic.w_fc3);
    } else {
        params.exercise = Matrix(num_exercises, 2);  // guess, slip pre-activations
        draw(params.exercise);
    }
    return params;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z;
    z.kind = params.kind;
    z.student = Matrix(params.student.rows(), params.student.cols());
    z.exercise = Matrix(params.exercise.rows(), params.exercise.cols());
    if (!params.diagnostic.empty()) {
        z.diagnostic.w_disc = Matrix(params.diagnostic.w_disc.rows(), params.diagnostic.w_disc.cols());
        z.diagnostic.w_fc1 = Matrix(params.diagnostic.w_fc1.rows(), params.diagnostic.w_fc1.cols());
        z.diagnostic.w_fc2 = Matrix(params.diagnostic.w_fc2.rows(), params.diagnostic.w_fc2.cols());
        z.diagnostic.w_fc3 = Matrix(params.diagnostic.w_fc3.rows(), params.diagnostic.w_fc3.cols());
    }
    return z;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double ncd_forward(const ModelParams& params, const QMatrix& q, int student, int exercise,
                   ForwardCache* cache) {
    check_indices(params, q, student, exercise);
    const int d = params.dim();
    const auto h_s = params.student.row(student);
    const auto h_e = params.exercise.row(exercise);

    std::vector<double> f_s(d), f_diff(d), y(d);
    double disc_in = 0.0;
    for (int k = 0; k < d; ++k) {
        f_s[k] = sigmoid(h_s[k]);
        f_diff[k] = sigmoid(h_e[k]);
        disc_in += h_e[k] * params.diagnostic.w_disc(k, 0);
    }
    const double f_disc = sigmoid(disc_in);
    for (int k = 0; k < d; ++k) {
        const double mask = q.has_concept(exercise, k) ? 1.0 : 0.0;
        y[k] = mask * (f_s[k] - f_diff[k]) * f_disc;
    }

    const int d1 = 4 * d, d2 = 2 * d;
    std::vector<double> a1(d1), a2(d2);
    for (int j = 0; j < d1; ++j) {
        double z = 0.0;
        for (int k = 0; k < d; ++k) z += y[k] * params.diagnostic.w_fc1(k, j);
        a1[j] = sigmoid(z);
    }
    for (int j = 0; j < d2; ++j) {
        double z = 0.0;
        for (int k = 0; k < d1; ++k) z += a1[k] * params.diagnostic.w_fc2(k, j);
        a2[j] = sigmoid(z);
    }
    double z3 = 0.0;
    for (int k = 0; k < d2; ++k) z3 += a2[k] * params.diagnostic.w_fc3(k, 0);
    const double prediction = sigmoid(z3);

    if (cache) {
        cache->student = student;
        cache->exercise = exercise;
        cache->prediction = prediction;
        cache->f_s = std::move(f_s);
        cache->f_diff = std::move(f_diff);
        cache->f_disc = f_disc;
        cache->y = std::move(y);
        cache->a1 = std::move(a1);
        cache->a2 = std::move(a2);
    }
    return prediction;
}

double dina_forward(const ModelParams& params, const QMatrix& q, int student, int exercise,
                    ForwardCache* cache) {
    check_indices(params, q, student, exercise);
    const int d = params.dim();
    const double guess = 0.5 * sigmoid(params.exercise(exercise, 0));
    const double slip = 0.5 * sigmoid(params.exercise(exercise, 1));

    std::vector<double> sig_theta(d, 0.0);
    double eta = 1.0;
    for (int k = 0; k < d; ++k) {
        if (q.has_concept(exercise, k)) {
            sig_theta[k] = sigmoid(params.student(student, k));
            eta *= sig_theta[k];
        }
    }
    const double prediction = guess + (1.0 - slip - guess) * eta;

    if (cache) {
        cache->student = student;
        cache->exercise = exercise;
        cache->prediction = prediction;
        cache->sig_theta = std::move(sig_theta);
        cache->guess = guess;
        cache->slip = slip;
        cache->eta = eta;
    }
    return prediction;
}

double forward(const ModelParams& params, const QMatrix& q, int student, int exercise,
               ForwardCache* cache) {
    return params.kind == ModelKind::Ncd ? ncd_forward(params, q, student, exercise, cache)
                                         : dina_forward(params, q, student, exercise, cache);
}

double bce_loss(double prediction, int label) {
    const double p = std::clamp(prediction, kLossClip, 1.0 - kLossClip);
    return -(label * std::log(p) + (1 - label) * std::log(1.0 - p));
}

namespace {

void backward_ncd(const ModelParams& params, const QMatrix& q, const ForwardCache& cache,
                  int label, ModelParams& grad) {
    const int d = params.dim();
    const int d1 = 4 * d, d2 = 2 * d;
    const int i = cache.student, j = cache.exercise;

    // d loss / d z3 for sigmoid output under cross-entropy.
    const double dz3 = cache.prediction - label;

    std::vector<double> da2(d2), dz2(d2), da1(d1), dz1(d1), dy(d);
    for (int k = 0; k < d2; ++k) {
        da2[k] = dz3 * params.diagnostic.w_fc3(k, 0);
        dz2[k] = da2[k] * cache.a2[k] * (1.0 - cache.a2[k]);
        grad.diagnostic.w_fc3(k, 0) += cache.a2[k] * dz3;
    }
    for (int k = 0; k < d1; ++k) {
        double acc = 0.0;
        for (int c = 0; c < d2; ++c) acc += dz2[c] * params.diagnostic.w_fc2(k, c);
        da1[k] = acc;
        dz1[k] = acc * cache.a1[k] * (1.0 - cache.a1[k]);
    }
    for (int k = 0; k < d1; ++k)
        for (int c = 0; c < d2; ++c) grad.diagnostic.w_fc2(k, c) += cache.a1[k] * dz2[c];
    for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        for (int c = 0; c < d1; ++c) acc += dz1[c] * params.diagnostic.w_fc1(k, c);
        dy[k] = acc;
    }
    for (int k = 0; k < d; ++k)
        for (int c = 0; c < d1; ++c) grad.diagnostic.w_fc1(k, c) += cache.y[k] * dz1[c];

    // y_k = mask_k (f_s - f_diff)_k f_disc
    double d_fdisc = 0.0;
    const auto h_e = params.exercise.row(j);
    for (int k = 0; k < d; ++k) {
        const double mask = q.has_concept(j, k) ? 1.0 : 0.0;
        const double d_fs = dy[k] * mask * cache.f_disc;
        d_fdisc += dy[k] * mask * (cache.f_s[k] - cache.f_diff[k]);
        grad.student(i, k) += d_fs * cache.f_s[k] * (1.0 - cache.f_s[k]);
        grad.exercise(j, k) += -d_fs * cache.f_diff[k] * (1.0 - cache.f_diff[k]);
    }
    const double d_disc_in = d_fdisc * cache.f_disc * (1.0 - cache.f_disc);
    for (int k = 0; k < d; ++k) {
        grad.exercise(j, k) += d_disc_in * params.diagnostic.w_disc(k, 0);
        grad.diagnostic.w_disc(k, 0) += d_disc_in * h_e[k];
    }
}

void backward_dina(const ModelParams& params, const QMatrix& q, const ForwardCache& cache,
                   int label, ModelParams& grad) {
    const int i = cache.student, j = cache.exercise;
    const double p = std::clamp(cache.prediction, kLossClip, 1.0 - kLossClip);
    const double dp = (p - label) / (p * (1.0 - p));

    const double d_guess = dp * (1.0 - cache.eta);
    const double d_slip = dp * -cache.eta;
    const double d_eta = dp * (1.0 - cache.slip - cache.guess);

    const double sg = sigmoid(params.exercise(j, 0));
    const double ss = sigmoid(params.exercise(j, 1));
    grad.exercise(j, 0) += d_guess * 0.5 * sg * (1.0 - sg);
    grad.exercise(j, 1) += d_slip * 0.5 * ss * (1.0 - ss);

    // d eta / d theta_ik = eta (1 - sigma(theta_ik)) for required concepts.
    for (int k = 0; k < params.dim(); ++k)
        if (q.has_concept(j, k))
            grad.student(i, k) += d_eta * cache.eta * (1.0 - cache.sig_theta[k]);
}

}  // namespace

void accumulate_backward(const ModelParams& params, const QMatrix& q, const ForwardCache& cache,
                         int label, ModelParams& grad) {
    if (params.kind == ModelKind::Ncd)
        backward_ncd(params, q, cache, label, grad);
    else
        backward_dina(params, q, cache, label, grad);
}

ModelParams backward(const ModelParams& params, const QMatrix& q, const ForwardCache& cache,
                     int label) {
    ModelParams grad = zeros_like(params);
    accumulate_backward(params, q, cache, label, grad);
    return grad;
}

AdamState init_adam(const ModelParams& params, double learning_rate) {
    AdamState state;
    state.learning_rate = learning_rate;
    state.m = zeros_like(params);
    state.v = zeros_like(params);
    return state;
}

namespace {

void adam_update_block(Matrix& theta, Matrix& m, Matrix& v, const Matrix& g, const AdamState& s,
                       double bc1, double bc2) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double& mi = m.data()[i];
        double& vi = v.data()[i];
        const double gi = g.data()[i];
        mi = s.beta1 * mi + (1.0 - s.beta1) * gi;
        vi = s.beta2 * vi + (1.0 - s.beta2) * gi * gi;
        const double m_hat = mi / bc1;
        const double v_hat = vi / bc2;
        theta.data()[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

void clip_nonneg(Matrix& m) {
    for (double& x : m.data())
        if (x < 0.0) x = 0.0;
}

}  // namespace

void adam_step(AdamState& state, ModelParams& params, const ModelParams& grad,
               bool clip_fc_nonneg) {
    if (!grad.student.same_shape(params.student) || !grad.exercise.same_shape(params.exercise))
        throw Error("model", "gradient shapes do not match parameters");
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    adam_update_block(params.student, state.m.student, state.v.student, grad.student, state, bc1, bc2);
    adam_update_block(params.exercise, state.m.exercise, state.v.exercise, grad.exercise, state, bc1, bc2);
    if (!params.diagnostic.empty()) {
        adam_update_block(params.diagnostic.w_disc, state.m.diagnostic.w_disc,
                          state.v.diagnostic.w_disc, grad.diagnostic.w_disc, state, bc1, bc2);
        adam_update_block(params.diagnostic.w_fc1, state.m.diagnostic.w_fc1,
                          state.v.diagnostic.w_fc1, grad.diagnostic.w_fc1, state, bc1, bc2);
        adam_update_block(params.diagnostic.w_fc2, state.m.diagnostic.w_fc2,
                          state.v.diagnostic.w_fc2, grad.diagnostic.w_fc2, state, bc1, bc2);
        adam_update_block(params.diagnostic.w_fc3, state.m.diagnostic.w_fc3,
                          state.v.diagnostic.w_fc3, grad.diagnostic.w_fc3, state, bc1, bc2);
        if (clip_fc_nonneg) {
            clip_nonneg(params.diagnostic.w_fc1);
            clip_nonneg(params.diagnostic.w_fc2);
            clip_nonneg(params.diagnostic.w_fc3);
        }
    }
}

double train_local(ModelParams& params, AdamState& optimizer, const ClientDataset& dataset,
                   const QMatrix& q, const TrainOptions& options, Rng& rng) {
    if (options.epochs < 1) throw Error("train", "epochs must be >= 1");
    if (options.batch_size < 1) throw Error("train", "batch_size must be >= 1");
    if (dataset.train_logs.empty())
        throw Error("train", "client " + std::to_string(dataset.school) + " has no training logs");

    std::vector<std::size_t> order(dataset.train_logs.size());

    ModelParams grad = zeros_like(params);
    ForwardCache cache;
    double final_epoch_loss = 0.0;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        // Fresh identity permutation before each shuffle: the visit order then
        // depends only on the stream, so a run split across rounds walks the
        // same trajectory as one long run.
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch_end =
                std::min(done + static_cast<std::size_t>(options.batch_size), order.size());
            const double batch_n = static_cast<double>(batch_end - done);

            grad.student.fill(0.0);
            grad.exercise.fill(0.0);
            if (!grad.diagnostic.empty()) {
                grad.diagnostic.w_disc.fill(0.0);
                grad.diagnostic.w_fc1.fill(0.0);
                grad.diagnostic.w_fc2.fill(0.0);
                grad.diagnostic.w_fc3.fill(0.0);
            }
            for (std::size_t idx = done; idx < batch_end; ++idx) {
                const ResponseLog& log = dataset.train_logs[order[idx]];
                const int local = dataset.local_index(log.student);
                forward(params, q, local, log.exercise, &cache);
                epoch_loss += bce_loss(cache.prediction, log.correct);
                accumulate_backward(params, q, cache, log.correct, grad);
            }
            // Mean gradient over the batch.
            auto scale = [&](Matrix& m) {
                for (double& x : m.data()) x /= batch_n;
            };
            scale(grad.student);
            scale(grad.exercise);
            if (!grad.diagnostic.empty()) {
                scale(grad.diagnostic.w_disc);
                scale(grad.diagnostic.w_fc1);
                scale(grad.diagnostic.w_fc2);
                scale(grad.diagnostic.w_fc3);
            }
            adam_step(optimizer, params, grad, options.clip_fc_nonneg);
            done = batch_end;
        }
        final_epoch_loss = epoch_loss / static_cast<double>(order.size());
    }
    return final_epoch_loss;
}

}  // namespace fedcd
