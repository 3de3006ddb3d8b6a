#pragma once

#include "mincil/backbone.hpp"
#include "mincil/data_stream.hpp"
#include "mincil/model.hpp"
#include "mincil/pinoise.hpp"
#include "mincil/report.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mincil {

enum class LossMode {
    ResidualCorrectedCe,  // CE of (Z W_aux + detach(Z W_t)) against Y
    ResidualMse,          // ||Z W_aux - (Y - Z W_t)||^2 / n
};

std::string_view to_string(LossMode m);
LossMode parse_loss_mode(std::string_view name);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 128;
    double lr_init = 0.001;
    double momentum = 0.9;
    double tau = 2.0;
    LossMode loss_mode = LossMode::ResidualCorrectedCe;
    MixtureStrategy strategy = MixtureStrategy::LearnedOmega;
    double clip_norm = 1.0;   // <= 0 disables clipping
    bool shared_omega = false;
    bool stochastic_eval = false;
    bool stochastic_classifier_update = false;
    double generator_init_scale = 0.001;
    std::uint64_t seed = 0;
};

/// lr_init * (1 + cos(pi * epoch / total)) / 2 for epoch in [0, total).
double cosine_lr(int epoch, int total_epochs, double lr_init);

/// v <- momentum v + g; theta <- theta - lr v.
template <typename Param, typename Grad, typename Velocity>
void sgd_step(Param& param, const Grad& grad, Velocity& velocity, double lr, double momentum) {
    velocity = momentum * velocity + grad;
    param -= lr * velocity;
}

/// Loss of the auxiliary head and its gradient with respect to Z W_aux.
/// W_t enters only as a constant.
double residual_loss(const Matrix& features, const Matrix& classifier_weights, const Matrix& aux_weights,
                     const Matrix& targets, LossMode mode, Matrix* grad_aux_output = nullptr);

/// Same loss from the two head outputs: Z W_aux and the constant Z W_t.
double residual_loss_from_outputs(const Matrix& aux_output, const Matrix& base_output, const Matrix& targets,
                                  LossMode mode, Matrix* grad_aux_output = nullptr);

/// Intermediates of one training forward pass.
struct GradientTape {
    ForwardTrace trace;
    Matrix features;  // z = expand(r_L)
};

GradientTape record_forward(const MinModel& model, const Matrix& batch, const NoiseOptions& options,
                            SeededRng& rng);

/// Gradients of the trainable parts of one layer: the unfrozen generator and omega.
struct LayerGradients {
    Matrix mu_weight;
    RowVector mu_bias;
    Matrix sigma_weight;
    RowVector sigma_bias;
    Vector omega;
};

struct Gradients {
    std::vector<LayerGradients> layers;
    Matrix aux;

    double squared_norm() const;
    void scale(double factor);
};

/// Reverse pass from dLoss/d(Z W_aux) back to every trainable tensor. Frozen
/// generators pass gradient through but get none; nothing reaches W_t.
Gradients backward(const MinModel& model, const GradientTape& tape, const Matrix& aux_weights,
                   const Matrix& grad_aux_output, MixtureStrategy strategy);

/// Loss and gradients for one batch with a fixed eps draw.
struct BatchResult {
    double loss = 0.0;
    Gradients grads;
};

BatchResult loss_and_gradients(const MinModel& model, const Matrix& aux_weights, const Matrix& batch,
                               const Matrix& targets, const TrainConfig& config, SeededRng& rng);

/// Flat view over trainable tensors, grouped as phi_mu, phi_sigma, omega, w_aux.
struct ParameterGroupView {
    std::string group;
    std::span<double> values;
};
std::vector<ParameterGroupView> trainable_views(MinModel& model, Matrix& aux_weights, bool include_omega);
std::vector<ParameterGroupView> gradient_views(Gradients& grads, bool include_omega);

struct EpochLog {
    int session = 0;
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
};

struct SessionDiagnostics {
    bool classifier_unchanged_during_training = true;
    std::vector<double> batch_losses_first_epoch;
};

/// One full session of the training pipeline for task `task_index` (1-based),
/// followed by evaluation on every seen class.
SessionReport run_session(MinModel& model, const TaskStream& stream, int task_index, const TrainConfig& config,
                          const std::function<void(const EpochLog&)>& on_epoch = {},
                          SessionDiagnostics* diagnostics = nullptr);

/// Accuracy over the union of test sets of tasks 1..upto_task.
SessionReport evaluate(const MinModel& model, const TaskStream& stream, int upto_task, const TrainConfig& config);

/// Run-level noise options for classifier fits and evaluation.
NoiseOptions eval_options(const TrainConfig& config);

}  // namespace mincil
