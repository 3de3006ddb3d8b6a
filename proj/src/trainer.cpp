#include "mincil/trainer.hpp"

#include "mincil/errors.hpp"
#include "mincil/numeric.hpp"

#include <cmath>
#include <numbers>
#include <map>
#include <numeric>
#include <string>

namespace mincil {
namespace {

constexpr std::uint64_t kGeneratorSalt = 21;
constexpr std::uint64_t kTrainSalt = 22;
constexpr std::uint64_t kClassifierSalt = 23;
constexpr std::uint64_t kEvalSalt = 24;

Matrix rows_of(const Matrix& source, std::span<const std::size_t> index) {
    Matrix out(static_cast<Eigen::Index>(index.size()), source.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        out.row(static_cast<Eigen::Index>(k)) = source.row(static_cast<Eigen::Index>(index[k]));
    }
    return out;
}

std::vector<int> labels_of(const std::vector<int>& source, std::span<const std::size_t> index) {
    std::vector<int> out;
    out.reserve(index.size());
    for (std::size_t i : index) {
        out.push_back(source[i]);
    }
    return out;
}

/// Feeds the task's training rows through the model in `chunk` sized blocks
/// and applies the recursive classifier update to each block. When
/// `block_outputs` is set, every layer's block output is kept for prototypes.
void fit_classifier(MinModel& model, const SampleSet& train, int chunk, const NoiseOptions& options,
                    SeededRng& rng, std::vector<std::vector<Matrix>>* block_outputs) {
    const auto n = static_cast<Eigen::Index>(train.size());
    if (block_outputs != nullptr) {
        block_outputs->assign(model.backbone.blocks.size(), {});
    }
    for (Eigen::Index start = 0; start < n; start += chunk) {
        const Eigen::Index len = std::min<Eigen::Index>(chunk, n - start);
        const Matrix batch = train.features.middleRows(start, len);
        const ForwardTrace trace = forward(model.backbone, &model.layers, batch, options, rng);
        const Matrix z = expand(model.buffer, trace.final_features());
        const std::span<const int> labels(train.labels.data() + start, static_cast<std::size_t>(len));
        model.classifier.update(z, model.classifier.one_hot(labels));
        if (block_outputs != nullptr) {
            for (std::size_t l = 0; l < trace.layers.size(); ++l) {
                (*block_outputs)[l].push_back(trace.layers[l].block_out);
            }
        }
    }
}

void init_mixture_weights(MinModel& model, const TrainConfig& config) {
    if (!config.shared_omega) {
        for (auto& layer : model.layers) {
            layer.omega = init_omega(layer.prototypes, config.tau);
        }
        return;
    }
    Vector mean_similarity = Vector::Zero(static_cast<Eigen::Index>(model.layers.front().prototypes.size()));
    for (const auto& layer : model.layers) {
        mean_similarity += prototype_similarity(layer.prototypes);
    }
    mean_similarity /= static_cast<double>(model.layers.size());
    const auto w = softmax(std::span<const double>(mean_similarity.data(), static_cast<std::size_t>(mean_similarity.size())),
                           config.tau);
    const Vector omega = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    for (auto& layer : model.layers) {
        layer.omega = omega;
    }
}

}  // namespace

std::string_view to_string(LossMode m) {
    return m == LossMode::ResidualCorrectedCe ? "residual-corrected-ce" : "residual-mse";
}

LossMode parse_loss_mode(std::string_view name) {
    if (name == "residual-corrected-ce") {
        return LossMode::ResidualCorrectedCe;
    }
    if (name == "residual-mse") {
        return LossMode::ResidualMse;
    }
    throw ValidationError("unknown loss mode '" + std::string(name) + "'");
}

double cosine_lr(int epoch, int total_epochs, double lr_init) {
    if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
        throw ValidationError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                              std::to_string(total_epochs) + ")");
    }
    return lr_init * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs)));
}

double residual_loss_from_outputs(const Matrix& aux_out, const Matrix& base, const Matrix& y, LossMode mode,
                                  Matrix* grad_aux_output) {
    if (aux_out.rows() != base.rows() || aux_out.cols() != base.cols() || y.rows() != base.rows() ||
        y.cols() != base.cols()) {
        throw ValidationError("residual_loss: shape mismatch");
    }
    const auto n = static_cast<double>(aux_out.rows());
    if (mode == LossMode::ResidualMse) {
        const Matrix resid = aux_out - (y - base);
        require_finite(resid, "residual loss");
        if (grad_aux_output != nullptr) {
            *grad_aux_output = 2.0 * resid / n;
        }
        return resid.squaredNorm() / n;
    }
    const Matrix logits = aux_out + base;
    require_finite(logits, "residual loss logits");
    Matrix probs(logits.rows(), logits.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double top = logits.row(i).maxCoeff();
        const RowVector shifted = logits.row(i).array() - top;
        const double log_norm = std::log(shifted.array().exp().sum());
        const RowVector log_probs = shifted.array() - log_norm;
        loss -= y.row(i).dot(log_probs);
        probs.row(i) = log_probs.array().exp();
    }
    if (grad_aux_output != nullptr) {
        *grad_aux_output = (probs - y) / n;
    }
    return loss / n;
}

double residual_loss(const Matrix& z, const Matrix& w_t, const Matrix& w_aux, const Matrix& y, LossMode mode,
                     Matrix* grad_aux_output) {
    if (z.cols() != w_aux.rows() || z.cols() != w_t.rows() || w_t.cols() != w_aux.cols()) {
        throw ValidationError("residual_loss: shape mismatch");
    }
    return residual_loss_from_outputs(z * w_aux, z * w_t, y, mode, grad_aux_output);
}

GradientTape record_forward(const MinModel& model, const Matrix& batch, const NoiseOptions& options,
                            SeededRng& rng) {
    GradientTape tape;
    tape.trace = forward(model.backbone, &model.layers, batch, options, rng);
    tape.features = expand(model.buffer, tape.trace.final_features());
    return tape;
}

double Gradients::squared_norm() const {
    double total = aux.squaredNorm();
    for (const auto& g : layers) {
        total += g.mu_weight.squaredNorm() + g.mu_bias.squaredNorm() + g.sigma_weight.squaredNorm() +
                 g.sigma_bias.squaredNorm() + g.omega.squaredNorm();
    }
    return total;
}

void Gradients::scale(double factor) {
    aux *= factor;
    for (auto& g : layers) {
        g.mu_weight *= factor;
        g.mu_bias *= factor;
        g.sigma_weight *= factor;
        g.sigma_bias *= factor;
        g.omega *= factor;
    }
}

Gradients backward(const MinModel& model, const GradientTape& tape, const Matrix& aux_weights,
                   const Matrix& grad_aux_output, MixtureStrategy strategy) {
    const auto& layers = tape.trace.layers;
    if (layers.size() != model.backbone.blocks.size() || grad_aux_output.rows() != tape.features.rows() ||
        grad_aux_output.cols() != aux_weights.cols()) {
        throw ValidationError("backward: tape does not match the loss gradient");
    }
    Gradients grads;
    grads.aux = tape.features.transpose() * grad_aux_output;

    // Through the rectifier of the buffer expansion.
    Matrix dz = grad_aux_output * aux_weights.transpose();
    dz = (tape.features.array() > 0.0).select(dz, 0.0);
    Matrix dr = dz * model.buffer.projection.transpose();

    grads.layers.resize(model.layers.size());
    for (std::size_t li = layers.size(); li-- > 0;) {
        const LayerRecord& rec = layers[li];
        Matrix du = dr;
        if (model.pinoise_enabled() && !model.layers[li].generators.empty()) {
            const PiNoiseLayer& layer = model.layers[li];
            const NoiseTrace& nt = rec.noise;
            const std::size_t count = layer.generators.size();
            const Matrix dmix = dr * layer.w_up.transpose();

            std::vector<Matrix> dterms(count);
            LayerGradients& lg = grads.layers[li];
            lg.omega = Vector::Zero(static_cast<Eigen::Index>(count));
            switch (strategy) {
                case MixtureStrategy::LearnedOmega:
                    for (std::size_t i = 0; i < count; ++i) {
                        dterms[i] = dmix * layer.omega[static_cast<Eigen::Index>(i)];
                        lg.omega[static_cast<Eigen::Index>(i)] = dmix.cwiseProduct(nt.terms[i]).sum();
                    }
                    break;
                case MixtureStrategy::Average:
                case MixtureStrategy::MuOnly:
                case MixtureStrategy::SigmaOnly:
                    for (std::size_t i = 0; i < count; ++i) {
                        dterms[i] = dmix / static_cast<double>(count);
                    }
                    break;
                case MixtureStrategy::LastTask:
                case MixtureStrategy::RandomTask:
                    dterms[nt.chosen] = dmix;
                    break;
            }

            for (const auto& gen : layer.generators) {
                if (!gen.frozen) {
                    lg.mu_weight = Matrix::Zero(gen.mu.weight.rows(), gen.mu.weight.cols());
                    lg.mu_bias = RowVector::Zero(gen.mu.bias.size());
                    lg.sigma_weight = Matrix::Zero(gen.sigma.weight.rows(), gen.sigma.weight.cols());
                    lg.sigma_bias = RowVector::Zero(gen.sigma.bias.size());
                }
            }
            Matrix dh = Matrix::Zero(nt.h.rows(), nt.h.cols());
            for (std::size_t i = 0; i < count; ++i) {
                if (dterms[i].size() == 0) {
                    continue;
                }
                const NoiseGenerator& gen = layer.generators[i];
                const bool mu_path = strategy != MixtureStrategy::SigmaOnly;
                const bool sigma_path = strategy != MixtureStrategy::MuOnly;
                // noise = eps (.) sigma + mu
                const Matrix dmu = mu_path ? dterms[i] : Matrix::Zero(dh.rows(), dh.cols());
                const Matrix dsigma = sigma_path ? Matrix(dterms[i].cwiseProduct(nt.eps))
                                                 : Matrix::Zero(dh.rows(), dh.cols());
                dh += dmu * gen.mu.weight.transpose() + dsigma * gen.sigma.weight.transpose();
                if (!gen.frozen) {
                    lg.mu_weight = nt.h.transpose() * dmu;
                    lg.mu_bias = dmu.colwise().sum();
                    lg.sigma_weight = nt.h.transpose() * dsigma;
                    lg.sigma_bias = dsigma.colwise().sum();
                }
            }
            if (strategy != MixtureStrategy::LearnedOmega) {
                lg.omega.setZero();
            }
            du += dh * layer.w_down.transpose();
        }
        // f(r) = r + gain * tanh(r A)
        const FrozenBlock& block = model.backbone.blocks[li];
        const Matrix dpre = (block.gain * du.array() * (1.0 - rec.activation.array().square())).matrix();
        dr = du + dpre * block.weight.transpose();
    }
    return grads;
}

BatchResult loss_and_gradients(const MinModel& model, const Matrix& aux_weights, const Matrix& batch,
                               const Matrix& targets, const TrainConfig& config, SeededRng& rng) {
    NoiseOptions options{config.strategy, false};
    const GradientTape tape = record_forward(model, batch, options, rng);
    Matrix grad_out;
    BatchResult result;
    result.loss = residual_loss(tape.features, model.classifier.weights(), aux_weights, targets, config.loss_mode,
                                &grad_out);
    if (!std::isfinite(result.loss)) {
        throw NumericalBreakdown("non-finite training loss");
    }
    result.grads = backward(model, tape, aux_weights, grad_out, config.strategy);
    return result;
}

std::vector<ParameterGroupView> trainable_views(MinModel& model, Matrix& aux_weights, bool include_omega) {
    std::vector<ParameterGroupView> views;
    auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
    for (auto& layer : model.layers) {
        for (auto& gen : layer.generators) {
            if (gen.frozen) {
                continue;
            }
            views.push_back({"phi_mu", span_of(gen.mu.weight)});
            views.push_back({"phi_mu", span_of(gen.mu.bias)});
            views.push_back({"phi_sigma", span_of(gen.sigma.weight)});
            views.push_back({"phi_sigma", span_of(gen.sigma.bias)});
        }
        if (include_omega && layer.omega.size() > 0) {
            views.push_back({"omega", span_of(layer.omega)});
        }
    }
    views.push_back({"w_aux", span_of(aux_weights)});
    return views;
}

std::vector<ParameterGroupView> gradient_views(Gradients& grads, bool include_omega) {
    std::vector<ParameterGroupView> views;
    auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
    for (auto& g : grads.layers) {
        if (g.mu_weight.size() > 0) {
            views.push_back({"phi_mu", span_of(g.mu_weight)});
            views.push_back({"phi_mu", span_of(g.mu_bias)});
            views.push_back({"phi_sigma", span_of(g.sigma_weight)});
            views.push_back({"phi_sigma", span_of(g.sigma_bias)});
        }
        if (include_omega && g.omega.size() > 0) {
            views.push_back({"omega", span_of(g.omega)});
        }
    }
    views.push_back({"w_aux", span_of(grads.aux)});
    return views;
}

NoiseOptions eval_options(const TrainConfig& config) {
    return NoiseOptions{config.strategy, !config.stochastic_eval};
}

SessionReport evaluate(const MinModel& model, const TaskStream& stream, int upto_task, const TrainConfig& config) {
    if (upto_task < 1 || upto_task > model.sessions_completed) {
        throw ValidationError("evaluate: task " + std::to_string(upto_task) + " not yet learned (" +
                              std::to_string(model.sessions_completed) + " sessions completed)");
    }
    const SampleSet test = seen_test_set(stream, upto_task);
    SeededRng rng = SeededRng(config.seed).derive(kEvalSalt);
    SessionReport report;
    report.task_index = upto_task;
    report.test_samples = static_cast<int>(test.size());
    std::map<int, std::pair<int, int>> tally;  // class -> (correct, total)
    int correct = 0;
    const NoiseOptions options = eval_options(config);
    const Eigen::Index chunk = 512;
    for (Eigen::Index start = 0; start < test.features.rows(); start += chunk) {
        const Eigen::Index len = std::min<Eigen::Index>(chunk, test.features.rows() - start);
        const Matrix z = extract_features(model, test.features.middleRows(start, len), options, rng);
        const auto predicted = model.classifier.predict_labels(z);
        for (Eigen::Index i = 0; i < len; ++i) {
            const int truth = test.labels[static_cast<std::size_t>(start + i)];
            const bool hit = predicted[static_cast<std::size_t>(i)] == truth;
            correct += hit ? 1 : 0;
            auto& entry = tally[truth];
            entry.first += hit ? 1 : 0;
            entry.second += 1;
        }
    }
    for (const auto& [cls, counts] : tally) {
        report.per_class_accuracy[cls] = static_cast<double>(counts.first) / counts.second;
    }
    report.accuracy_seen = test.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
    return report;
}

SessionReport run_session(MinModel& model, const TaskStream& stream, int task_index, const TrainConfig& config,
                          const std::function<void(const EpochLog&)>& on_epoch, SessionDiagnostics* diagnostics) {
    if (task_index != model.sessions_completed + 1) {
        throw ValidationError("session order violation: expected task " +
                              std::to_string(model.sessions_completed + 1) + ", got " + std::to_string(task_index));
    }
    if (task_index > stream.num_tasks()) {
        throw ValidationError("task " + std::to_string(task_index) + " is beyond the stream");
    }
    if (config.epochs < 0 || config.batch_size < 1 || !(config.lr_init > 0.0) || !(config.tau > 0.0)) {
        throw ValidationError("invalid training configuration");
    }
    const TaskDataset& task = stream.tasks[static_cast<std::size_t>(task_index - 1)];
    const SeededRng session_root = SeededRng(config.seed).derive(static_cast<std::uint64_t>(task_index));
    NoiseOptions classifier_options = eval_options(config);
    classifier_options.eval_mode = !config.stochastic_classifier_update;

    // (1) classifier update with the previous session's noise.
    const AnalyticClassifier previous = model.classifier;
    model.classifier.add_classes(task.class_set);
    std::vector<std::vector<Matrix>> block_outputs;
    {
        SeededRng rng = session_root.derive(kClassifierSalt);
        fit_classifier(model, task.train, config.batch_size, classifier_options, rng,
                       model.pinoise_enabled() ? &block_outputs : nullptr);
    }

    SessionReport report;
    if (model.pinoise_enabled()) {
        // (2) expand one generator per layer, (3) prototypes and omega.
        SeededRng gen_rng = session_root.derive(kGeneratorSalt);
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            auto& layer = model.layers[l];
            layer.prototypes.push_back(compute_prototype(layer, block_outputs[l]));
            layer.generators.push_back(make_generator(layer.d2(), task_index, config.generator_init_scale, gen_rng));
        }
        block_outputs.clear();
        init_mixture_weights(model, config);

        // (4) auxiliary head, (5) gradient training of {P_t, omega, W_aux}.
        Matrix aux = Matrix::Zero(model.classifier.feature_dim(), model.classifier.num_classes());
        const std::string classifier_before = model.classifier.state_hash();
        const bool train_omega = config.strategy == MixtureStrategy::LearnedOmega;

        Gradients velocity;
        velocity.aux = Matrix::Zero(aux.rows(), aux.cols());
        velocity.layers.resize(model.layers.size());
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            const auto& gen = model.layers[l].generators.back();
            auto& v = velocity.layers[l];
            v.mu_weight = Matrix::Zero(gen.mu.weight.rows(), gen.mu.weight.cols());
            v.mu_bias = RowVector::Zero(gen.mu.bias.size());
            v.sigma_weight = Matrix::Zero(gen.sigma.weight.rows(), gen.sigma.weight.cols());
            v.sigma_bias = RowVector::Zero(gen.sigma.bias.size());
            v.omega = Vector::Zero(model.layers[l].omega.size());
        }

        SeededRng train_rng = session_root.derive(kTrainSalt);
        const std::size_t n = task.train.size();
        std::vector<std::size_t> order(n);
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            const double lr = cosine_lr(epoch, config.epochs, config.lr_init);
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = n; i > 1; --i) {
                std::swap(order[i - 1], order[train_rng.uniform_index(i)]);
            }
            double loss_sum = 0.0;
            for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n - start);
                const std::span<const std::size_t> idx(order.data() + start, len);
                const Matrix batch = rows_of(task.train.features, idx);
                const Matrix targets = model.classifier.one_hot(labels_of(task.train.labels, idx));
                BatchResult step = loss_and_gradients(model, aux, batch, targets, config, train_rng);
                loss_sum += step.loss * static_cast<double>(len);
                if (diagnostics != nullptr && epoch == 0) {
                    diagnostics->batch_losses_first_epoch.push_back(step.loss);
                }

                if (config.shared_omega && train_omega) {
                    Vector total = Vector::Zero(step.grads.layers.front().omega.size());
                    for (const auto& g : step.grads.layers) {
                        total += g.omega;
                    }
                    for (auto& g : step.grads.layers) {
                        g.omega = total;
                    }
                }
                if (config.clip_norm > 0.0) {
                    const double norm = std::sqrt(step.grads.squared_norm());
                    if (norm > config.clip_norm) {
                        step.grads.scale(config.clip_norm / norm);
                    }
                }
                sgd_step(aux, step.grads.aux, velocity.aux, lr, config.momentum);
                for (std::size_t l = 0; l < model.layers.size(); ++l) {
                    auto& gen = model.layers[l].generators.back();
                    auto& g = step.grads.layers[l];
                    auto& v = velocity.layers[l];
                    sgd_step(gen.mu.weight, g.mu_weight, v.mu_weight, lr, config.momentum);
                    sgd_step(gen.mu.bias, g.mu_bias, v.mu_bias, lr, config.momentum);
                    sgd_step(gen.sigma.weight, g.sigma_weight, v.sigma_weight, lr, config.momentum);
                    sgd_step(gen.sigma.bias, g.sigma_bias, v.sigma_bias, lr, config.momentum);
                    if (train_omega) {
                        sgd_step(model.layers[l].omega, g.omega, v.omega, lr, config.momentum);
                    }
                }
            }
            const double mean_loss = loss_sum / static_cast<double>(n);
            if (!std::isfinite(mean_loss)) {
                throw NumericalBreakdown("non-finite loss in session " + std::to_string(task_index));
            }
            report.epoch_losses.push_back(mean_loss);
            if (on_epoch) {
                on_epoch(EpochLog{task_index, epoch, lr, mean_loss});
            }
        }
        if (diagnostics != nullptr) {
            diagnostics->classifier_unchanged_during_training = model.classifier.state_hash() == classifier_before;
        }

        // (6) refit this session's classifier update with the trained noise.
        model.classifier = previous;
        model.classifier.add_classes(task.class_set);
        SeededRng rng = session_root.derive(kClassifierSalt);
        fit_classifier(model, task.train, config.batch_size, classifier_options, rng, nullptr);

        for (auto& layer : model.layers) {
            layer.generators.back().frozen = true;
        }
    }

    model.sessions_completed = task_index;
    // (7) evaluation over every seen class.
    SessionReport eval = evaluate(model, stream, task_index, config);
    eval.epoch_losses = std::move(report.epoch_losses);
    return eval;
}

}  // namespace mincil
