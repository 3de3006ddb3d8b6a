#include "mincil/experiments.hpp"

#include "mincil/checkpoint.hpp"
#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"
#include "mincil/model.hpp"
#include "mincil/numeric.hpp"
#include "mincil/trainer.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace mincil {

TaskStream make_stream(const RunConfig& config) {
    if (config.data_source == "embedding") {
        return load_embedding_stream(config.data_path, config.synthetic.num_tasks, config.class_seed);
    }
    return make_synthetic_stream(config.synthetic, config.class_seed);
}

std::filesystem::path resolve_output_dir(const RunConfig& config) {
    std::filesystem::path dir(config.output_dir);
    if (dir.is_relative()) {
        if (const char* root = std::getenv("MINCIL_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
            return std::filesystem::path(root) / dir;
        }
    }
    return dir;
}

RunSummary run_training(const RunConfig& config, const TrainOptions& options) {
    validate(config);
    const TaskStream stream = make_stream(config);
    const std::string hash = config_hash(config);

    MinModel model;
    std::vector<SessionReport> reports;
    if (options.resume_from) {
        Checkpoint ckpt = load_checkpoint(*options.resume_from);
        if (config_hash(ckpt.config) != hash) {
            throw ValidationError("checkpoint was written with a different configuration");
        }
        if (ckpt.model.backbone.d_raw() != stream.feature_dim) {
            throw ValidationError("checkpoint input width does not match the stream");
        }
        model = std::move(ckpt.model);
        reports = std::move(ckpt.reports);
    } else {
        model = make_model(stream.feature_dim, config.model);
    }

    const auto out_dir = resolve_output_dir(config);
    std::ofstream train_log;
    if (options.write_artifacts) {
        std::filesystem::create_directories(out_dir);
        const bool append = options.resume_from.has_value() && std::filesystem::exists(out_dir / "train_log.csv");
        train_log.open(out_dir / "train_log.csv", append ? std::ios::app : std::ios::trunc);
        if (!append) {
            train_log << "session,epoch,lr,mean_loss\n";
        }
    }
    auto on_epoch = [&](const EpochLog& e) {
        const std::string line = fmt::format("{},{},{},{}\n", e.session, e.epoch, e.lr, e.mean_loss);
        if (train_log.is_open()) {
            train_log << line;
        }
        if (options.log != nullptr) {
            *options.log << line;
        }
    };

    const int last = options.stop_after >= 0 ? std::min(options.stop_after, stream.num_tasks()) : stream.num_tasks();
    for (int t = model.sessions_completed + 1; t <= last; ++t) {
        reports.push_back(run_session(model, stream, t, config.train, on_epoch));
        if (options.write_artifacts) {
            save_checkpoint(out_dir / "checkpoint.bin", config, model, reports);
        }
    }
    RunSummary summary = summarize(reports, hash);
    if (options.write_artifacts) {
        emit(summary, out_dir);
    }
    return summary;
}

SeedAggregate run_seeds(const RunConfig& config, const std::vector<std::uint64_t>& seeds, bool write_artifacts,
                        std::ostream* log) {
    if (seeds.empty()) {
        throw ValidationError("run_seeds: no seeds");
    }
    SeedAggregate agg;
    agg.seeds = seeds;
    std::vector<double> avg;
    std::vector<double> last;
    std::string csv = "seed,avg_accuracy_pct,last_accuracy_pct\n";
    for (std::uint64_t seed : seeds) {
        RunConfig cfg = config;
        cfg.class_seed = seed;
        cfg.output_dir = (std::filesystem::path(config.output_dir) / fmt::format("seed-{}", seed)).string();
        TrainOptions opts;
        opts.write_artifacts = write_artifacts;
        opts.log = log;
        agg.runs.push_back(run_training(cfg, opts));
        avg.push_back(agg.runs.back().average_accuracy);
        last.push_back(agg.runs.back().last_accuracy);
        csv += fmt::format("{},{:.2f},{:.2f}\n", seed, 100.0 * avg.back(), 100.0 * last.back());
    }
    agg.average_accuracy = mean_std(avg);
    agg.last_accuracy = mean_std(last);
    csv += fmt::format("mean,{:.2f},{:.2f}\n", 100.0 * agg.average_accuracy.mean, 100.0 * agg.last_accuracy.mean);
    csv += fmt::format("std,{:.2f},{:.2f}\n", 100.0 * agg.average_accuracy.stddev, 100.0 * agg.last_accuracy.stddev);
    if (write_artifacts) {
        write_text_file(resolve_output_dir(config) / "seeds.csv", csv);
    }
    return agg;
}

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> kVariants = {"baseline",  "average",     "mu-only", "sigma-only",
                                                       "last-task", "random-task", "full"};
    return kVariants;
}

RunConfig variant_config(const RunConfig& base, const std::string& variant) {
    RunConfig cfg = base;
    if (variant == "baseline") {
        cfg.model.pinoise_enabled = false;
    } else if (variant == "full") {
        cfg.model.pinoise_enabled = true;
        cfg.train.strategy = MixtureStrategy::LearnedOmega;
    } else {
        cfg.model.pinoise_enabled = true;
        cfg.train.strategy = parse_strategy(variant);
        if (cfg.train.strategy == MixtureStrategy::LearnedOmega) {
            throw ValidationError("use 'full' for the learned-omega variant");
        }
    }
    return cfg;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds, bool write_artifacts) {
    if (variants.size() < 2) {
        throw ValidationError("ablation needs at least two variants");
    }
    std::vector<AblationRow> rows;
    for (const auto& variant : variants) {
        RunConfig cfg = variant_config(base, variant);
        cfg.output_dir = (std::filesystem::path(base.output_dir) / variant).string();
        const SeedAggregate agg = run_seeds(cfg, seeds, false);
        ContentHasher streams;
        for (std::uint64_t seed : seeds) {
            RunConfig seeded = cfg;
            seeded.class_seed = seed;
            streams.text(make_stream(seeded).content_hash());
        }
        rows.push_back({variant, agg.average_accuracy, agg.last_accuracy, streams.hex_digest()});
    }
    if (write_artifacts) {
        write_text_file(resolve_output_dir(base) / "ablation.csv", ablation_csv(rows));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant,avg_accuracy_pct,avg_accuracy_std,last_accuracy_pct,last_accuracy_std,stream_hash\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{:.2f},{:.2f},{:.2f},{:.2f},{}\n", r.variant, 100.0 * r.average_accuracy.mean,
                           100.0 * r.average_accuracy.stddev, 100.0 * r.last_accuracy.mean,
                           100.0 * r.last_accuracy.stddev, r.stream_hash);
    }
    return out;
}

std::size_t trainable_params_per_task(const RunConfig& config) {
    const auto d2 = static_cast<std::size_t>(config.model.d2);
    return static_cast<std::size_t>(config.model.backbone.blocks) * 2 * (d2 * d2 + d2);
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& parameter, const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds, bool write_artifacts) {
    if (values.empty()) {
        throw ValidationError("sweep needs at least one value");
    }
    std::vector<SweepRow> rows;
    for (double v : values) {
        RunConfig cfg = base;
        if (parameter == "lambda") {
            cfg.model.lambda = v;
        } else if (parameter == "tau") {
            cfg.train.tau = v;
        } else if (parameter == "buffer_size" || parameter == "d2") {
            if (v != std::floor(v)) {
                throw ValidationError(parameter + " sweep values must be integers");
            }
            (parameter == "d2" ? cfg.model.d2 : cfg.model.backbone.buffer_size) = static_cast<int>(v);
        } else {
            throw ValidationError("unknown sweep parameter '" + parameter + "' (lambda | buffer_size | d2 | tau)");
        }
        validate(cfg);
        const SeedAggregate agg = run_seeds(cfg, seeds, false);
        rows.push_back({parameter, v, agg.average_accuracy, agg.last_accuracy, trainable_params_per_task(cfg)});
    }
    if (write_artifacts) {
        const auto dir = resolve_output_dir(base);
        write_text_file(dir / "sweep.csv", sweep_csv(rows));
        ChartSeries series{parameter, {}, {}};
        for (const auto& r : rows) {
            series.x.push_back(r.value);
            series.y.push_back(100.0 * r.average_accuracy.mean);
        }
        write_text_file(dir / "sweep.svg",
                        line_chart_svg("Average accuracy vs " + parameter, parameter, "average accuracy (%)", {series}));
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "parameter,value,avg_accuracy_pct,avg_accuracy_std,last_accuracy_pct,trainable_params_per_task\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{:.2f},{:.2f},{:.2f},{}\n", r.parameter, r.value, 100.0 * r.average_accuracy.mean,
                           100.0 * r.average_accuracy.stddev, 100.0 * r.last_accuracy.mean,
                           r.trainable_params_per_task);
    }
    return out;
}

std::string GradcheckReport::to_text() const {
    std::string out = fmt::format("gradcheck: {} (max relative error {:.3e})\n", passed ? "PASS" : "FAIL", max_rel_error);
    for (const auto& [name, g] : groups) {
        out += fmt::format("  {:<10} coords={:<4} max_grad={:.3e} max_abs={:.3e} max_rel={:.3e}\n", name,
                           g.coordinates, g.max_gradient, g.max_abs_error, g.max_rel_error);
    }
    return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
    if (options.d1 > 16 || options.d2 > 8 || options.blocks > 2 || options.d1 < 1 || options.d2 < 1 ||
        options.blocks < 1 || options.batch < 1) {
        throw ValidationError("gradcheck is limited to d1 <= 16, d2 <= 8, L <= 2");
    }
    constexpr int kRawDim = 5;
    constexpr int kBuffer = 16;
    constexpr int kClasses = 3;
    ModelParams params;
    params.backbone.blocks = options.blocks;
    params.backbone.d1 = options.d1;
    params.backbone.buffer_size = std::max(kBuffer, options.d1);
    params.d2 = options.d2;
    params.lambda = 1.0;
    params.seed = options.seed;
    MinModel model = make_model(kRawDim, params);

    SeededRng rng = SeededRng(options.seed).derive(99);
    for (auto& layer : model.layers) {
        for (int task = 1; task <= 2; ++task) {
            NoiseGenerator gen = make_generator(options.d2, task, 0.5, rng);
            gen.mu.bias = sample_standard_normal(rng, 1, options.d2) * 0.1;
            gen.sigma.bias = sample_standard_normal(rng, 1, options.d2) * 0.1;
            gen.frozen = task == 1;
            layer.generators.push_back(std::move(gen));
            layer.prototypes.push_back(sample_standard_normal(rng, options.d2, 1).col(0));
        }
        layer.omega = Vector(2);
        layer.omega << 0.4 + 0.2 * rng.uniform(), 0.4 + 0.2 * rng.uniform();
    }
    const int d_e = model.buffer.buffer_size();
    model.classifier = AnalyticClassifier::from_parts(sample_standard_normal(rng, d_e, kClasses) * 0.05,
                                                      Matrix::Identity(d_e, d_e), 1.0, {0, 1, 2});
    Matrix aux = sample_standard_normal(rng, d_e, kClasses) * 0.05;
    const Matrix batch = sample_standard_normal(rng, options.batch, kRawDim);
    std::vector<int> labels;
    for (int i = 0; i < options.batch; ++i) {
        labels.push_back(i % kClasses);
    }
    const Matrix targets = model.classifier.one_hot(labels);

    TrainConfig cfg;
    cfg.strategy = options.strategy;
    cfg.loss_mode = options.loss_mode;
    const SeededRng noise_rng = SeededRng(options.seed).derive(100);
    const bool with_omega = options.strategy == MixtureStrategy::LearnedOmega;

    SeededRng analytic_rng = noise_rng;
    // Z W_t is detached, so the numeric side holds it at the unperturbed point too.
    Matrix base_output;
    {
        SeededRng base_rng = noise_rng;
        const GradientTape tape = record_forward(model, batch, NoiseOptions{cfg.strategy, false}, base_rng);
        base_output = tape.features * model.classifier.weights();
    }
    BatchResult analytic = loss_and_gradients(model, aux, batch, targets, cfg, analytic_rng);
    auto grad_views = gradient_views(analytic.grads, with_omega);
    if (options.corrupt) {
        grad_views.front().values[0] += 1e-2 * (1.0 + std::abs(grad_views.front().values[0]));
    }
    auto param_views = trainable_views(model, aux, with_omega);
    if (grad_views.size() != param_views.size()) {
        throw ValidationError("gradcheck: gradient and parameter layouts differ");
    }

    GradcheckReport report;
    report.passed = true;
    for (std::size_t v = 0; v < param_views.size(); ++v) {
        auto& group = report.groups[param_views[v].group];
        auto values = param_views[v].values;
        if (values.size() != grad_views[v].values.size()) {
            throw ValidationError("gradcheck: gradient and parameter shapes differ");
        }
        std::vector<double> theta(values.begin(), values.end());
        auto loss_at = [&](std::span<const double> point) {
            std::copy(point.begin(), point.end(), values.begin());
            SeededRng fd_rng = noise_rng;
            NoiseOptions noise{cfg.strategy, false};
            const GradientTape tape = record_forward(model, batch, noise, fd_rng);
            return residual_loss_from_outputs(tape.features * aux, base_output, targets, cfg.loss_mode);
        };
        const auto numeric = finite_difference_gradient(loss_at, theta, options.fd_epsilon);
        std::copy(theta.begin(), theta.end(), values.begin());
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double a = grad_views[v].values[i];
            const double f = numeric[i];
            const double abs_err = std::abs(a - f);
            ++group.coordinates;
            group.max_abs_error = std::max(group.max_abs_error, abs_err);
            group.max_gradient = std::max(group.max_gradient, std::abs(a));
            if (abs_err > options.abs_floor) {
                const double rel = abs_err / std::max(std::abs(a), std::abs(f));
                group.max_rel_error = std::max(group.max_rel_error, rel);
                if (rel >= options.rel_tolerance) {
                    report.passed = false;
                }
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    }
    return report;
}

std::string Snapshot::to_text() const {
    return fmt::format("backbone_sha256 = {}\nprojection_sha256 = {}\nconfig_sha256 = {}\nstream_sha256 = {}\n",
                       backbone_hash, projection_hash, config_hash, stream_hash);
}

Snapshot make_snapshot(const RunConfig& config) {
    validate(config);
    const TaskStream stream = make_stream(config);
    const MinModel model = make_model(stream.feature_dim, config.model);
    return Snapshot{frozen_parameter_hash(model.backbone, model.buffer), mincil::projection_hash(model),
                    mincil::config_hash(config), stream.content_hash()};
}

}  // namespace mincil
