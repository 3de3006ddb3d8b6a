// mincil: class-incremental runs with per-task Pi-Noise generators and an
// analytic classifier.
//
//   mincil train     [--config f] [--set k=v ...] [--seeds a,b] [--resume ckpt] [--stop-after k]
//   mincil eval      --checkpoint ckpt
//   mincil ablate    [--variants baseline,full,...] [--seeds a,b]
//   mincil sweep     --param tau --values 0.5,1,1.5,2
//   mincil gradcheck [--strategy s] [--loss-mode m] [--corrupt]
//   mincil snapshot
//
// Exit codes: 0 success, 1 validation / I/O error, 2 numerical breakdown.

#include "mincil/checkpoint.hpp"
#include "mincil/config.hpp"
#include "mincil/errors.hpp"
#include "mincil/experiments.hpp"
#include "mincil/trainer.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <charconv>
#include <iostream>

namespace {

using namespace mincil;

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> settings;
    std::string profile = "desk";
    bool print_config = false;
    std::string seeds;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "key = value config file");
    cmd->add_option("--set", args.settings, "override one key (key=value), repeatable");
    cmd->add_option("--profile", args.profile, "desk | paper-dims")->capture_default_str();
    cmd->add_flag("--print-config", args.print_config, "print the resolved configuration and exit");
    cmd->add_option("--seeds", args.seeds, "comma-separated class-order seeds");
    cmd->add_flag("-q,--quiet", args.quiet, "suppress per-epoch log lines");
}

RunConfig resolve(const CommonArgs& args) {
    RunConfig cfg;
    apply_profile(cfg, args.profile);
    if (!args.config_file.empty()) {
        apply_config_file(cfg, args.config_file);
    }
    for (const auto& s : args.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("--set expects key=value, got '" + s + "'");
        }
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    validate(cfg);
    return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t fallback) {
    if (text.empty()) {
        return {fallback};
    }
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(text)) {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || ptr != item.data() + item.size()) {
            throw ValidationError("bad seed '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        double v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || ptr != item.data() + item.size()) {
            throw ValidationError("bad sweep value '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

void print_summary(const RunSummary& s) {
    for (const auto& r : s.reports) {
        fmt::print("session {:>2}: accuracy {:6.2f}% over {} test samples\n", r.task_index, 100.0 * r.accuracy_seen,
                   r.test_samples);
    }
    fmt::print("average accuracy {:.2f}%  last accuracy {:.2f}%\n", 100.0 * s.average_accuracy,
               100.0 * s.last_accuracy);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Class-incremental learning with mixtures of task-specific Pi-Noise"};
    app.require_subcommand(1);

    CommonArgs train_args;
    std::string resume;
    int stop_after = -1;
    auto* train = app.add_subcommand("train", "run every session of the configured stream");
    add_common(train, train_args);
    train->add_option("--resume", resume, "continue from a checkpoint");
    train->add_option("--stop-after", stop_after, "stop once this many sessions are complete");

    std::string eval_checkpoint;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on its stream");
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();

    CommonArgs ablate_args;
    std::string variants = "baseline,average,mu-only,sigma-only,last-task,random-task,full";
    auto* ablate = app.add_subcommand("ablate", "compare mixture strategies on identical streams");
    add_common(ablate, ablate_args);
    ablate->add_option("--variants", variants, "comma-separated variants")->capture_default_str();

    CommonArgs sweep_args;
    std::string sweep_param;
    std::string sweep_values;
    auto* sweep = app.add_subcommand("sweep", "one run per hyperparameter value");
    add_common(sweep, sweep_args);
    sweep->add_option("--param", sweep_param, "lambda | buffer_size | d2 | tau")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();

    GradcheckOptions gc;
    std::string gc_strategy = "learned-omega";
    std::string gc_loss = "residual-corrected-ce";
    auto* gradcheck = app.add_subcommand("gradcheck", "compare backprop against finite differences");
    gradcheck->add_option("--strategy", gc_strategy)->capture_default_str();
    gradcheck->add_option("--loss-mode", gc_loss)->capture_default_str();
    gradcheck->add_option("--seed", gc.seed)->capture_default_str();
    gradcheck->add_option("--d1", gc.d1)->capture_default_str();
    gradcheck->add_option("--d2", gc.d2)->capture_default_str();
    gradcheck->add_option("--blocks", gc.blocks)->capture_default_str();
    gradcheck->add_flag("--corrupt", gc.corrupt, "perturb one analytic gradient (must FAIL)");

    CommonArgs snapshot_args;
    auto* snapshot = app.add_subcommand("snapshot", "hash all frozen parameters");
    add_common(snapshot, snapshot_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const RunConfig cfg = resolve(train_args);
            if (train_args.print_config) {
                std::cout << to_text(cfg);
                return 0;
            }
            if (!train_args.seeds.empty()) {
                const auto agg = run_seeds(cfg, parse_seeds(train_args.seeds, cfg.class_seed), true,
                                           train_args.quiet ? nullptr : &std::cout);
                fmt::print("average accuracy {:.2f} ± {:.2f}%  last accuracy {:.2f} ± {:.2f}%\n",
                           100.0 * agg.average_accuracy.mean, 100.0 * agg.average_accuracy.stddev,
                           100.0 * agg.last_accuracy.mean, 100.0 * agg.last_accuracy.stddev);
                return 0;
            }
            TrainOptions opts;
            if (!resume.empty()) {
                opts.resume_from = resume;
            }
            opts.stop_after = stop_after;
            opts.log = train_args.quiet ? nullptr : &std::cout;
            print_summary(run_training(cfg, opts));
            fmt::print("artifacts in {}\n", resolve_output_dir(cfg).string());
        } else if (eval->parsed()) {
            const Checkpoint ckpt = load_checkpoint(eval_checkpoint);
            const TaskStream stream = make_stream(ckpt.config);
            std::vector<SessionReport> reports;
            for (int t = 1; t <= ckpt.model.sessions_completed; ++t) {
                reports.push_back(evaluate(ckpt.model, stream, t, ckpt.config.train));
            }
            if (reports.empty()) {
                throw ValidationError("checkpoint has no completed sessions");
            }
            print_summary(summarize(reports, config_hash(ckpt.config)));
        } else if (ablate->parsed()) {
            const RunConfig cfg = resolve(ablate_args);
            if (ablate_args.print_config) {
                std::cout << to_text(cfg);
                return 0;
            }
            const auto rows = run_ablation(cfg, split_list(variants), parse_seeds(ablate_args.seeds, cfg.class_seed),
                                           true);
            std::cout << ablation_csv(rows);
        } else if (sweep->parsed()) {
            const RunConfig cfg = resolve(sweep_args);
            if (sweep_args.print_config) {
                std::cout << to_text(cfg);
                return 0;
            }
            const auto rows = run_sweep(cfg, sweep_param, parse_values(sweep_values),
                                        parse_seeds(sweep_args.seeds, cfg.class_seed), true);
            std::cout << sweep_csv(rows);
        } else if (gradcheck->parsed()) {
            gc.strategy = parse_strategy(gc_strategy);
            gc.loss_mode = parse_loss_mode(gc_loss);
            const GradcheckReport report = run_gradcheck(gc);
            std::cout << report.to_text();
            return report.passed ? 0 : 2;
        } else if (snapshot->parsed()) {
            const RunConfig cfg = resolve(snapshot_args);
            const Snapshot snap = make_snapshot(cfg);
            const std::string text = snap.to_text();
            std::cout << text;
            write_text_file(resolve_output_dir(cfg) / "snapshot.txt", text);
        }
    } catch (const NumericalBreakdown& e) {
        std::cerr << "numerical breakdown: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
