#pragma once

#include "mincil/config.hpp"
#include "mincil/data_stream.hpp"
#include "mincil/report.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mincil {

/// Synthetic or embedding-file stream as described by the config.
TaskStream make_stream(const RunConfig& config);

/// Prefixes a relative output.dir with $MINCIL_OUTPUT_ROOT when that is set.
std::filesystem::path resolve_output_dir(const RunConfig& config);

struct TrainOptions {
    std::optional<std::filesystem::path> resume_from;
    int stop_after = -1;          // stop once this many sessions are complete
    bool write_artifacts = true;  // checkpoint, CSV, JSON, SVG, train_log.csv
    std::ostream* log = nullptr;  // per-epoch `session,epoch,lr,mean_loss` lines
};

/// Runs (or resumes) every session of the stream with evaluation after each.
RunSummary run_training(const RunConfig& config, const TrainOptions& options = {});

/// Per-seed runs in <output>/seed-<s>/ plus seeds.csv with mean and sample std.
struct SeedAggregate {
    std::vector<std::uint64_t> seeds;
    std::vector<RunSummary> runs;
    MeanStd average_accuracy;
    MeanStd last_accuracy;
};
SeedAggregate run_seeds(const RunConfig& config, const std::vector<std::uint64_t>& seeds, bool write_artifacts,
                        std::ostream* log = nullptr);

/// Ablation variants: baseline, average, mu-only, sigma-only, last-task, random-task, full.
const std::vector<std::string>& ablation_variants();
RunConfig variant_config(const RunConfig& base, const std::string& variant);

struct AblationRow {
    std::string variant;
    MeanStd average_accuracy;
    MeanStd last_accuracy;
    std::string stream_hash;
};

/// Each variant on identical streams; writes ablation.csv.
std::vector<AblationRow> run_ablation(const RunConfig& base, const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds, bool write_artifacts);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct SweepRow {
    std::string parameter;
    double value = 0.0;
    MeanStd average_accuracy;
    MeanStd last_accuracy;
    std::size_t trainable_params_per_task = 0;
};

/// One run per value of lambda | buffer_size | d2 | tau; writes sweep.csv and sweep.svg.
std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& parameter, const std::vector<double>& values,
                                const std::vector<std::uint64_t>& seeds, bool write_artifacts);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Generator parameters added per session: L * 2 * (d2^2 + d2).
std::size_t trainable_params_per_task(const RunConfig& config);

struct GradcheckOptions {
    int d1 = 8;
    int d2 = 4;
    int blocks = 2;
    int batch = 3;
    std::uint64_t seed = 5;
    MixtureStrategy strategy = MixtureStrategy::LearnedOmega;
    LossMode loss_mode = LossMode::ResidualCorrectedCe;
    double fd_epsilon = 1e-6;
    double rel_tolerance = 1e-4;
    double abs_floor = 1e-7;
    bool corrupt = false;  // perturb one analytic coordinate (negative control)
};

struct GradcheckGroup {
    std::size_t coordinates = 0;
    double max_abs_error = 0.0;
    double max_gradient = 0.0;  // largest |analytic| coordinate, for scale
    double max_rel_error = 0.0;  // over coordinates whose abs error exceeds the floor
};

struct GradcheckReport {
    std::map<std::string, GradcheckGroup> groups;
    bool passed = false;
    double max_rel_error = 0.0;

    std::string to_text() const;
};

/// Analytic backward pass against central differences on a two-task instance
/// (one frozen and one trainable generator per layer).
GradcheckReport run_gradcheck(const GradcheckOptions& options);

/// Hashes of all frozen parameters for a config and input width.
struct Snapshot {
    std::string backbone_hash;
    std::string projection_hash;
    std::string config_hash;
    std::string stream_hash;
    std::string to_text() const;
};
Snapshot make_snapshot(const RunConfig& config);

}  // namespace mincil
