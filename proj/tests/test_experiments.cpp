#include "mincil/errors.hpp"
#include "mincil/experiments.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>

using namespace mincil;

namespace {

RunConfig tiny(const std::string& dir) {
    RunConfig c;
    apply_config_text(c, R"(
        data.num_classes = 6
        data.samples_per_class = 20
        data.dim = 6
        data.tasks = 2
        backbone.blocks = 2
        backbone.d1 = 8
        backbone.buffer_size = 64
        pinoise.d2 = 4
        classifier.lambda = 10
        train.epochs = 1
        train.batch_size = 32
    )");
    c.output_dir = (std::filesystem::temp_directory_path() / "mincil_exp_test" / dir).string();
    std::filesystem::remove_all(c.output_dir);
    return c;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("train writes every artifact") {
    const RunConfig cfg = tiny("train");
    const RunSummary s = run_training(cfg);
    CHECK(s.reports.size() == 2);
    const auto dir = resolve_output_dir(cfg);
    for (const char* name : {"accuracy.csv", "summary.json", "accuracy.svg", "checkpoint.bin", "train_log.csv"}) {
        CHECK(std::filesystem::exists(dir / name));
    }
    const std::string log = read_text_file(dir / "train_log.csv");
    CHECK(log.rfind("session,epoch,lr,mean_loss\n", 0) == 0);
    CHECK(line_count(log) == 1 + 2);  // header + one epoch per session
    CHECK(s.config_hash == config_hash(cfg));
}

TEST_CASE("identical configs give byte-identical CSV; other seeds change the stream") {
    RunConfig a = tiny("det_a");
    RunConfig b = tiny("det_b");
    run_training(a);
    run_training(b);
    CHECK(read_text_file(resolve_output_dir(a) / "accuracy.csv") ==
          read_text_file(resolve_output_dir(b) / "accuracy.csv"));
    CHECK(read_text_file(resolve_output_dir(a) / "summary.json") ==
          read_text_file(resolve_output_dir(b) / "summary.json"));
    RunConfig c = tiny("det_c");
    c.class_seed = 7;
    CHECK(make_stream(c).content_hash() != make_stream(a).content_hash());
    CHECK(run_training(c).reports.size() == 2);
}

TEST_CASE("multi-seed aggregate") {
    const RunConfig cfg = tiny("seeds");
    const auto agg = run_seeds(cfg, {1, 2, 3}, true);
    CHECK(agg.runs.size() == 3);
    std::vector<double> avg;
    for (const auto& r : agg.runs) {
        avg.push_back(r.average_accuracy);
    }
    CHECK(agg.average_accuracy.mean == doctest::Approx(mean_std(avg).mean));
    const auto dir = resolve_output_dir(cfg);
    CHECK(std::filesystem::exists(dir / "seed-2" / "accuracy.csv"));
    CHECK(line_count(read_text_file(dir / "seeds.csv")) == 1 + 3 + 2);
    CHECK_THROWS_AS(run_seeds(cfg, {}, false), ValidationError);
}

TEST_CASE("variant configs") {
    const RunConfig base = tiny("variants");
    CHECK_FALSE(variant_config(base, "baseline").model.pinoise_enabled);
    CHECK(variant_config(base, "full").train.strategy == MixtureStrategy::LearnedOmega);
    CHECK(variant_config(base, "mu-only").train.strategy == MixtureStrategy::MuOnly);
    CHECK(variant_config(base, "random-task").train.strategy == MixtureStrategy::RandomTask);
    CHECK_THROWS_AS(variant_config(base, "learned-omega"), ValidationError);
    CHECK_THROWS_AS(variant_config(base, "nonsense"), ValidationError);
}

TEST_CASE("ablation: one row per variant on identical streams") {
    const RunConfig base = tiny("ablation");
    const auto rows = run_ablation(base, ablation_variants(), {1993, 5}, true);
    REQUIRE(rows.size() == ablation_variants().size());
    for (const auto& r : rows) {
        CHECK(r.stream_hash == rows.front().stream_hash);
    }
    const std::string csv = read_text_file(resolve_output_dir(base) / "ablation.csv");
    CHECK(line_count(csv) == 1 + rows.size());
    CHECK(csv == ablation_csv(rows));
    CHECK_THROWS_AS(run_ablation(base, {"full"}, {1}, false), ValidationError);
}

TEST_CASE("ablation on separable data: noise changes little") {
    const RunConfig base = tiny("ablation_sep");
    const auto rows = run_ablation(base, {"baseline", "full"}, {1993}, false);
    CHECK(std::abs(rows[0].average_accuracy.mean - rows[1].average_accuracy.mean) <= 0.02);
}

TEST_CASE("sweep rows, chart and parameter counts") {
    const RunConfig base = tiny("sweep");
    const auto lambdas = run_sweep(base, "lambda", {10, 50, 100, 500, 1000}, {1993}, true);
    CHECK(lambdas.size() == 5);
    const auto dir = resolve_output_dir(base);
    CHECK(line_count(read_text_file(dir / "sweep.csv")) == 6);
    CHECK(std::filesystem::exists(dir / "sweep.svg"));

    const auto d2 = run_sweep(base, "d2", {2, 4, 6, 8}, {1993}, false);
    for (std::size_t i = 1; i < d2.size(); ++i) {
        CHECK(d2[i].trainable_params_per_task > d2[i - 1].trainable_params_per_task);
    }
    // L * 2 * (d2^2 + d2) with L = 2, d2 = 4
    CHECK(d2[1].trainable_params_per_task == 2u * 2u * (16u + 4u));

    CHECK_THROWS_AS(run_sweep(base, "momentum", {0.5}, {1}, false), ValidationError);
    CHECK_THROWS_AS(run_sweep(base, "d2", {2.5}, {1}, false), ValidationError);
    CHECK_THROWS_AS(run_sweep(base, "tau", {0.0}, {1}, false), ValidationError);
}

TEST_CASE("paper-dims parameter count") {
    RunConfig c;
    apply_profile(c, "paper-dims");
    CHECK(trainable_params_per_task(c) == 4u * 2u * (192u * 192u + 192u));
}

TEST_CASE("gradcheck report text lists every group") {
    const auto report = run_gradcheck(GradcheckOptions{});
    const std::string text = report.to_text();
    CHECK(text.rfind("gradcheck: PASS", 0) == 0);
    for (const char* g : {"phi_mu", "phi_sigma", "omega", "w_aux"}) {
        CHECK(text.find(g) != std::string::npos);
    }
    GradcheckOptions big;
    big.d1 = 32;
    CHECK_THROWS_AS(run_gradcheck(big), ValidationError);
}

TEST_CASE("snapshot hashes are stable and seed-sensitive") {
    RunConfig a;
    const auto s1 = make_snapshot(a);
    const auto s2 = make_snapshot(a);
    CHECK(s1.to_text() == s2.to_text());
    CHECK(s1.to_text().find("backbone_sha256 = ") == 0);
    a.model.seed = 8;
    CHECK(make_snapshot(a).backbone_hash != s1.backbone_hash);
}

TEST_CASE("embedding source through the config") {
    RunConfig c = tiny("embedding");
    apply_setting(c, "data.source", "embedding");
    apply_setting(c, "data.path", std::string(MINCIL_TEST_DATA_DIR) + "/ten_classes.csv");
    apply_setting(c, "data.tasks", "5");
    validate(c);
    const auto s = make_stream(c);
    CHECK(s.num_tasks() == 5);
    CHECK(run_training(c).reports.size() == 5);

    RunConfig missing = tiny("embedding_missing");
    apply_setting(missing, "data.source", "embedding");
    CHECK_THROWS_AS(validate(missing), ValidationError);
}

TEST_CASE("output root from the environment applies to relative dirs only") {
    RunConfig c;
    c.output_dir = "runs/x";
    ::setenv("MINCIL_OUTPUT_ROOT", "/tmp/root_here", 1);
    CHECK(resolve_output_dir(c) == std::filesystem::path("/tmp/root_here/runs/x"));
    c.output_dir = "/abs/dir";
    CHECK(resolve_output_dir(c) == std::filesystem::path("/abs/dir"));
    ::unsetenv("MINCIL_OUTPUT_ROOT");
    c.output_dir = "runs/x";
    CHECK(resolve_output_dir(c) == std::filesystem::path("runs/x"));
}

}
