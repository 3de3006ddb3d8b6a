#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mincil {

struct SessionReport {
    int task_index = 0;
    double accuracy_seen = 0.0;  // fraction in [0, 1]
    std::map<int, double> per_class_accuracy;
    std::vector<double> epoch_losses;
    int test_samples = 0;
};

struct RunSummary {
    std::vector<SessionReport> reports;
    double average_accuracy = 0.0;
    double last_accuracy = 0.0;
    std::string config_hash;
};

/// Mean accuracy over sessions and the final-session accuracy. Task indices
/// must run 1..T without gaps.
RunSummary summarize(const std::vector<SessionReport>& reports, std::string config_hash = {});

/// Mean and sample standard deviation (0 for a single value).
struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

/// `task,accuracy_pct` with two decimals.
std::string accuracy_csv(const RunSummary& summary);
/// Full summary with a fixed key order.
std::string summary_json(const RunSummary& summary);

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;  // percent
};
/// 800x500 viewBox, one polyline per series.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series);

/// Writes accuracy.csv, summary.json and accuracy.svg into `dir`.
void emit(const RunSummary& summary, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mincil
