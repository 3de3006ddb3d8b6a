#include "mincil/report.hpp"

#include "mincil/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mincil {

RunSummary summarize(const std::vector<SessionReport>& reports, std::string config_hash) {
    if (reports.empty()) {
        throw ValidationError("summarize: no session reports");
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].task_index != static_cast<int>(i) + 1) {
            throw ValidationError("summarize: expected task " + std::to_string(i + 1) + ", found " +
                                  std::to_string(reports[i].task_index));
        }
    }
    RunSummary s;
    s.reports = reports;
    double total = 0.0;
    for (const auto& r : reports) {
        total += r.accuracy_seen;
    }
    s.average_accuracy = total / static_cast<double>(reports.size());
    s.last_accuracy = reports.back().accuracy_seen;
    s.config_hash = std::move(config_hash);
    return s;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    for (double v : values) {
        out.mean += v;
    }
    out.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - out.mean) * (v - out.mean);
        }
        out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

std::string accuracy_csv(const RunSummary& summary) {
    std::string out = "task,accuracy_pct\n";
    for (const auto& r : summary.reports) {
        out += fmt::format("{},{:.2f}\n", r.task_index, 100.0 * r.accuracy_seen);
    }
    return out;
}

std::string summary_json(const RunSummary& summary) {
    nlohmann::ordered_json j;
    j["config_hash"] = summary.config_hash;
    j["average_accuracy"] = summary.average_accuracy;
    j["last_accuracy"] = summary.last_accuracy;
    auto sessions = nlohmann::ordered_json::array();
    for (const auto& r : summary.reports) {
        nlohmann::ordered_json s;
        s["task"] = r.task_index;
        s["accuracy"] = r.accuracy_seen;
        s["test_samples"] = r.test_samples;
        nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
        for (const auto& [cls, acc] : r.per_class_accuracy) {
            per_class[std::to_string(cls)] = acc;
        }
        s["per_class_accuracy"] = per_class;
        s["epoch_losses"] = r.epoch_losses;
        sessions.push_back(std::move(s));
    }
    j["sessions"] = std::move(sessions);
    return j.dump(2) + "\n";
}

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
    constexpr double kWidth = 800, kHeight = 500;
    constexpr double kLeft = 70, kRight = 30, kTop = 50, kBottom = 60;
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    double x_min = 0, x_max = 1, y_min = 0, y_max = 100;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                x_min = x_max = s.x[i];
                y_min = s.y[i];
                first = false;
            }
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
        }
    }
    if (x_max <= x_min) {
        x_max = x_min + 1;
    }
    y_min = std::max(0.0, std::floor(y_min / 10.0) * 10.0);
    if (y_min >= y_max) {
        y_min = 0;
    }
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" width=\"800\" height=\"500\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
    svg += fmt::format("<text x=\"400\" y=\"28\" text-anchor=\"middle\" font-size=\"18\">{}</text>\n", xml_escape(title));
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", kLeft,
                       kTop + plot_h, kLeft + plot_w, kTop + plot_h);
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", kLeft, kTop,
                       kLeft, kTop + plot_h);
    for (int k = 0; k <= 5; ++k) {
        const double y = y_min + (y_max - y_min) * k / 5.0;
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-size=\"12\">{:.1f}</text>\n",
                           kLeft - 8, py(y) + 4, y);
    }
    if (!series.empty()) {
        for (double x : series.front().x) {
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"12\">{:g}</text>\n",
                               px(x), kTop + plot_h + 18, x);
        }
    }
    svg += fmt::format("<text x=\"400\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", kHeight - 15,
                       xml_escape(x_label));
    svg += fmt::format(
        "<text x=\"18\" y=\"250\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 250)\">{}</text>\n",
        xml_escape(y_label));
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % std::size(kColors)];
        std::string points;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            points += fmt::format("{}{:.2f},{:.2f}", i == 0 ? "" : " ", px(series[s].x[i]), py(series[s].y[i]));
        }
        svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, points);
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" fill=\"{}\">{}</text>\n", kLeft + 10,
                           kTop + 16 + 16 * static_cast<double>(s), color, xml_escape(series[s].label));
    }
    svg += "</svg>\n";
    return svg;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const RunSummary& summary, const std::filesystem::path& dir) {
    write_text_file(dir / "accuracy.csv", accuracy_csv(summary));
    write_text_file(dir / "summary.json", summary_json(summary));
    ChartSeries series{"run", {}, {}};
    for (const auto& r : summary.reports) {
        series.x.push_back(r.task_index);
        series.y.push_back(100.0 * r.accuracy_seen);
    }
    write_text_file(dir / "accuracy.svg",
                    line_chart_svg("Accuracy on seen classes", "session", "accuracy (%)", {series}));
}

}  // namespace mincil
