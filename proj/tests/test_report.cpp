#include "mincil/errors.hpp"
#include "mincil/report.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <regex>
#include <string>
#include <vector>

using namespace mincil;

namespace {

std::vector<SessionReport> reports_from(const std::vector<double>& acc) {
    std::vector<SessionReport> out;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        SessionReport r;
        r.task_index = static_cast<int>(i) + 1;
        r.accuracy_seen = acc[i];
        r.test_samples = 10 * r.task_index;
        r.per_class_accuracy = {{static_cast<int>(i), acc[i]}};
        r.epoch_losses = {1.0, 0.5};
        out.push_back(r);
    }
    return out;
}

// Minimal well-formedness check: balanced tags, quoted attributes, escaped text.
bool well_formed_xml(const std::string& doc) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    if (doc.rfind("<?xml", 0) == 0) {
        i = doc.find("?>");
        if (i == std::string::npos) {
            return false;
        }
        i += 2;
    }
    bool seen_root = false;
    while (i < doc.size()) {
        if (doc[i] == '<') {
            const auto close = doc.find('>', i);
            if (close == std::string::npos) {
                return false;
            }
            std::string tag = doc.substr(i + 1, close - i - 1);
            i = close + 1;
            if (!tag.empty() && tag[0] == '/') {
                if (stack.empty() || stack.back() != tag.substr(1)) {
                    return false;
                }
                stack.pop_back();
                continue;
            }
            const bool self_closing = !tag.empty() && tag.back() == '/';
            if (self_closing) {
                tag.pop_back();
            }
            static const std::regex element(R"(^([A-Za-z_][\w:.-]*)(\s+[\w:.-]+="[^"<&]*")*\s*$)");
            std::smatch m;
            if (!std::regex_match(tag, m, element)) {
                return false;
            }
            if (stack.empty()) {
                if (seen_root) {
                    return false;
                }
                seen_root = true;
            }
            if (!self_closing) {
                stack.push_back(m[1]);
            }
        } else {
            if (doc[i] == '&') {
                const auto semi = doc.find(';', i);
                const std::string ent = doc.substr(i, semi - i + 1);
                if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") {
                    return false;
                }
            }
            if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i]))) {
                return false;
            }
            ++i;
        }
    }
    return seen_root && stack.empty();
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("summarize arithmetic") {
    const auto s = summarize(reports_from({0.9, 0.8, 0.7}), "abc");
    CHECK(s.average_accuracy == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(s.last_accuracy == 0.7);
    CHECK(s.config_hash == "abc");

    const auto one = summarize(reports_from({0.42}));
    CHECK(one.average_accuracy == 0.42);
    CHECK(one.last_accuracy == 0.42);

    const auto flat = summarize(reports_from({0.3, 0.3, 0.3, 0.3}));
    CHECK(flat.average_accuracy == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("summarize rejects gaps and empty input") {
    CHECK_THROWS_AS(summarize({}), ValidationError);
    auto r = reports_from({0.9, 0.8, 0.7});
    r[2].task_index = 4;
    CHECK_THROWS_AS(summarize(r), ValidationError);
}

TEST_CASE("mean and sample standard deviation") {
    const auto m = mean_std({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
    CHECK(m.mean == 5.0);
    CHECK(m.stddev == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(mean_std({3.0}).stddev == 0.0);
}

TEST_CASE("accuracy csv: header plus one row per session, percent with two decimals") {
    const auto s = summarize(reports_from({0.9, 0.8125, 0.7, 0.65, 1.0}));
    const std::string csv = accuracy_csv(s);
    CHECK(csv == "task,accuracy_pct\n1,90.00\n2,81.25\n3,70.00\n4,65.00\n5,100.00\n");
    CHECK(accuracy_csv(s) == csv);
}

TEST_CASE("summary json keeps a fixed key order and all fields") {
    const auto s = summarize(reports_from({0.9, 0.8}), "h");
    const std::string text = summary_json(s);
    CHECK(text == summary_json(s));
    const auto j = nlohmann::json::parse(text);
    CHECK(j["average_accuracy"].get<double>() == doctest::Approx(0.85));
    CHECK(j["last_accuracy"].get<double>() == 0.8);
    CHECK(j["sessions"].size() == 2);
    CHECK(j["sessions"][1]["test_samples"].get<int>() == 20);
    CHECK(j["sessions"][0]["per_class_accuracy"]["0"].get<double>() == 0.9);
    CHECK(text.find("\"config_hash\"") < text.find("\"average_accuracy\""));
    CHECK(text.find("\"average_accuracy\"") < text.find("\"sessions\""));
}

TEST_CASE("svg chart is well-formed and has one polyline per series") {
    std::vector<ChartSeries> series{{"a & b", {1, 2, 3}, {90, 80, 70}}, {"<c>", {1, 2, 3}, {50, 60, 55}}};
    const std::string svg = line_chart_svg("title \"q\"", "x", "y", series);
    CHECK(well_formed_xml(svg));
    CHECK(svg.find("viewBox=\"0 0 800 500\"") != std::string::npos);
    std::size_t count = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) {
        ++count;
    }
    CHECK(count == 2);
    CHECK(well_formed_xml(line_chart_svg("empty", "x", "y", {})));
    // the checker itself must reject broken documents
    CHECK_FALSE(well_formed_xml("<svg><g></svg>"));
    CHECK_FALSE(well_formed_xml("<svg>a & b</svg>"));
}

TEST_CASE("emit writes the three artifacts byte-stably") {
    const auto dir = std::filesystem::temp_directory_path() / "mincil_report_test";
    std::filesystem::remove_all(dir);
    const auto s = summarize(reports_from({0.9, 0.8, 0.75, 0.7, 0.6}), "cfg");
    emit(s, dir / "a");
    emit(s, dir / "b");
    for (const char* name : {"accuracy.csv", "summary.json", "accuracy.svg"}) {
        CHECK(read_text_file(dir / "a" / name) == read_text_file(dir / "b" / name));
    }
    const std::string csv = read_text_file(dir / "a" / "accuracy.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(well_formed_xml(read_text_file(dir / "a" / "accuracy.svg")));
    CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), IoError);
    std::filesystem::remove_all(dir);
}

}
