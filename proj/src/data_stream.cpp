#include "mincil/data_stream.hpp"

#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"
#include "mincil/rng.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace mincil {
namespace {

constexpr std::uint64_t kClusterSalt = 1;
constexpr std::uint64_t kSplitSalt = 2;

SampleSet gather_rows(const SampleSet& source, const std::vector<int>& classes) {
    std::vector<Eigen::Index> rows;
    SampleSet out;
    for (int cls : classes) {
        for (std::size_t i = 0; i < source.labels.size(); ++i) {
            if (source.labels[i] == cls) {
                rows.push_back(static_cast<Eigen::Index>(i));
                out.labels.push_back(cls);
            }
        }
    }
    out.features.resize(static_cast<Eigen::Index>(rows.size()), source.features.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.features.row(static_cast<Eigen::Index>(k)) = source.features.row(rows[k]);
    }
    return out;
}

void shuffle_in_place(std::vector<std::size_t>& items, SeededRng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(items[i - 1], items[j]);
    }
}

double parse_real(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ValidationError("embedding CSV line " + std::to_string(line_no) + ": malformed number '" +
                              std::string(field) + "'");
    }
    return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

}  // namespace

std::string TaskStream::content_hash() const {
    ContentHasher h;
    h.text("task-stream").u64(seed).u64(static_cast<std::uint64_t>(num_classes)).ints(class_order);
    for (const auto& task : tasks) {
        h.u64(static_cast<std::uint64_t>(task.task_index)).ints(task.class_set);
        h.matrix(task.train.features).ints(task.train.labels);
        h.matrix(task.test.features).ints(task.test.labels);
    }
    return h.hex_digest();
}

std::vector<int> shuffle_class_order(int num_classes, std::uint64_t seed) {
    if (num_classes < 1) {
        throw ValidationError("shuffle_class_order: need at least one class");
    }
    std::vector<int> order(static_cast<std::size_t>(num_classes));
    std::iota(order.begin(), order.end(), 0);
    SeededRng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

std::vector<std::vector<int>> partition_classes(const std::vector<int>& class_order, int num_tasks) {
    const int total = static_cast<int>(class_order.size());
    if (num_tasks < 1 || num_tasks > total) {
        throw ValidationError("cannot split " + std::to_string(total) + " classes into " +
                              std::to_string(num_tasks) + " tasks");
    }
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(num_tasks));
    const int base = total / num_tasks;
    const int extra = total % num_tasks;
    int pos = 0;
    for (int t = 0; t < num_tasks; ++t) {
        const int count = base + (t < extra ? 1 : 0);
        groups[static_cast<std::size_t>(t)].assign(class_order.begin() + pos, class_order.begin() + pos + count);
        pos += count;
    }
    return groups;
}

TaskStream build_stream(const SampleSet& train, const SampleSet& test, int num_classes, int num_tasks,
                        std::uint64_t seed) {
    if (num_classes < num_tasks) {
        throw ValidationError("fewer classes (" + std::to_string(num_classes) + ") than tasks (" +
                              std::to_string(num_tasks) + ")");
    }
    for (const SampleSet* set : {&train, &test}) {
        if (set->features.rows() != static_cast<Eigen::Index>(set->labels.size())) {
            throw ValidationError("sample set: feature rows and label count differ");
        }
        for (int label : set->labels) {
            if (label < 0 || label >= num_classes) {
                throw ValidationError("label " + std::to_string(label) + " outside [0, " +
                                      std::to_string(num_classes) + ")");
            }
        }
    }
    if (train.features.cols() != test.features.cols() && test.size() > 0) {
        throw ValidationError("train and test feature widths differ");
    }

    TaskStream stream;
    stream.seed = seed;
    stream.num_classes = num_classes;
    stream.feature_dim = static_cast<int>(train.features.cols());
    stream.class_order = shuffle_class_order(num_classes, seed);
    const auto groups = partition_classes(stream.class_order, num_tasks);
    for (int t = 0; t < num_tasks; ++t) {
        TaskDataset task;
        task.task_index = t + 1;
        task.class_set = groups[static_cast<std::size_t>(t)];
        task.train = gather_rows(train, task.class_set);
        task.test = gather_rows(test, task.class_set);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

TaskStream make_synthetic_stream(const SyntheticStreamParams& p, std::uint64_t seed) {
    if (p.num_tasks < 1 || p.num_tasks > p.num_classes) {
        throw ValidationError("synthetic stream: tasks must lie in [1, num_classes]");
    }
    if (p.samples_per_class < 5) {
        throw ValidationError("synthetic stream: samples_per_class must be at least 5");
    }
    if (p.dim < 2) {
        throw ValidationError("synthetic stream: dim must be at least 2");
    }
    if (!(p.separation >= 0.0)) {
        throw ValidationError("synthetic stream: separation must be non-negative");
    }
    if (p.overlap_classes < 0 || (p.overlap_classes > 0 && p.num_tasks < 2)) {
        throw ValidationError("synthetic stream: overlapping pairs need at least two tasks");
    }

    SeededRng rng = SeededRng(seed).derive(kClusterSalt);
    Matrix means(p.num_classes, p.dim);
    for (int c = 0; c < p.num_classes; ++c) {
        RowVector direction = sample_standard_normal(rng, 1, p.dim);
        means.row(c) = p.separation * direction / direction.norm();
    }

    if (p.overlap_classes > 0) {
        // Pair classes from neighbouring tasks so the confusion crosses task boundaries.
        const auto groups = partition_classes(shuffle_class_order(p.num_classes, seed), p.num_tasks);
        std::vector<std::size_t> next(groups.size(), 0);
        std::set<int> used;
        auto take = [&](std::size_t task) {
            const auto& g = groups[task];
            while (next[task] < g.size() && used.count(g[next[task]]) != 0) {
                ++next[task];
            }
            if (next[task] >= g.size()) {
                throw ValidationError("synthetic stream: too many overlap_classes for the task layout");
            }
            const int cls = g[next[task]++];
            used.insert(cls);
            return cls;
        };
        for (int k = 0; k < p.overlap_classes; ++k) {
            const auto anchor_task = static_cast<std::size_t>(k % p.num_tasks);
            const auto partner_task = static_cast<std::size_t>((k + 1) % p.num_tasks);
            const int anchor = take(anchor_task);
            const int partner = take(partner_task);
            RowVector offset = sample_standard_normal(rng, 1, p.dim);
            means.row(partner) = means.row(anchor) + offset / offset.norm();
        }
    }

    const int n_test = p.samples_per_class / 5;
    const int n_train = p.samples_per_class - n_test;
    SampleSet train;
    SampleSet test;
    train.features.resize(static_cast<Eigen::Index>(p.num_classes) * n_train, p.dim);
    test.features.resize(static_cast<Eigen::Index>(p.num_classes) * n_test, p.dim);
    SeededRng split_rng = SeededRng(seed).derive(kSplitSalt);
    Eigen::Index train_row = 0;
    Eigen::Index test_row = 0;
    for (int c = 0; c < p.num_classes; ++c) {
        Matrix block = sample_standard_normal(rng, p.samples_per_class, p.dim);
        block.rowwise() += means.row(c);
        std::vector<std::size_t> idx(static_cast<std::size_t>(p.samples_per_class));
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        shuffle_in_place(idx, split_rng);
        for (int k = 0; k < p.samples_per_class; ++k) {
            const auto src = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]);
            if (k < n_test) {
                test.features.row(test_row++) = block.row(src);
                test.labels.push_back(c);
            } else {
                train.features.row(train_row++) = block.row(src);
                train.labels.push_back(c);
            }
        }
    }
    return build_stream(train, test, p.num_classes, p.num_tasks, seed);
}

TaskStream load_embedding_stream(const std::filesystem::path& path, int num_tasks, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open embedding file " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("embedding CSV is empty: " + path.string());
    }
    const auto header = split_commas(line);
    if (header.size() < 2 || header[0] != "label") {
        throw ValidationError("embedding CSV header must start with 'label,f0'");
    }
    const std::size_t dim = header.size() - 1;
    for (std::size_t j = 0; j < dim; ++j) {
        if (header[j + 1] != "f" + std::to_string(j)) {
            throw ValidationError("embedding CSV header: expected f" + std::to_string(j) + ", got '" +
                                  std::string(header[j + 1]) + "'");
        }
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto fields = split_commas(line);
        if (fields.size() != dim + 1) {
            throw ValidationError("embedding CSV line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(dim + 1) + " fields, got " + std::to_string(fields.size()));
        }
        int label = -1;
        auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), label);
        if (ec != std::errc{} || ptr != fields[0].data() + fields[0].size() || label < 0) {
            throw ValidationError("embedding CSV line " + std::to_string(line_no) + ": bad label '" +
                                  std::string(fields[0]) + "'");
        }
        labels.push_back(label);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            values.push_back(parse_real(fields[j], line_no));
        }
    }
    if (labels.empty()) {
        throw ValidationError("embedding CSV has no samples");
    }
    const int num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
    for (int l : labels) {
        ++counts[static_cast<std::size_t>(l)];
    }
    for (int c = 0; c < num_classes; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
            throw ValidationError("embedding CSV: class " + std::to_string(c) + " has no samples");
        }
    }
    if (num_classes < num_tasks) {
        throw ValidationError("embedding CSV: " + std::to_string(num_classes) + " classes cannot fill " +
                              std::to_string(num_tasks) + " tasks");
    }

    const std::size_t n = labels.size();
    Matrix all(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            all(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * dim + j];
        }
    }
    require_finite(all, "embedding CSV features");

    std::vector<bool> is_test(n, false);
    auto split_path = path;
    split_path.replace_extension(".split");
    if (std::filesystem::exists(split_path)) {
        std::ifstream split(split_path);
        std::string entry;
        while (std::getline(split, entry)) {
            if (entry.empty()) {
                continue;
            }
            std::size_t idx = 0;
            auto [ptr, ec] = std::from_chars(entry.data(), entry.data() + entry.size(), idx);
            if (ec != std::errc{} || ptr != entry.data() + entry.size() || idx >= n) {
                throw ValidationError("split file: bad index '" + entry + "'");
            }
            is_test[idx] = true;
        }
    } else {
        SeededRng split_rng = SeededRng(seed).derive(kSplitSalt);
        for (int c = 0; c < num_classes; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] == c) {
                    members.push_back(i);
                }
            }
            shuffle_in_place(members, split_rng);
            for (std::size_t k = 0; k < members.size() / 5; ++k) {
                is_test[members[k]] = true;
            }
        }
    }

    SampleSet train;
    SampleSet test;
    const auto n_test = static_cast<Eigen::Index>(std::count(is_test.begin(), is_test.end(), true));
    train.features.resize(static_cast<Eigen::Index>(n) - n_test, static_cast<Eigen::Index>(dim));
    test.features.resize(n_test, static_cast<Eigen::Index>(dim));
    Eigen::Index tr = 0;
    Eigen::Index te = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = all.row(static_cast<Eigen::Index>(i));
        if (is_test[i]) {
            test.features.row(te++) = row;
            test.labels.push_back(labels[i]);
        } else {
            train.features.row(tr++) = row;
            train.labels.push_back(labels[i]);
        }
    }
    return build_stream(train, test, num_classes, num_tasks, seed);
}

SampleSet seen_test_set(const TaskStream& stream, int upto) {
    if (upto < 1 || upto > stream.num_tasks()) {
        throw ValidationError("seen_test_set: task index out of range");
    }
    Eigen::Index rows = 0;
    for (int t = 0; t < upto; ++t) {
        rows += stream.tasks[static_cast<std::size_t>(t)].test.features.rows();
    }
    SampleSet out;
    out.features.resize(rows, stream.feature_dim);
    Eigen::Index pos = 0;
    for (int t = 0; t < upto; ++t) {
        const auto& test = stream.tasks[static_cast<std::size_t>(t)].test;
        out.features.middleRows(pos, test.features.rows()) = test.features;
        pos += test.features.rows();
        out.labels.insert(out.labels.end(), test.labels.begin(), test.labels.end());
    }
    return out;
}

}  // namespace mincil
