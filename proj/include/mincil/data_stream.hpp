#pragma once

#include "mincil/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mincil {

/// A labelled split stored column-compactly: one feature row per sample.
struct SampleSet {
    Matrix features;          // n x d_raw
    std::vector<int> labels;  // n entries, original class ids

    std::size_t size() const noexcept { return labels.size(); }
};

struct TaskDataset {
    int task_index = 0;  // 1-based
    SampleSet train;
    SampleSet test;
    std::vector<int> class_set;  // in learning order
};

struct TaskStream {
    std::vector<TaskDataset> tasks;
    std::vector<int> class_order;
    std::uint64_t seed = 0;
    int num_classes = 0;
    int feature_dim = 0;

    int num_tasks() const noexcept { return static_cast<int>(tasks.size()); }
    /// SHA-256 over class order, labels and feature bytes.
    std::string content_hash() const;
};

struct SyntheticStreamParams {
    int num_classes = 20;
    int samples_per_class = 50;
    int dim = 32;
    double separation = 8.0;
    int overlap_classes = 0;
    int num_tasks = 5;
};

/// Fisher-Yates permutation of [0, num_classes) drawn from SeededRng(seed).
std::vector<int> shuffle_class_order(int num_classes, std::uint64_t seed);

/// Splits `class_order` into `num_tasks` contiguous groups; earlier groups
/// take the remainder when the division is uneven.
std::vector<std::vector<int>> partition_classes(const std::vector<int>& class_order, int num_tasks);

/// Isotropic unit-variance Gaussian clusters with means on a sphere of radius
/// `separation`, 80/20 per-class train/test split, tasks in seeded class order.
/// `overlap_classes` cross-task class pairs get means 1.0 apart.
TaskStream make_synthetic_stream(const SyntheticStreamParams& params, std::uint64_t seed);

/// Reads the `label,f0,...` embedding CSV. A sibling `<stem>.split` file, when
/// present, lists test-set row indices; otherwise a seeded 80/20 per-class split
/// is used.
TaskStream load_embedding_stream(const std::filesystem::path& path, int num_tasks, std::uint64_t seed);

/// Builds the stream from already-split data. Labels must lie in [0, num_classes).
TaskStream build_stream(const SampleSet& train, const SampleSet& test, int num_classes, int num_tasks,
                        std::uint64_t seed);

/// Concatenation of the test sets of tasks 1..upto.
SampleSet seen_test_set(const TaskStream& stream, int upto);

}  // namespace mincil
