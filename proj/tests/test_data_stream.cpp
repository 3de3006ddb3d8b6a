#include "mincil/data_stream.hpp"
#include "mincil/errors.hpp"
#include "mincil/numeric.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

using namespace mincil;

namespace {

const std::string kData = MINCIL_TEST_DATA_DIR;

void check_disjoint_and_exhaustive(const TaskStream& s) {
    std::set<int> seen;
    for (const auto& task : s.tasks) {
        for (int c : task.class_set) {
            CHECK(seen.insert(c).second);
        }
        const std::set<int> own(task.class_set.begin(), task.class_set.end());
        for (int y : task.train.labels) {
            CHECK(own.count(y) == 1);
        }
        for (int y : task.test.labels) {
            CHECK(own.count(y) == 1);
        }
    }
    CHECK(static_cast<int>(seen.size()) == s.num_classes);
}

}  // namespace

TEST_SUITE("data_stream") {

TEST_CASE("shuffle_class_order is a stable bijection") {
    CHECK(shuffle_class_order(1, 99) == std::vector<int>{0});
    const auto p = shuffle_class_order(20, 1993);
    CHECK(p == shuffle_class_order(20, 1993));
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(20);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
    CHECK_THROWS_AS(shuffle_class_order(0, 1), ValidationError);
}

TEST_CASE("partition gives the remainder to earlier tasks") {
    std::vector<int> order(11);
    std::iota(order.begin(), order.end(), 0);
    const auto groups = partition_classes(order, 4);
    REQUIRE(groups.size() == 4);
    CHECK(groups[0].size() == 3);
    CHECK(groups[1].size() == 3);
    CHECK(groups[2].size() == 3);
    CHECK(groups[3].size() == 2);
    CHECK(groups[0] == std::vector<int>{0, 1, 2});
    CHECK(groups[3] == std::vector<int>{9, 10});
    CHECK_THROWS_AS(partition_classes(order, 12), ValidationError);
}

TEST_CASE("synthetic stream counts") {
    const SyntheticStreamParams p{20, 50, 32, 8.0, 0, 5};
    const auto s = make_synthetic_stream(p, 1993);
    REQUIRE(s.num_tasks() == 5);
    CHECK(s.feature_dim == 32);
    for (const auto& task : s.tasks) {
        CHECK(task.class_set.size() == 4);
        CHECK(task.train.size() == 160);
        CHECK(task.test.size() == 40);
        for (int c : task.class_set) {
            CHECK(std::count(task.train.labels.begin(), task.train.labels.end(), c) == 40);
            CHECK(std::count(task.test.labels.begin(), task.test.labels.end(), c) == 10);
        }
    }
    check_disjoint_and_exhaustive(s);
}

TEST_CASE("synthetic stream is deterministic in its seed") {
    const SyntheticStreamParams p{20, 50, 32, 8.0, 2, 5};
    const auto a = make_synthetic_stream(p, 1993);
    const auto b = make_synthetic_stream(p, 1993);
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.tasks[2].train.features == b.tasks[2].train.features);
    CHECK(a.content_hash() != make_synthetic_stream(p, 1994).content_hash());
}

TEST_CASE("zero separation leaves any classifier at chance") {
    const SyntheticStreamParams p{20, 50, 32, 0.0, 0, 5};
    const auto s = make_synthetic_stream(p, 1993);
    // Fit a ridge classifier on all training data at once, then score the test sets.
    Eigen::Index n_train = 0;
    for (const auto& t : s.tasks) {
        n_train += t.train.features.rows();
    }
    Matrix f(n_train, 33);
    Matrix y = Matrix::Zero(n_train, 20);
    Eigen::Index row = 0;
    for (const auto& t : s.tasks) {
        for (Eigen::Index i = 0; i < t.train.features.rows(); ++i, ++row) {
            f.row(row) << t.train.features.row(i), 1.0;
            y(row, t.train.labels[static_cast<std::size_t>(i)]) = 1.0;
        }
    }
    const Matrix w = ridge_solve(f, y, 1.0);
    const SampleSet test = seen_test_set(s, 5);
    int correct = 0;
    for (Eigen::Index i = 0; i < test.features.rows(); ++i) {
        RowVector x(33);
        x << test.features.row(i), 1.0;
        Eigen::Index arg = 0;
        (x * w).maxCoeff(&arg);
        correct += static_cast<int>(arg) == test.labels[static_cast<std::size_t>(i)];
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(test.size());
    CHECK(std::abs(acc - 1.0 / 20.0) <= 0.05);
}

TEST_CASE("per-class empirical means sit on the separation sphere") {
    const SyntheticStreamParams p{8, 200, 16, 8.0, 0, 2};
    const auto s = make_synthetic_stream(p, 7);
    for (const auto& task : s.tasks) {
        for (int c : task.class_set) {
            RowVector sum = RowVector::Zero(16);
            int n = 0;
            for (std::size_t i = 0; i < task.train.size(); ++i) {
                if (task.train.labels[i] == c) {
                    sum += task.train.features.row(static_cast<Eigen::Index>(i));
                    ++n;
                }
            }
            const RowVector mean = sum / n;
            // norm error of a d-dimensional mean estimate is about sqrt(d / n)
            CHECK(std::abs(mean.norm() - 8.0) < 3.0 * std::sqrt(16.0 / n));
        }
    }
}

TEST_CASE("overlap pairs cross task boundaries") {
    const SyntheticStreamParams p{20, 50, 32, 8.0, 4, 5};
    const auto s = make_synthetic_stream(p, 1993);
    check_disjoint_and_exhaustive(s);
    // each pair puts two class means 1.0 apart in different tasks
    std::vector<RowVector> means(20);
    std::vector<int> task_of(20);
    for (const auto& task : s.tasks) {
        for (int c : task.class_set) {
            task_of[static_cast<std::size_t>(c)] = task.task_index;
        }
        for (int c : task.class_set) {
            RowVector sum = RowVector::Zero(32);
            int n = 0;
            for (std::size_t i = 0; i < task.train.size(); ++i) {
                if (task.train.labels[i] == c) {
                    sum += task.train.features.row(static_cast<Eigen::Index>(i));
                    ++n;
                }
            }
            means[static_cast<std::size_t>(c)] = sum / n;
        }
    }
    int close_pairs = 0;
    for (int a = 0; a < 20; ++a) {
        for (int b = a + 1; b < 20; ++b) {
            if ((means[static_cast<std::size_t>(a)] - means[static_cast<std::size_t>(b)]).norm() < 3.0) {
                ++close_pairs;
                CHECK(task_of[static_cast<std::size_t>(a)] != task_of[static_cast<std::size_t>(b)]);
            }
        }
    }
    CHECK(close_pairs == 4);
}

TEST_CASE("synthetic stream argument errors") {
    CHECK_THROWS_AS(make_synthetic_stream({4, 50, 8, 1.0, 0, 5}, 1), ValidationError);
    CHECK_THROWS_AS(make_synthetic_stream({4, 4, 8, 1.0, 0, 2}, 1), ValidationError);
    CHECK_THROWS_AS(make_synthetic_stream({4, 10, 1, 1.0, 0, 2}, 1), ValidationError);
}

TEST_CASE("embedding file: 10 classes into 5 tasks in seeded order") {
    const auto s = load_embedding_stream(kData + "/ten_classes.csv", 5, 1993);
    REQUIRE(s.num_tasks() == 5);
    CHECK(s.num_classes == 10);
    CHECK(s.feature_dim == 3);
    CHECK(s.class_order == shuffle_class_order(10, 1993));
    for (int t = 0; t < 5; ++t) {
        const auto& task = s.tasks[static_cast<std::size_t>(t)];
        CHECK(task.task_index == t + 1);
        CHECK(task.class_set ==
              std::vector<int>{s.class_order[static_cast<std::size_t>(2 * t)],
                               s.class_order[static_cast<std::size_t>(2 * t + 1)]});
        // 5 rows per class, one goes to test
        CHECK(task.train.size() == 8);
        CHECK(task.test.size() == 2);
    }
    check_disjoint_and_exhaustive(s);
}

TEST_CASE("embedding file: a single task holds every class") {
    const auto s = load_embedding_stream(kData + "/ten_classes.csv", 1, 3);
    REQUIRE(s.num_tasks() == 1);
    CHECK(s.tasks[0].class_set.size() == 10);
    CHECK(s.tasks[0].train.size() + s.tasks[0].test.size() == 50);
}

TEST_CASE("embedding file: different seeds shuffle differently") {
    const auto base = load_embedding_stream(kData + "/ten_classes.csv", 5, 0).class_order;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CHECK(load_embedding_stream(kData + "/ten_classes.csv", 5, seed).class_order != base);
    }
}

TEST_CASE("embedding file: sibling split file picks the test rows") {
    const auto s = load_embedding_stream(kData + "/presplit.csv", 2, 1);
    int test_rows = 0;
    int train_rows = 0;
    for (const auto& task : s.tasks) {
        test_rows += static_cast<int>(task.test.size());
        train_rows += static_cast<int>(task.train.size());
        for (std::size_t i = 0; i < task.test.size(); ++i) {
            // the third row of class c has features near 3c
            CHECK(std::abs(task.test.features(static_cast<Eigen::Index>(i), 0) - 3.0 * task.test.labels[i]) < 1.0);
        }
    }
    CHECK(test_rows == 4);
    CHECK(train_rows == 8);
}

TEST_CASE("embedding file errors") {
    CHECK_THROWS_AS(load_embedding_stream(kData + "/missing.csv", 2, 1), IoError);
    CHECK_THROWS_AS(load_embedding_stream(kData + "/bad_width.csv", 1, 1), ValidationError);
    CHECK_THROWS_AS(load_embedding_stream(kData + "/bad_number.csv", 1, 1), ValidationError);
    CHECK_THROWS_AS(load_embedding_stream(kData + "/ten_classes.csv", 11, 1), ValidationError);
}

TEST_CASE("seen_test_set concatenates test sets in task order") {
    const auto s = make_synthetic_stream({6, 10, 4, 3.0, 0, 3}, 2);
    const auto seen = seen_test_set(s, 2);
    CHECK(seen.size() == s.tasks[0].test.size() + s.tasks[1].test.size());
    CHECK(seen.features.topRows(s.tasks[0].test.features.rows()) == s.tasks[0].test.features);
    CHECK_THROWS_AS(seen_test_set(s, 0), ValidationError);
    CHECK_THROWS_AS(seen_test_set(s, 4), ValidationError);
}

}
