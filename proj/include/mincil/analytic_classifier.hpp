#pragma once

#include "mincil/matrix.hpp"

#include <span>
#include <string>
#include <vector>

namespace mincil {

/// Exemplar-free ridge classifier with exact recursive updates.
///
/// Holds W (d_e x C_seen) and R = (sum_i Z_i^T Z_i + lambda I)^{-1}. Each
/// update touches only the incoming rows, the previous W and R; after any
/// sequence of updates W equals the batch ridge solution on all rows seen.
class AnalyticClassifier {
public:
    AnalyticClassifier() = default;
    /// W with zero columns, R = I / lambda.
    AnalyticClassifier(int feature_dim, double lambda);

    /// Appends zero columns for classes not seen before. Duplicates are rejected.
    void add_classes(std::span<const int> classes);

    /// One recursive step on a feature block Z (n x d_e) with one-hot targets
    /// Y (n x C_seen). Uses the n x n system when n <= d_e, otherwise the
    /// d_e-side form.
    void update(const Matrix& features, const Matrix& targets);

    /// Z W. Throws when no class has been registered.
    Matrix predict(const Matrix& features) const;
    /// Argmax column per row mapped back to class ids; ties go to the lowest column.
    std::vector<int> predict_labels(const Matrix& features) const;

    /// One-hot rows over classes_seen for the given class ids.
    Matrix one_hot(std::span<const int> labels) const;
    int column_of(int class_id) const;

    int feature_dim() const { return static_cast<int>(r_.rows()); }
    int num_classes() const { return static_cast<int>(classes_.size()); }
    double lambda() const { return lambda_; }
    const Matrix& weights() const { return w_; }
    const Matrix& autocorrelation() const { return r_; }
    const std::vector<int>& classes_seen() const { return classes_; }

    /// Rebuilds a state from stored parts, validating shapes, symmetry and
    /// positive diagonal.
    static AnalyticClassifier from_parts(Matrix weights, Matrix autocorrelation, double lambda,
                                         std::vector<int> classes);

    std::string state_hash() const;

private:
    Matrix w_;
    Matrix r_;
    double lambda_ = 1.0;
    std::vector<int> classes_;
};

/// Index of the largest entry of each row, first index on ties.
std::vector<int> argmax_rows(const Matrix& logits);

}  // namespace mincil
