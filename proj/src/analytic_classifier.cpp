#include "mincil/analytic_classifier.hpp"

#include "mincil/errors.hpp"
#include "mincil/hashing.hpp"

#include <algorithm>
#include <string>

namespace mincil {

AnalyticClassifier::AnalyticClassifier(int feature_dim, double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0)) {
        throw ValidationError("analytic classifier: lambda must be positive");
    }
    if (feature_dim < 1) {
        throw ValidationError("analytic classifier: feature dimension must be positive");
    }
    w_ = Matrix::Zero(feature_dim, 0);
    r_ = Matrix::Identity(feature_dim, feature_dim) / lambda;
}

void AnalyticClassifier::add_classes(std::span<const int> classes) {
    for (int cls : classes) {
        if (std::find(classes_.begin(), classes_.end(), cls) != classes_.end()) {
            throw ValidationError("analytic classifier: class " + std::to_string(cls) + " already registered");
        }
        classes_.push_back(cls);
    }
    Matrix grown = Matrix::Zero(w_.rows(), static_cast<Eigen::Index>(classes_.size()));
    grown.leftCols(w_.cols()) = w_;
    w_ = std::move(grown);
}

void AnalyticClassifier::update(const Matrix& z, const Matrix& y) {
    if (z.cols() != r_.rows()) {
        throw ValidationError("analytic update: feature width " + std::to_string(z.cols()) + " != " +
                              std::to_string(r_.rows()));
    }
    if (z.rows() != y.rows()) {
        throw ValidationError("analytic update: " + std::to_string(z.rows()) + " feature rows vs " +
                              std::to_string(y.rows()) + " label rows");
    }
    if (y.cols() != w_.cols()) {
        throw ValidationError("analytic update: label width " + std::to_string(y.cols()) + " != classes seen " +
                              std::to_string(w_.cols()));
    }
    if (z.rows() == 0) {
        return;
    }
    require_finite(z, "analytic update features");

    Matrix r_next;
    if (z.rows() <= z.cols()) {
        // R_t = R - R Z^T (I + Z R Z^T)^{-1} Z R
        const Matrix rzt = r_ * z.transpose();
        Matrix gain = z * rzt;
        gain.diagonal().array() += 1.0;
        Eigen::LLT<Matrix> llt(gain);
        if (llt.info() != Eigen::Success) {
            throw NumericalBreakdown("analytic update: I + Z R Z^T is not positive definite");
        }
        r_next = r_ - rzt * llt.solve(rzt.transpose());
    } else {
        // R_t = (I + R Z^T Z)^{-1} R, the same inverse without an n x n system.
        Matrix system = r_ * (z.transpose() * z);
        system.diagonal().array() += 1.0;
        r_next = Eigen::PartialPivLU<Matrix>(system).solve(r_);
    }
    r_next = 0.5 * (r_next + r_next.transpose()).eval();
    if ((r_next.diagonal().array() <= 0.0).any()) {
        throw NumericalBreakdown("analytic update: autocorrelation lost positive definiteness");
    }
    require_finite(r_next, "analytic update R");

    // W_t = W - R_t Z^T Z W + R_t Z^T Y
    Matrix w_next = w_ + r_next * (z.transpose() * (y - z * w_));
    require_finite(w_next, "analytic update W");
    r_ = std::move(r_next);
    w_ = std::move(w_next);
}

Matrix AnalyticClassifier::predict(const Matrix& z) const {
    if (classes_.empty()) {
        throw ValidationError("analytic classifier has no classes to predict");
    }
    if (z.cols() != w_.rows()) {
        throw ValidationError("predict: feature width " + std::to_string(z.cols()) + " != " +
                              std::to_string(w_.rows()));
    }
    return z * w_;
}

std::vector<int> argmax_rows(const Matrix& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows()), 0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) {
                best = j;
            }
        }
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

std::vector<int> AnalyticClassifier::predict_labels(const Matrix& z) const {
    auto cols = argmax_rows(predict(z));
    for (int& c : cols) {
        c = classes_[static_cast<std::size_t>(c)];
    }
    return cols;
}

int AnalyticClassifier::column_of(int class_id) const {
    const auto it = std::find(classes_.begin(), classes_.end(), class_id);
    if (it == classes_.end()) {
        throw ValidationError("class " + std::to_string(class_id) + " not registered with the classifier");
    }
    return static_cast<int>(it - classes_.begin());
}

Matrix AnalyticClassifier::one_hot(std::span<const int> labels) const {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes_.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y(static_cast<Eigen::Index>(i), column_of(labels[i])) = 1.0;
    }
    return y;
}

AnalyticClassifier AnalyticClassifier::from_parts(Matrix weights, Matrix autocorrelation, double lambda,
                                                  std::vector<int> classes) {
    AnalyticClassifier c(static_cast<int>(autocorrelation.rows()), lambda);
    require_shape(autocorrelation, autocorrelation.rows(), autocorrelation.rows(), "stored R");
    require_shape(weights, autocorrelation.rows(), static_cast<Eigen::Index>(classes.size()), "stored W");
    require_finite(weights, "stored W");
    require_finite(autocorrelation, "stored R");
    if ((autocorrelation - autocorrelation.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw ValidationError("stored R is not symmetric");
    }
    if ((autocorrelation.diagonal().array() <= 0.0).any()) {
        throw ValidationError("stored R is not positive definite");
    }
    c.w_ = std::move(weights);
    c.r_ = std::move(autocorrelation);
    c.classes_ = std::move(classes);
    return c;
}

std::string AnalyticClassifier::state_hash() const {
    ContentHasher h;
    h.text("analytic-classifier").f64(lambda_).ints(classes_).matrix(w_).matrix(r_);
    return h.hex_digest();
}

}  // namespace mincil
