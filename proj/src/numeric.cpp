#include "mincil/numeric.hpp"

#include "mincil/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mincil {

Matrix spd_solve(const Matrix& a, const Matrix& b) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
        Matrix x = llt.solve(b);
        if (x.allFinite()) {
            return x;
        }
    }
    Eigen::PartialPivLU<Matrix> lu(a);
    Matrix x = lu.solve(b);
    require_finite(x, "spd_solve (LU fallback)");
    return x;
}

Matrix ridge_solve(const Matrix& features, const Matrix& targets, double lambda) {
    if (!(lambda > 0.0)) {
        throw ValidationError("ridge_solve: lambda must be positive");
    }
    if (features.rows() < 1) {
        throw ValidationError("ridge_solve: need at least one row");
    }
    if (features.rows() != targets.rows()) {
        throw ValidationError("ridge_solve: feature rows " + std::to_string(features.rows()) +
                              " != target rows " + std::to_string(targets.rows()));
    }
    Matrix gram = features.transpose() * features;
    gram.diagonal().array() += lambda;
    Matrix rhs = features.transpose() * targets;
    Matrix w = spd_solve(gram, rhs);
    require_finite(w, "ridge_solve");
    return w;
}

std::vector<double> softmax(std::span<const double> values, double tau) {
    if (values.empty()) {
        throw ValidationError("softmax: empty input");
    }
    if (!(tau > 0.0)) {
        throw ValidationError("softmax: tau must be positive");
    }
    const double top = *std::max_element(values.begin(), values.end());
    std::vector<double> out(values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp((values[i] - top) / tau);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> theta, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw ValidationError("finite_difference_gradient: epsilon must be positive");
    }
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double saved = point[i];
        point[i] = saved + epsilon;
        const double up = f(point);
        point[i] = saved - epsilon;
        const double down = f(point);
        point[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericalBreakdown("finite_difference_gradient: non-finite objective at coordinate " +
                                     std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    return grad;
}

}  // namespace mincil
