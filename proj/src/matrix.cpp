#include "mincil/matrix.hpp"

#include "mincil/errors.hpp"

#include <string>

namespace mincil {

void require_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) {
        throw NumericalBreakdown("non-finite value in " + std::string(what));
    }
}

void require_finite(const Vector& v, std::string_view what) {
    if (!v.allFinite()) {
        throw NumericalBreakdown("non-finite value in " + std::string(what));
    }
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ValidationError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()));
    }
}

}  // namespace mincil
