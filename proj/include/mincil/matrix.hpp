#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace mincil {

/// Dense row-major 64-bit matrix. Every feature batch, weight and projection
/// in the library uses this type.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Throws NumericalBreakdown naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);

/// Throws ValidationError unless m is rows x cols.
void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what);

}  // namespace mincil
