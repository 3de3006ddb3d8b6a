#pragma once

#include "mincil/matrix.hpp"

#include <functional>
#include <span>
#include <vector>

namespace mincil {

/// Minimizer of ||Y - F W||^2 + lambda ||W||^2, i.e. (F^T F + lambda I)^{-1} F^T Y.
/// Solved by Cholesky on the Gram matrix with an LU fallback.
Matrix ridge_solve(const Matrix& features, const Matrix& targets, double lambda);

/// Solves A X = B for symmetric positive definite A (Cholesky, LU fallback).
Matrix spd_solve(const Matrix& a, const Matrix& b);

/// softmax(v / tau) with max subtraction.
std::vector<double> softmax(std::span<const double> values, double tau);

/// Central differences (f(x + e_i eps) - f(x - e_i eps)) / (2 eps) for every coordinate.
std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> theta, double epsilon);

}  // namespace mincil
