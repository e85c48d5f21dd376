#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>

namespace rwl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric n x n matrix. Holds Laplacians, adjacencies and Gram
/// matrices; structural checks live in laplacian.hpp.
using SquareMatrix = Eigen::MatrixXd;

/// Row-major sparse storage for normalized adjacencies and bag-of-words features.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Number of unordered node pairs, n(n-1)/2.
constexpr std::size_t pair_count(std::size_t n) noexcept {
    return n < 2 ? 0 : n * (n - 1) / 2;
}

} // namespace rwl
