#pragma once

#include "rwl/types.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace rwl {

/// Undirected edge with canonical orientation u < v.
struct Edge {
    int u = 0;
    int v = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Nonnegative weights for every unordered node pair, stored in the
/// column-major lower-triangular order used by `edge_index`.
class EdgeWeightVector {
public:
    EdgeWeightVector() = default;

    /// All-zero weights for an n-node graph.
    explicit EdgeWeightVector(std::size_t n);

    /// Throws std::invalid_argument unless values.size() == n(n-1)/2 and every
    /// entry is finite and >= 0.
    EdgeWeightVector(std::size_t n, Vector values);

    /// Unit (or `weight`) entries at the given edges, zero elsewhere.
    static EdgeWeightVector from_edges(std::size_t n, const std::vector<Edge>& edges,
                                       double weight = 1.0);

    std::size_t nodes() const noexcept { return n_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    const Vector& values() const noexcept { return values_; }
    double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }

    std::size_t nonzeros() const;

private:
    std::size_t n_ = 0;
    Vector values_;
};

/// Linear index of the pair (i, j), 0-based, i > j.
///
/// This is the 1-based rule k = i - j + (j - 1)(2n - j)/2 shifted down by one
/// in every index: pairs are enumerated column by column of the strict lower
/// triangle, so (1,0) -> 0, (2,0) -> 1, ..., (n-1,0) -> n-2, (2,1) -> n-1.
/// Throws std::invalid_argument when i <= j or i >= n.
std::size_t edge_index(std::size_t i, std::size_t j, std::size_t n);

/// Inverse of `edge_index`: returns (i, j) with i > j.
std::pair<std::size_t, std::size_t> edge_endpoints(std::size_t k, std::size_t n);

/// Calls f(k, i, j) for every pair i > j in increasing k.
template <class F>
void for_each_pair(std::size_t n, F&& f) {
    std::size_t k = 0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        for (std::size_t i = j + 1; i < n; ++i, ++k) {
            f(k, i, j);
        }
    }
}

/// Laplacian operator: [Lw]_ij = -w_k off the diagonal, diagonal = weighted degree.
SquareMatrix laplacian_apply(const EdgeWeightVector& w);

/// Adjoint of the Laplacian operator: [L*Y]_k = Y_ii - Y_ij - Y_ji + Y_jj.
/// Throws std::invalid_argument for non-square Y.
Vector adjoint_apply(const SquareMatrix& Y);

/// Adjacency operator: [Aw]_ij = w_k off the diagonal, zero diagonal.
SquareMatrix adjacency_apply(const EdgeWeightVector& w);

/// Adjoint of the adjacency operator: [A*G]_k = G_ij + G_ji.
Vector adjacency_adjoint(const SquareMatrix& G);

/// Weighted degrees, the diagonal of Lw.
Vector weighted_degrees(const EdgeWeightVector& w);

/// L*(L(w)), entry k = d_i + d_j + 2 w_k. Needs only the degrees, never Lw.
Vector laplacian_gram_apply(const EdgeWeightVector& w);

/// ||Lw||_F^2 = sum_i d_i^2 + 2 sum_k w_k^2.
double laplacian_squared_norm(const EdgeWeightVector& w);

/// Tr(X^T Lw X), evaluated as sum_k w_k ||x_i - x_j||^2 over pairs with w_k != 0.
/// Throws std::invalid_argument if X does not have n rows.
double dirichlet_energy(const EdgeWeightVector& w, const Matrix& X);

/// Symmetric, off-diagonals <= tol, rows sum to zero within tol.
bool is_laplacian(const SquareMatrix& M, double tol = 1e-9);

/// Symmetric, entries >= -tol, zero diagonal within tol.
bool is_adjacency(const SquareMatrix& M, double tol = 1e-9);

} // namespace rwl
