#include "rwl/laplacian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rwl {

namespace {

// First linear index of column j of the strict lower triangle.
std::size_t column_start(std::size_t j, std::size_t n) {
    return j * (2 * n - j - 1) / 2;
}

} // namespace

EdgeWeightVector::EdgeWeightVector(std::size_t n)
    : n_(n), values_(Vector::Zero(static_cast<Eigen::Index>(pair_count(n)))) {}

EdgeWeightVector::EdgeWeightVector(std::size_t n, Vector values)
    : n_(n), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != pair_count(n)) {
        throw std::invalid_argument("edge weight vector has length " +
                                    std::to_string(values_.size()) + ", expected n(n-1)/2 = " +
                                    std::to_string(pair_count(n)));
    }
    for (Eigen::Index k = 0; k < values_.size(); ++k) {
        // Also rejects NaN.
        if (!(values_[k] >= 0.0) || !std::isfinite(values_[k])) {
            throw std::invalid_argument("edge weight " + std::to_string(k) +
                                        " is negative or non-finite");
        }
    }
}

EdgeWeightVector EdgeWeightVector::from_edges(std::size_t n, const std::vector<Edge>& edges,
                                              double weight) {
    Vector values = Vector::Zero(static_cast<Eigen::Index>(pair_count(n)));
    for (const Edge& e : edges) {
        const auto hi = static_cast<std::size_t>(std::max(e.u, e.v));
        const auto lo = static_cast<std::size_t>(std::min(e.u, e.v));
        values[static_cast<Eigen::Index>(edge_index(hi, lo, n))] = weight;
    }
    return EdgeWeightVector(n, std::move(values));
}

std::size_t EdgeWeightVector::nonzeros() const {
    return static_cast<std::size_t>((values_.array() != 0.0).count());
}

std::size_t edge_index(std::size_t i, std::size_t j, std::size_t n) {
    if (i <= j || i >= n) {
        throw std::invalid_argument("edge_index requires n > i > j, got i=" + std::to_string(i) +
                                    " j=" + std::to_string(j) + " n=" + std::to_string(n));
    }
    return column_start(j, n) + (i - j - 1);
}

std::pair<std::size_t, std::size_t> edge_endpoints(std::size_t k, std::size_t n) {
    if (k >= pair_count(n)) {
        throw std::invalid_argument("edge_endpoints: index " + std::to_string(k) +
                                    " out of range for n=" + std::to_string(n));
    }
    std::size_t j = 0;
    while (column_start(j + 1, n) <= k) {
        ++j;
    }
    return {j + 1 + (k - column_start(j, n)), j};
}

SquareMatrix laplacian_apply(const EdgeWeightVector& w) {
    const std::size_t n = w.nodes();
    const auto N = static_cast<Eigen::Index>(n);
    SquareMatrix L = SquareMatrix::Zero(N, N);
    const Vector& v = w.values();
    for_each_pair(n, [&](std::size_t k, std::size_t i, std::size_t j) {
        const double wk = v[static_cast<Eigen::Index>(k)];
        L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -wk;
        L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -wk;
    });
    // Row sums in a fixed order keep L*1 exactly zero up to summation rounding.
    for (Eigen::Index i = 0; i < N; ++i) {
        L(i, i) = -L.col(i).sum();
    }
    return L;
}

Vector adjoint_apply(const SquareMatrix& Y) {
    if (Y.rows() != Y.cols()) {
        throw std::invalid_argument("adjoint_apply: matrix is " + std::to_string(Y.rows()) + "x" +
                                    std::to_string(Y.cols()) + ", expected square");
    }
    const auto n = static_cast<std::size_t>(Y.rows());
    Vector out(static_cast<Eigen::Index>(pair_count(n)));
    for_each_pair(n, [&](std::size_t k, std::size_t i, std::size_t j) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        out[static_cast<Eigen::Index>(k)] = Y(a, a) - Y(a, b) - Y(b, a) + Y(b, b);
    });
    return out;
}

SquareMatrix adjacency_apply(const EdgeWeightVector& w) {
    const std::size_t n = w.nodes();
    const auto N = static_cast<Eigen::Index>(n);
    SquareMatrix A = SquareMatrix::Zero(N, N);
    const Vector& v = w.values();
    for_each_pair(n, [&](std::size_t k, std::size_t i, std::size_t j) {
        const double wk = v[static_cast<Eigen::Index>(k)];
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = wk;
        A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = wk;
    });
    return A;
}

Vector adjacency_adjoint(const SquareMatrix& G) {
    if (G.rows() != G.cols()) {
        throw std::invalid_argument("adjacency_adjoint: matrix must be square");
    }
    const auto n = static_cast<std::size_t>(G.rows());
    Vector out(static_cast<Eigen::Index>(pair_count(n)));
    for_each_pair(n, [&](std::size_t k, std::size_t i, std::size_t j) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        out[static_cast<Eigen::Index>(k)] = G(a, b) + G(b, a);
    });
    return out;
}

Vector weighted_degrees(const EdgeWeightVector& w) {
    const auto n = static_cast<Eigen::Index>(w.nodes());
    Vector d = Vector::Zero(n);
    const Vector& v = w.values();
    // Column j of the strict lower triangle is the contiguous block of pairs (i > j, j).
    Eigen::Index start = 0;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
        const Eigen::Index len = n - j - 1;
        const auto col = v.segment(start, len);
        d[j] += col.sum();
        d.segment(j + 1, len) += col;
        start += len;
    }
    return d;
}

Vector laplacian_gram_apply(const EdgeWeightVector& w) {
    const auto n = static_cast<Eigen::Index>(w.nodes());
    const Vector d = weighted_degrees(w);
    const Vector& v = w.values();
    Vector out(v.size());
    Eigen::Index start = 0;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
        const Eigen::Index len = n - j - 1;
        out.segment(start, len) = (d.segment(j + 1, len).array() + d[j]) + 2.0 * v.segment(start, len).array();
        start += len;
    }
    return out;
}

double laplacian_squared_norm(const EdgeWeightVector& w) {
    return weighted_degrees(w).squaredNorm() + 2.0 * w.values().squaredNorm();
}

double dirichlet_energy(const EdgeWeightVector& w, const Matrix& X) {
    const std::size_t n = w.nodes();
    if (static_cast<std::size_t>(X.rows()) != n) {
        throw std::invalid_argument("dirichlet_energy: X has " + std::to_string(X.rows()) +
                                    " rows, graph has " + std::to_string(n) + " nodes");
    }
    const Vector& v = w.values();
    double energy = 0.0;
    for_each_pair(n, [&](std::size_t k, std::size_t i, std::size_t j) {
        const double wk = v[static_cast<Eigen::Index>(k)];
        if (wk != 0.0) {
            energy += wk * (X.row(static_cast<Eigen::Index>(i)) - X.row(static_cast<Eigen::Index>(j)))
                               .squaredNorm();
        }
    });
    return energy;
}

bool is_laplacian(const SquareMatrix& M, double tol) {
    if (M.rows() != M.cols()) {
        return false;
    }
    const Eigen::Index n = M.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(M(i, j) - M(j, i)) > tol) {
                return false;
            }
            if (i != j && M(i, j) > tol) {
                return false;
            }
        }
        if (std::abs(M.col(j).sum()) > tol) {
            return false;
        }
    }
    return true;
}

bool is_adjacency(const SquareMatrix& M, double tol) {
    if (M.rows() != M.cols()) {
        return false;
    }
    const Eigen::Index n = M.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(M(j, j)) > tol) {
            return false;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (M(i, j) < -tol || std::abs(M(i, j) - M(j, i)) > tol) {
                return false;
            }
        }
    }
    return true;
}

} // namespace rwl
