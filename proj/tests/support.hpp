#pragma once

#include "rwl/dataset.hpp"
#include "rwl/laplacian.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline rwl::Vector random_vector(Eigen::Index size, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    rwl::Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        v[i] = u(rng);
    }
    return v;
}

inline rwl::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    rwl::Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = u(rng);
        }
    }
    return m;
}

// Nonnegative weights; each pair is an edge with probability `density`.
inline rwl::EdgeWeightVector random_weights(std::size_t n, std::mt19937_64& rng, double density = 1.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    rwl::Vector v(static_cast<Eigen::Index>(rwl::pair_count(n)));
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        v[k] = u(rng) < density ? u(rng) * 2.0 : 0.0;
    }
    return rwl::EdgeWeightVector(n, v);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rwl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline rwl::Dataset triangle_dataset() {
    rwl::Dataset ds;
    ds.features = rwl::Matrix(3, 1);
    ds.features << 0.0, 1.0, 2.0;
    ds.labels = {0, 1, 0};
    ds.edges = {{0, 1}, {0, 2}, {1, 2}};
    ds.num_classes = 2;
    ds.original_ids = {0, 1, 2};
    return ds;
}

} // namespace testing
