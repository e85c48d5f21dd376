#pragma once

#include "rwl/dataset.hpp"

#include <cstdint>

namespace rwl {

/// Citation-network-like generator: a planted-partition graph whose edges
/// mostly join same-class nodes, and sparse binary bag-of-words features whose
/// active words are biased towards a per-class vocabulary.
struct SyntheticSpec {
    std::size_t nodes = 2485;
    std::size_t classes = 7;
    std::size_t features = 1433;
    double mean_degree = 4.0;
    double homophily = 0.8;        ///< expected fraction of intra-class edges
    std::size_t words_per_node = 18;
    double topic_fraction = 0.25;  ///< share of a node's words drawn from its class vocabulary
    std::uint64_t seed = 0;
};

/// Deterministic in `spec`. Every node gets at least one edge.
Dataset make_synthetic(const SyntheticSpec& spec);

} // namespace rwl
