#pragma once

#include "rwl/dataset.hpp"
#include "rwl/laplacian.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rwl {

/// Poisoned structure: the clean edges plus injected ones (and, for externally
/// supplied graphs, minus removed ones).
struct PerturbedGraph {
    std::size_t n = 0;
    std::vector<Edge> edges;    ///< final edge set, canonical and sorted
    std::vector<Edge> injected; ///< edges absent from the clean graph
    std::vector<Edge> removed;  ///< clean edges dropped (external inputs only)
    std::size_t clean_count = 0;
    double ptb_rate = 0.0;

    friend bool operator==(const PerturbedGraph&, const PerturbedGraph&) = default;
};

/// round(ptb_rate * clean_edges), halves rounded away from zero.
std::size_t injection_count(double ptb_rate, std::size_t clean_edges);

/// Adds round(ptb_rate |E|) node pairs drawn uniformly without replacement
/// from the pairs absent in `ds`. Deterministic in (ds, ptb_rate, seed).
/// Throws std::invalid_argument for a negative rate or when too few absent
/// pairs exist.
PerturbedGraph random_attack(const Dataset& ds, double ptb_rate, std::uint64_t seed);

/// The clean graph wrapped as a PerturbedGraph with nothing injected.
PerturbedGraph unperturbed(const Dataset& ds);

/// Wraps an externally produced poisoned edge list (same node numbering as `ds`).
PerturbedGraph from_external(const Dataset& ds, std::vector<Edge> poisoned);

/// Unit weights on every edge of `pg`.
EdgeWeightVector noisy_weights(const PerturbedGraph& pg);

/// Unit-weight Laplacian of `pg`.
SquareMatrix to_noisy_laplacian(const PerturbedGraph& pg);

/// Writes `edges.tsv` (full poisoned graph) and `injected.tsv` into dir.
void write_perturbed(const PerturbedGraph& pg, const std::filesystem::path& dir);

} // namespace rwl
