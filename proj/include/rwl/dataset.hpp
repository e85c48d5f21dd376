#pragma once

#include "rwl/laplacian.hpp"
#include "rwl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwl {

/// Parse or validation failure while reading a dataset directory.
class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SplitTag : std::uint8_t { none, train, val, test };

/// Node-classification dataset: features (n x d), labels in [0, C), and a
/// deduplicated undirected edge list in canonical (u < v) sorted order.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<Edge> edges;
    int num_classes = 0;
    /// Per-node assignment read from split.tsv; empty when the file is absent.
    std::vector<SplitTag> split_tags;
    /// Node id in the file this dataset was loaded from.
    std::vector<int> original_ids;

    std::size_t nodes() const noexcept { return labels.size(); }
    std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
};

/// Disjoint node index sets.
struct Split {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;

    friend bool operator==(const Split&, const Split&) = default;
};

struct SplitRatios {
    double train = 0.1;
    double val = 0.1;
    double test = 0.8;
};

/// Reads features.tsv, edges.tsv, labels.tsv and the optional split.tsv.
/// n is the number of labelled nodes (every id in [0, n) needs exactly one
/// label); d is one past the largest feature id. Errors name file and line.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes the directory layout read by `load_dataset`. Values are printed in
/// shortest round-trip form, so reloading reproduces the dataset exactly.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Reads an edges.tsv-style file; endpoints must lie in [0, n).
std::vector<Edge> read_edge_list(const std::filesystem::path& file, std::size_t n);
void write_edge_list(const std::vector<Edge>& edges, const std::filesystem::path& file);

/// Canonicalizes, rejects self-loops and out-of-range endpoints, sorts and dedups.
std::vector<Edge> canonical_edges(std::vector<Edge> edges, std::size_t n);

/// Checks every Dataset invariant; throws DatasetError on the first violation.
void validate(const Dataset& ds);

/// Induced subgraph on the largest connected component, nodes renumbered in
/// increasing original order. Equal-size components: the one holding the
/// smallest node index wins. Throws DatasetError on an empty dataset.
Dataset largest_connected_component(const Dataset& ds);

/// Seeded uniform partition. |train| = floor(r_train n), |val| = floor(r_val n),
/// the remainder goes to test. Throws std::invalid_argument when the ratios are
/// not positive or do not sum to 1 within 1e-9.
Split make_splits(std::size_t n, SplitRatios ratios, std::uint64_t seed);

/// The split stored in `ds.split_tags`, if any.
std::optional<Split> stored_split(const Dataset& ds);

/// Scales each nonzero feature row to unit sum.
void row_normalize(Matrix& features);

} // namespace rwl
