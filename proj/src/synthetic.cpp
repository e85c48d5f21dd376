#include "rwl/synthetic.hpp"

#include "rwl/rng.hpp"

#include <random>
#include <stdexcept>

namespace rwl {

Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.nodes < 2 || spec.classes < 1 || spec.classes > spec.nodes || spec.features < spec.classes ||
        spec.homophily < 0.0 || spec.homophily > 1.0 || spec.topic_fraction < 0.0 ||
        spec.topic_fraction > 1.0 || spec.words_per_node == 0) {
        throw std::invalid_argument("make_synthetic: inconsistent generator settings");
    }
    Rng rng = make_stream(spec.seed, "synthetic");
    const std::size_t n = spec.nodes;
    const std::size_t C = spec.classes;

    Dataset ds;
    ds.num_classes = static_cast<int>(C);
    ds.labels.resize(n);
    ds.original_ids.resize(n);
    std::uniform_int_distribution<std::size_t> pick_class(0, C - 1);
    for (std::size_t i = 0; i < n; ++i) {
        // Round-robin for the first C nodes keeps every class populated.
        ds.labels[i] = static_cast<int>(i < C ? i : pick_class(rng));
        ds.original_ids[i] = static_cast<int>(i);
    }
    std::vector<std::vector<int>> members(C);
    for (std::size_t i = 0; i < n; ++i) {
        members[static_cast<std::size_t>(ds.labels[i])].push_back(static_cast<int>(i));
    }

    // Class k owns the vocabulary slice [k*d/C, (k+1)*d/C).
    const std::size_t d = spec.features;
    ds.features = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::uniform_int_distribution<std::size_t> any_word(0, d - 1);
    std::bernoulli_distribution topical(spec.topic_fraction);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(ds.labels[i]);
        const std::size_t lo = k * d / C;
        const std::size_t hi = (k + 1) * d / C;
        std::uniform_int_distribution<std::size_t> class_word(lo, hi - 1);
        for (std::size_t t = 0; t < spec.words_per_node; ++t) {
            const std::size_t word = topical(rng) ? class_word(rng) : any_word(rng);
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(word)) = 1.0;
        }
    }

    std::vector<Edge> edges;
    const auto target = static_cast<std::size_t>(spec.mean_degree * static_cast<double>(n) / 2.0);
    std::uniform_int_distribution<std::size_t> any_node(0, n - 1);
    std::bernoulli_distribution same_class(spec.homophily);
    auto add_edge_from = [&](std::size_t u) {
        const auto& pool = members[static_cast<std::size_t>(ds.labels[u])];
        for (;;) {
            std::size_t v = 0;
            if (same_class(rng) && pool.size() > 1) {
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                v = static_cast<std::size_t>(pool[pick(rng)]);
            } else {
                v = any_node(rng);
            }
            if (v != u) {
                edges.push_back({static_cast<int>(u), static_cast<int>(v)});
                return;
            }
        }
    };
    for (std::size_t u = 0; u < n; ++u) {
        add_edge_from(u);
    }
    while (edges.size() < target) {
        add_edge_from(any_node(rng));
    }
    ds.edges = canonical_edges(std::move(edges), n);
    return ds;
}

} // namespace rwl
