#include "rwl/attack.hpp"

#include "rwl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace rwl {

namespace {

std::uint64_t pair_key(int u, int v, std::size_t n) {
    return static_cast<std::uint64_t>(u) * n + static_cast<std::uint64_t>(v);
}

} // namespace

std::size_t injection_count(double ptb_rate, std::size_t clean_edges) {
    if (!(ptb_rate >= 0.0) || !std::isfinite(ptb_rate)) {
        throw std::invalid_argument("perturbation rate must be a finite value >= 0");
    }
    // std::round is half-away-from-zero.
    return static_cast<std::size_t>(std::round(ptb_rate * static_cast<double>(clean_edges)));
}

PerturbedGraph random_attack(const Dataset& ds, double ptb_rate, std::uint64_t seed) {
    const std::size_t n = ds.nodes();
    const std::size_t count = injection_count(ptb_rate, ds.edges.size());
    const std::size_t absent = pair_count(n) - ds.edges.size();
    if (count > absent) {
        throw std::invalid_argument("random_attack: " + std::to_string(count) +
                                    " injections requested but only " + std::to_string(absent) +
                                    " absent pairs exist");
    }

    std::unordered_set<std::uint64_t> present;
    present.reserve(2 * (ds.edges.size() + count));
    for (const Edge& e : ds.edges) {
        present.insert(pair_key(e.u, e.v, n));
    }

    Rng rng = make_stream(seed, "attack");
    std::vector<Edge> injected;
    injected.reserve(count);
    if (2 * count <= absent) {
        // Rejection sampling; the acceptance rate stays above 1/2.
        std::uniform_int_distribution<int> node(0, static_cast<int>(n) - 1);
        while (injected.size() < count) {
            int u = node(rng);
            int v = node(rng);
            if (u == v) {
                continue;
            }
            if (u > v) {
                std::swap(u, v);
            }
            if (present.insert(pair_key(u, v, n)).second) {
                injected.push_back({u, v});
            }
        }
    } else {
        // Dense regime: enumerate absent pairs and take a random prefix.
        std::vector<Edge> candidates;
        candidates.reserve(absent);
        for (int u = 0; u < static_cast<int>(n); ++u) {
            for (int v = u + 1; v < static_cast<int>(n); ++v) {
                if (!present.count(pair_key(u, v, n))) {
                    candidates.push_back({u, v});
                }
            }
        }
        for (std::size_t k = 0; k < count; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
            std::swap(candidates[k], candidates[pick(rng)]);
        }
        injected.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count));
    }

    PerturbedGraph pg;
    pg.n = n;
    pg.clean_count = ds.edges.size();
    pg.ptb_rate = ptb_rate;
    std::sort(injected.begin(), injected.end());
    pg.edges.reserve(ds.edges.size() + injected.size());
    std::merge(ds.edges.begin(), ds.edges.end(), injected.begin(), injected.end(),
               std::back_inserter(pg.edges));
    pg.injected = std::move(injected);
    return pg;
}

PerturbedGraph unperturbed(const Dataset& ds) {
    PerturbedGraph pg;
    pg.n = ds.nodes();
    pg.edges = ds.edges;
    pg.clean_count = ds.edges.size();
    return pg;
}

PerturbedGraph from_external(const Dataset& ds, std::vector<Edge> poisoned) {
    PerturbedGraph pg;
    pg.n = ds.nodes();
    pg.clean_count = ds.edges.size();
    pg.edges = canonical_edges(std::move(poisoned), pg.n);
    std::set_difference(pg.edges.begin(), pg.edges.end(), ds.edges.begin(), ds.edges.end(),
                        std::back_inserter(pg.injected));
    std::set_difference(ds.edges.begin(), ds.edges.end(), pg.edges.begin(), pg.edges.end(),
                        std::back_inserter(pg.removed));
    pg.ptb_rate = pg.clean_count == 0
                      ? 0.0
                      : static_cast<double>(pg.injected.size() + pg.removed.size()) /
                            static_cast<double>(pg.clean_count);
    return pg;
}

EdgeWeightVector noisy_weights(const PerturbedGraph& pg) {
    return EdgeWeightVector::from_edges(pg.n, pg.edges, 1.0);
}

SquareMatrix to_noisy_laplacian(const PerturbedGraph& pg) {
    return laplacian_apply(noisy_weights(pg));
}

void write_perturbed(const PerturbedGraph& pg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_edge_list(pg.edges, dir / "edges.tsv");
    write_edge_list(pg.injected, dir / "injected.tsv");
}

} // namespace rwl
