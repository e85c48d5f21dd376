#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "rwl/attack.hpp"
#include "rwl/synthetic.hpp"

#include <Eigen/Eigenvalues>

#include <map>
#include <set>

using namespace rwl;

namespace {

Dataset medium_graph(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.nodes = 150;
    spec.features = 20;
    spec.classes = 3;
    spec.seed = seed;
    return make_synthetic(spec);
}

} // namespace

TEST_CASE("injection count rounds half away from zero") {
    CHECK(injection_count(0.0, 5069) == 0);
    CHECK(injection_count(1.0, 5069) == 5069);
    CHECK(injection_count(0.2, 5069) == 1014); // 1013.8
    CHECK(injection_count(0.5, 5) == 3);       // 2.5
    CHECK(injection_count(0.5, 3) == 2);       // 1.5
    CHECK_THROWS_AS(injection_count(-0.1, 10), std::invalid_argument);
}

TEST_CASE("zero rate leaves the graph unchanged") {
    const Dataset ds = medium_graph(1);
    const PerturbedGraph pg = random_attack(ds, 0.0, 4);
    CHECK(pg.injected.empty());
    CHECK(pg.edges == ds.edges);
    CHECK(pg == unperturbed(ds));
}

TEST_CASE("injected edges are new, distinct and counted exactly") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset ds = medium_graph(seed);
        const std::set<Edge> clean(ds.edges.begin(), ds.edges.end());
        for (double rate : {0.2, 0.6, 1.0, 1.7}) {
            const PerturbedGraph pg = random_attack(ds, rate, seed);
            CHECK(pg.injected.size() == injection_count(rate, ds.edges.size()));
            CHECK(pg.edges.size() == ds.edges.size() + injection_count(rate, ds.edges.size()));
            std::set<Edge> seen;
            for (const Edge& e : pg.injected) {
                CHECK(e.u < e.v);
                CHECK(clean.count(e) == 0);
                CHECK(seen.insert(e).second);
            }
            CHECK(std::is_sorted(pg.edges.begin(), pg.edges.end()));
            CHECK(pg.clean_count == ds.edges.size());
        }
    }
}

TEST_CASE("attack is deterministic per seed") {
    const Dataset ds = medium_graph(2);
    CHECK(random_attack(ds, 0.8, 7) == random_attack(ds, 0.8, 7));
    CHECK_FALSE(random_attack(ds, 0.8, 7) == random_attack(ds, 0.8, 8));
}

TEST_CASE("dense regime fills the complement exactly") {
    Dataset ds = testing::triangle_dataset();
    ds.features = Matrix::Zero(5, 1);
    ds.labels = {0, 0, 0, 0, 0};
    ds.num_classes = 1;
    ds.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    // 10 pairs, 4 present, 6 absent; rate 1.5 asks for all six.
    const PerturbedGraph pg = random_attack(ds, 1.5, 3);
    CHECK(pg.injected.size() == 6);
    CHECK(pg.edges.size() == 10);
    CHECK_THROWS_AS(random_attack(ds, 1.75, 3), std::invalid_argument);
}

TEST_CASE("uniform sampling: every absent pair is about equally likely") {
    Dataset ds = testing::triangle_dataset();
    ds.features = Matrix::Zero(6, 1);
    ds.labels.assign(6, 0);
    ds.num_classes = 1;
    ds.edges = {{0, 1}, {2, 3}, {4, 5}};
    // 12 absent pairs, one injected per trial.
    std::map<Edge, int> hits;
    const int trials = 12000;
    for (int s = 0; s < trials; ++s) {
        const PerturbedGraph pg = random_attack(ds, 1.0 / 3.0, static_cast<std::uint64_t>(s));
        REQUIRE(pg.injected.size() == 1);
        ++hits[pg.injected[0]];
    }
    CHECK(hits.size() == 12);
    for (const auto& [edge, count] : hits) {
        // Binomial(12000, 1/12): mean 1000, sd ~30.
        CHECK(std::abs(count - 1000) < 150);
    }
}

TEST_CASE("noisy Laplacian") {
    const PerturbedGraph tri = unperturbed(testing::triangle_dataset());
    Matrix expected(3, 3);
    expected << 2, -1, -1, -1, 2, -1, -1, -1, 2;
    CHECK(to_noisy_laplacian(tri) == expected);

    Dataset empty = testing::triangle_dataset();
    empty.edges.clear();
    CHECK(to_noisy_laplacian(unperturbed(empty)) == Matrix::Zero(3, 3));

    const PerturbedGraph pg = random_attack(medium_graph(3), 0.5, 1);
    const SquareMatrix L = to_noisy_laplacian(pg);
    CHECK(is_laplacian(L));
    Eigen::SelfAdjointEigenSolver<Matrix> es(L);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    CHECK(noisy_weights(pg).nonzeros() == pg.edges.size());
}

TEST_CASE("external edge lists record injected and removed edges") {
    const Dataset ds = testing::triangle_dataset();
    const PerturbedGraph pg = from_external(ds, {{1, 0}, {1, 2}});
    CHECK(pg.edges == std::vector<Edge>{{0, 1}, {1, 2}});
    CHECK(pg.injected.empty());
    CHECK(pg.removed == std::vector<Edge>{{0, 2}});
}

TEST_CASE("write_perturbed emits both files") {
    const Dataset ds = medium_graph(4);
    const PerturbedGraph pg = random_attack(ds, 0.4, 2);
    const auto dir = testing::temp_dir("perturbed");
    write_perturbed(pg, dir);
    CHECK(read_edge_list(dir / "edges.tsv", ds.nodes()) == pg.edges);
    CHECK(read_edge_list(dir / "injected.tsv", ds.nodes()) == pg.injected);
}
