#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "support.hpp"

#include "rwl/denoise.hpp"

#include <json.hpp>

#include <fstream>

using namespace rwl;

namespace {

SquareMatrix triangle_laplacian() {
    Vector v = Vector::Ones(3);
    return laplacian_apply(EdgeWeightVector(3, v));
}

// Noisy Laplacian of a random nonnegative graph plus symmetric noise.
SquareMatrix random_phi(std::size_t n, std::mt19937_64& rng, double noise = 0.3) {
    const Matrix E = testing::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), rng, -noise,
                                            noise);
    return laplacian_apply(testing::random_weights(n, rng, 0.6)) + 0.5 * (E + E.transpose());
}

std::vector<std::string> lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

} // namespace

TEST_CASE("precompute_c hand examples") {
    const Matrix X = Matrix::Ones(3, 2);
    CHECK(precompute_c(Matrix::Zero(3, 3), X, 1.0, 0.0).isZero());
    CHECK(precompute_c(triangle_laplacian(), X, 1.0, 0.0) == Vector::Constant(3, 12.0));

    std::mt19937_64 rng(51);
    const Matrix Y = testing::random_matrix(5, 3, rng);
    const Vector c = precompute_c(Matrix::Zero(5, 5), Y, 2.0, 0.6);
    for_each_pair(5, [&](std::size_t k, std::size_t i, std::size_t j) {
        const double dist = (Y.row(static_cast<Eigen::Index>(i)) - Y.row(static_cast<Eigen::Index>(j))).squaredNorm();
        CHECK(c[static_cast<Eigen::Index>(k)] == doctest::Approx(-0.3 * dist).epsilon(1e-12));
    });
    CHECK_THROWS_AS(precompute_c(Matrix::Zero(3, 3), X, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(precompute_c(Matrix::Zero(3, 3), Matrix::Ones(4, 2), 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("make_denoise_problem validates and symmetrizes") {
    const Matrix X = Matrix::Ones(3, 1);
    CHECK_THROWS_AS(make_denoise_problem(Matrix::Zero(3, 3), X, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_denoise_problem(Matrix::Zero(3, 3), X, 1.0, -0.1), std::invalid_argument);
    SquareMatrix phi = triangle_laplacian();
    phi(0, 1) += 1e-12;
    const DenoiseProblem p = make_denoise_problem(phi, X, 1.0, 0.0);
    CHECK(p.phi_n == p.phi_n.transpose());
    CHECK(p.c.size() == 3);
}

TEST_CASE("printed linear term equals the exact form with beta doubled") {
    std::mt19937_64 rng(52);
    const SquareMatrix phi = random_phi(6, rng);
    const Matrix X = testing::random_matrix(6, 3, rng);
    const DenoiseProblem printed = make_denoise_problem(phi, X, 1.5, 0.4, LinearTermForm::printed);
    const DenoiseProblem exact = make_denoise_problem(phi, X, 1.5, 0.8, LinearTermForm::exact);
    CHECK(printed.c == exact.c);
}

TEST_CASE("nr_objective hand values") {
    const SquareMatrix phi = triangle_laplacian();
    const Matrix X = Matrix::Zero(3, 1);
    CHECK(nr_objective(EdgeWeightVector(3, Vector::Ones(3)), phi, X, 1.0, 0.0) == 0.0);
    CHECK(nr_objective(EdgeWeightVector(3), phi, X, 2.5, 0.0) == doctest::Approx(2.5 * phi.squaredNorm()));
}

TEST_CASE("nr_objective expansion through c agrees with the direct value") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 9);
        const SquareMatrix phi = random_phi(n, rng);
        const Matrix X = testing::random_matrix(static_cast<Eigen::Index>(n), 4, rng);
        const double alpha = 0.5 + trial * 0.1, beta = 0.05 * trial;
        const DenoiseProblem p = make_denoise_problem(phi, X, alpha, beta);
        const EdgeWeightVector w = testing::random_weights(n, rng, 0.7);
        const double direct = nr_objective(w, p.phi_n, X, alpha, beta);
        CHECK(std::abs(nr_objective(w, p) - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
        CHECK(direct == doctest::Approx(oracle::nr_objective(w.values(), p.phi_n, X, alpha, beta)).epsilon(1e-12));
    }
}

TEST_CASE("smooth gradient is the scaled gradient of nr_objective") {
    std::mt19937_64 rng(54);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 4);
        const SquareMatrix phi = random_phi(n, rng);
        const Matrix X = testing::random_matrix(static_cast<Eigen::Index>(n), 2, rng);
        const double alpha = 1.3, beta = 0.7;
        const DenoiseProblem p = make_denoise_problem(phi, X, alpha, beta);
        const EdgeWeightVector w = testing::random_weights(n, rng);
        const auto f = [&](const oracle::Vec& v) { return oracle::nr_objective(v, p.phi_n, X, alpha, beta); };
        // grad nr_objective = 2 alpha (L*L w - c/2).
        const oracle::Vec fd = oracle::central_difference(f, w.values(), 1e-5);
        CHECK(oracle::relative_error(2.0 * alpha * smooth_gradient(w, p.c), fd) <= 1e-7);
    }
}

TEST_CASE("mm_step trivial cases") {
    SUBCASE("c <= 0 and w = 0 stays at zero") {
        std::mt19937_64 rng(55);
        const Vector c = -testing::random_vector(10, rng, 0.0, 1.0);
        CHECK(mm_step(EdgeWeightVector(5), c).values().isZero());
        CHECK(kkt_residual(EdgeWeightVector(5), c) == 0.0);
    }
    SUBCASE("clean Laplacian is a fixed point") {
        const DenoiseProblem p = make_denoise_problem(triangle_laplacian(), Matrix::Ones(3, 1), 1.0, 0.0);
        const EdgeWeightVector w(3, Vector::Ones(3));
        CHECK(mm_step(w, p.c).values() == w.values());
        CHECK(kkt_residual(w, p.c) == 0.0);
    }
    SUBCASE("interior point off stationarity has positive residual") {
        const DenoiseProblem p = make_denoise_problem(triangle_laplacian(), Matrix::Ones(3, 1), 1.0, 0.0);
        const EdgeWeightVector w(3, Vector::Constant(3, 2.0));
        CHECK(kkt_residual(w, p.c) > 0.0);
        CHECK_FALSE(mm_step(w, p.c).values() == w.values());
    }
    SUBCASE("step override and bad inputs") {
        const EdgeWeightVector w(3, Vector::Constant(3, 2.0));
        const Vector c = Vector::Zero(3);
        // L*L(2,2,2) = (12,12,12); a step of 1/6 lands on zero, 1/12 halves w.
        CHECK(mm_step(w, c, 1.0 / 6.0).values().isZero());
        CHECK(mm_step(w, c, 1.0 / 12.0).values() == Vector::Ones(3));
        CHECK_THROWS_AS(mm_step(w, Vector::Zero(2)), std::invalid_argument);
        Vector bad = Vector::Zero(3);
        bad[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS(mm_step(w, bad));
    }
    CHECK(lipschitz_constant(7) == 14.0);
}

TEST_CASE("one mm_step strictly decreases the objective unless stationary") {
    std::mt19937_64 rng(56);
    for (int trial = 0; trial < 100; ++trial) {
        const SquareMatrix phi = random_phi(3, rng, 0.5);
        const Matrix X = testing::random_matrix(3, 2, rng);
        const DenoiseProblem p = make_denoise_problem(phi, X, 1.0, 0.3);
        const EdgeWeightVector w = testing::random_weights(3, rng);
        const EdgeWeightVector next = mm_step(w, p.c);
        if (kkt_residual(w, p.c) > 1e-10) {
            CHECK(nr_objective(next, p) < nr_objective(w, p));
        } else {
            CHECK(next.values() == w.values());
        }
    }
}

TEST_CASE("fixed point iff KKT residual vanishes") {
    std::mt19937_64 rng(57);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 3);
        const DenoiseProblem p = make_denoise_problem(
            random_phi(n, rng), testing::random_matrix(static_cast<Eigen::Index>(n), 2, rng), 1.0, 0.2);
        // Non-stationary: a random point.
        const EdgeWeightVector w = testing::random_weights(n, rng);
        CHECK(kkt_residual(w, p.c) > 1e-10);
        CHECK((mm_step(w, p.c).values() - w.values()).cwiseAbs().maxCoeff() > 0.0);
        // Stationary: a tightly converged solution.
        SolveOptions o;
        o.max_iters = 200000;
        o.kkt_tol = 1e-12;
        o.obj_rel_tol = 0.0;
        const SolveResult r = stage1_solve(p, w, o);
        REQUIRE(r.trace.stop_reason == "kkt");
        const EdgeWeightVector fixed = mm_step(r.w, p.c);
        CHECK((fixed.values() - r.w.values()).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("stage1_solve matches the active-set oracle for n <= 5") {
    std::mt19937_64 rng(58);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 3);
        const Matrix X = testing::random_matrix(static_cast<Eigen::Index>(n), 3, rng);
        const double alpha = 1.0, beta = 0.25 * (trial % 4);
        const DenoiseProblem p = make_denoise_problem(random_phi(n, rng), X, alpha, beta);
        SolveOptions o;
        o.max_iters = 100000;
        o.kkt_tol = 1e-9;
        o.obj_rel_tol = 0.0;
        const SolveResult r = stage1_solve(p, EdgeWeightVector(n), o);
        const oracle::QpSolution opt = oracle::solve_nonneg_qp(p.phi_n, X, alpha, beta);
        CHECK(std::abs(nr_objective(r.w, p.phi_n, X, alpha, beta) - opt.objective) <= 1e-5);
        CHECK(r.trace.final_kkt <= 1e-6);
    }
}

TEST_CASE("n = 4 oracle agreement with the default solver settings from the noisy graph") {
    std::mt19937_64 rng(59);
    const Matrix X = testing::random_matrix(4, 2, rng);
    const SquareMatrix phi = random_phi(4, rng);
    const DenoiseProblem p = make_denoise_problem(phi, X, 1.0, 0.1);
    SolveOptions o;
    o.max_iters = 5000;
    o.obj_rel_tol = 0.0;
    const SolveResult r = stage1_solve(p, EdgeWeightVector(4), o);
    CHECK(nr_objective(r.w, p) == doctest::Approx(oracle::solve_nonneg_qp(p.phi_n, X, 1.0, 0.1).objective).epsilon(1e-6));
}

TEST_CASE("clean Laplacian with beta = 0 is recovered") {
    std::mt19937_64 rng(60);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 4 + static_cast<std::size_t>(trial);
        const EdgeWeightVector truth = testing::random_weights(n, rng, 0.5);
        const DenoiseProblem p = make_denoise_problem(laplacian_apply(truth),
                                                      Matrix::Zero(static_cast<Eigen::Index>(n), 1), 1.0, 0.0);
        SolveOptions o;
        o.max_iters = 100000;
        o.kkt_tol = 1e-10;
        o.obj_rel_tol = 0.0;
        const SolveResult r = stage1_solve(p, EdgeWeightVector(n), o);
        CHECK((r.w.values() - truth.values()).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("adversarial edge between far-apart features is removed") {
    // Two tight pairs {0,1} and {2,3}; the attacker links 1 and 2 whose features are far apart.
    Matrix X(4, 1);
    X << 0.0, 0.1, 5.0, 5.1;
    const EdgeWeightVector noisy = EdgeWeightVector::from_edges(4, {{0, 1}, {2, 3}, {1, 2}});
    const DenoiseProblem p = make_denoise_problem(laplacian_apply(noisy), X, 1.0, 1.0);
    SolveOptions o;
    o.max_iters = 100000;
    o.kkt_tol = 1e-10;
    o.obj_rel_tol = 0.0;
    const SolveResult r = stage1_solve(p, noisy, o);
    const std::size_t adv = edge_index(2, 1, 4);
    CHECK(r.w[adv] == 0.0);
    CHECK(r.w[edge_index(1, 0, 4)] > 0.5);
    const oracle::QpSolution opt = oracle::solve_nonneg_qp(p.phi_n, X, 1.0, 1.0);
    CHECK(opt.w[static_cast<Eigen::Index>(adv)] == 0.0);
}

TEST_CASE("increasing beta never raises the weight on a dissimilar edge") {
    Matrix X(4, 2);
    X << 0, 0, 0.2, 0.1, 1.5, 1.0, 1.6, 1.2;
    const EdgeWeightVector noisy = EdgeWeightVector::from_edges(4, {{0, 1}, {2, 3}, {1, 2}, {0, 3}});
    const std::size_t adv = edge_index(2, 1, 4);
    double previous = std::numeric_limits<double>::infinity();
    for (double beta = 0.0; beta <= 3.0; beta += 0.1) {
        const DenoiseProblem p = make_denoise_problem(laplacian_apply(noisy), X, 1.0, beta);
        SolveOptions o;
        o.max_iters = 100000;
        o.kkt_tol = 1e-11;
        o.obj_rel_tol = 0.0;
        const double weight = stage1_solve(p, noisy, o).w[adv];
        CHECK(weight <= previous + 1e-9);
        previous = weight;
    }
    CHECK(previous == 0.0);
}

TEST_CASE("solver trace is monotone, feasible and reports its stop reason") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4 + static_cast<std::size_t>(trial % 7);
        const DenoiseProblem p = make_denoise_problem(
            random_phi(n, rng), testing::random_matrix(static_cast<Eigen::Index>(n), 3, rng), 1.0, 0.3);
        std::size_t calls = 0;
        SolveOptions o;
        o.on_iterate = [&](std::size_t iter, const EdgeWeightVector& w) {
            CHECK(iter == calls++);
            CHECK(w.values().minCoeff() >= 0.0);
        };
        const SolveResult r = stage1_solve(p, testing::random_weights(n, rng), o);
        CHECK(r.trace.records.size() == r.trace.iterations + 1);
        CHECK(calls == r.trace.records.size());
        for (std::size_t t = 1; t < r.trace.records.size(); ++t) {
            CHECK(r.trace.records[t].objective <= r.trace.records[t - 1].objective + 1e-9);
        }
        CHECK(r.trace.iterations <= o.max_iters);
        const bool known = r.trace.stop_reason == "kkt" || r.trace.stop_reason == "objective" ||
                           r.trace.stop_reason == "max_iters";
        CHECK(known);
        CHECK(nr_objective(r.w, p) <= r.trace.records.back().objective + 1e-12);
    }
}

TEST_CASE("kkt tolerance stop converges on n <= 10") {
    std::mt19937_64 rng(62);
    for (std::size_t n = 3; n <= 10; ++n) {
        const DenoiseProblem p = make_denoise_problem(
            random_phi(n, rng), testing::random_matrix(static_cast<Eigen::Index>(n), 3, rng), 1.0, 0.2);
        SolveOptions o;
        o.max_iters = 200000;
        o.obj_rel_tol = 0.0;
        const SolveResult r = stage1_solve(p, EdgeWeightVector(n), o);
        CHECK(r.trace.stop_reason == "kkt");
        CHECK(kkt_residual(r.w, p.c) <= 1e-6);
    }
}

TEST_CASE("non-finite objective is reported") {
    const DenoiseProblem p = make_denoise_problem(triangle_laplacian(), Matrix::Ones(3, 1), 1e-300, 1e300);
    CHECK_THROWS(stage1_solve(p, EdgeWeightVector(3, Vector::Ones(3))));
}

TEST_CASE("learned graph and trace files") {
    const auto dir = testing::temp_dir("denoise_files");
    Vector v(3);
    v << 0.5, 0.0, 1e-9;
    write_learned_graph(EdgeWeightVector(3, v), dir / "learned_graph.tsv");
    CHECK(lines(dir / "learned_graph.tsv") == std::vector<std::string>{"0\t1\t0.5"});

    SolveTrace trace;
    trace.records = {{0, 3.5, 0.25}, {1, 2.0, 0.0}};
    write_trace(trace, dir / "trace.jsonl");
    const auto rows = lines(dir / "trace.jsonl");
    REQUIRE(rows.size() == 2);
    const auto first = nlohmann::json::parse(rows[0]);
    CHECK(first["iter"] == 0);
    CHECK(first["objective"] == 3.5);
    CHECK(first["kkt_residual"] == 0.25);
}
