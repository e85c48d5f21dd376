#pragma once

#include "rwl/laplacian.hpp"
#include "rwl/types.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace rwl {

/// How the linear term is formed from (Phi_n, X, alpha, beta).
enum class LinearTermForm {
    /// c = L*[2 Phi_n - (beta/alpha) X X^T]: the solver minimizes
    /// alpha ||Lw - Phi_n||_F^2 + beta Tr(X^T Lw X) exactly.
    exact,
    /// The update driven by L*[Phi_n - (beta/alpha) X X^T]. Equivalent to
    /// `exact` with beta doubled, which is how it is realized.
    printed,
};

/// Noise-removal problem over nonnegative edge weights.
struct DenoiseProblem {
    SquareMatrix phi_n; ///< symmetrized noisy Laplacian
    SquareMatrix gram;  ///< X X^T
    double alpha = 1.0;
    double beta = 0.0;  ///< effective smoothness weight used in c
    Vector c;
    double phi_norm_sq = 0.0; ///< ||Phi_n||_F^2

    std::size_t nodes() const noexcept { return static_cast<std::size_t>(phi_n.rows()); }
};

/// c = L*[2 Phi_n - (beta/alpha) X X^T]. Throws std::invalid_argument for
/// alpha == 0 or mismatched shapes.
Vector precompute_c(const SquareMatrix& phi_n, const Matrix& X, double alpha, double beta);

/// Validates alpha > 0, beta >= 0 and shapes, symmetrizes phi_n, precomputes c.
DenoiseProblem make_denoise_problem(SquareMatrix phi_n, const Matrix& X, double alpha, double beta,
                                    LinearTermForm form = LinearTermForm::exact);

/// alpha ||Lw - Phi_n||_F^2 + beta Tr(X^T Lw X), evaluated directly.
double nr_objective(const EdgeWeightVector& w, const SquareMatrix& phi_n, const Matrix& X,
                    double alpha, double beta);

/// Same value through the expansion alpha (||Lw||^2 - c^T w + ||Phi_n||^2).
double nr_objective(const EdgeWeightVector& w, const DenoiseProblem& problem);

/// Lipschitz constant of the gradient of 1/2 ||Lw||^2: ||L||_2^2 = 2n.
double lipschitz_constant(std::size_t n) noexcept;

/// L*L(w) - c/2, the gradient of (1/2)||Lw||^2 - (1/2) c^T w. Its minimizers
/// over w >= 0 are those of the noise-removal objective.
Vector smooth_gradient(const EdgeWeightVector& w, const Vector& c);

/// max(0, w - step * direction), elementwise.
EdgeWeightVector projected_step(const EdgeWeightVector& w, const Vector& direction, double step);

/// One majorization-minimization update, step 1/L1 unless `step` > 0 overrides it.
EdgeWeightVector mm_step(const EdgeWeightVector& w, const Vector& c, double step = 0.0);

/// max_k |min(w_k, [L*L(w) - c/2]_k)|: zero exactly at KKT points of the
/// nonnegative problem (stationarity, complementarity, both feasibilities).
double kkt_residual(const EdgeWeightVector& w, const Vector& c);

struct SolveOptions {
    std::size_t max_iters = 200;
    double kkt_tol = 1e-6;
    double obj_rel_tol = 1e-9; ///< <= 0 disables the relative-change test
    double step = 0.0;         ///< <= 0 means 1/L1
    /// Called with (iteration, w) for every evaluated iterate, w_init included.
    std::function<void(std::size_t, const EdgeWeightVector&)> on_iterate;
};

struct IterationRecord {
    std::size_t iter = 0;
    double objective = 0.0;
    double kkt_residual = 0.0;
};

struct SolveTrace {
    std::vector<IterationRecord> records; ///< one per evaluated iterate, starting with w_init
    std::size_t iterations = 0;           ///< MM steps taken
    double final_kkt = 0.0;               ///< residual at the returned iterate
    std::string stop_reason;              ///< "kkt", "objective", or "max_iters"
};

struct SolveResult {
    EdgeWeightVector w; ///< iterate with the lowest objective
    SolveTrace trace;
};

/// Iterates `mm_step` from w_init until a stopping rule fires. Throws
/// std::runtime_error when the objective becomes non-finite.
SolveResult stage1_solve(const DenoiseProblem& problem, EdgeWeightVector w_init,
                         const SolveOptions& options = {});

/// Lines "i<TAB>j<TAB>weight" (i < j) for every weight above `epsilon`.
void write_learned_graph(const EdgeWeightVector& w, const std::filesystem::path& file,
                         double epsilon = 1e-8);

/// One JSON object per line: {"iter", "objective", "kkt_residual"}.
void write_trace(const SolveTrace& trace, const std::filesystem::path& file);

} // namespace rwl
