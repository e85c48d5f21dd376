#include "rwl/denoise.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace rwl {

Vector precompute_c(const SquareMatrix& phi_n, const Matrix& X, double alpha, double beta) {
    if (alpha == 0.0) {
        throw std::invalid_argument("precompute_c: alpha must be nonzero");
    }
    if (phi_n.rows() != phi_n.cols() || X.rows() != phi_n.rows()) {
        throw std::invalid_argument("precompute_c: Phi_n must be n x n and X must have n rows");
    }
    SquareMatrix target = 2.0 * phi_n;
    if (beta != 0.0) {
        target.noalias() -= (beta / alpha) * (X * X.transpose());
    }
    return adjoint_apply(target);
}

DenoiseProblem make_denoise_problem(SquareMatrix phi_n, const Matrix& X, double alpha, double beta,
                                    LinearTermForm form) {
    if (!(alpha > 0.0) || !(beta >= 0.0)) {
        throw std::invalid_argument("denoise problem needs alpha > 0 and beta >= 0");
    }
    if (phi_n.rows() != phi_n.cols() || X.rows() != phi_n.rows()) {
        throw std::invalid_argument("denoise problem: Phi_n must be n x n and X must have n rows");
    }
    DenoiseProblem p;
    p.phi_n = 0.5 * (phi_n + phi_n.transpose());
    p.gram.noalias() = X * X.transpose();
    p.alpha = alpha;
    p.beta = form == LinearTermForm::printed ? 2.0 * beta : beta;
    SquareMatrix target = 2.0 * p.phi_n - (p.beta / alpha) * p.gram;
    p.c = adjoint_apply(target);
    p.phi_norm_sq = p.phi_n.squaredNorm();
    return p;
}

double nr_objective(const EdgeWeightVector& w, const SquareMatrix& phi_n, const Matrix& X,
                    double alpha, double beta) {
    return alpha * (laplacian_apply(w) - phi_n).squaredNorm() + beta * dirichlet_energy(w, X);
}

double nr_objective(const EdgeWeightVector& w, const DenoiseProblem& problem) {
    return problem.alpha *
           (laplacian_squared_norm(w) - problem.c.dot(w.values()) + problem.phi_norm_sq);
}

double lipschitz_constant(std::size_t n) noexcept {
    return 2.0 * static_cast<double>(n);
}

Vector smooth_gradient(const EdgeWeightVector& w, const Vector& c) {
    return laplacian_gram_apply(w) - 0.5 * c;
}

EdgeWeightVector projected_step(const EdgeWeightVector& w, const Vector& direction, double step) {
    if (direction.size() != w.values().size()) {
        throw std::invalid_argument("projected_step: direction length mismatch");
    }
    if (!direction.allFinite()) {
        throw std::runtime_error("projected_step: non-finite gradient");
    }
    Vector next = (w.values() - step * direction).cwiseMax(0.0);
    return EdgeWeightVector(w.nodes(), std::move(next));
}

EdgeWeightVector mm_step(const EdgeWeightVector& w, const Vector& c, double step) {
    const double eta = step > 0.0 ? step : 1.0 / lipschitz_constant(w.nodes());
    return projected_step(w, smooth_gradient(w, c), eta);
}

namespace {

double kkt_from_gradient(const Vector& w, const Vector& grad) {
    return w.cwiseMin(grad).cwiseAbs().maxCoeff();
}

} // namespace

double kkt_residual(const EdgeWeightVector& w, const Vector& c) {
    if (w.size() == 0) {
        return 0.0;
    }
    return kkt_from_gradient(w.values(), smooth_gradient(w, c));
}

SolveResult stage1_solve(const DenoiseProblem& problem, EdgeWeightVector w_init,
                         const SolveOptions& options) {
    const std::size_t n = problem.nodes();
    if (w_init.nodes() != n) {
        throw std::invalid_argument("stage1_solve: initial weights are for a different node count");
    }
    const double step = options.step > 0.0 ? options.step : 1.0 / lipschitz_constant(n);

    SolveResult result{EdgeWeightVector(n), {}};
    EdgeWeightVector w = std::move(w_init);
    double best = std::numeric_limits<double>::infinity();
    double best_kkt = 0.0;
    double previous = 0.0;

    for (std::size_t it = 0;; ++it) {
        if (options.on_iterate) {
            options.on_iterate(it, w);
        }
        const Vector grad = smooth_gradient(w, problem.c);
        const double objective = nr_objective(w, problem);
        const double kkt = w.size() == 0 ? 0.0 : kkt_from_gradient(w.values(), grad);
        if (!std::isfinite(objective)) {
            throw std::runtime_error("stage1_solve: objective became non-finite at iteration " +
                                     std::to_string(it) + " (check alpha/beta scaling)");
        }
        result.trace.records.push_back({it, objective, kkt});
        result.trace.iterations = it;
        // Ties go to the later iterate: near convergence the objective is flat to rounding
        // while the KKT residual keeps shrinking. A converged iterate is always returned.
        const bool improved = objective <= best || kkt <= options.kkt_tol;
        if (improved) {
            best = std::min(best, objective);
            best_kkt = kkt;
        }

        std::string stop;
        if (kkt <= options.kkt_tol) {
            stop = "kkt";
        } else if (it > 0 && options.obj_rel_tol > 0.0 &&
                   std::abs(objective - previous) <= options.obj_rel_tol * std::abs(previous)) {
            stop = "objective";
        } else if (it >= options.max_iters) {
            stop = "max_iters";
        }
        if (!stop.empty()) {
            result.trace.stop_reason = stop;
            if (improved) {
                result.w = std::move(w);
            }
            result.trace.final_kkt = best_kkt;
            break;
        }
        previous = objective;
        EdgeWeightVector next = projected_step(w, grad, step);
        if (improved) {
            result.w = std::move(w);
        }
        w = std::move(next);
    }
    return result;
}

void write_learned_graph(const EdgeWeightVector& w, const std::filesystem::path& file, double epsilon) {
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    char buf[64];
    for_each_pair(w.nodes(), [&](std::size_t k, std::size_t i, std::size_t j) {
        const double wk = w[k];
        if (wk > epsilon) {
            const auto res = std::to_chars(buf, buf + sizeof buf, wk);
            out << j << '\t' << i << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
                << '\n';
        }
    });
}

void write_trace(const SolveTrace& trace, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    for (const IterationRecord& r : trace.records) {
        out << nlohmann::json{{"iter", r.iter}, {"objective", r.objective}, {"kkt_residual", r.kkt_residual}}
                   .dump()
            << '\n';
    }
}

} // namespace rwl
