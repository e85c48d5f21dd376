#pragma once

#include "rwl/denoise.hpp"
#include "rwl/gcn.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace rwl {

struct JointConfig {
    double alpha = 1.0;
    double beta = 0.1;
    LinearTermForm c_form = LinearTermForm::exact;
    /// Surrogate curvature of the GNN term. When absent the weight step is `w_lr`.
    std::optional<double> l2_prime;
    double w_lr = 1e-2;
    GcnTrainConfig gcn; ///< hidden, dropout, weight decay, optimizer and lr for theta
    std::size_t outer_epochs = 200;
    std::size_t inner_T = 1;
    std::uint64_t seed = 0;
    /// Multiplies the GNN gradient in the weight step; 0 leaves only the denoising term.
    double gnn_grad_scale = 1.0;
    /// Called with (epoch, w) after every weight step.
    std::function<void(std::size_t, const EdgeWeightVector&)> on_weights;
};

/// Throws std::invalid_argument unless l2_prime (when set) > 0, w_lr > 0,
/// inner_T >= 1 and outer_epochs >= 1.
void validate(const JointConfig& cfg);

/// 1/(L1 + L2') when L2' is configured, otherwise w_lr.
double joint_step_size(std::size_t n, const JointConfig& cfg);

/// max(0, w - step * ((L*L(w) - c/2) + grad_gnn)) with step = 1/(2n + l2_prime).
/// l2_prime == 0 and grad_gnn == 0 reproduce `mm_step` exactly.
EdgeWeightVector joint_w_step(const EdgeWeightVector& w, const Vector& c, const Vector& grad_gnn,
                              double l2_prime);

/// Same update with an explicit step size.
EdgeWeightVector joint_w_step_with(const EdgeWeightVector& w, const Vector& c, const Vector& grad_gnn,
                                   double step);

/// (1/2)||Lw||^2 - (1/2) c^T w + GNN loss on `mask` at (theta, A(w)), dropout off.
/// The first part is the noise-removal objective scaled by 1/(2 alpha) without its constant.
double combined_objective(const EdgeWeightVector& w, const Vector& c, const GcnParams& params,
                          const SparseMatrix& X, std::span<const int> labels, std::span<const int> mask,
                          double weight_decay);

struct JointEpochRecord {
    std::size_t epoch = 0;
    double nr_objective = 0;   ///< alpha ||Lw - Phi_n||^2 + beta Tr(X^T Lw X) after the w step
    double train_loss = 0;     ///< eval-mode GNN loss after the theta steps
    double train_acc = 0;
    double val_acc = 0;
    double test_acc = 0;
};

struct JointTrainResult {
    EdgeWeightVector w;        ///< snapshot with the best validation accuracy
    GcnParams params;
    std::size_t best_epoch = 0;
    std::vector<JointEpochRecord> history;
};

struct NodeSets {
    std::span<const int> train;
    std::span<const int> val;
    std::span<const int> test;
};

/// Alternates one projected weight step (gradient of the GNN loss taken with
/// dropout off) with inner_T optimizer steps on theta (dropout on). Starts
/// from `w_init` and fresh parameters drawn from the "init" stream of cfg.seed.
JointTrainResult joint_train(const DenoiseProblem& problem, const EdgeWeightVector& w_init,
                             const SparseMatrix& X, std::span<const int> labels, std::size_t classes,
                             const NodeSets& nodes, const JointConfig& cfg);

} // namespace rwl
