#include "rwl/joint.hpp"

#include "rwl/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rwl {

void validate(const JointConfig& cfg) {
    if (cfg.l2_prime && !(*cfg.l2_prime > 0.0)) {
        throw std::invalid_argument("joint config: l2_prime must be positive");
    }
    if (!(cfg.w_lr > 0.0)) {
        throw std::invalid_argument("joint config: w_lr must be positive");
    }
    if (cfg.inner_T < 1 || cfg.outer_epochs < 1) {
        throw std::invalid_argument("joint config: inner_T and outer_epochs must be >= 1");
    }
}

double joint_step_size(std::size_t n, const JointConfig& cfg) {
    if (cfg.l2_prime) {
        return 1.0 / (lipschitz_constant(n) + *cfg.l2_prime);
    }
    return cfg.w_lr;
}

EdgeWeightVector joint_w_step_with(const EdgeWeightVector& w, const Vector& c, const Vector& grad_gnn,
                                   double step) {
    if (grad_gnn.size() != w.values().size()) {
        throw std::invalid_argument("joint_w_step: GNN gradient length mismatch");
    }
    return projected_step(w, smooth_gradient(w, c) + grad_gnn, step);
}

EdgeWeightVector joint_w_step(const EdgeWeightVector& w, const Vector& c, const Vector& grad_gnn,
                              double l2_prime) {
    if (!(l2_prime >= 0.0)) {
        throw std::invalid_argument("joint_w_step: l2_prime must be >= 0");
    }
    return joint_w_step_with(w, c, grad_gnn, 1.0 / (lipschitz_constant(w.nodes()) + l2_prime));
}

double combined_objective(const EdgeWeightVector& w, const Vector& c, const GcnParams& params,
                          const SparseMatrix& X, std::span<const int> labels, std::span<const int> mask,
                          double weight_decay) {
    const double smooth = 0.5 * laplacian_squared_norm(w) - 0.5 * c.dot(w.values());
    const NormalizedAdjacency adj = normalize_adjacency(w);
    const ForwardCache fwd = gcn_forward(params, adj, X, Mode::eval);
    return smooth + gnn_loss(fwd.logits, labels, mask, params, weight_decay);
}

JointTrainResult joint_train(const DenoiseProblem& problem, const EdgeWeightVector& w_init,
                             const SparseMatrix& X, std::span<const int> labels, std::size_t classes,
                             const NodeSets& nodes, const JointConfig& cfg) {
    validate(cfg);
    const std::size_t n = problem.nodes();
    if (w_init.nodes() != n || static_cast<std::size_t>(X.rows()) != n) {
        throw std::invalid_argument("joint_train: graph, features and problem disagree on node count");
    }
    Rng init_rng = make_stream(cfg.seed, "init");
    Rng dropout_rng = make_stream(cfg.seed, "dropout");
    const double step = joint_step_size(n, cfg);
    const double wd = cfg.gcn.weight_decay;

    EdgeWeightVector w = w_init;
    GcnParams params = init_params(static_cast<std::size_t>(X.cols()), cfg.gcn.hidden, classes, init_rng);
    Optimizer opt(cfg.gcn.optimizer, cfg.gcn.lr);

    JointTrainResult result{w, params, 0, {}};
    double best_val = -1.0;

    for (std::size_t epoch = 0; epoch < cfg.outer_epochs; ++epoch) {
        {
            const NormalizedAdjacency adj = normalize_adjacency(w);
            const ForwardCache fwd = gcn_forward(params, adj, X, Mode::eval);
            Vector g2 = Vector::Zero(static_cast<Eigen::Index>(w.size()));
            if (cfg.gnn_grad_scale != 0.0) {
                g2 = cfg.gnn_grad_scale * grad_w(fwd, params, adj, w, labels, nodes.train);
            }
            w = joint_w_step_with(w, problem.c, g2, step);
        }
        if (cfg.on_weights) {
            cfg.on_weights(epoch, w);
        }

        const NormalizedAdjacency adj = normalize_adjacency(w);
        for (std::size_t t = 0; t < cfg.inner_T; ++t) {
            const ForwardCache fwd = gcn_forward(params, adj, X, Mode::train, cfg.gcn.dropout, &dropout_rng);
            opt.step(params, grad_theta(fwd, params, adj, X, labels, nodes.train, wd));
        }

        const ForwardCache ev = gcn_forward(params, adj, X, Mode::eval);
        JointEpochRecord rec;
        rec.epoch = epoch;
        rec.nr_objective = nr_objective(w, problem);
        rec.train_loss = gnn_loss(ev.logits, labels, nodes.train, params, wd);
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.nr_objective)) {
            throw NumericalError("joint training diverged at epoch " + std::to_string(epoch));
        }
        rec.train_acc = accuracy(ev.logits, labels, nodes.train);
        rec.val_acc = accuracy(ev.logits, labels, nodes.val);
        rec.test_acc = nodes.test.empty() ? 0.0 : accuracy(ev.logits, labels, nodes.test);
        result.history.push_back(rec);

        if (rec.val_acc > best_val) {
            best_val = rec.val_acc;
            result.best_epoch = epoch;
            result.w = w;
            result.params = params;
        }
    }
    return result;
}

} // namespace rwl
