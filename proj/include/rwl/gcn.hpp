#pragma once

#include "rwl/laplacian.hpp"
#include "rwl/rng.hpp"
#include "rwl/types.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace rwl {

/// Two-layer GCN weights: W1 is d x h, W2 is h x C. No biases.
struct GcnParams {
    Matrix W1;
    Matrix W2;

    std::size_t hidden() const noexcept { return static_cast<std::size_t>(W1.cols()); }
};

/// Each weight uniform in +-1/sqrt(fan_in).
GcnParams init_params(std::size_t features, std::size_t hidden, std::size_t classes, Rng& rng);

/// D^-1/2 (A + I) D^-1/2 together with what is needed to differentiate it.
struct NormalizedAdjacency {
    SparseMatrix matrix;
    Vector inv_sqrt_degree;          ///< (rowsum(A) + 1)^-1/2
    std::uint64_t source_fingerprint = 0; ///< identifies the input it was built from
};

/// Precondition: A is a valid adjacency (checked; throws std::invalid_argument).
NormalizedAdjacency normalize_adjacency(const SquareMatrix& A);

/// Same as normalize_adjacency(adjacency_apply(w)), tagged with w so that
/// `grad_w` can reject a cache built from different weights.
NormalizedAdjacency normalize_adjacency(const EdgeWeightVector& w);

/// Cheap content hash used to detect stale caches.
std::uint64_t fingerprint(std::span<const double> values);
std::uint64_t fingerprint(const GcnParams& params);

enum class Mode { train, eval };

/// Activations kept by `gcn_forward` for reverse mode.
struct ForwardCache {
    Mode mode = Mode::eval;
    Matrix XW1;       ///< X W1
    Matrix Z1;        ///< A_hat X W1
    Matrix dropout;   ///< n x h scaled keep-mask; empty in eval mode
    Matrix H;         ///< relu(Z1), masked in train mode
    Matrix HW2;       ///< H W2
    Matrix logits;    ///< A_hat H W2
    std::uint64_t params_fingerprint = 0;
    std::uint64_t adjacency_fingerprint = 0;
};

/// Non-finite activation; the message names the layer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// logits = A_hat relu(A_hat X W1) W2. In train mode a dropout mask with the
/// given rate is drawn from `rng` and applied to the hidden activation.
ForwardCache gcn_forward(const GcnParams& params, const NormalizedAdjacency& adj, const SparseMatrix& X,
                         Mode mode, double dropout_rate = 0.0, Rng* rng = nullptr);

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

/// Mean cross-entropy over `mask` plus weight_decay * ||W1||_F^2 / 2.
/// Throws std::invalid_argument for an empty mask.
double gnn_loss(const Matrix& logits, std::span<const int> labels, std::span<const int> mask,
                const GcnParams& params, double weight_decay);

struct GcnGradients {
    Matrix W1;
    Matrix W2;
};

/// Exact gradient of `gnn_loss` w.r.t. (W1, W2), replaying the cached dropout
/// mask. Throws std::logic_error when the cache does not match params/adj.
GcnGradients grad_theta(const ForwardCache& cache, const GcnParams& params,
                        const NormalizedAdjacency& adj, const SparseMatrix& X,
                        std::span<const int> labels, std::span<const int> mask,
                        double weight_decay);

/// Exact gradient of `gnn_loss` w.r.t. the edge weights that produced `adj`,
/// including the degree normalization terms. Throws std::logic_error when
/// `adj` or `cache` were not built from `w` and `params`.
Vector grad_w(const ForwardCache& cache, const GcnParams& params, const NormalizedAdjacency& adj,
              const EdgeWeightVector& w, std::span<const int> labels, std::span<const int> mask);

/// Fraction of `nodes` whose argmax class (lowest index on ties) equals the label.
double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const int> nodes);

enum class OptimizerKind { sgd, adam };

/// Plain gradient descent or Adam over both weight matrices.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr);
    void step(GcnParams& params, const GcnGradients& grads);
    double learning_rate() const noexcept { return lr_; }

private:
    OptimizerKind kind_;
    double lr_;
    long t_ = 0;
    GcnGradients m_;
    GcnGradients v_;
};

struct GcnTrainConfig {
    std::size_t hidden = 16;
    double dropout = 0.5;
    double weight_decay = 5e-4;
    OptimizerKind optimizer = OptimizerKind::adam;
    double lr = 0.01;
    std::size_t max_epochs = 1000;
    std::size_t patience = 200; ///< epochs without a validation-loss improvement
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double train_acc = 0;
    double val_acc = 0;
    double test_acc = 0;
};

struct GcnTrainResult {
    GcnParams params; ///< snapshot with the lowest validation loss
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> history;
};

/// Trains on a fixed graph with early stopping on validation loss.
GcnTrainResult train_gcn(const NormalizedAdjacency& adj, const SparseMatrix& X, std::span<const int> labels,
                         std::span<const int> train, std::span<const int> val,
                         std::span<const int> test, std::size_t classes,
                         const GcnTrainConfig& cfg, Rng& init_rng, Rng& dropout_rng);

} // namespace rwl
