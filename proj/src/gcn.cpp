#include "rwl/gcn.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace rwl {

namespace {

std::span<const double> as_span(const Matrix& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}

// (softmax(logits) - onehot(label)) / |mask| on masked rows, zero elsewhere.
Matrix output_sensitivity(const Matrix& logits, std::span<const int> labels,
                          std::span<const int> mask) {
    if (mask.empty()) {
        throw std::invalid_argument("loss mask is empty");
    }
    Matrix d = Matrix::Zero(logits.rows(), logits.cols());
    const double scale = 1.0 / static_cast<double>(mask.size());
    for (int node : mask) {
        const auto row = logits.row(node);
        const double mx = row.maxCoeff();
        const Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
        d.row(node) = e / e.sum() * scale;
        d(node, labels[static_cast<std::size_t>(node)]) -= scale;
    }
    return d;
}

void check_cache(const ForwardCache& cache, const GcnParams& params, const NormalizedAdjacency& adj) {
    if (cache.params_fingerprint != fingerprint(params) ||
        cache.adjacency_fingerprint != adj.source_fingerprint) {
        throw std::logic_error("stale forward cache: parameters or adjacency changed since forward pass");
    }
}

// Sensitivity of the loss w.r.t. the first-layer pre-activation.
struct Backprop {
    Matrix dZ2;
    Matrix dZ1;
    Matrix P2; // A_hat^T dZ2
};

Backprop backprop(const ForwardCache& cache, const GcnParams& params, const NormalizedAdjacency& adj,
                  std::span<const int> labels, std::span<const int> mask) {
    Backprop b;
    b.dZ2 = output_sensitivity(cache.logits, labels, mask);
    b.P2.noalias() = adj.matrix.transpose() * b.dZ2;
    b.dZ1.noalias() = b.P2 * params.W2.transpose();
    b.dZ1.array() *= (cache.Z1.array() > 0.0).cast<double>();
    if (cache.mode == Mode::train && cache.dropout.size() > 0) {
        b.dZ1.array() *= cache.dropout.array();
    }
    return b;
}

void require_finite(const Matrix& m, const char* layer) {
    if (!m.allFinite()) {
        throw NumericalError(std::string("non-finite activation in ") + layer);
    }
}

} // namespace

std::uint64_t fingerprint(std::span<const double> values) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ values.size();
    for (double v : values) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        h = (h ^ bits) * 0x100000001b3ULL;
        h ^= h >> 29;
    }
    return h;
}

std::uint64_t fingerprint(const GcnParams& params) {
    return fingerprint(as_span(params.W1)) * 31 + fingerprint(as_span(params.W2));
}

GcnParams init_params(std::size_t features, std::size_t hidden, std::size_t classes, Rng& rng) {
    auto draw = [&rng](std::size_t rows, std::size_t cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
        std::uniform_real_distribution<double> u(-bound, bound);
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                m(i, j) = u(rng);
            }
        }
        return m;
    };
    GcnParams p;
    p.W1 = draw(features, hidden);
    p.W2 = draw(hidden, classes);
    return p;
}

namespace {

// Triplets (i, j, a_ij) of a symmetric adjacency, both orientations listed.
NormalizedAdjacency normalize_triplets(std::size_t n, std::vector<Eigen::Triplet<double>> entries) {
    NormalizedAdjacency out;
    // Self-loops make every degree >= 1.
    Vector degree = Vector::Ones(static_cast<Eigen::Index>(n));
    for (const auto& t : entries) {
        degree[t.row()] += t.value();
    }
    out.inv_sqrt_degree = degree.array().rsqrt();
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        entries.emplace_back(i, i, 1.0);
    }
    for (auto& t : entries) {
        t = Eigen::Triplet<double>(t.row(), t.col(),
                                   t.value() * out.inv_sqrt_degree[t.row()] * out.inv_sqrt_degree[t.col()]);
    }
    const auto size = static_cast<Eigen::Index>(n);
    out.matrix.resize(size, size);
    out.matrix.setFromTriplets(entries.begin(), entries.end());
    return out;
}

} // namespace

NormalizedAdjacency normalize_adjacency(const SquareMatrix& A) {
    if (!is_adjacency(A, 0.0)) {
        throw std::invalid_argument("normalize_adjacency: input is not a symmetric nonnegative "
                                    "matrix with zero diagonal");
    }
    std::vector<Eigen::Triplet<double>> entries;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            if (A(i, j) != 0.0) {
                entries.emplace_back(i, j, A(i, j));
            }
        }
    }
    NormalizedAdjacency out = normalize_triplets(static_cast<std::size_t>(A.rows()), std::move(entries));
    out.source_fingerprint = fingerprint(as_span(A));
    return out;
}

NormalizedAdjacency normalize_adjacency(const EdgeWeightVector& w) {
    std::vector<Eigen::Triplet<double>> entries;
    for_each_pair(w.nodes(), [&](std::size_t k, std::size_t i, std::size_t j) {
        const double v = w[k];
        if (v != 0.0) {
            entries.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), v);
            entries.emplace_back(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i), v);
        }
    });
    NormalizedAdjacency out = normalize_triplets(w.nodes(), std::move(entries));
    out.source_fingerprint = fingerprint(std::span<const double>(w.values().data(), w.size()));
    return out;
}

ForwardCache gcn_forward(const GcnParams& params, const NormalizedAdjacency& adj, const SparseMatrix& X,
                         Mode mode, double dropout_rate, Rng* rng) {
    const Eigen::Index n = adj.matrix.rows();
    if (X.rows() != n || params.W1.rows() != X.cols() || params.W2.rows() != params.W1.cols()) {
        throw std::invalid_argument("gcn_forward: shape mismatch (X " + std::to_string(X.rows()) + "x" +
                                    std::to_string(X.cols()) + ", W1 " +
                                    std::to_string(params.W1.rows()) + "x" +
                                    std::to_string(params.W1.cols()) + ", W2 " +
                                    std::to_string(params.W2.rows()) + "x" +
                                    std::to_string(params.W2.cols()) + ", n " + std::to_string(n) + ")");
    }
    ForwardCache c;
    c.mode = mode;
    c.params_fingerprint = fingerprint(params);
    c.adjacency_fingerprint = adj.source_fingerprint;

    c.XW1.noalias() = X * params.W1;
    c.Z1.noalias() = adj.matrix * c.XW1;
    require_finite(c.Z1, "layer 1");
    c.H = c.Z1.cwiseMax(0.0);
    if (mode == Mode::train && dropout_rate > 0.0) {
        if (rng == nullptr) {
            throw std::invalid_argument("gcn_forward: train-mode dropout needs an RNG");
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double keep_scale = 1.0 / (1.0 - dropout_rate);
        c.dropout.resize(c.H.rows(), c.H.cols());
        for (Eigen::Index j = 0; j < c.H.cols(); ++j) {
            for (Eigen::Index i = 0; i < c.H.rows(); ++i) {
                c.dropout(i, j) = u(*rng) < dropout_rate ? 0.0 : keep_scale;
            }
        }
        c.H.array() *= c.dropout.array();
    }
    c.HW2.noalias() = c.H * params.W2;
    c.logits.noalias() = adj.matrix * c.HW2;
    require_finite(c.logits, "layer 2");
    return c;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Eigen::RowVectorXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
        p.row(i) = e / e.sum();
    }
    return p;
}

double gnn_loss(const Matrix& logits, std::span<const int> labels, std::span<const int> mask,
                const GcnParams& params, double weight_decay) {
    if (mask.empty()) {
        throw std::invalid_argument("gnn_loss: empty node mask");
    }
    double total = 0.0;
    for (int node : mask) {
        const auto row = logits.row(node);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        total += lse - row(labels[static_cast<std::size_t>(node)]);
    }
    return total / static_cast<double>(mask.size()) + 0.5 * weight_decay * params.W1.squaredNorm();
}

GcnGradients grad_theta(const ForwardCache& cache, const GcnParams& params,
                        const NormalizedAdjacency& adj, const SparseMatrix& X,
                        std::span<const int> labels, std::span<const int> mask,
                        double weight_decay) {
    check_cache(cache, params, adj);
    const Backprop b = backprop(cache, params, adj, labels, mask);
    GcnGradients g;
    g.W2.noalias() = cache.H.transpose() * b.P2;
    const Matrix P1 = adj.matrix.transpose() * b.dZ1;
    g.W1.noalias() = X.transpose() * P1;
    g.W1 += weight_decay * params.W1;
    return g;
}

Vector grad_w(const ForwardCache& cache, const GcnParams& params, const NormalizedAdjacency& adj,
              const EdgeWeightVector& w, std::span<const int> labels, std::span<const int> mask) {
    check_cache(cache, params, adj);
    if (fingerprint(std::span<const double>(w.values().data(), w.size())) != adj.source_fingerprint) {
        throw std::logic_error("stale forward cache: adjacency was not built from these edge weights");
    }
    const Backprop b = backprop(cache, params, adj, labels, mask);

    // G = dL/dA_hat; S = G + G^T.
    Matrix S;
    S.noalias() = b.dZ2 * cache.HW2.transpose();
    S.noalias() += b.dZ1 * cache.XW1.transpose();
    S = S + S.transpose().eval();

    const Vector& s = adj.inv_sqrt_degree;
    // dL/d(degree_a) = -1/2 s_a^2 sum_j S_aj A_hat_aj
    Vector degree_term = Vector::Zero(s.size());
    for (Eigen::Index a = 0; a < adj.matrix.outerSize(); ++a) {
        for (SparseMatrix::InnerIterator it(adj.matrix, a); it; ++it) {
            degree_term[a] += S(a, it.col()) * it.value();
        }
        degree_term[a] *= -0.5 * s[a] * s[a];
    }

    const std::size_t n = w.nodes();
    Vector out(static_cast<Eigen::Index>(w.size()));
    for_each_pair(n, [&](std::size_t k, std::size_t i, std::size_t j) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto c = static_cast<Eigen::Index>(j);
        out[static_cast<Eigen::Index>(k)] = S(a, c) * s[a] * s[c] + degree_term[a] + degree_term[c];
    });
    return out;
}

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const int> nodes) {
    if (nodes.empty()) {
        throw std::invalid_argument("accuracy: empty node set");
    }
    std::size_t correct = 0;
    for (int node : nodes) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c) {
            if (logits(node, c) > logits(node, best)) {
                best = c;
            }
        }
        correct += best == labels[static_cast<std::size_t>(node)] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

Optimizer::Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
    if (!(lr > 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
}

void Optimizer::step(GcnParams& params, const GcnGradients& grads) {
    if (kind_ == OptimizerKind::sgd) {
        params.W1 -= lr_ * grads.W1;
        params.W2 -= lr_ * grads.W2;
        return;
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    if (t_ == 0) {
        m_.W1 = Matrix::Zero(grads.W1.rows(), grads.W1.cols());
        m_.W2 = Matrix::Zero(grads.W2.rows(), grads.W2.cols());
        v_ = m_;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    auto update = [&](Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
        p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    update(params.W1, grads.W1, m_.W1, v_.W1);
    update(params.W2, grads.W2, m_.W2, v_.W2);
}

GcnTrainResult train_gcn(const NormalizedAdjacency& adj, const SparseMatrix& X, std::span<const int> labels,
                         std::span<const int> train, std::span<const int> val,
                         std::span<const int> test, std::size_t classes,
                         const GcnTrainConfig& cfg, Rng& init_rng, Rng& dropout_rng) {
    GcnTrainResult result;
    GcnParams params = init_params(static_cast<std::size_t>(X.cols()), cfg.hidden, classes, init_rng);
    Optimizer opt(cfg.optimizer, cfg.lr);
    double best_val_loss = std::numeric_limits<double>::infinity();
    result.params = params;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const ForwardCache fwd = gcn_forward(params, adj, X, Mode::train, cfg.dropout, &dropout_rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = gnn_loss(fwd.logits, labels, train, params, cfg.weight_decay);
        opt.step(params, grad_theta(fwd, params, adj, X, labels, train, cfg.weight_decay));

        const ForwardCache ev = gcn_forward(params, adj, X, Mode::eval);
        rec.val_loss = gnn_loss(ev.logits, labels, val, params, 0.0);
        rec.train_acc = accuracy(ev.logits, labels, train);
        rec.val_acc = accuracy(ev.logits, labels, val);
        rec.test_acc = test.empty() ? 0.0 : accuracy(ev.logits, labels, test);
        result.history.push_back(rec);

        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
            throw NumericalError("GCN training diverged at epoch " + std::to_string(epoch));
        }
        if (rec.val_loss < best_val_loss) {
            best_val_loss = rec.val_loss;
            result.best_epoch = epoch;
            result.params = params;
        } else if (epoch - result.best_epoch >= cfg.patience) {
            break;
        }
    }
    return result;
}

} // namespace rwl
