#include "gcnet/gcn.hpp"

#include <cmath>

#include "gcnet/error.hpp"
#include "gcnet/rng.hpp"

namespace gcnet {

NormalizedAdjacency normalize_adjacency(const InfluenceGraph& graph) {
    const Eigen::Index m = static_cast<Eigen::Index>(graph.n_nodes());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    for (const auto& e : graph.edges) {
        A(e.i, e.j) = e.weight;
        A(e.j, e.i) = e.weight;
    }
    A.diagonal().array() += 1.0;  // self-connections
    Eigen::VectorXd deg = A.rowwise().sum();
    if ((deg.array() <= 0).any()) throw ContractError("node with non-positive degree");
    Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();
    NormalizedAdjacency out;
    out.matrix = dinv_sqrt.asDiagonal() * A * dinv_sqrt.asDiagonal();
    // symmetrize away rounding noise; the exact formula is already symmetric
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
    return out;
}

namespace {

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd W(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) W(i, j) = rng.uniform(-limit, limit);
    return W;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
    Eigen::MatrixXd mask(rows, cols);
    const double keep = 1.0 - p;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return mask;
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits) {
    Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    Eigen::MatrixXd p = (logits.colwise() - row_max).array().exp();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
}

}  // namespace

GcnModel::GcnModel(int in_features, const GcnHyperParams& hyper) : hp(hyper) {
    Rng rng(derive_seed(hp.seed, 0x6c0de));
    W0 = glorot(in_features, hp.hidden, rng);
    W1 = glorot(hp.hidden, hp.hidden, rng);
    W2 = glorot(hp.hidden, 2, rng);
    adam_m = {Eigen::MatrixXd::Zero(W0.rows(), W0.cols()),
              Eigen::MatrixXd::Zero(W1.rows(), W1.cols()),
              Eigen::MatrixXd::Zero(W2.rows(), W2.cols())};
    adam_v = adam_m;
}

ForwardCache forward(const GcnModel& model, const NormalizedAdjacency& adj,
                     const Eigen::MatrixXd& X, bool training, Rng& rng) {
    if (X.rows() != adj.matrix.rows() || X.cols() != model.W0.rows()) {
        throw ContractError("forward: shape mismatch");
    }
    ForwardCache c;
    c.X = X;
    c.Z0 = adj.matrix * X * model.W0;
    Eigen::MatrixXd H1 = c.Z0.cwiseMax(0.0);
    c.mask1 = training ? dropout_mask(H1.rows(), H1.cols(), model.hp.dropout, rng)
                       : Eigen::MatrixXd::Ones(H1.rows(), H1.cols());
    c.H1d = H1.cwiseProduct(c.mask1);

    c.Z1 = adj.matrix * c.H1d * model.W1;
    Eigen::MatrixXd H2 = c.Z1.cwiseMax(0.0);
    c.mask2 = training ? dropout_mask(H2.rows(), H2.cols(), model.hp.dropout, rng)
                       : Eigen::MatrixXd::Ones(H2.rows(), H2.cols());
    c.H2d = H2.cwiseProduct(c.mask2);

    c.probs = row_softmax(adj.matrix * c.H2d * model.W2);
    return c;
}

double loss(const ForwardCache& cache, const Eigen::VectorXi& labels,
            const GcnModel& model) {
    if (labels.size() != cache.probs.rows()) throw ContractError("loss: label size");
    double ce = 0;
    int labeled = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) continue;
        ++labeled;
        const int cls = labels[i] > 0 ? 1 : 0;
        const double p = std::clamp(cache.probs(i, cls), 1e-12, 1.0 - 1e-12);
        ce -= std::log(p);
    }
    if (labeled == 0) throw ContractError("loss: no labeled nodes");
    const double l2 = 0.5 * model.hp.l2 *
                      (model.W0.squaredNorm() + model.W1.squaredNorm() +
                       model.W2.squaredNorm());
    return ce + l2;
}

Gradients gradients(const GcnModel& model, const NormalizedAdjacency& adj,
                    const ForwardCache& cache, const Eigen::VectorXi& labels) {
    const Eigen::Index m = cache.probs.rows();
    Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(m, 2);
    int labeled = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (labels[i] == 0) continue;
        ++labeled;
        const int cls = labels[i] > 0 ? 1 : 0;
        d_logits.row(i) = cache.probs.row(i);
        d_logits(i, cls) -= 1.0;
    }
    if (labeled == 0) throw ContractError("gradients: no labeled nodes");

    Gradients g;
    const Eigen::MatrixXd& Ah = adj.matrix;
    g.gW2 = (Ah * cache.H2d).transpose() * d_logits + model.hp.l2 * model.W2;

    Eigen::MatrixXd dH2d = Ah * d_logits * model.W2.transpose();
    Eigen::MatrixXd dZ1 = dH2d.cwiseProduct(cache.mask2);
    dZ1 = (cache.Z1.array() > 0).select(dZ1, 0.0);
    g.gW1 = (Ah * cache.H1d).transpose() * dZ1 + model.hp.l2 * model.W1;

    Eigen::MatrixXd dH1d = Ah * dZ1 * model.W1.transpose();
    Eigen::MatrixXd dZ0 = dH1d.cwiseProduct(cache.mask1);
    dZ0 = (cache.Z0.array() > 0).select(dZ0, 0.0);
    g.gW0 = (Ah * cache.X).transpose() * dZ0 + model.hp.l2 * model.W0;
    return g;
}

void backward_and_step(GcnModel& model, const NormalizedAdjacency& adj,
                       const ForwardCache& cache, const Eigen::VectorXi& labels) {
    const Gradients g = gradients(model, adj, cache, labels);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++model.adam_step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(model.adam_step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(model.adam_step));

    Eigen::MatrixXd* weights[3] = {&model.W0, &model.W1, &model.W2};
    const Eigen::MatrixXd* grads[3] = {&g.gW0, &g.gW1, &g.gW2};
    for (int k = 0; k < 3; ++k) {
        auto& mom = model.adam_m[static_cast<std::size_t>(k)];
        auto& vel = model.adam_v[static_cast<std::size_t>(k)];
        mom = beta1 * mom + (1.0 - beta1) * (*grads[k]);
        vel = beta2 * vel + (1.0 - beta2) * grads[k]->cwiseProduct(*grads[k]);
        const Eigen::MatrixXd m_hat = mom / bc1;
        const Eigen::MatrixXd v_hat = vel / bc2;
        *weights[k] -= model.hp.learning_rate *
                       (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
    }
}

NodePredictions predict(const GcnModel& model, const NormalizedAdjacency& adj,
                        const Eigen::MatrixXd& X) {
    Rng unused(0);
    const ForwardCache c = forward(model, adj, X, /*training=*/false, unused);
    NodePredictions out;
    out.probs = c.probs;
    out.hard.resize(static_cast<std::size_t>(c.probs.rows()));
    for (Eigen::Index i = 0; i < c.probs.rows(); ++i) {
        out.hard[static_cast<std::size_t>(i)] = c.probs(i, 1) > c.probs(i, 0) ? 1 : -1;
    }
    return out;
}

std::pair<GcnModel, NodePredictions> train_on_stack(const DayGraphStack& stack,
                                                    const GcnHyperParams& hp,
                                                    bool include_target_day) {
    for (int d = 0; d + 1 < kStackDays; ++d) {
        if ((stack.days[static_cast<std::size_t>(d)].labels.array() == 0).any()) {
            throw ContractError("stack days before the target must be fully labeled");
        }
    }
    const auto& target = stack.days[kStackDays - 1];
    if (include_target_day && (target.labels.array() != 0).count() == 0) {
        throw ContractError("target day has no initial labels");
    }

    GcnModel model(static_cast<int>(stack.days[0].features.cols()), hp);
    Rng rng(derive_seed(hp.seed, 0xd20));
    const int n_days = include_target_day ? kStackDays : kStackDays - 1;
    for (int d = 0; d < n_days; ++d) {
        const auto& day = stack.days[static_cast<std::size_t>(d)];
        for (int epoch = 0; epoch < hp.epochs_per_graph; ++epoch) {
            const ForwardCache cache =
                forward(model, stack.adjacency, day.features, /*training=*/true, rng);
            backward_and_step(model, stack.adjacency, cache, day.labels);
        }
    }
    NodePredictions preds = predict(model, stack.adjacency, target.features);
    return {std::move(model), std::move(preds)};
}

}  // namespace gcnet
