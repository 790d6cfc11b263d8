#include "gcnet/classifiers.hpp"

#include <algorithm>
#include <cmath>

#include "gcnet/error.hpp"
#include "gcnet/rng.hpp"

namespace gcnet {

std::string classifier_name(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::Qda: return "QDA";
        case ClassifierKind::Lda: return "LDA";
        case ClassifierKind::NaiveBayes: return "NB";
        case ClassifierKind::DecisionTree: return "DTREE";
        case ClassifierKind::RandomForest: return "RFOREST";
        case ClassifierKind::Mlp: return "MLP";
    }
    return "?";
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const double n = static_cast<double>(X.rows());
    s.mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
    s.stddev = (centered.array().square().colwise().sum() / n).sqrt();
    for (Eigen::Index j = 0; j < s.stddev.size(); ++j)
        if (s.stddev[j] <= 0) s.stddev[j] = 1.0;
    return s;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) throw ContractError("feature dimension mismatch");
    return (x - mean).cwiseQuotient(stddev);
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
    if (X.cols() != mean.size()) throw ContractError("feature dimension mismatch");
    Eigen::MatrixXd Z = X.rowwise() - mean.transpose();
    Z.array().rowwise() /= stddev.transpose().array();
    return Z;
}

int TrainedClassifier::predict(const Eigen::VectorXd& x) const {
    if (fallback_) return majority_class_;
    return predict_standardized(standardizer_.apply(x));
}

namespace {

struct ClassSplit {
    Eigen::MatrixXd X0, X1;  // rows of each class (standardized)
    double prior0 = 0, prior1 = 0;
};

ClassSplit split_classes(const Eigen::MatrixXd& Z, const Eigen::VectorXi& y) {
    const Eigen::Index n0 = (y.array() == 0).count();
    const Eigen::Index n1 = y.size() - n0;
    if (n0 == 0 || n1 == 0) throw DegenerateTrainingError("single-class training data");
    ClassSplit s;
    s.X0.resize(n0, Z.cols());
    s.X1.resize(n1, Z.cols());
    Eigen::Index i0 = 0, i1 = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] == 0) s.X0.row(i0++) = Z.row(i);
        else s.X1.row(i1++) = Z.row(i);
    }
    s.prior0 = static_cast<double>(n0) / static_cast<double>(y.size());
    s.prior1 = static_cast<double>(n1) / static_cast<double>(y.size());
    return s;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& X) {
    const double n = static_cast<double>(X.rows());
    Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::MatrixXd C = X.rowwise() - mu;
    return (C.transpose() * C) / n;
}

// Regularize until positive definite; escalate epsilon x10 up to reg_max.
struct InvertedCov {
    Eigen::MatrixXd inverse;
    double log_det = 0;
};
InvertedCov invert_regularized(Eigen::MatrixXd sigma, double reg_start,
                               double reg_max) {
    const double scale = sigma.trace() / static_cast<double>(sigma.rows());
    for (double eps = reg_start; eps <= reg_max * 1.0000001; eps *= 10.0) {
        Eigen::MatrixXd s = sigma;
        s.diagonal().array() += eps * scale;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
        if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0) {
            InvertedCov out;
            out.inverse = ldlt.solve(
                Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
            out.log_det = ldlt.vectorD().array().log().sum();
            return out;
        }
        if (scale <= 0) break;  // all-zero covariance cannot be repaired
    }
    throw DegenerateTrainingError("covariance not invertible after regularization");
}

// ---------------------------------------------------------------------------

class QdaClassifier final : public TrainedClassifier {
public:
    Eigen::VectorXd mu0, mu1;
    InvertedCov cov0, cov1;
    double log_prior0 = 0, log_prior1 = 0;

    double discriminant(const Eigen::VectorXd& z, const Eigen::VectorXd& mu,
                        const InvertedCov& c, double log_prior) const {
        const Eigen::VectorXd d = z - mu;
        return -0.5 * c.log_det - 0.5 * d.dot(c.inverse * d) + log_prior;
    }

    int predict_standardized(const Eigen::VectorXd& z) const override {
        const double d0 = discriminant(z, mu0, cov0, log_prior0);
        const double d1 = discriminant(z, mu1, cov1, log_prior1);
        return d1 > d0 ? 1 : 0;
    }
};

class LdaClassifier final : public TrainedClassifier {
public:
    Eigen::VectorXd mu0, mu1;
    Eigen::MatrixXd pooled_inverse;
    double log_prior0 = 0, log_prior1 = 0;

    int predict_standardized(const Eigen::VectorXd& z) const override {
        const auto score = [&](const Eigen::VectorXd& mu, double lp) {
            return z.dot(pooled_inverse * mu) - 0.5 * mu.dot(pooled_inverse * mu) + lp;
        };
        return score(mu1, log_prior1) > score(mu0, log_prior0) ? 1 : 0;
    }
};

class NaiveBayesClassifier final : public TrainedClassifier {
public:
    Eigen::VectorXd mu0, mu1, var0, var1;
    double log_prior0 = 0, log_prior1 = 0;

    int predict_standardized(const Eigen::VectorXd& z) const override {
        const auto log_lik = [&](const Eigen::VectorXd& mu, const Eigen::VectorXd& var,
                                 double lp) {
            double s = lp;
            for (Eigen::Index j = 0; j < z.size(); ++j) {
                const double d = z[j] - mu[j];
                s += -0.5 * std::log(2.0 * M_PI * var[j]) - 0.5 * d * d / var[j];
            }
            return s;
        };
        return log_lik(mu1, var1, log_prior1) > log_lik(mu0, var0, log_prior0) ? 1 : 0;
    }
};

// ---------------------------------------------------------------------------
// CART decision tree (Gini), shared by the single tree and the forest.

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;
    int leaf_class = 0;
};

struct CartParams {
    int max_depth;
    int min_leaf;
    int mtry;  // features considered per split; <= 0 means all
};

class CartBuilder {
public:
    CartBuilder(const Eigen::MatrixXd& Z, const Eigen::VectorXi& y,
                const CartParams& p, Rng* rng)
        : Z_(Z), y_(y), params_(p), rng_(rng) {}

    std::vector<TreeNode> build(const std::vector<int>& sample_indices) {
        nodes_.clear();
        grow(sample_indices, 0);
        return std::move(nodes_);
    }

private:
    int grow(const std::vector<int>& idx, int depth) {
        const int node_id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();

        int count1 = 0;
        for (int i : idx) count1 += y_[i];
        const int count0 = static_cast<int>(idx.size()) - count1;
        const int majority = count1 > count0 ? 1 : 0;

        if (depth >= params_.max_depth || count0 == 0 || count1 == 0 ||
            static_cast<int>(idx.size()) < 2 * params_.min_leaf) {
            nodes_[node_id].leaf_class = majority;
            return node_id;
        }

        int best_feature = -1;
        double best_threshold = 0, best_impurity = gini(count0, count1);
        const auto features = candidate_features();
        std::vector<std::pair<double, int>> vals;
        for (int f : features) {
            vals.clear();
            for (int i : idx) vals.emplace_back(Z_(i, f), y_[i]);
            std::sort(vals.begin(), vals.end());
            int l0 = 0, l1 = 0;
            const int n = static_cast<int>(vals.size());
            for (int k = 0; k + 1 < n; ++k) {
                if (vals[k].second == 0) ++l0; else ++l1;
                if (vals[k].first == vals[k + 1].first) continue;
                const int left_n = k + 1, right_n = n - left_n;
                if (left_n < params_.min_leaf || right_n < params_.min_leaf) continue;
                const double imp =
                    (left_n * gini(l0, l1) +
                     right_n * gini(count0 - l0, count1 - l1)) / n;
                if (imp < best_impurity - 1e-15) {
                    best_impurity = imp;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[k].first + vals[k + 1].first);
                }
            }
        }
        if (best_feature < 0) {
            nodes_[node_id].leaf_class = majority;
            return node_id;
        }

        std::vector<int> left_idx, right_idx;
        for (int i : idx) {
            (Z_(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        nodes_[node_id].feature = best_feature;
        nodes_[node_id].threshold = best_threshold;
        const int l = grow(left_idx, depth + 1);
        nodes_[node_id].left = l;
        const int r = grow(right_idx, depth + 1);
        nodes_[node_id].right = r;
        return node_id;
    }

    std::vector<int> candidate_features() const {
        const int f = static_cast<int>(Z_.cols());
        std::vector<int> all(f);
        for (int j = 0; j < f; ++j) all[j] = j;
        if (params_.mtry <= 0 || params_.mtry >= f || !rng_) return all;
        // sample mtry features without replacement
        for (int j = 0; j < params_.mtry; ++j) {
            const int k = j + static_cast<int>(rng_->uniform_int(
                                  static_cast<std::uint64_t>(f - j)));
            std::swap(all[j], all[k]);
        }
        all.resize(static_cast<std::size_t>(params_.mtry));
        std::sort(all.begin(), all.end());
        return all;
    }

    static double gini(int c0, int c1) {
        const double n = c0 + c1;
        if (n == 0) return 0;
        const double p0 = c0 / n, p1 = c1 / n;
        return 1.0 - p0 * p0 - p1 * p1;
    }

    const Eigen::MatrixXd& Z_;
    const Eigen::VectorXi& y_;
    CartParams params_;
    Rng* rng_;
    std::vector<TreeNode> nodes_;
};

int tree_predict(const std::vector<TreeNode>& nodes, const Eigen::VectorXd& z) {
    int cur = 0;
    while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(cur)];
        cur = z[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(cur)].leaf_class;
}

class DecisionTreeClassifier final : public TrainedClassifier {
public:
    std::vector<TreeNode> nodes;
    int predict_standardized(const Eigen::VectorXd& z) const override {
        return tree_predict(nodes, z);
    }
};

class RandomForestClassifier final : public TrainedClassifier {
public:
    std::vector<std::vector<TreeNode>> trees;
    int predict_standardized(const Eigen::VectorXd& z) const override {
        int votes1 = 0;
        for (const auto& t : trees) votes1 += tree_predict(t, z);
        const int votes0 = static_cast<int>(trees.size()) - votes1;
        return votes1 > votes0 ? 1 : 0;
    }
};

// ---------------------------------------------------------------------------

class MlpClassifier final : public TrainedClassifier {
public:
    Eigen::MatrixXd W1, W2;  // f x h, h x 2
    Eigen::VectorXd b1, b2;

    int predict_standardized(const Eigen::VectorXd& z) const override {
        const Eigen::VectorXd h = (W1.transpose() * z + b1).cwiseMax(0.0);
        const Eigen::VectorXd logits = W2.transpose() * h + b2;
        return logits[1] > logits[0] ? 1 : 0;
    }
};

Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd W(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) W(i, j) = rng.uniform(-limit, limit);
    return W;
}

void train_mlp(MlpClassifier& m, const Eigen::MatrixXd& Z, const Eigen::VectorXi& y,
               const PoolConfig& cfg, Rng& rng) {
    const Eigen::Index n = Z.rows(), f = Z.cols(), h = cfg.mlp_hidden;
    m.W1 = glorot_uniform(f, h, rng);
    m.W2 = glorot_uniform(h, 2, rng);
    m.b1 = Eigen::VectorXd::Zero(h);
    m.b2 = Eigen::VectorXd::Zero(2);

    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, y[i]) = 1.0;

    for (int epoch = 0; epoch < cfg.mlp_epochs; ++epoch) {
        Eigen::MatrixXd A1 = (Z * m.W1).rowwise() + m.b1.transpose();
        Eigen::MatrixXd H = A1.cwiseMax(0.0);
        Eigen::MatrixXd logits = (H * m.W2).rowwise() + m.b2.transpose();
        // row-wise softmax with max subtraction
        Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
        Eigen::MatrixXd P = (logits.colwise() - row_max).array().exp();
        P.array().colwise() /= P.rowwise().sum().array();

        Eigen::MatrixXd d_logits = (P - Y) / static_cast<double>(n);
        Eigen::MatrixXd gW2 = H.transpose() * d_logits;
        Eigen::VectorXd gb2 = d_logits.colwise().sum();
        Eigen::MatrixXd dH = d_logits * m.W2.transpose();
        dH = (A1.array() > 0).select(dH, 0.0);
        Eigen::MatrixXd gW1 = Z.transpose() * dH;
        Eigen::VectorXd gb1 = dH.colwise().sum();

        m.W1 -= cfg.mlp_lr * gW1;
        m.W2 -= cfg.mlp_lr * gW2;
        m.b1 -= cfg.mlp_lr * gb1;
        m.b2 -= cfg.mlp_lr * gb2;
    }
}

}  // namespace

std::unique_ptr<TrainedClassifier> train_classifier(ClassifierKind kind,
                                                    const LabeledDataset& data,
                                                    std::uint64_t seed,
                                                    const PoolConfig& config) {
    if (data.n() == 0) throw ContractError("empty training data");
    if (!data.X.allFinite()) throw ContractError("non-finite training features");
    if (data.X.rows() != data.y.size()) throw ContractError("X/y size mismatch");

    const Standardizer std_ = Standardizer::fit(data.X);
    const Eigen::MatrixXd Z = std_.apply(data.X);
    const ClassSplit cls = split_classes(Z, data.y);  // throws on single class

    std::unique_ptr<TrainedClassifier> out;
    switch (kind) {
        case ClassifierKind::Qda: {
            auto m = std::make_unique<QdaClassifier>();
            m->mu0 = cls.X0.colwise().mean();
            m->mu1 = cls.X1.colwise().mean();
            m->cov0 = invert_regularized(covariance(cls.X0), config.cov_reg_start,
                                         config.cov_reg_max);
            m->cov1 = invert_regularized(covariance(cls.X1), config.cov_reg_start,
                                         config.cov_reg_max);
            m->log_prior0 = std::log(cls.prior0);
            m->log_prior1 = std::log(cls.prior1);
            out = std::move(m);
            break;
        }
        case ClassifierKind::Lda: {
            auto m = std::make_unique<LdaClassifier>();
            m->mu0 = cls.X0.colwise().mean();
            m->mu1 = cls.X1.colwise().mean();
            Eigen::MatrixXd pooled = cls.prior0 * covariance(cls.X0) +
                                     cls.prior1 * covariance(cls.X1);
            m->pooled_inverse = invert_regularized(std::move(pooled),
                                                   config.cov_reg_start,
                                                   config.cov_reg_max)
                                    .inverse;
            m->log_prior0 = std::log(cls.prior0);
            m->log_prior1 = std::log(cls.prior1);
            out = std::move(m);
            break;
        }
        case ClassifierKind::NaiveBayes: {
            auto m = std::make_unique<NaiveBayesClassifier>();
            m->mu0 = cls.X0.colwise().mean();
            m->mu1 = cls.X1.colwise().mean();
            const auto var_of = [&](const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& mu) {
                Eigen::MatrixXd c = X.rowwise() - mu.transpose();
                Eigen::VectorXd v = c.array().square().colwise().mean();
                return v.cwiseMax(config.nb_var_floor).eval();
            };
            m->var0 = var_of(cls.X0, m->mu0);
            m->var1 = var_of(cls.X1, m->mu1);
            m->log_prior0 = std::log(cls.prior0);
            m->log_prior1 = std::log(cls.prior1);
            out = std::move(m);
            break;
        }
        case ClassifierKind::DecisionTree: {
            auto m = std::make_unique<DecisionTreeClassifier>();
            CartParams p{config.tree_max_depth, config.tree_min_leaf, 0};
            CartBuilder builder(Z, data.y, p, nullptr);
            std::vector<int> idx(data.n());
            for (std::size_t i = 0; i < data.n(); ++i) idx[i] = static_cast<int>(i);
            m->nodes = builder.build(idx);
            out = std::move(m);
            break;
        }
        case ClassifierKind::RandomForest: {
            auto m = std::make_unique<RandomForestClassifier>();
            Rng rng(derive_seed(seed, 0x8f));
            const int mtry = static_cast<int>(
                std::ceil(std::sqrt(static_cast<double>(data.f()))));
            CartParams p{config.tree_max_depth, config.tree_min_leaf, mtry};
            const int n = static_cast<int>(data.n());
            for (int t = 0; t < config.forest_trees; ++t) {
                std::vector<int> idx(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i)
                    idx[static_cast<std::size_t>(i)] = static_cast<int>(
                        rng.uniform_int(static_cast<std::uint64_t>(n)));
                CartBuilder builder(Z, data.y, p, &rng);
                m->trees.push_back(builder.build(idx));
            }
            out = std::move(m);
            break;
        }
        case ClassifierKind::Mlp: {
            auto m = std::make_unique<MlpClassifier>();
            Rng rng(derive_seed(seed, 0x6d));
            train_mlp(*m, Z, data.y, config, rng);
            out = std::move(m);
            break;
        }
    }
    out->kind_ = kind;
    out->standardizer_ = std_;
    return out;
}

namespace {

class MajorityClassifier final : public TrainedClassifier {
public:
    MajorityClassifier(ClassifierKind kind, const LabeledDataset& data) {
        kind_ = kind;
        fallback_ = true;
        const Eigen::Index n1 = (data.y.array() == 1).count();
        majority_class_ = 2 * n1 > data.y.size() ? 1 : 0;
        standardizer_.mean = Eigen::VectorXd::Zero(data.X.cols());
        standardizer_.stddev = Eigen::VectorXd::Ones(data.X.cols());
    }
    int predict_standardized(const Eigen::VectorXd&) const override {
        return majority_class_;
    }
};

std::unique_ptr<TrainedClassifier> majority_fallback(ClassifierKind kind,
                                                     const LabeledDataset& data) {
    return std::make_unique<MajorityClassifier>(kind, data);
}

}  // namespace

std::vector<std::unique_ptr<TrainedClassifier>> train_pool(const LabeledDataset& data,
                                                           std::uint64_t seed,
                                                           const PoolConfig& config) {
    std::vector<std::unique_ptr<TrainedClassifier>> pool;
    for (int k = 0; k < kPoolSize; ++k) {
        try {
            pool.push_back(train_classifier(kPoolOrder[k], data,
                                            derive_seed(seed, static_cast<std::uint64_t>(k)),
                                            config));
        } catch (const DegenerateTrainingError&) {
            pool.push_back(majority_fallback(kPoolOrder[k], data));
        }
    }
    return pool;
}

double score_accuracy(const TrainedClassifier& model, const LabeledDataset& data) {
    if (data.n() == 0) throw ContractError("score_accuracy: empty data");
    int correct = 0;
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
        if (model.predict(data.X.row(i).transpose()) == data.y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.n());
}

}  // namespace gcnet
