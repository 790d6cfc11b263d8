#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gcnet {

// Class indices: 0 = fall, 1 = rise.
struct LabeledDataset {
    Eigen::MatrixXd X;  // n samples x f features
    Eigen::VectorXi y;  // entries in {0, 1}

    std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t f() const { return static_cast<std::size_t>(X.cols()); }
};

enum class ClassifierKind { Qda, Lda, NaiveBayes, DecisionTree, RandomForest, Mlp };

// Fixed pool order; also the tie-break order for best-predictor selection.
inline constexpr ClassifierKind kPoolOrder[] = {
    ClassifierKind::Qda,        ClassifierKind::Lda,
    ClassifierKind::NaiveBayes, ClassifierKind::DecisionTree,
    ClassifierKind::RandomForest, ClassifierKind::Mlp};
inline constexpr int kPoolSize = 6;

std::string classifier_name(ClassifierKind kind);

struct PoolConfig {
    // decision tree / random forest
    int tree_max_depth = 5;
    int tree_min_leaf = 5;
    int forest_trees = 100;
    // MLP
    int mlp_hidden = 16;
    int mlp_epochs = 200;
    double mlp_lr = 0.01;
    // Gaussian NB
    double nb_var_floor = 1e-9;
    // QDA/LDA covariance regularization ladder
    double cov_reg_start = 1e-6;
    double cov_reg_max = 1e-2;
};

// Per-feature affine standardizer fitted on training data.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;  // zero-variance features pinned to 1

    static Standardizer fit(const Eigen::MatrixXd& X);
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

class TrainedClassifier {
public:
    virtual ~TrainedClassifier() = default;

    // Predicted class in {0, 1}; argmax ties resolve to the lower index.
    int predict(const Eigen::VectorXd& x) const;

    ClassifierKind kind() const { return kind_; }
    // True when training data was degenerate and a majority vote stands in.
    bool is_fallback() const { return fallback_; }

protected:
    virtual int predict_standardized(const Eigen::VectorXd& z) const = 0;

    ClassifierKind kind_{};
    Standardizer standardizer_;
    bool fallback_ = false;
    int majority_class_ = 0;

    friend std::unique_ptr<TrainedClassifier> train_classifier(
        ClassifierKind, const LabeledDataset&, std::uint64_t, const PoolConfig&);
    friend std::vector<std::unique_ptr<TrainedClassifier>> train_pool(
        const LabeledDataset&, std::uint64_t, const PoolConfig&);
};

// Throws DegenerateTrainingError when the data cannot support the model
// (single class, or unrecoverably singular covariance for QDA/LDA).
std::unique_ptr<TrainedClassifier> train_classifier(ClassifierKind kind,
                                                    const LabeledDataset& data,
                                                    std::uint64_t seed = 0,
                                                    const PoolConfig& config = {});

inline std::unique_ptr<TrainedClassifier> train_qda(const LabeledDataset& data,
                                                    const PoolConfig& config = {}) {
    return train_classifier(ClassifierKind::Qda, data, 0, config);
}

// Six trained models in kPoolOrder; degenerate members fall back to a
// majority predictor and are flagged.
std::vector<std::unique_ptr<TrainedClassifier>> train_pool(
    const LabeledDataset& data, std::uint64_t seed = 0, const PoolConfig& config = {});

double score_accuracy(const TrainedClassifier& model, const LabeledDataset& data);

}  // namespace gcnet
