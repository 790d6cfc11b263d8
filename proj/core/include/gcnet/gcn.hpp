#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "gcnet/influence_graph.hpp"
#include "gcnet/rng.hpp"

namespace gcnet {

// A-hat = D^{-1/2} (A + I) D^{-1/2}, dense and symmetric.
struct NormalizedAdjacency {
    Eigen::MatrixXd matrix;
};

NormalizedAdjacency normalize_adjacency(const InfluenceGraph& graph);

// One market day on the shared graph: node features and (possibly partial)
// labels. Label entries: +1 rise, -1 fall, 0 unlabeled.
struct DayGraph {
    Eigen::MatrixXd features;  // m x kNumSignals
    Eigen::VectorXi labels;
};

inline constexpr int kStackDays = 5;

struct DayGraphStack {
    NormalizedAdjacency adjacency;
    std::array<DayGraph, kStackDays> days;  // chronological, last = target day
};

struct GcnHyperParams {
    double learning_rate = 0.01;
    double dropout = 0.5;
    double l2 = 5e-4;
    int epochs_per_graph = 50;
    int hidden = 4;
    std::uint64_t seed = 0;
};

// Three-layer GCN with Adam state.
class GcnModel {
public:
    GcnModel(int in_features, const GcnHyperParams& hp);

    Eigen::MatrixXd W0, W1, W2;
    GcnHyperParams hp;

    // Adam moments, one pair per weight matrix; shared step count.
    std::array<Eigen::MatrixXd, 3> adam_m, adam_v;
    long adam_step = 0;
};

struct ForwardCache {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Z0, H1d;  // pre-activation / post-dropout, layer 0
    Eigen::MatrixXd Z1, H2d;
    Eigen::MatrixXd probs;  // m x 2, rows sum to 1
    Eigen::MatrixXd mask1, mask2;  // inverted-dropout masks (ones at inference)
};

struct NodePredictions {
    Eigen::MatrixXd probs;       // m x 2
    std::vector<int> hard;       // +1 / -1, argmax with ties to -1
};

ForwardCache forward(const GcnModel& model, const NormalizedAdjacency& adj,
                     const Eigen::MatrixXd& X, bool training, Rng& rng);

// Cross-entropy over labeled nodes plus (l2/2) * sum of squared weights.
double loss(const ForwardCache& cache, const Eigen::VectorXi& labels,
            const GcnModel& model);

struct Gradients {
    Eigen::MatrixXd gW0, gW1, gW2;
};
Gradients gradients(const GcnModel& model, const NormalizedAdjacency& adj,
                    const ForwardCache& cache, const Eigen::VectorXi& labels);

// Adam update (beta1 0.9, beta2 0.999, eps 1e-8).
void backward_and_step(GcnModel& model, const NormalizedAdjacency& adj,
                       const ForwardCache& cache, const Eigen::VectorXi& labels);

NodePredictions predict(const GcnModel& model, const NormalizedAdjacency& adj,
                        const Eigen::MatrixXd& X);

// Fresh Glorot-initialized model, trained epochs_per_graph full-batch epochs
// on each stack day in chronological order. With include_target_day = false
// (supervised ablation) the partially labeled target day is skipped.
// Returns inference-mode predictions for every node of the target day.
std::pair<GcnModel, NodePredictions> train_on_stack(const DayGraphStack& stack,
                                                    const GcnHyperParams& hp,
                                                    bool include_target_day = true);

}  // namespace gcnet
