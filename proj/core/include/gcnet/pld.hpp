#pragma once

#include <map>
#include <vector>

#include "gcnet/classifiers.hpp"
#include "gcnet/influence_graph.hpp"

namespace gcnet {

struct PredictorScore {
    int stock = 0;
    ClassifierKind algorithm{};
    double score = 0;
    bool degenerate = false;  // majority fallback stood in for this member
};

struct NodePrivilege {
    int stock = 0;
    ClassifierKind best_algorithm{};
    double predictability = 0;
    double density = 0;
    double privilege = 0;  // predictability * density
    bool flagged = false;  // every pool member was degenerate
};

struct PartialLabeling {
    std::map<int, int> labels;  // node id -> +1 / -1
    double coverage = 0;        // requested n
};

// Recency-decayed validation score: sum over validation instances, newest
// weighted (1-c)^0, of 1 for each correct prediction. `validation` must be
// ordered oldest -> newest.
double score_predictor(const TrainedClassifier& model, const LabeledDataset& validation,
                       double decay);

// Per stock: best pool member by score (ties resolve in fixed pool order),
// predictability = its score, privilege = predictability * density(graph, stock).
std::vector<NodePrivilege> rank_nodes(
    const InfluenceGraph& graph,
    const std::vector<std::vector<PredictorScore>>& pool_scores);

// Top ceil(n*m) nodes by privilege (ties -> lower node id); each selected node
// is labeled with its best model's target-day prediction, rise -> +1.
PartialLabeling assign_labels(const std::vector<NodePrivilege>& ranking,
                              const std::vector<const TrainedClassifier*>& best_models,
                              const std::vector<Eigen::VectorXd>& target_features,
                              double coverage);

// Ablation: uniformly random node subset of the same size, labels still from
// each node's best predictor.
PartialLabeling assign_labels_random(const std::vector<NodePrivilege>& ranking,
                                     const std::vector<const TrainedClassifier*>& best_models,
                                     const std::vector<Eigen::VectorXd>& target_features,
                                     double coverage, std::uint64_t seed);

}  // namespace gcnet
