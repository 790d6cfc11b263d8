#include "gcnet/pld.hpp"

#include <algorithm>
#include <cmath>

#include "gcnet/error.hpp"
#include "gcnet/rng.hpp"

namespace gcnet {

double score_predictor(const TrainedClassifier& model, const LabeledDataset& validation,
                       double decay) {
    if (validation.n() == 0) throw ContractError("score_predictor: empty validation");
    if (decay <= 0 || decay >= 1) throw ConfigError("decay must be in (0, 1)");
    double score = 0;
    double weight = 1.0;  // (1-c)^i, i = 0 at the newest instance
    for (Eigen::Index r = validation.X.rows() - 1; r >= 0; --r) {
        if (model.predict(validation.X.row(r).transpose()) == validation.y[r]) {
            score += weight;
        }
        weight *= 1.0 - decay;
    }
    return score;
}

std::vector<NodePrivilege> rank_nodes(
    const InfluenceGraph& graph,
    const std::vector<std::vector<PredictorScore>>& pool_scores) {
    if (pool_scores.size() != graph.n_nodes()) {
        throw ContractError("rank_nodes: one score list per graph node required");
    }
    std::vector<NodePrivilege> out;
    out.reserve(pool_scores.size());
    for (std::size_t s = 0; s < pool_scores.size(); ++s) {
        const auto& scores = pool_scores[s];
        if (scores.empty()) throw ContractError("rank_nodes: empty score list");
        NodePrivilege np;
        np.stock = static_cast<int>(s);
        // best score; ties resolve in list (fixed pool) order
        const PredictorScore* best = nullptr;
        bool all_degenerate = true;
        for (const auto& ps : scores) {
            if (!ps.degenerate) all_degenerate = false;
            if (!best || ps.score > best->score) best = &ps;
        }
        np.best_algorithm = best->algorithm;
        np.predictability = all_degenerate ? 0.0 : best->score;
        np.flagged = all_degenerate;
        np.density = density(graph, np.stock);
        np.privilege = np.predictability * np.density;
        out.push_back(np);
    }
    return out;
}

namespace {

std::size_t label_count(double coverage, std::size_t m) {
    if (coverage <= 0 || coverage > 1) {
        throw ConfigError("label coverage must be in (0, 1]");
    }
    return std::min<std::size_t>(
        m, static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(m))));
}

PartialLabeling label_selected(const std::vector<int>& selected,
                               const std::vector<NodePrivilege>& ranking,
                               const std::vector<const TrainedClassifier*>& best_models,
                               const std::vector<Eigen::VectorXd>& target_features,
                               double coverage) {
    PartialLabeling out;
    out.coverage = coverage;
    for (int s : selected) {
        const auto idx = static_cast<std::size_t>(s);
        if (!best_models[idx]) throw ContractError("missing best model for node");
        const int cls = best_models[idx]->predict(target_features[idx]);
        out.labels[ranking[idx].stock] = cls == 1 ? 1 : -1;
    }
    return out;
}

}  // namespace

PartialLabeling assign_labels(const std::vector<NodePrivilege>& ranking,
                              const std::vector<const TrainedClassifier*>& best_models,
                              const std::vector<Eigen::VectorXd>& target_features,
                              double coverage) {
    const std::size_t m = ranking.size();
    const std::size_t k = label_count(coverage, m);
    std::vector<int> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double pa = ranking[static_cast<std::size_t>(a)].privilege;
        const double pb = ranking[static_cast<std::size_t>(b)].privilege;
        if (pa != pb) return pa > pb;
        return a < b;
    });
    order.resize(k);
    return label_selected(order, ranking, best_models, target_features, coverage);
}

PartialLabeling assign_labels_random(const std::vector<NodePrivilege>& ranking,
                                     const std::vector<const TrainedClassifier*>& best_models,
                                     const std::vector<Eigen::VectorXd>& target_features,
                                     double coverage, std::uint64_t seed) {
    const std::size_t m = ranking.size();
    const std::size_t k = label_count(coverage, m);
    Rng rng(derive_seed(seed, 0x5e1ec7));
    const auto perm = rng.permutation(m);
    std::vector<int> selected;
    selected.reserve(k);
    for (std::size_t i = 0; i < k; ++i) selected.push_back(static_cast<int>(perm[i]));
    std::sort(selected.begin(), selected.end());
    return label_selected(selected, ranking, best_models, target_features, coverage);
}

}  // namespace gcnet
