#pragma once

#include <string>
#include <vector>

#include "gcnet/classifiers.hpp"
#include "gcnet/indicators.hpp"
#include "gcnet/market_data.hpp"

namespace gcnet {

// Undirected weighted stock graph; node index = ticker index in the snapshot.
struct InfluenceGraph {
    struct Edge {
        int i = 0, j = 0;  // i < j
        double weight = 0;
    };

    std::vector<std::string> nodes;
    std::vector<Edge> edges;
    Date built_on;
    Date window_start, window_end;
    bool repaired = false;  // connectivity repair inserted epsilon edges

    std::size_t n_nodes() const { return nodes.size(); }
    bool connected() const;
};

struct PairInfluence {
    int i = 0, j = 0;
    double acc_i = 0, acc_j = 0, acc_ij = 0, acc_ji = 0;
    double influence = 0;  // ((acc_ij - acc_i) + (acc_ji - acc_j)) / 2
    bool degenerate = false;
};

struct GraphBuildConfig {
    IndicatorConfig indicators{};
    PoolConfig pool{};
    double validation_fraction = 0.2;  // last fraction of the window scores accuracy
    double repair_weight = 1e-6;
};

// Per-stock feature/label samples for one build window, z-scored with each
// stock's training statistics. Shared by influence and correlation builders.
struct WindowSamples {
    std::vector<std::size_t> days;          // calendar indices, chronological
    std::size_t n_train = 0;                // first n_train days train, rest validate
    std::vector<Eigen::MatrixXd> features;  // per stock: days x kNumFeatures, z-scored
    std::vector<Eigen::VectorXi> labels;    // per stock: {0, 1}
};
WindowSamples collect_window_samples(const MarketSnapshot& snapshot,
                                     const WindowSpec& spec,
                                     const GraphBuildConfig& config = {});

PairInfluence pair_influence(const MarketSnapshot& snapshot, int i, int j,
                             const WindowSpec& spec,
                             const GraphBuildConfig& config = {});
PairInfluence pair_influence(const WindowSamples& samples, int i, int j,
                             const GraphBuildConfig& config = {});

// Algorithm: positive-influence edges, connectivity repair, then sparsify.
InfluenceGraph build_influence_graph(const MarketSnapshot& snapshot,
                                     const WindowSpec& spec,
                                     const GraphBuildConfig& config = {});

// Ablation: weights are clipped Pearson correlations of close-to-close
// returns over the training slice; same repair and sparsification.
InfluenceGraph build_correlation_graph(const MarketSnapshot& snapshot,
                                       const WindowSpec& spec,
                                       const GraphBuildConfig& config = {});

// Remove edges in ascending weight order while the graph stays connected.
InfluenceGraph sparsify(const InfluenceGraph& graph);

// Weighted local clustering coefficient with max-normalized weights.
double density(const InfluenceGraph& graph, int node);

// Edge list CSV (src,dst,weight; 17 significant digits) + JSON header.
void save_graph(const InfluenceGraph& graph, const std::string& csv_path,
                const std::string& json_path);
InfluenceGraph load_graph(const std::string& csv_path, const std::string& json_path);

}  // namespace gcnet
