#include "gcnet/influence_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gcnet/error.hpp"

namespace gcnet {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[static_cast<std::size_t>(a)] = b;
        return true;
    }
};

bool edges_connected(std::size_t n, const std::vector<InfluenceGraph::Edge>& edges) {
    if (n <= 1) return true;
    UnionFind uf(n);
    std::size_t merges = 0;
    for (const auto& e : edges)
        if (uf.unite(e.i, e.j)) ++merges;
    return merges == n - 1;
}

}  // namespace

bool InfluenceGraph::connected() const { return edges_connected(n_nodes(), edges); }

WindowSamples collect_window_samples(const MarketSnapshot& snapshot,
                                     const WindowSpec& spec,
                                     const GraphBuildConfig& config) {
    const std::size_t target = snapshot.day_index(spec.target_day);
    if (target <= kMinLookback + 2) {
        throw WindowError("not enough history before " + spec.target_day.to_string());
    }
    WindowSamples out;
    for (std::size_t t = kMinLookback; t < target; ++t) out.days.push_back(t);
    const std::size_t n = out.days.size();
    std::size_t n_val = static_cast<std::size_t>(
        std::lround(config.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    out.n_train = n - n_val;

    for (std::size_t s = 0; s < snapshot.n_stocks(); ++s) {
        const IndicatorTable table(snapshot.series[s], config.indicators);
        Eigen::MatrixXd F(static_cast<Eigen::Index>(n), kNumFeatures);
        Eigen::VectorXi y(static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < n; ++r) {
            const FeatureVector fv = table.features(out.days[r]);
            for (int c = 0; c < kNumFeatures; ++c)
                F(static_cast<Eigen::Index>(r), c) = fv.values[static_cast<std::size_t>(c)];
            y[static_cast<Eigen::Index>(r)] =
                movement_label(snapshot.series[s], out.days[r]) > 0 ? 1 : 0;
        }
        // z-score with this stock's training statistics
        const Standardizer std_ =
            Standardizer::fit(F.topRows(static_cast<Eigen::Index>(out.n_train)));
        out.features.push_back(std_.apply(F));
        out.labels.push_back(std::move(y));
    }
    return out;
}

namespace {

double qda_validation_accuracy(const Eigen::MatrixXd& F, const Eigen::VectorXi& y,
                               std::size_t n_train, const PoolConfig& pool) {
    LabeledDataset train{F.topRows(static_cast<Eigen::Index>(n_train)),
                         y.head(static_cast<Eigen::Index>(n_train))};
    const auto model = train_qda(train, pool);
    LabeledDataset val{F.bottomRows(F.rows() - static_cast<Eigen::Index>(n_train)),
                       y.tail(y.size() - static_cast<Eigen::Index>(n_train))};
    return score_accuracy(*model, val);
}

}  // namespace

PairInfluence pair_influence(const WindowSamples& samples, int i, int j,
                             const GraphBuildConfig& config) {
    if (i == j) throw ContractError("pair_influence: i and j must differ");
    const auto& Fi = samples.features[static_cast<std::size_t>(i)];
    const auto& Fj = samples.features[static_cast<std::size_t>(j)];
    PairInfluence out;
    out.i = i;
    out.j = j;
    try {
        const Eigen::MatrixXd Fij = 0.5 * (Fi + Fj);
        out.acc_i = qda_validation_accuracy(Fi, samples.labels[static_cast<std::size_t>(i)],
                                            samples.n_train, config.pool);
        out.acc_j = qda_validation_accuracy(Fj, samples.labels[static_cast<std::size_t>(j)],
                                            samples.n_train, config.pool);
        out.acc_ij = qda_validation_accuracy(Fij, samples.labels[static_cast<std::size_t>(i)],
                                             samples.n_train, config.pool);
        out.acc_ji = qda_validation_accuracy(Fij, samples.labels[static_cast<std::size_t>(j)],
                                             samples.n_train, config.pool);
        out.influence = 0.5 * ((out.acc_ij - out.acc_i) + (out.acc_ji - out.acc_j));
    } catch (const DegenerateTrainingError&) {
        out = PairInfluence{};
        out.i = i;
        out.j = j;
        out.degenerate = true;
    }
    return out;
}

PairInfluence pair_influence(const MarketSnapshot& snapshot, int i, int j,
                             const WindowSpec& spec, const GraphBuildConfig& config) {
    const WindowSamples samples = collect_window_samples(snapshot, spec, config);
    return pair_influence(samples, i, j, config);
}

namespace {

// Shared tail of both graph builders: positivity filter happened upstream;
// repair connectivity with epsilon edges, then sparsify.
InfluenceGraph finish_graph(InfluenceGraph graph,
                            const std::vector<std::vector<double>>& raw_score,
                            double repair_weight) {
    const std::size_t m = graph.n_nodes();
    while (!edges_connected(m, graph.edges)) {
        UnionFind uf(m);
        for (const auto& e : graph.edges) uf.unite(e.i, e.j);
        // best (possibly non-positive) cross-component pair
        int bi = -1, bj = -1;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a + 1; b < m; ++b) {
                if (uf.find(static_cast<int>(a)) == uf.find(static_cast<int>(b)))
                    continue;
                if (raw_score[a][b] > best) {
                    best = raw_score[a][b];
                    bi = static_cast<int>(a);
                    bj = static_cast<int>(b);
                }
            }
        }
        graph.edges.push_back({bi, bj, repair_weight});
        graph.repaired = true;
    }
    return sparsify(graph);
}

}  // namespace

InfluenceGraph build_influence_graph(const MarketSnapshot& snapshot,
                                     const WindowSpec& spec,
                                     const GraphBuildConfig& config) {
    const std::size_t m = snapshot.n_stocks();
    if (m < 2) throw ContractError("influence graph needs at least 2 stocks");
    const WindowSamples samples = collect_window_samples(snapshot, spec, config);

    // Per-stock solo accuracies once, pair models per pair.
    std::vector<double> acc(m);
    std::vector<bool> solo_degenerate(m, false);
    for (std::size_t s = 0; s < m; ++s) {
        try {
            acc[s] = qda_validation_accuracy(samples.features[s], samples.labels[s],
                                             samples.n_train, config.pool);
        } catch (const DegenerateTrainingError&) {
            solo_degenerate[s] = true;
        }
    }

    InfluenceGraph graph;
    graph.nodes = snapshot.tickers;
    graph.built_on = spec.target_day;
    graph.window_start = snapshot.calendar[samples.days.front()];
    graph.window_end = snapshot.calendar[samples.days.back()];

    std::vector<std::vector<double>> influence(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double inf = 0.0;
            if (!solo_degenerate[i] && !solo_degenerate[j]) {
                try {
                    const Eigen::MatrixXd Fij =
                        0.5 * (samples.features[i] + samples.features[j]);
                    const double acc_ij = qda_validation_accuracy(
                        Fij, samples.labels[i], samples.n_train, config.pool);
                    const double acc_ji = qda_validation_accuracy(
                        Fij, samples.labels[j], samples.n_train, config.pool);
                    inf = 0.5 * ((acc_ij - acc[i]) + (acc_ji - acc[j]));
                } catch (const DegenerateTrainingError&) {
                    inf = 0.0;
                }
            }
            influence[i][j] = influence[j][i] = inf;
            if (inf > 0) {
                graph.edges.push_back(
                    {static_cast<int>(i), static_cast<int>(j), inf});
            }
        }
    }
    return finish_graph(std::move(graph), influence, config.repair_weight);
}

InfluenceGraph build_correlation_graph(const MarketSnapshot& snapshot,
                                       const WindowSpec& spec,
                                       const GraphBuildConfig& config) {
    const std::size_t m = snapshot.n_stocks();
    if (m < 2) throw ContractError("correlation graph needs at least 2 stocks");
    const std::size_t target = snapshot.day_index(spec.target_day);
    if (target <= kMinLookback + 2) {
        throw WindowError("not enough history before " + spec.target_day.to_string());
    }

    // Close-to-close returns over the training window.
    std::vector<std::vector<double>> returns(m);
    for (std::size_t s = 0; s < m; ++s) {
        const auto& bars = snapshot.series[s].bars;
        for (std::size_t t = 1; t < target; ++t)
            returns[s].push_back(bars[t].close / bars[t - 1].close - 1.0);
    }

    InfluenceGraph graph;
    graph.nodes = snapshot.tickers;
    graph.built_on = spec.target_day;
    graph.window_start = snapshot.calendar[1];
    graph.window_end = snapshot.calendar[target - 1];

    const auto pearson = [](const std::vector<double>& a, const std::vector<double>& b) {
        const std::size_t n = a.size();
        double ma = 0, mb = 0;
        for (std::size_t k = 0; k < n; ++k) {
            ma += a[k];
            mb += b[k];
        }
        ma /= static_cast<double>(n);
        mb /= static_cast<double>(n);
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t k = 0; k < n; ++k) {
            sab += (a[k] - ma) * (b[k] - mb);
            saa += (a[k] - ma) * (a[k] - ma);
            sbb += (b[k] - mb) * (b[k] - mb);
        }
        return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
    };

    std::vector<std::vector<double>> rho(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double r = pearson(returns[i], returns[j]);
            rho[i][j] = rho[j][i] = r;
            if (r > 0) {
                graph.edges.push_back({static_cast<int>(i), static_cast<int>(j), r});
            }
        }
    }
    return finish_graph(std::move(graph), rho, config.repair_weight);
}

InfluenceGraph sparsify(const InfluenceGraph& graph) {
    if (!graph.connected()) throw ContractError("sparsify requires a connected graph");
    InfluenceGraph out = graph;
    // ascending weight, ties by (i, j)
    std::sort(out.edges.begin(), out.edges.end(), [](const auto& a, const auto& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    // Remove from the front while connectivity survives; stop at the first
    // edge whose removal would disconnect the graph.
    std::size_t keep_from = 0;
    while (keep_from + 1 < out.edges.size()) {
        std::vector<InfluenceGraph::Edge> rest(out.edges.begin() +
                                                   static_cast<long>(keep_from + 1),
                                               out.edges.end());
        if (!edges_connected(out.n_nodes(), rest)) break;
        ++keep_from;
    }
    out.edges.erase(out.edges.begin(), out.edges.begin() + static_cast<long>(keep_from));
    return out;
}

double density(const InfluenceGraph& graph, int node) {
    const std::size_t m = graph.n_nodes();
    if (node < 0 || static_cast<std::size_t>(node) >= m) {
        throw ContractError("density: unknown node");
    }
    double w_max = 0;
    for (const auto& e : graph.edges) w_max = std::max(w_max, e.weight);
    if (w_max <= 0) return 0.0;

    // neighbor weights of `node`, plus a lookup for the w_jk factor
    std::vector<std::pair<int, double>> nbrs;
    std::vector<std::vector<double>> w(m, std::vector<double>(m, 0.0));
    for (const auto& e : graph.edges) {
        w[static_cast<std::size_t>(e.i)][static_cast<std::size_t>(e.j)] = e.weight;
        w[static_cast<std::size_t>(e.j)][static_cast<std::size_t>(e.i)] = e.weight;
        if (e.i == node) nbrs.emplace_back(e.j, e.weight);
        if (e.j == node) nbrs.emplace_back(e.i, e.weight);
    }
    const std::size_t deg = nbrs.size();
    if (deg <= 1) return 0.0;

    double sum = 0;  // ordered pairs of distinct neighbors
    for (std::size_t a = 0; a < deg; ++a) {
        for (std::size_t b = 0; b < deg; ++b) {
            if (a == b) continue;
            const double wjk = w[static_cast<std::size_t>(nbrs[a].first)]
                                [static_cast<std::size_t>(nbrs[b].first)];
            if (wjk <= 0) continue;
            sum += std::cbrt((nbrs[a].second / w_max) * (nbrs[b].second / w_max) *
                             (wjk / w_max));
        }
    }
    return sum / (static_cast<double>(deg) * static_cast<double>(deg - 1));
}

void save_graph(const InfluenceGraph& graph, const std::string& csv_path,
                const std::string& json_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw ConfigError("cannot write " + csv_path);
    csv << "src,dst,weight\n";
    char buf[128];
    for (const auto& e : graph.edges) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g\n",
                      graph.nodes[static_cast<std::size_t>(e.i)].c_str(),
                      graph.nodes[static_cast<std::size_t>(e.j)].c_str(), e.weight);
        csv << buf;
    }

    nlohmann::ordered_json meta;
    meta["tickers"] = graph.nodes;
    meta["built_on"] = graph.built_on.to_string();
    meta["window"] = {{"start", graph.window_start.to_string()},
                      {"end", graph.window_end.to_string()}};
    meta["repaired"] = graph.repaired;
    std::ofstream js(json_path);
    if (!js) throw ConfigError("cannot write " + json_path);
    js << meta.dump(2) << "\n";
}

InfluenceGraph load_graph(const std::string& csv_path, const std::string& json_path) {
    std::ifstream js(json_path);
    if (!js) throw ConfigError("cannot open " + json_path);
    nlohmann::json meta = nlohmann::json::parse(js);

    InfluenceGraph graph;
    graph.nodes = meta.at("tickers").get<std::vector<std::string>>();
    graph.built_on = Date::parse(meta.at("built_on").get<std::string>());
    graph.window_start = Date::parse(meta.at("window").at("start").get<std::string>());
    graph.window_end = Date::parse(meta.at("window").at("end").get<std::string>());
    graph.repaired = meta.value("repaired", false);

    std::ifstream csv(csv_path);
    if (!csv) throw ConfigError("cannot open " + csv_path);
    std::string line;
    int lineno = 0;
    while (std::getline(csv, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (lineno == 1 && line.rfind("src,", 0) == 0)) continue;
        std::istringstream ss(line);
        std::string src, dst, weight;
        if (!std::getline(ss, src, ',') || !std::getline(ss, dst, ',') ||
            !std::getline(ss, weight, ',')) {
            throw ParseError(csv_path + ":" + std::to_string(lineno) + ": bad edge row");
        }
        const auto idx_of = [&](const std::string& t) {
            const auto it = std::find(graph.nodes.begin(), graph.nodes.end(), t);
            if (it == graph.nodes.end())
                throw ParseError(csv_path + ": unknown ticker " + t);
            return static_cast<int>(it - graph.nodes.begin());
        };
        int i = idx_of(src), j = idx_of(dst);
        if (i > j) std::swap(i, j);
        graph.edges.push_back({i, j, std::stod(weight)});
    }
    return graph;
}

}  // namespace gcnet
