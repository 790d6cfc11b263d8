#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "gcnet/error.hpp"
#include "gcnet/influence_graph.hpp"
#include "gcnet/market_data.hpp"

using namespace gcnet;

namespace {

InfluenceGraph make_graph(int n, std::vector<InfluenceGraph::Edge> edges) {
    InfluenceGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back("N" + std::to_string(i));
    g.edges = std::move(edges);
    return g;
}

// Independent connectivity check via BFS over an adjacency list.
bool bfs_connected(std::size_t n, const std::vector<InfluenceGraph::Edge>& edges) {
    if (n == 0) return true;
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : edges) {
        adj[static_cast<std::size_t>(e.i)].push_back(e.j);
        adj[static_cast<std::size_t>(e.j)].push_back(e.i);
    }
    std::vector<bool> seen(n, false);
    std::vector<int> queue{0};
    seen[0] = true;
    std::size_t reached = 1;
    while (!queue.empty()) {
        const int u = queue.back();
        queue.pop_back();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = true;
                ++reached;
                queue.push_back(v);
            }
        }
    }
    return reached == n;
}

// Oracle for the sparsifier: sort ascending (ties by endpoints), drop the
// prefix as long as what remains is still connected.
std::vector<InfluenceGraph::Edge> oracle_sparsify(
    std::size_t n, std::vector<InfluenceGraph::Edge> edges) {
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    while (edges.size() > 1) {
        std::vector<InfluenceGraph::Edge> rest(edges.begin() + 1, edges.end());
        if (!bfs_connected(n, rest)) break;
        edges = std::move(rest);
    }
    return edges;
}

// Oracle for weighted local clustering: brute-force over neighbor pairs with
// max-normalized weights and a cube-root kernel.
double oracle_density(const InfluenceGraph& g, int node) {
    const std::size_t n = g.n_nodes();
    std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
    double wmax = 0;
    for (const auto& e : g.edges) {
        w[static_cast<std::size_t>(e.i)][static_cast<std::size_t>(e.j)] = e.weight;
        w[static_cast<std::size_t>(e.j)][static_cast<std::size_t>(e.i)] = e.weight;
        wmax = std::max(wmax, e.weight);
    }
    if (wmax <= 0) return 0.0;
    std::vector<int> nb;
    for (std::size_t v = 0; v < n; ++v)
        if (w[static_cast<std::size_t>(node)][v] > 0) nb.push_back(static_cast<int>(v));
    const std::size_t k = nb.size();
    if (k <= 1) return 0.0;
    double sum = 0;
    for (int a : nb)
        for (int b : nb) {
            if (a == b) continue;
            const double wij = w[static_cast<std::size_t>(node)][static_cast<std::size_t>(a)];
            const double wik = w[static_cast<std::size_t>(node)][static_cast<std::size_t>(b)];
            const double wjk = w[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            if (wjk > 0) sum += std::cbrt(wij * wik * wjk / (wmax * wmax * wmax));
        }
    return sum / (static_cast<double>(k) * static_cast<double>(k - 1));
}

MarketSnapshot synth(int stocks, int groups, double signal, int days,
                     std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_stocks = stocks;
    cfg.n_groups = groups;
    cfg.signal_strength = signal;
    cfg.n_days = days;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

WindowSpec spec_for(const MarketSnapshot& snap) {
    WindowSpec spec;
    spec.target_day = snap.calendar.back();
    spec.train_end = snap.calendar[snap.calendar.size() - 2];
    return spec;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("gcnet_graph_" + std::to_string(getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("pair influence: recorded accuracies and the combining formula agree") {
    const auto snap = synth(4, 2, 0.9, 160, 31);
    const auto samples = collect_window_samples(snap, spec_for(snap));
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (i == j) continue;
            const auto p = pair_influence(samples, i, j, {});
            REQUIRE_FALSE(p.degenerate);
            CHECK(p.influence ==
                  doctest::Approx(0.5 * ((p.acc_ij - p.acc_i) + (p.acc_ji - p.acc_j)))
                      .epsilon(1e-12));
            for (double a : {p.acc_i, p.acc_j, p.acc_ij, p.acc_ji}) {
                CHECK(a >= 0.0);
                CHECK(a <= 1.0);
            }
            // symmetric in (i, j) up to field naming
            const auto q = pair_influence(samples, j, i, {});
            CHECK(p.influence == doctest::Approx(q.influence).epsilon(1e-12));
        }
    }
}

TEST_CASE("pair influence rejects i == j") {
    const auto snap = synth(3, 1, 0.8, 140, 32);
    const auto samples = collect_window_samples(snap, spec_for(snap));
    CHECK_THROWS_AS(pair_influence(samples, 1, 1, {}), ContractError);
}

TEST_CASE("window samples: chronological, standardized, split sizes") {
    const auto snap = synth(3, 1, 0.7, 150, 33);
    GraphBuildConfig cfg;
    cfg.validation_fraction = 0.2;
    const auto s = collect_window_samples(snap, spec_for(snap), cfg);
    REQUIRE(s.features.size() == 3);
    const std::size_t n = s.days.size();
    CHECK(std::is_sorted(s.days.begin(), s.days.end()));
    CHECK(s.days.front() == 35);             // first feature-complete day
    CHECK(s.days.back() == snap.calendar.size() - 2);  // excludes the target
    CHECK(s.n_train == n - static_cast<std::size_t>(std::lround(0.2 * n)));
    // training slice is z-scored per stock
    for (const auto& F : s.features) {
        const auto top = F.topRows(static_cast<Eigen::Index>(s.n_train));
        for (int c = 0; c < F.cols(); ++c) {
            CHECK(std::fabs(top.col(c).mean()) < 1e-9);
        }
    }
    // labels are the realized next-day movements
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t r = 0; r < n; ++r)
            CHECK(s.labels[k](static_cast<Eigen::Index>(r)) ==
                  (movement_label(snap.series[k], s.days[r]) > 0 ? 1 : 0));
}

TEST_CASE("sparsify: hand cases") {
    // Triangle 0-1 (w=1), 1-2 (w=2), 0-2 (w=3): the lightest edge goes,
    // removing the next would disconnect node 1.
    auto tri = make_graph(3, {{0, 1, 1.0}, {1, 2, 2.0}, {0, 2, 3.0}});
    const auto s = sparsify(tri);
    REQUIRE(s.edges.size() == 2);
    CHECK(s.edges[0].weight == 2.0);
    CHECK(s.edges[1].weight == 3.0);
    CHECK(s.connected());

    // Trees are already minimal.
    auto tree = make_graph(4, {{0, 1, 0.1}, {1, 2, 5.0}, {1, 3, 0.01}});
    CHECK(sparsify(tree).edges.size() == 3);

    // Disconnected input is a contract violation.
    auto disc = make_graph(4, {{0, 1, 1.0}, {2, 3, 1.0}});
    CHECK_THROWS_AS(sparsify(disc), ContractError);
}

TEST_CASE("sparsify matches an independent oracle on random connected graphs") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 8);
        std::vector<InfluenceGraph::Edge> edges;
        // random spanning chain guarantees connectivity, then extra edges
        std::uniform_real_distribution<double> uw(0.01, 1.0);
        for (int v = 1; v < n; ++v)
            edges.push_back({v - 1, v, uw(rng)});
        for (int extra = 0; extra < n; ++extra) {
            int a = static_cast<int>(rng() % static_cast<unsigned>(n));
            int b = static_cast<int>(rng() % static_cast<unsigned>(n));
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            const bool dup = std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
                return e.i == a && e.j == b;
            });
            if (!dup) edges.push_back({a, b, uw(rng)});
        }
        const auto g = make_graph(n, edges);
        const auto got = sparsify(g);
        const auto want = oracle_sparsify(static_cast<std::size_t>(n), edges);
        REQUIRE(got.edges.size() == want.size());
        for (std::size_t k = 0; k < want.size(); ++k) {
            CHECK(got.edges[k].i == want[k].i);
            CHECK(got.edges[k].j == want[k].j);
            CHECK(got.edges[k].weight == want[k].weight);
        }
        CHECK(got.connected());
        // idempotent
        CHECK(sparsify(got).edges.size() == got.edges.size());
    }
}

TEST_CASE("density: hand cases") {
    // Equal-weight triangle: perfect local clustering at every node.
    auto tri = make_graph(3, {{0, 1, 2.0}, {1, 2, 2.0}, {0, 2, 2.0}});
    for (int v = 0; v < 3; ++v) CHECK(density(tri, v) == doctest::Approx(1.0));

    // Weighted triangle, max weight 1: node 0 sees (1 * 0.5 * 0.25)^(1/3).
    auto wtri = make_graph(3, {{0, 1, 1.0}, {0, 2, 0.5}, {1, 2, 0.25}});
    CHECK(density(wtri, 0) == doctest::Approx(std::cbrt(0.125)));

    // Leaves and path centers have no triangles.
    auto path = make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    CHECK(density(path, 0) == 0.0);
    CHECK(density(path, 1) == 0.0);
    CHECK(density(path, 2) == 0.0);

    CHECK_THROWS_AS(density(tri, 7), ContractError);
    CHECK_THROWS_AS(density(tri, -1), ContractError);
}

TEST_CASE("density matches a brute-force oracle on random graphs") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> uw(0.05, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 7);
        std::vector<InfluenceGraph::Edge> edges;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (rng() % 100 < 55) edges.push_back({a, b, uw(rng)});
        const auto g = make_graph(n, edges);
        for (int v = 0; v < n; ++v) {
            CHECK(density(g, v) == doctest::Approx(oracle_density(g, v)).epsilon(1e-12));
            CHECK(density(g, v) >= 0.0);
            CHECK(density(g, v) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("built graphs are connected, ordered, deterministic") {
    const auto snap = synth(8, 2, 0.85, 170, 34);
    const auto spec = spec_for(snap);
    const auto g1 = build_influence_graph(snap, spec);
    const auto g2 = build_influence_graph(snap, spec);
    CHECK(g1.connected());
    CHECK(g1.n_nodes() == 8);
    REQUIRE(g1.edges.size() == g2.edges.size());
    for (std::size_t k = 0; k < g1.edges.size(); ++k) {
        CHECK(g1.edges[k].i < g1.edges[k].j);
        CHECK(g1.edges[k].weight > 0.0);
        CHECK(g1.edges[k].i == g2.edges[k].i);
        CHECK(g1.edges[k].j == g2.edges[k].j);
        CHECK(g1.edges[k].weight == g2.edges[k].weight);
    }
    CHECK(g1.built_on == spec.target_day);

    const auto c = build_correlation_graph(snap, spec);
    CHECK(c.connected());
    for (const auto& e : c.edges) {
        CHECK(e.i < e.j);
        CHECK(e.weight > 0.0);
        CHECK(e.weight <= 1.0 + 1e-12);
    }
}

TEST_CASE("independent stocks carry no systematic influence") {
    const auto snap = synth(10, 10, 0.5, 220, 35);  // every stock its own group
    const auto samples = collect_window_samples(snap, spec_for(snap));
    double total = 0;
    int count = 0;
    for (int i = 0; i < 10; ++i) {
        for (int j = i + 1; j < 10; ++j) {
            const auto p = pair_influence(samples, i, j, {});
            if (!p.degenerate) {
                total += p.influence;
                ++count;
            }
        }
    }
    REQUIRE(count >= 40);
    CHECK(std::fabs(total / count) < 0.03);
}

TEST_CASE("strong group coupling: within-group influence beats cross-group") {
    SynthConfig cfg;
    cfg.n_stocks = 12;
    cfg.n_groups = 2;
    cfg.signal_strength = 0.95;
    cfg.n_days = 220;
    cfg.seed = 36;
    const auto snap = generate_synthetic(cfg);
    const auto samples = collect_window_samples(snap, spec_for(snap));
    double within = 0, cross = 0;
    int nw = 0, nc = 0;
    for (int i = 0; i < 12; ++i) {
        for (int j = i + 1; j < 12; ++j) {
            const auto p = pair_influence(samples, i, j, {});
            if (p.degenerate) continue;
            if (synthetic_group_of(cfg, i) == synthetic_group_of(cfg, j)) {
                within += p.influence;
                ++nw;
            } else {
                cross += p.influence;
                ++nc;
            }
        }
    }
    REQUIRE(nw > 0);
    REQUIRE(nc > 0);
    // The ordering is the planted structure; absolute levels are noisy at
    // this window length, so only the comparison is checked.
    CHECK(within / nw > cross / nc);
}

TEST_CASE("graph save/load round trip preserves everything") {
    const auto snap = synth(5, 1, 0.8, 150, 37);
    const auto spec = spec_for(snap);
    const auto g = build_correlation_graph(snap, spec);
    TempDir tmp;
    const auto csv = (tmp.path / "g.csv").string();
    const auto js = (tmp.path / "g.json").string();
    save_graph(g, csv, js);
    const auto r = load_graph(csv, js);
    CHECK(r.nodes == g.nodes);
    CHECK(r.built_on == g.built_on);
    CHECK(r.window_start == g.window_start);
    CHECK(r.window_end == g.window_end);
    CHECK(r.repaired == g.repaired);
    REQUIRE(r.edges.size() == g.edges.size());
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        CHECK(r.edges[k].i == g.edges[k].i);
        CHECK(r.edges[k].j == g.edges[k].j);
        CHECK(r.edges[k].weight == g.edges[k].weight);  // 17 digits: exact
    }
}
