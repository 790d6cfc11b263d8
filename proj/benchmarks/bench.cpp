#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gcnet/gcn.hpp"
#include "gcnet/indicators.hpp"
#include "gcnet/influence_graph.hpp"
#include "gcnet/market_data.hpp"

using namespace gcnet;

namespace {

InfluenceGraph random_graph(int n, std::uint64_t seed, double p = 0.2) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uw(0.05, 1.0);
    InfluenceGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back("N" + std::to_string(i));
    for (int v = 1; v < n; ++v)
        g.edges.push_back({static_cast<int>(rng() % static_cast<unsigned>(v)), v,
                           uw(rng)});
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (std::uniform_real_distribution<double>(0, 1)(rng) < p)
                g.edges.push_back({a, b, uw(rng)});
    return g;
}

MarketSnapshot bench_market(int stocks, int days, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_stocks = stocks;
    cfg.n_groups = std::min(stocks, 3);
    cfg.n_days = days;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

}  // namespace

static void BM_IndicatorTable(benchmark::State& state) {
    const auto snap = bench_market(2, static_cast<int>(state.range(0)), 1);
    for (auto _ : state) {
        IndicatorTable table(snap.series[0]);
        benchmark::DoNotOptimize(table.features(table.n_days() - 1));
    }
}
BENCHMARK(BM_IndicatorTable)->Arg(250)->Arg(1000);

static void BM_AdjacencyNormalize(benchmark::State& state) {
    const auto g = random_graph(static_cast<int>(state.range(0)), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(normalize_adjacency(g).matrix);
    }
}
BENCHMARK(BM_AdjacencyNormalize)->Arg(30)->Arg(100);

static void BM_Sparsify(benchmark::State& state) {
    const auto g = random_graph(static_cast<int>(state.range(0)), 3, 0.4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sparsify(g));
    }
}
BENCHMARK(BM_Sparsify)->Arg(30)->Arg(100);

static void BM_PairInfluence(benchmark::State& state) {
    const auto snap = bench_market(2, static_cast<int>(state.range(0)), 4);
    WindowSpec spec;
    spec.target_day = snap.calendar.back();
    spec.train_end = snap.calendar[snap.calendar.size() - 2];
    const auto samples = collect_window_samples(snap, spec);
    for (auto _ : state) {
        benchmark::DoNotOptimize(pair_influence(samples, 0, 1, {}));
    }
}
BENCHMARK(BM_PairInfluence)->Arg(250)->Arg(400);

static void BM_GcnForward(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const auto adj = normalize_adjacency(random_graph(m, 5));
    GcnHyperParams hp;
    GcnModel model(kNumSignals, hp);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(m, kNumSignals);
    Rng rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(model, adj, X, false, rng).probs);
    }
}
BENCHMARK(BM_GcnForward)->Arg(30)->Arg(100);

static void BM_GcnTrainOnStack(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    DayGraphStack stack;
    stack.adjacency = normalize_adjacency(random_graph(m, 6));
    std::mt19937_64 mt(7);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (auto& day : stack.days) {
        day.features.resize(m, kNumSignals);
        day.labels.resize(m);
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < kNumSignals; ++c) day.features(r, c) = norm(mt);
            day.labels(r) = mt() % 2 ? 1 : -1;
        }
    }
    GcnHyperParams hp;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_on_stack(stack, hp).second.probs);
    }
}
BENCHMARK(BM_GcnTrainOnStack)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
