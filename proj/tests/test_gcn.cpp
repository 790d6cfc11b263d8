#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gcnet/error.hpp"
#include "gcnet/gcn.hpp"

using namespace gcnet;

namespace {

InfluenceGraph make_graph(int n, std::vector<InfluenceGraph::Edge> edges) {
    InfluenceGraph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back("N" + std::to_string(i));
    g.edges = std::move(edges);
    return g;
}

// Brute-force D^{-1/2} (A + I) D^{-1/2} straight from the definition.
Eigen::MatrixXd oracle_adjacency(const InfluenceGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.n_nodes());
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (const auto& e : g.edges) {
        A(e.i, e.j) += e.weight;
        A(e.j, e.i) += e.weight;
    }
    Eigen::VectorXd dinv = A.rowwise().sum().cwiseSqrt().cwiseInverse();
    return dinv.asDiagonal() * A * dinv.asDiagonal();
}

GcnHyperParams no_dropout(std::uint64_t seed = 1) {
    GcnHyperParams hp;
    hp.dropout = 0.0;
    hp.seed = seed;
    return hp;
}

}  // namespace

TEST_CASE("adjacency normalization: hand values and random-graph oracle") {
    // Single edge of weight w: degrees are 1 + w.
    const double w = 0.6;
    const auto pair = make_graph(2, {{0, 1, w}});
    const auto ahat = normalize_adjacency(pair).matrix;
    CHECK(ahat(0, 0) == doctest::Approx(1.0 / (1.0 + w)));
    CHECK(ahat(0, 1) == doctest::Approx(w / (1.0 + w)));
    CHECK(ahat(1, 0) == doctest::Approx(ahat(0, 1)));

    // Unit triangle: everything is 1/3.
    const auto tri = make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
    const auto t = normalize_adjacency(tri).matrix;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) CHECK(t(a, b) == doctest::Approx(1.0 / 3.0));

    // Random weighted graphs vs the definition.
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uw(0.1, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 6);
        std::vector<InfluenceGraph::Edge> edges;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (rng() % 2) edges.push_back({a, b, uw(rng)});
        const auto g = make_graph(n, edges);
        const auto got = normalize_adjacency(g).matrix;
        const auto want = oracle_adjacency(g);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto g = make_graph(4, {{0, 1, 1.0}, {1, 2, 0.5}, {2, 3, 2.0}, {0, 3, 0.7}});
    const auto adj = normalize_adjacency(g);
    const int f = 5;
    GcnModel model(f, no_dropout(3));

    std::mt19937_64 mt(11);
    std::normal_distribution<double> norm(0.0, 1.0);
    Eigen::MatrixXd X(4, f);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < f; ++c) X(r, c) = norm(mt);
    Eigen::VectorXi y(4);
    y << 1, -1, 0, 1;  // includes an unlabeled node

    Rng rng(5);
    const auto cache = forward(model, adj, X, /*training=*/true, rng);
    const auto grads = gradients(model, adj, cache, y);

    const double h = 1e-6;
    auto fd_check = [&](Eigen::MatrixXd& W, const Eigen::MatrixXd& gW) {
        for (int r = 0; r < W.rows(); ++r) {
            for (int c = 0; c < W.cols(); ++c) {
                const double orig = W(r, c);
                W(r, c) = orig + h;
                Rng r1(5);
                const double lp = loss(forward(model, adj, X, true, r1), y, model);
                W(r, c) = orig - h;
                Rng r2(5);
                const double lm = loss(forward(model, adj, X, true, r2), y, model);
                W(r, c) = orig;
                const double fd = (lp - lm) / (2 * h);
                CHECK(gW(r, c) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
            }
        }
    };
    fd_check(model.W0, grads.gW0);
    fd_check(model.W1, grads.gW1);
    fd_check(model.W2, grads.gW2);
}

TEST_CASE("zero weights give uniform probabilities and k*ln2 loss") {
    const auto g = make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    const auto adj = normalize_adjacency(g);
    GcnModel model(4, no_dropout());
    model.W0.setZero();
    model.W1.setZero();
    model.W2.setZero();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 4);

    const auto pred = predict(model, adj, X);
    for (int r = 0; r < 3; ++r) {
        CHECK(pred.probs(r, 0) == doctest::Approx(0.5));
        CHECK(pred.probs(r, 1) == doctest::Approx(0.5));
        CHECK(pred.hard[static_cast<std::size_t>(r)] == -1);  // tie falls
    }

    Eigen::VectorXi y(3);
    y << 1, -1, 1;  // 3 labeled nodes
    Rng rng(1);
    const auto cache = forward(model, adj, X, true, rng);
    CHECK(loss(cache, y, model) == doctest::Approx(3.0 * std::log(2.0)));

    Eigen::VectorXi partial(3);
    partial << 1, 0, 0;
    CHECK(loss(forward(model, adj, X, true, rng), partial, model) ==
          doctest::Approx(std::log(2.0)));
}

TEST_CASE("inference is equivariant under node relabeling") {
    const auto g = make_graph(5, {{0, 1, 1.0}, {1, 2, 0.3}, {2, 3, 0.8}, {3, 4, 1.2},
                                  {0, 4, 0.5}});
    const auto adj = normalize_adjacency(g);
    GcnModel model(6, no_dropout(9));
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 6);
    const auto base = predict(model, adj, X);

    // Permutation (0 1 2 3 4) -> (2 0 4 1 3)
    std::vector<int> perm{2, 0, 4, 1, 3};
    std::vector<InfluenceGraph::Edge> pedges;
    for (const auto& e : g.edges) {
        int a = perm[static_cast<std::size_t>(e.i)];
        int b = perm[static_cast<std::size_t>(e.j)];
        if (a > b) std::swap(a, b);
        pedges.push_back({a, b, e.weight});
    }
    const auto adj_p = normalize_adjacency(make_graph(5, pedges));
    Eigen::MatrixXd Xp(5, 6);
    for (int r = 0; r < 5; ++r) Xp.row(perm[static_cast<std::size_t>(r)]) = X.row(r);

    const auto moved = predict(model, adj_p, Xp);
    for (int r = 0; r < 5; ++r) {
        const int pr = perm[static_cast<std::size_t>(r)];
        CHECK(moved.probs(pr, 0) == doctest::Approx(base.probs(r, 0)).epsilon(1e-12));
        CHECK(moved.hard[static_cast<std::size_t>(pr)] ==
              base.hard[static_cast<std::size_t>(r)]);
    }
}

TEST_CASE("training reduces the loss on a fixed batch") {
    const auto g = make_graph(6, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0},
                                  {4, 5, 1.0}, {0, 5, 1.0}});
    const auto adj = normalize_adjacency(g);
    GcnModel model(4, no_dropout(21));
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 4);
    Eigen::VectorXi y(6);
    y << 1, -1, 1, -1, 1, -1;

    Rng rng(2);
    const double before = loss(forward(model, adj, X, true, rng), y, model);
    for (int e = 0; e < 40; ++e) {
        const auto cache = forward(model, adj, X, true, rng);
        backward_and_step(model, adj, cache, y);
    }
    const double after = loss(forward(model, adj, X, true, rng), y, model);
    CHECK(after < before);
}

TEST_CASE("stack training fits a learnable rule and is seed-deterministic") {
    // Ring of 8 nodes; the label is the sign of feature 0, on every day.
    const int m = 8, f = 3;
    std::vector<InfluenceGraph::Edge> edges;
    for (int v = 0; v < m; ++v) edges.push_back({std::min(v, (v + 1) % m),
                                                 std::max(v, (v + 1) % m), 1.0});
    const auto g = make_graph(m, edges);

    std::mt19937_64 mt(31);
    std::normal_distribution<double> norm(0.0, 1.0);
    DayGraphStack stack;
    stack.adjacency = normalize_adjacency(g);
    for (auto& day : stack.days) {
        day.features.resize(m, f);
        day.labels.resize(m);
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < f; ++c) day.features(r, c) = norm(mt);
            if (day.features(r, 0) == 0.0) day.features(r, 0) = 1.0;
            day.labels(r) = day.features(r, 0) > 0 ? 1 : -1;
        }
    }

    GcnHyperParams hp = no_dropout(4);
    hp.epochs_per_graph = 200;
    const auto [model, pred] = train_on_stack(stack, hp);
    int correct = 0;
    for (int r = 0; r < m; ++r)
        if (pred.hard[static_cast<std::size_t>(r)] == stack.days.back().labels(r))
            ++correct;
    CHECK(correct >= 7);  // near-perfect fit of a linear rule

    const auto [model2, pred2] = train_on_stack(stack, hp);
    CHECK(model.W0 == model2.W0);
    CHECK(model.W2 == model2.W2);
    for (int r = 0; r < m; ++r) {
        CHECK(pred.probs(r, 0) == pred2.probs(r, 0));
        CHECK(pred.hard[static_cast<std::size_t>(r)] ==
              pred2.hard[static_cast<std::size_t>(r)]);
    }

    GcnHyperParams other = hp;
    other.seed = 5;
    const auto [model3, pred3] = train_on_stack(stack, other);
    CHECK(model.W0 != model3.W0);
}

TEST_CASE("history days of the stack must be fully labeled") {
    const auto g = make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    DayGraphStack stack;
    stack.adjacency = normalize_adjacency(g);
    for (auto& day : stack.days) {
        day.features = Eigen::MatrixXd::Random(3, 2);
        day.labels.resize(3);
        day.labels << 1, -1, 1;
    }
    stack.days[1].labels(2) = 0;  // a hole in a history day
    CHECK_THROWS_AS(train_on_stack(stack, no_dropout()), ContractError);

    // A partially labeled target day is the normal case.
    stack.days[1].labels(2) = 1;
    stack.days[4].labels << 1, 0, 0;
    CHECK_NOTHROW(train_on_stack(stack, no_dropout()));

    // Supervised ablation ignores the target day entirely.
    stack.days[4].labels << 0, 0, 0;
    CHECK_NOTHROW(train_on_stack(stack, no_dropout(), /*include_target_day=*/false));
}

TEST_CASE("dropout masks are off at inference and scale correctly in training") {
    const auto g = make_graph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
    const auto adj = normalize_adjacency(g);
    GcnHyperParams hp;
    hp.dropout = 0.5;
    GcnModel model(4, hp);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 4);

    Rng r1(1);
    const auto inf1 = forward(model, adj, X, /*training=*/false, r1);
    Rng r2(999);
    const auto inf2 = forward(model, adj, X, false, r2);
    // Inference ignores the RNG entirely.
    CHECK(inf1.probs == inf2.probs);
    CHECK(inf1.mask1.minCoeff() == 1.0);
    CHECK(inf1.mask1.maxCoeff() == 1.0);

    Rng r3(1);
    const auto tr = forward(model, adj, X, true, r3);
    // Inverted dropout: entries are 0 or 1/(1-p).
    for (int r = 0; r < tr.mask1.rows(); ++r)
        for (int c = 0; c < tr.mask1.cols(); ++c) {
            const double v = tr.mask1(r, c);
            CHECK((v == 0.0 || v == doctest::Approx(2.0)));
        }
}
