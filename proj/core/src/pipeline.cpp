#include "gcnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gcnet/error.hpp"
#include "gcnet/indicators.hpp"
#include "gcnet/rng.hpp"

namespace gcnet {

namespace {

SliceMetrics finalize(SliceMetrics m) {
    const double total = static_cast<double>(m.total());
    m.accuracy = total > 0 ? static_cast<double>(m.tp + m.tn) / total : 0.0;
    const double tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp);
    const double tn = static_cast<double>(m.tn), fn = static_cast<double>(m.fn);
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    m.mcc = denom > 0 ? (tp * tn - fp * fn) / std::sqrt(denom) : 0.0;
    return m;
}

void count(SliceMetrics& m, int predicted, int actual) {
    if (actual > 0) {
        (predicted > 0 ? m.tp : m.fn)++;
    } else {
        (predicted > 0 ? m.fp : m.tn)++;
    }
}

}  // namespace

EvaluationReport evaluate(const std::vector<DailyResult>& results) {
    bool any = false;
    EvaluationReport rep;
    for (const auto& day : results) {
        for (const auto& s : day.stocks) {
            if (!s.has_actual) continue;
            any = true;
            count(rep.all, s.predicted, s.actual);
            if (s.initially_labeled) {
                count(rep.labeled_nodes, s.predicted, s.actual);
                count(rep.pld_labels, s.initial_label, s.actual);
            }
        }
    }
    if (!any) throw ContractError("evaluate: no results with known actuals");
    rep.all = finalize(rep.all);
    rep.labeled_nodes = finalize(rep.labeled_nodes);
    rep.pld_labels = finalize(rep.pld_labels);
    return rep;
}

// ---------------------------------------------------------------------------

struct Backtester::Impl {
    const MarketSnapshot& snap;
    RunConfig cfg;

    // per-stock caches over the full calendar; rows before kMinLookback unset
    std::vector<Eigen::MatrixXd> features;  // n_days x kNumFeatures
    std::vector<Eigen::MatrixXd> signals;   // n_days x kNumSignals
    std::vector<std::vector<int>> labels;   // +1/-1, defined for day < n_days-1

    // PLD pool cache for --pld-retrain-every
    long pool_day = -1;
    std::vector<std::vector<std::unique_ptr<TrainedClassifier>>> pools;

    Impl(const MarketSnapshot& s, RunConfig c) : snap(s), cfg(std::move(c)) {
        const std::size_t m = snap.n_stocks();
        const std::size_t n = snap.n_days();
        features.reserve(m);
        signals.reserve(m);
        labels.reserve(m);
        for (std::size_t st = 0; st < m; ++st) {
            const IndicatorTable table(snap.series[st], cfg.graph.indicators);
            Eigen::MatrixXd F = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                      kNumFeatures);
            Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                      kNumSignals);
            for (std::size_t t = kMinLookback; t < n; ++t) {
                const FeatureVector fv = table.features(t);
                for (int c2 = 0; c2 < kNumFeatures; ++c2)
                    F(static_cast<Eigen::Index>(t), c2) =
                        fv.values[static_cast<std::size_t>(c2)];
                const SignalVector sv = table.signals(t);
                for (int c2 = 0; c2 < kNumSignals; ++c2)
                    S(static_cast<Eigen::Index>(t), c2) =
                        sv.values[static_cast<std::size_t>(c2)];
            }
            features.push_back(std::move(F));
            signals.push_back(std::move(S));
            std::vector<int> lab(n, 0);
            for (std::size_t t = 0; t + 1 < n; ++t)
                lab[t] = movement_label(snap.series[st], t);
            labels.push_back(std::move(lab));
        }
    }

    LabeledDataset dataset_for(std::size_t stock, std::size_t first, std::size_t last) const {
        // inclusive day range [first, last]
        const Eigen::Index rows = static_cast<Eigen::Index>(last - first + 1);
        LabeledDataset d;
        d.X = features[stock].middleRows(static_cast<Eigen::Index>(first), rows);
        d.y.resize(rows);
        for (Eigen::Index r = 0; r < rows; ++r)
            d.y[r] = labels[stock][first + static_cast<std::size_t>(r)] > 0 ? 1 : 0;
        return d;
    }

    std::vector<ClassifierKind> pool_members() const {
        if (cfg.label_mode == LabelMode::Single) return {cfg.single_labeler};
        return {kPoolOrder, kPoolOrder + kPoolSize};
    }

    void retrain_pools(std::size_t tau) {
        const std::size_t d = static_cast<std::size_t>(cfg.validation_days);
        const std::size_t train_first = kMinLookback;
        const std::size_t train_last = tau - d - 1;
        if (train_last < train_first || train_last - train_first + 1 < cfg.min_train_days) {
            throw WindowError("PLD: fewer than " + std::to_string(cfg.min_train_days) +
                              " training days before " +
                              snap.calendar[tau].to_string());
        }
        const auto members = pool_members();
        pools.clear();
        pools.resize(snap.n_stocks());
        for (std::size_t st = 0; st < snap.n_stocks(); ++st) {
            const LabeledDataset train = dataset_for(st, train_first, train_last);
            for (std::size_t k = 0; k < members.size(); ++k) {
                const std::uint64_t seed = derive_seed(
                    cfg.seed, 0x91d0000ULL + tau * 100003ULL + st * 131ULL + k);
                try {
                    pools[st].push_back(
                        train_classifier(members[k], train, seed, cfg.graph.pool));
                } catch (const DegenerateTrainingError&) {
                    // majority stand-in, flagged, as train_pool would do
                    LabeledDataset tiny = train;
                    auto fallback = train_pool(tiny, seed, cfg.graph.pool);
                    // take the matching member from the fallback-aware trainer
                    for (auto& mptr : fallback) {
                        if (mptr->kind() == members[k]) {
                            pools[st].push_back(std::move(mptr));
                            break;
                        }
                    }
                }
            }
        }
        pool_day = static_cast<long>(tau);
    }

    PldDayOutcome pld_for_day(const InfluenceGraph& graph, std::size_t tau) {
        const std::size_t d = static_cast<std::size_t>(cfg.validation_days);
        if (tau < kMinLookback + d + cfg.min_train_days) {
            throw WindowError("PLD: insufficient history at " +
                              snap.calendar[tau].to_string());
        }
        if (pool_day < 0 ||
            static_cast<long>(tau) - pool_day >= cfg.pld_retrain_every ||
            static_cast<long>(tau) < pool_day) {
            retrain_pools(tau);
        }

        const std::size_t m = snap.n_stocks();
        std::vector<std::vector<PredictorScore>> scores(m);
        for (std::size_t st = 0; st < m; ++st) {
            const LabeledDataset val = dataset_for(st, tau - d, tau - 1);
            for (const auto& model : pools[st]) {
                PredictorScore ps;
                ps.stock = static_cast<int>(st);
                ps.algorithm = model->kind();
                ps.degenerate = model->is_fallback();
                ps.score = score_predictor(*model, val, cfg.decay);
                scores[st].push_back(ps);
            }
        }
        PldDayOutcome out;
        out.ranking = rank_nodes(graph, scores);

        std::vector<const TrainedClassifier*> best(m, nullptr);
        std::vector<Eigen::VectorXd> target_features(m);
        for (std::size_t st = 0; st < m; ++st) {
            for (const auto& model : pools[st]) {
                if (model->kind() == out.ranking[st].best_algorithm) {
                    best[st] = model.get();
                    break;
                }
            }
            target_features[st] =
                features[st].row(static_cast<Eigen::Index>(tau)).transpose();
        }
        if (cfg.label_mode == LabelMode::Random) {
            out.labeling = assign_labels_random(out.ranking, best, target_features,
                                                cfg.coverage,
                                                derive_seed(cfg.seed, 0xabcd + tau));
        } else {
            out.labeling = assign_labels(out.ranking, best, target_features,
                                         cfg.coverage);
        }
        return out;
    }

    InfluenceGraph build_graph(std::size_t tau) const {
        WindowSpec spec;
        spec.target_day = snap.calendar[tau];
        spec.train_end = snap.calendar[tau > 0 ? tau - 1 : 0];
        spec.validation_days = cfg.validation_days;
        if (cfg.graph_mode == GraphMode::Correlation) {
            return build_correlation_graph(snap, spec, cfg.graph);
        }
        return build_influence_graph(snap, spec, cfg.graph);
    }

    DailyResult process_day(std::size_t tau, const InfluenceGraph& graph,
                            const NormalizedAdjacency& adj) {
        const std::size_t m = snap.n_stocks();
        const PldDayOutcome pld = pld_for_day(graph, tau);

        if (tau < kMinLookback + kStackDays - 1) {
            throw WindowError("no room for a 5-day graph stack");
        }
        DayGraphStack stack;
        stack.adjacency = adj;
        for (int k = 0; k < kStackDays; ++k) {
            const std::size_t day = tau - static_cast<std::size_t>(kStackDays - 1 - k);
            DayGraph& g = stack.days[static_cast<std::size_t>(k)];
            g.features.resize(static_cast<Eigen::Index>(m), kNumSignals);
            g.labels = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(m));
            for (std::size_t st = 0; st < m; ++st) {
                g.features.row(static_cast<Eigen::Index>(st)) =
                    signals[st].row(static_cast<Eigen::Index>(day));
                if (k + 1 < kStackDays) {
                    g.labels[static_cast<Eigen::Index>(st)] = labels[st][day];
                }
            }
        }
        for (const auto& [node, lab] : pld.labeling.labels) {
            stack.days[kStackDays - 1].labels[node] = lab;
        }

        GcnHyperParams hp = cfg.gcn;
        hp.seed = derive_seed(cfg.seed, 0x6c00000ULL + tau);
        const bool semi = cfg.train_mode == TrainMode::SemiSupervised;
        auto [model, preds] = train_on_stack(stack, hp, semi);
        (void)model;

        DailyResult day;
        day.date = snap.calendar[tau];
        day.stocks.resize(m);
        for (std::size_t st = 0; st < m; ++st) {
            StockDayResult& r = day.stocks[st];
            r.predicted = preds.hard[st];
            if (tau + 1 < snap.n_days()) {
                r.actual = labels[st][tau];
                r.has_actual = true;
            }
            const auto it = pld.labeling.labels.find(static_cast<int>(st));
            if (it != pld.labeling.labels.end()) {
                r.initially_labeled = true;
                r.initial_label = it->second;
            }
        }
        return day;
    }
};

Backtester::Backtester(const MarketSnapshot& snapshot, RunConfig config)
    : impl_(std::make_unique<Impl>(snapshot, std::move(config))) {}

Backtester::~Backtester() = default;

InfluenceGraph Backtester::build_graph(const Date& as_of) const {
    return impl_->build_graph(impl_->snap.day_index(as_of));
}

PldDayOutcome Backtester::pld_for_day(const InfluenceGraph& graph,
                                      const Date& target_day) {
    return impl_->pld_for_day(graph, impl_->snap.day_index(target_day));
}

BacktestOutput Backtester::run() {
    const auto& snap = impl_->snap;
    const auto& cfg = impl_->cfg;
    const std::size_t first = snap.day_index(cfg.test_start);
    const std::size_t last = snap.day_index(cfg.test_end);
    if (first > last) throw ConfigError("test_start after test_end");

    BacktestOutput out;
    InfluenceGraph graph;
    NormalizedAdjacency adj;
    long last_build = -1;
    std::size_t attempted = 0;
    for (std::size_t tau = first; tau <= last; ++tau) {
        ++attempted;
        try {
            if (last_build < 0 ||
                static_cast<long>(tau) - last_build >= cfg.rebuild_every) {
                graph = impl_->build_graph(tau);
                adj = normalize_adjacency(graph);
                last_build = static_cast<long>(tau);
                out.graph_builds.push_back(snap.calendar[tau]);
            }
            out.days.push_back(impl_->process_day(tau, graph, adj));
        } catch (const Error& e) {
            out.skipped.push_back(snap.calendar[tau].to_string() + ": " + e.what());
        }
    }
    if (static_cast<double>(out.skipped.size()) >
        cfg.max_skip_fraction * static_cast<double>(attempted)) {
        std::string msg = "backtest failed: " + std::to_string(out.skipped.size()) +
                          " of " + std::to_string(attempted) + " days skipped";
        for (const auto& s : out.skipped) msg += "\n  " + s;
        throw Error(msg);
    }
    // A run whose range has no realized next-day movements yet (e.g. only the
    // final calendar day) still yields predictions; the report stays zeroed.
    const bool any_actual = std::any_of(
        out.days.begin(), out.days.end(), [](const DailyResult& d) {
            return std::any_of(d.stocks.begin(), d.stocks.end(),
                               [](const StockDayResult& s) { return s.has_actual; });
        });
    if (any_actual) out.report = evaluate(out.days);
    return out;
}

MarketSnapshot load_snapshot(const RunConfig& config) {
    if (!config.csv_dir.empty()) return load_csv(config.csv_dir);
    return generate_synthetic(config.synth);
}

BacktestOutput run_backtest(const MarketSnapshot& snapshot, const RunConfig& config) {
    return Backtester(snapshot, config).run();
}

SweepResult sweep_n(const MarketSnapshot& snapshot, const RunConfig& config,
                    const std::vector<double>& n_values) {
    if (n_values.empty()) throw ConfigError("sweep_n: no coverage values");
    if (!config.validation_start || !config.validation_end) {
        throw ConfigError("sweep_n requires a validation range");
    }
    std::vector<double> ns = n_values;
    std::sort(ns.begin(), ns.end());
    SweepResult out;
    for (double n : ns) {
        if (n <= 0 || n > 1) throw ConfigError("coverage values must lie in (0, 1]");
        RunConfig c = config;
        c.coverage = n;
        c.test_start = *config.validation_start;
        c.test_end = *config.validation_end;
        const BacktestOutput bt = run_backtest(snapshot, c);
        out.rows.push_back({n, bt.report.all.accuracy});
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
        if (out.rows[i].validation_accuracy >
            out.rows[best].validation_accuracy) {
            best = i;
        }
    }
    out.selected = out.rows[best].coverage;
    return out;
}

// ---------------------------------------------------------------------------

void write_predictions_csv(const std::string& path, const MarketSnapshot& snapshot,
                           const std::vector<DailyResult>& days) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "date,ticker,predicted,actual,initially_labeled,initial_label\n";
    for (const auto& day : days) {
        for (std::size_t st = 0; st < day.stocks.size(); ++st) {
            const auto& r = day.stocks[st];
            out << day.date.to_string() << ',' << snapshot.tickers[st] << ','
                << r.predicted << ',';
            if (r.has_actual) out << r.actual;
            out << ',' << (r.initially_labeled ? 1 : 0) << ',';
            if (r.initially_labeled) out << r.initial_label;
            out << '\n';
        }
    }
}

std::vector<DailyResult> read_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::map<Date, DailyResult> by_date;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (lineno == 1 && line.rfind("date,", 0) == 0)) continue;
        std::istringstream ss(line);
        std::string f[6];
        for (int k = 0; k < 6; ++k) {
            if (!std::getline(ss, f[k], ',') && k < 5) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": short row");
            }
        }
        const Date date = Date::parse(f[0]);
        StockDayResult r;
        r.predicted = std::stoi(f[2]);
        if (!f[3].empty()) {
            r.actual = std::stoi(f[3]);
            r.has_actual = true;
        }
        r.initially_labeled = f[4] == "1";
        if (r.initially_labeled && !f[5].empty()) r.initial_label = std::stoi(f[5]);
        auto& day = by_date[date];
        day.date = date;
        day.stocks.push_back(r);
    }
    std::vector<DailyResult> out;
    out.reserve(by_date.size());
    for (auto& [d, day] : by_date) out.push_back(std::move(day));
    return out;
}

void write_metrics_json(const std::string& path, const EvaluationReport& report) {
    const auto slice = [](const SliceMetrics& m) {
        return nlohmann::ordered_json{{"accuracy", m.accuracy}, {"mcc", m.mcc},
                                      {"tp", m.tp},             {"fp", m.fp},
                                      {"tn", m.tn},             {"fn", m.fn}};
    };
    nlohmann::ordered_json j;
    j["all"] = slice(report.all);
    j["initially_labeled"] = slice(report.labeled_nodes);
    j["pld_initial_labels"] = slice(report.pld_labels);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace gcnet
