#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gcnet/gcn.hpp"
#include "gcnet/influence_graph.hpp"
#include "gcnet/market_data.hpp"
#include "gcnet/pld.hpp"

namespace gcnet {

enum class GraphMode { Influence, Correlation };
enum class LabelMode { Pld, Random, Single };
enum class TrainMode { SemiSupervised, Supervised };

struct RunConfig {
    // data source: csv_dir when non-empty, synthetic otherwise
    std::string csv_dir;
    SynthConfig synth;

    Date test_start, test_end;              // inclusive test range
    std::optional<Date> validation_start;   // range for sweep_n
    std::optional<Date> validation_end;

    GraphMode graph_mode = GraphMode::Influence;
    LabelMode label_mode = LabelMode::Pld;
    ClassifierKind single_labeler = ClassifierKind::RandomForest;
    TrainMode train_mode = TrainMode::SemiSupervised;

    double coverage = 0.4;        // n: fraction of nodes given initial labels
    int validation_days = 20;     // d
    double decay = 0.01;          // c
    int rebuild_every = 30;       // trading days between graph rebuilds
    int pld_retrain_every = 1;    // days between pool retrainings
    std::size_t min_train_days = 40;
    double max_skip_fraction = 0.10;

    GcnHyperParams gcn;
    GraphBuildConfig graph;       // indicator + QDA settings
    std::uint64_t seed = 0;
};

struct StockDayResult {
    int predicted = 0;       // +1 / -1
    int actual = 0;          // +1 / -1, valid iff has_actual
    bool has_actual = false;
    bool initially_labeled = false;
    int initial_label = 0;   // valid iff initially_labeled
};

struct DailyResult {
    Date date;
    std::vector<StockDayResult> stocks;  // node order
};

struct SliceMetrics {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0, mcc = 0;
    long total() const { return tp + fp + tn + fn; }
};

struct EvaluationReport {
    SliceMetrics all;            // every stock-day with a known actual
    SliceMetrics labeled_nodes;  // final predictions on initially-labeled nodes
    SliceMetrics pld_labels;     // the initial labels themselves
};

struct BacktestOutput {
    std::vector<DailyResult> days;
    EvaluationReport report;
    std::vector<Date> graph_builds;
    std::vector<std::string> skipped;  // "date: reason"
};

struct PldDayOutcome {
    std::vector<NodePrivilege> ranking;
    PartialLabeling labeling;
};

// Walk-forward driver. Holds per-stock indicator caches; snapshot must
// outlive the backtester.
class Backtester {
public:
    Backtester(const MarketSnapshot& snapshot, RunConfig config);
    ~Backtester();

    BacktestOutput run();

    InfluenceGraph build_graph(const Date& as_of) const;
    PldDayOutcome pld_for_day(const InfluenceGraph& graph, const Date& target_day);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

MarketSnapshot load_snapshot(const RunConfig& config);
BacktestOutput run_backtest(const MarketSnapshot& snapshot, const RunConfig& config);

// Accuracy + MCC from pooled confusion counts; MCC = 0 when a denominator
// factor vanishes.
EvaluationReport evaluate(const std::vector<DailyResult>& results);

struct SweepRow {
    double coverage = 0;
    double validation_accuracy = 0;
};
struct SweepResult {
    std::vector<SweepRow> rows;
    double selected = 0;  // argmax accuracy, ties to the smaller coverage
};
SweepResult sweep_n(const MarketSnapshot& snapshot, const RunConfig& config,
                    const std::vector<double>& n_values);

// Predictions CSV: date,ticker,predicted,actual,initially_labeled,initial_label.
void write_predictions_csv(const std::string& path, const MarketSnapshot& snapshot,
                           const std::vector<DailyResult>& days);
std::vector<DailyResult> read_predictions_csv(const std::string& path);
void write_metrics_json(const std::string& path, const EvaluationReport& report);

}  // namespace gcnet
