// gcnet command-line front end: synthetic data generation, graph
// construction, PLD reports, walk-forward backtests, n-sweeps, and
// offline evaluation of prediction files.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gcnet/error.hpp"
#include "gcnet/pipeline.hpp"

using namespace gcnet;

namespace {

// Flat key=value config file; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = value;
    }
    return kv;
}

ClassifierKind parse_member(const std::string& name) {
    for (const auto kind : kPoolOrder) {
        if (classifier_name(kind) == name) return kind;
    }
    throw ConfigError("unknown pool member '" + name + "'");
}

struct CommonOpts {
    std::string config_path;
    RunConfig run;
    std::string test_start, test_end, validation_start, validation_end;
    std::string graph_mode = "influence";
    std::string label_mode = "pld";
    std::string train_mode = "semi";
};

void apply_config_file(CommonOpts& o) {
    if (o.config_path.empty()) return;
    const auto kv = read_config_file(o.config_path);
    const auto str = [&](const char* k, std::string& out) {
        if (auto it = kv.find(k); it != kv.end()) out = it->second;
    };
    const auto num = [&](const char* k, auto& out) {
        if (auto it = kv.find(k); it != kv.end()) {
            out = static_cast<std::remove_reference_t<decltype(out)>>(
                std::stod(it->second));
        }
    };
    str("csv_dir", o.run.csv_dir);
    num("synth_stocks", o.run.synth.n_stocks);
    num("synth_days", o.run.synth.n_days);
    num("synth_groups", o.run.synth.n_groups);
    num("synth_signal", o.run.synth.signal_strength);
    num("synth_band", o.run.synth.cycle_band);
    num("synth_noise", o.run.synth.driver_noise);
    num("synth_jump_prob", o.run.synth.jump_prob);
    num("synth_jump_size", o.run.synth.jump_size);
    str("test_start", o.test_start);
    str("test_end", o.test_end);
    str("validation_start", o.validation_start);
    str("validation_end", o.validation_end);
    str("graph_mode", o.graph_mode);
    str("label_mode", o.label_mode);
    str("train_mode", o.train_mode);
    num("coverage", o.run.coverage);
    num("validation_days", o.run.validation_days);
    num("decay", o.run.decay);
    num("rebuild_every", o.run.rebuild_every);
    num("pld_retrain_every", o.run.pld_retrain_every);
    num("gcn_lr", o.run.gcn.learning_rate);
    num("gcn_dropout", o.run.gcn.dropout);
    num("gcn_l2", o.run.gcn.l2);
    num("gcn_epochs", o.run.gcn.epochs_per_graph);
    num("seed", o.run.seed);
}

void finalize_modes(CommonOpts& o) {
    if (o.graph_mode == "influence") o.run.graph_mode = GraphMode::Influence;
    else if (o.graph_mode == "correlation") o.run.graph_mode = GraphMode::Correlation;
    else throw ConfigError("graph_mode must be influence|correlation");

    if (o.label_mode == "pld") o.run.label_mode = LabelMode::Pld;
    else if (o.label_mode == "random") o.run.label_mode = LabelMode::Random;
    else if (o.label_mode.rfind("single:", 0) == 0) {
        o.run.label_mode = LabelMode::Single;
        o.run.single_labeler = parse_member(o.label_mode.substr(7));
    } else {
        throw ConfigError("label_mode must be pld|random|single:<member>");
    }

    if (o.train_mode == "semi" || o.train_mode == "semi-supervised")
        o.run.train_mode = TrainMode::SemiSupervised;
    else if (o.train_mode == "supervised")
        o.run.train_mode = TrainMode::Supervised;
    else
        throw ConfigError("train_mode must be semi|supervised");

    if (!o.test_start.empty()) o.run.test_start = Date::parse(o.test_start);
    if (!o.test_end.empty()) o.run.test_end = Date::parse(o.test_end);
    if (!o.validation_start.empty())
        o.run.validation_start = Date::parse(o.validation_start);
    if (!o.validation_end.empty())
        o.run.validation_end = Date::parse(o.validation_end);

    o.run.synth.seed = o.run.seed;
}

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "flat key=value config file");
    cmd->add_option("--data", o.run.csv_dir, "directory of per-ticker CSV files");
    cmd->add_option("--synth-stocks", o.run.synth.n_stocks);
    cmd->add_option("--synth-days", o.run.synth.n_days);
    cmd->add_option("--synth-groups", o.run.synth.n_groups);
    cmd->add_option("--synth-signal", o.run.synth.signal_strength);
    cmd->add_option("--synth-band", o.run.synth.cycle_band);
    cmd->add_option("--synth-noise", o.run.synth.driver_noise);
    cmd->add_option("--synth-jump-prob", o.run.synth.jump_prob);
    cmd->add_option("--synth-jump-size", o.run.synth.jump_size);
    cmd->add_option("--graph-mode", o.graph_mode, "influence|correlation");
    cmd->add_option("--label-mode", o.label_mode, "pld|random|single:<member>");
    cmd->add_option("--train-mode", o.train_mode, "semi|supervised");
    cmd->add_option("--n", o.run.coverage, "initial-label coverage in (0,1]");
    cmd->add_option("--validation-days", o.run.validation_days);
    cmd->add_option("--decay", o.run.decay, "recency decay c");
    cmd->add_option("--rebuild-every", o.run.rebuild_every);
    cmd->add_option("--pld-retrain-every", o.run.pld_retrain_every);
    cmd->add_option("--gcn-lr", o.run.gcn.learning_rate);
    cmd->add_option("--gcn-dropout", o.run.gcn.dropout);
    cmd->add_option("--gcn-l2", o.run.gcn.l2);
    cmd->add_option("--gcn-epochs", o.run.gcn.epochs_per_graph);
    cmd->add_option("--seed", o.run.seed);
}

nlohmann::ordered_json slice_json(const SliceMetrics& m) {
    return {{"accuracy", m.accuracy}, {"mcc", m.mcc}, {"tp", m.tp},
            {"fp", m.fp},             {"tn", m.tn},   {"fn", m.fn}};
}

int run_backtest_cmd(CommonOpts& o, const std::string& out_predictions,
                     const std::string& out_metrics, int n_seeds) {
    const MarketSnapshot snap = load_snapshot(o.run);
    std::vector<double> accs, mccs;
    nlohmann::ordered_json metrics;
    bool wrote_predictions = false;
    for (int k = 0; k < n_seeds; ++k) {
        RunConfig cfg = o.run;
        cfg.seed = o.run.seed + static_cast<std::uint64_t>(k);
        const BacktestOutput bt = run_backtest(snap, cfg);
        accs.push_back(bt.report.all.accuracy);
        mccs.push_back(bt.report.all.mcc);
        if (k == 0) {
            metrics["all"] = slice_json(bt.report.all);
            metrics["initially_labeled"] = slice_json(bt.report.labeled_nodes);
            metrics["pld_initial_labels"] = slice_json(bt.report.pld_labels);
            metrics["skipped_days"] = bt.skipped.size();
            if (!out_predictions.empty()) {
                write_predictions_csv(out_predictions, snap, bt.days);
                wrote_predictions = true;
            }
            for (const auto& s : bt.skipped) std::cerr << "skipped " << s << "\n";
        }
    }
    if (n_seeds > 1) {
        const auto mean_std = [](const std::vector<double>& v) {
            double mean = 0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0;
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            return std::pair<double, double>(mean, std::sqrt(var));
        };
        const auto [am, as] = mean_std(accs);
        const auto [mm, ms] = mean_std(mccs);
        metrics["seeds"] = {{"count", n_seeds},
                            {"accuracy_mean", am},
                            {"accuracy_stddev", as},
                            {"mcc_mean", mm},
                            {"mcc_stddev", ms}};
    }
    if (!out_metrics.empty()) {
        std::ofstream out(out_metrics);
        if (!out) throw ConfigError("cannot write " + out_metrics);
        out << metrics.dump(2) << "\n";
    }
    std::cout << metrics.dump(2) << "\n";
    if (wrote_predictions) std::cerr << "predictions: " << out_predictions << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GCNET stock-movement prediction pipeline"};
    app.require_subcommand(1);

    CommonOpts o;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic market as CSVs");
    std::string synth_out;
    add_common_flags(synth, o);
    synth->add_option("--out", synth_out, "output directory")->required();

    // build-graph
    auto* bg = app.add_subcommand("build-graph", "build and export the stock graph");
    std::string bg_as_of, bg_edges, bg_meta;
    add_common_flags(bg, o);
    bg->add_option("--as-of", bg_as_of, "build date (YYYY-MM-DD)")->required();
    bg->add_option("--out-edges", bg_edges, "edge list CSV")->required();
    bg->add_option("--out-meta", bg_meta, "JSON header")->required();

    // pld-report
    auto* pr = app.add_subcommand("pld-report", "per-stock PLD report for one day");
    std::string pr_date, pr_out;
    add_common_flags(pr, o);
    pr->add_option("--date", pr_date, "target day (YYYY-MM-DD)")->required();
    pr->add_option("--out", pr_out, "output JSON path")->required();

    // backtest
    auto* bt = app.add_subcommand("backtest", "walk-forward backtest");
    std::string bt_predictions, bt_metrics;
    int bt_seeds = 1;
    add_common_flags(bt, o);
    bt->add_option("--test-start", o.test_start);
    bt->add_option("--test-end", o.test_end);
    bt->add_option("--out-predictions", bt_predictions);
    bt->add_option("--out-metrics", bt_metrics);
    bt->add_option("--seeds", bt_seeds, "independent repetitions (mean +- stddev)");

    // sweep-n
    auto* sw = app.add_subcommand("sweep-n", "coverage sweep on the validation range");
    std::string sw_values = "0.1,0.2,0.3,0.4,0.5,0.6,0.8,1.0", sw_out;
    add_common_flags(sw, o);
    sw->add_option("--validation-start", o.validation_start);
    sw->add_option("--validation-end", o.validation_end);
    sw->add_option("--n-values", sw_values, "comma-separated coverages");
    sw->add_option("--out", sw_out, "curve CSV path");

    // eval
    auto* ev = app.add_subcommand("eval", "metrics from a predictions CSV");
    std::string ev_predictions, ev_metrics;
    ev->add_option("--predictions", ev_predictions)->required();
    ev->add_option("--out-metrics", ev_metrics);

    // Pre-scan for --config so file values load first and flags override them.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") o.config_path = argv[i + 1];
    }

    try {
        if (!o.config_path.empty()) apply_config_file(o);
        app.parse(argc, argv);
        finalize_modes(o);

        if (synth->parsed()) {
            const MarketSnapshot snap = generate_synthetic(o.run.synth);
            save_csv(snap, synth_out);
            std::cerr << "wrote " << snap.n_stocks() << " tickers x "
                      << snap.n_days() << " days to " << synth_out << "\n";
            return 0;
        }
        if (bg->parsed()) {
            const MarketSnapshot snap = load_snapshot(o.run);
            Backtester engine(snap, o.run);
            const InfluenceGraph graph = engine.build_graph(Date::parse(bg_as_of));
            save_graph(graph, bg_edges, bg_meta);
            std::cerr << "graph: " << graph.n_nodes() << " nodes, "
                      << graph.edges.size() << " edges\n";
            return 0;
        }
        if (pr->parsed()) {
            const MarketSnapshot snap = load_snapshot(o.run);
            Backtester engine(snap, o.run);
            const Date date = Date::parse(pr_date);
            const InfluenceGraph graph = engine.build_graph(date);
            const PldDayOutcome pld = engine.pld_for_day(graph, date);
            nlohmann::ordered_json report;
            report["date"] = date.to_string();
            auto& stocks = report["stocks"];
            for (const auto& np : pld.ranking) {
                nlohmann::ordered_json row;
                row["ticker"] = snap.tickers[static_cast<std::size_t>(np.stock)];
                row["best_algorithm"] = classifier_name(np.best_algorithm);
                row["predictability"] = np.predictability;
                row["density"] = np.density;
                row["privilege"] = np.privilege;
                const auto it = pld.labeling.labels.find(np.stock);
                if (it != pld.labeling.labels.end()) row["label"] = it->second;
                else row["label"] = nullptr;
                stocks.push_back(row);
            }
            std::ofstream out(pr_out);
            if (!out) throw ConfigError("cannot write " + pr_out);
            out << report.dump(2) << "\n";
            return 0;
        }
        if (bt->parsed()) {
            if (bt_seeds < 1) throw ConfigError("--seeds must be >= 1");
            if (o.test_start.empty() || o.test_end.empty()) {
                throw ConfigError("backtest requires test_start and test_end");
            }
            return run_backtest_cmd(o, bt_predictions, bt_metrics, bt_seeds);
        }
        if (sw->parsed()) {
            const MarketSnapshot snap = load_snapshot(o.run);
            std::vector<double> ns;
            std::stringstream ss(sw_values);
            std::string tok;
            while (std::getline(ss, tok, ',')) ns.push_back(std::stod(tok));
            const SweepResult res = sweep_n(snap, o.run, ns);
            std::string curve = "n,validation_accuracy\n";
            char buf[64];
            for (const auto& row : res.rows) {
                std::snprintf(buf, sizeof(buf), "%.4g,%.17g\n", row.coverage,
                              row.validation_accuracy);
                curve += buf;
            }
            if (!sw_out.empty()) {
                std::ofstream out(sw_out);
                if (!out) throw ConfigError("cannot write " + sw_out);
                out << curve;
            }
            std::cout << curve << "selected_n=" << res.selected << "\n";
            return 0;
        }
        if (ev->parsed()) {
            const auto days = read_predictions_csv(ev_predictions);
            const EvaluationReport rep = evaluate(days);
            nlohmann::ordered_json metrics;
            metrics["all"] = slice_json(rep.all);
            metrics["initially_labeled"] = slice_json(rep.labeled_nodes);
            metrics["pld_initial_labels"] = slice_json(rep.pld_labels);
            if (!ev_metrics.empty()) {
                std::ofstream out(ev_metrics);
                if (!out) throw ConfigError("cannot write " + ev_metrics);
                out << metrics.dump(2) << "\n";
            }
            std::cout << metrics.dump(2) << "\n";
            return 0;
        }
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
