#include "gcnet/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gcnet/error.hpp"
#include "gcnet/rng.hpp"

namespace fs = std::filesystem;

namespace gcnet {

std::size_t MarketSnapshot::day_index(const Date& d) const {
    const auto it = std::lower_bound(calendar.begin(), calendar.end(), d);
    if (it == calendar.end() || !(*it == d)) {
        throw WindowError("date " + d.to_string() + " not in calendar");
    }
    return static_cast<std::size_t>(it - calendar.begin());
}

namespace {

OhlcvBar parse_row(const std::string& line, const std::string& file, int lineno) {
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) {
        throw ParseError(file + ":" + std::to_string(lineno) +
                         ": expected 7 fields, got " + std::to_string(fields.size()));
    }
    OhlcvBar bar;
    try {
        bar.date = Date::parse(fields[0]);
        bar.open = std::stod(fields[1]);
        bar.high = std::stod(fields[2]);
        bar.low = std::stod(fields[3]);
        bar.close = std::stod(fields[4]);
        bar.adj_close = std::stod(fields[5]);
        bar.volume = std::stod(fields[6]);
    } catch (const std::exception& e) {
        throw ParseError(file + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!bar.valid()) {
        throw ParseError(file + ":" + std::to_string(lineno) +
                         ": bar violates OHLC invariants");
    }
    return bar;
}

OhlcvSeries read_one_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    OhlcvSeries s;
    s.ticker = path.stem().string();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("date,", 0) == 0) continue;
        s.bars.push_back(parse_row(line, path.string(), lineno));
    }
    for (std::size_t i = 1; i < s.bars.size(); ++i) {
        if (!(s.bars[i - 1].date < s.bars[i].date)) {
            throw ParseError(path.string() + ": dates not strictly increasing at " +
                             s.bars[i].date.to_string());
        }
    }
    return s;
}

// Align every series to the shared calendar; forward-fill interior gaps.
// Returns false when the ticker misses too much of the calendar.
bool align_series(OhlcvSeries& s, const std::vector<Date>& calendar,
                  double max_missing_frac) {
    std::map<Date, OhlcvBar> by_date;
    for (const auto& b : s.bars) by_date[b.date] = b;

    std::vector<OhlcvBar> aligned;
    aligned.reserve(calendar.size());
    std::size_t missing = 0;
    const OhlcvBar* prev = nullptr;
    for (const auto& d : calendar) {
        auto it = by_date.find(d);
        if (it != by_date.end()) {
            aligned.push_back(it->second);
        } else {
            ++missing;
            if (!prev) return false;  // leading gap: no previous close to carry
            OhlcvBar fill;
            fill.date = d;
            fill.open = fill.high = fill.low = fill.close = prev->close;
            fill.adj_close = prev->adj_close;
            fill.volume = 0;
            fill.filled = true;
            aligned.push_back(fill);
        }
        prev = &aligned.back();
    }
    if (static_cast<double>(missing) >
        max_missing_frac * static_cast<double>(calendar.size())) {
        return false;
    }
    s.bars = std::move(aligned);
    return true;
}

}  // namespace

MarketSnapshot load_csv(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
    std::vector<OhlcvSeries> raw;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") raw.push_back(read_one_csv(entry.path()));
    }
    if (raw.empty()) throw ConfigError("no CSV files in " + dir);
    std::sort(raw.begin(), raw.end(),
              [](const auto& a, const auto& b) { return a.ticker < b.ticker; });

    MarketSnapshot snap;
    // Shared calendar: every date observed by at least half of the tickers.
    std::map<Date, std::size_t> counts;
    for (const auto& s : raw)
        for (const auto& b : s.bars) ++counts[b.date];
    const std::size_t quorum = (raw.size() + 1) / 2;
    for (const auto& [d, c] : counts)
        if (c >= quorum) snap.calendar.push_back(d);
    if (snap.calendar.empty()) throw ConfigError("no shared trading calendar");

    for (auto& s : raw) {
        const std::size_t usable = s.bars.size();
        if (usable < 60 && snap.calendar.size() >= 60) {
            snap.excluded.push_back(s.ticker + " (only " + std::to_string(usable) +
                                    " bars)");
            continue;
        }
        if (!align_series(s, snap.calendar, 0.05)) {
            snap.excluded.push_back(s.ticker + " (missing > 5% of calendar)");
            continue;
        }
        snap.tickers.push_back(s.ticker);
        snap.series.push_back(std::move(s));
    }
    if (snap.tickers.empty()) throw ConfigError("all tickers excluded during alignment");
    return snap;
}

void save_csv(const MarketSnapshot& snapshot, const std::string& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < snapshot.n_stocks(); ++i) {
        std::ofstream out(fs::path(dir) / (snapshot.tickers[i] + ".csv"));
        if (!out) throw ConfigError("cannot write to " + dir);
        out << "date,open,high,low,close,adj_close,volume\n";
        char buf[256];
        for (const auto& b : snapshot.series[i].bars) {
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          b.date.to_string().c_str(), b.open, b.high, b.low, b.close,
                          b.adj_close, b.volume);
            out << buf;
        }
    }
}

int synthetic_group_of(const SynthConfig& config, int stock_index) {
    return stock_index % config.n_groups;
}

MarketSnapshot generate_synthetic(const SynthConfig& config) {
    if (config.n_stocks < 2) throw ConfigError("synthetic: n_stocks must be >= 2");
    if (config.n_days < 120) throw ConfigError("synthetic: n_days must be >= 120");
    if (config.n_groups < 1 || config.n_groups > config.n_stocks) {
        throw ConfigError("synthetic: n_groups must be in [1, n_stocks]");
    }
    if (config.signal_strength < 0.5 || config.signal_strength > 1.0) {
        throw ConfigError("synthetic: signal_strength must be in [0.5, 1]");
    }

    MarketSnapshot snap;
    Date d{2015, 1, 2};
    for (int t = 0; t < config.n_days; ++t) {
        snap.calendar.push_back(d);
        d = d.next_weekday();
    }

    if (config.cycle_band < 1) {
        throw ConfigError("synthetic: cycle_band must be >= 1");
    }
    if (config.driver_noise < 0 || config.driver_noise > 1) {
        throw ConfigError("synthetic: driver_noise must be in [0, 1]");
    }
    if (config.jump_prob < 0 || config.jump_prob > 1) {
        throw ConfigError("synthetic: jump_prob must be in [0, 1]");
    }
    if (config.jump_size < 1) {
        throw ConfigError("synthetic: jump_size must be >= 1");
    }

    // Group driver directions, one relaxation oscillator per group: the
    // driver keeps its direction until the cumulative drift reaches the
    // band, then reverses; occasional random flips decorrelate group
    // phases. driver[g][t] drives the close move from day t to t+1.
    Rng driver_rng(derive_seed(config.seed, 0));
    std::vector<std::vector<int>> driver(config.n_groups,
                                         std::vector<int>(config.n_days - 1));
    for (int g = 0; g < config.n_groups; ++g) {
        int dir = driver_rng.bernoulli(0.5) ? 1 : -1;
        int drift = 0;
        for (int t = 0; t < config.n_days - 1; ++t) {
            driver[g][t] = dir;
            drift += dir;
            if (driver_rng.bernoulli(config.driver_noise)) {
                dir = driver_rng.bernoulli(0.5) ? 1 : -1;
            } else if (dir * drift >= config.cycle_band) {
                dir = -dir;
            }
        }
    }

    for (int s = 0; s < config.n_stocks; ++s) {
        char name[16];
        std::snprintf(name, sizeof(name), "SYN%03d", s);
        Rng rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(s)));
        const int g = synthetic_group_of(config, s);

        OhlcvSeries series;
        series.ticker = name;
        std::vector<double> closes(config.n_days);
        closes[0] = 20.0 + 80.0 * rng.uniform();
        const double vol = 0.01 + 0.01 * rng.uniform();  // daily log-return scale
        for (int t = 0; t + 1 < config.n_days; ++t) {
            const int dir = rng.bernoulli(config.signal_strength) ? driver[g][t]
                                                                  : -driver[g][t];
            double mag = vol * std::fabs(rng.normal());
            if (rng.bernoulli(config.jump_prob)) mag *= config.jump_size;
            if (mag < 1e-6) mag = 1e-6;  // keep the direction strict
            closes[t + 1] = closes[t] * std::exp(dir * mag);
        }

        double base_volume = 1e5 * (1.0 + 9.0 * rng.uniform());
        for (int t = 0; t < config.n_days; ++t) {
            OhlcvBar bar;
            bar.date = snap.calendar[static_cast<std::size_t>(t)];
            bar.close = closes[t];
            const double prev = t > 0 ? closes[t - 1] : closes[0];
            bar.open = prev * std::exp(0.3 * vol * rng.normal());
            const double hi_pad = std::exp(0.3 * vol * std::fabs(rng.normal()));
            const double lo_pad = std::exp(-0.3 * vol * std::fabs(rng.normal()));
            bar.high = std::max(bar.open, bar.close) * hi_pad;
            bar.low = std::min(bar.open, bar.close) * lo_pad;
            bar.adj_close = bar.close;
            bar.volume = std::floor(base_volume * std::exp(0.5 * rng.normal()));
            series.bars.push_back(bar);
        }
        snap.tickers.push_back(name);
        snap.series.push_back(std::move(series));
    }
    return snap;
}

MarketSnapshot truncate_after(const MarketSnapshot& snapshot, const Date& cutoff) {
    MarketSnapshot out;
    out.tickers = snapshot.tickers;
    out.excluded = snapshot.excluded;
    for (const auto& d : snapshot.calendar)
        if (!(cutoff < d)) out.calendar.push_back(d);
    for (const auto& s : snapshot.series) {
        OhlcvSeries t;
        t.ticker = s.ticker;
        for (const auto& b : s.bars)
            if (!(cutoff < b.date)) t.bars.push_back(b);
        out.series.push_back(std::move(t));
    }
    return out;
}

SampleSplit split(const MarketSnapshot& snapshot, const WindowSpec& spec,
                  std::size_t min_train_days) {
    if (spec.validation_days <= 0) {
        throw ConfigError("validation_days must be positive");
    }
    const std::size_t target = snapshot.day_index(spec.target_day);
    const std::size_t train_end = snapshot.day_index(spec.train_end);
    if (train_end >= target) {
        throw WindowError("train_end must precede target_day");
    }
    const std::size_t d = static_cast<std::size_t>(spec.validation_days);
    if (target < d + min_train_days) {
        throw WindowError("insufficient history before target day " +
                          spec.target_day.to_string());
    }
    SampleSplit out;
    for (std::size_t i = target - d; i < target; ++i) out.validation_days.push_back(i);
    for (std::size_t i = 0; i < target - d && i <= train_end; ++i)
        out.train_days.push_back(i);
    if (out.train_days.size() < min_train_days) {
        throw WindowError("fewer than " + std::to_string(min_train_days) +
                          " training days available");
    }
    return out;
}

}  // namespace gcnet
