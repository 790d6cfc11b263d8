#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcnet/date.hpp"

namespace gcnet {

struct OhlcvBar {
    Date date;
    double open = 0, high = 0, low = 0, close = 0, adj_close = 0;
    double volume = 0;
    bool filled = false;  // gap-filled, not observed

    bool valid() const {
        return open > 0 && high > 0 && low > 0 && close > 0 && adj_close > 0 &&
               volume >= 0 && low <= open && low <= close && high >= open &&
               high >= close;
    }
};

struct OhlcvSeries {
    std::string ticker;
    std::vector<OhlcvBar> bars;  // strictly increasing dates
};

// Immutable after load; ticker order defines node indices everywhere downstream.
struct MarketSnapshot {
    std::vector<std::string> tickers;        // sorted lexicographically
    std::vector<OhlcvSeries> series;         // one per ticker, aligned to calendar
    std::vector<Date> calendar;              // shared trading dates
    std::vector<std::string> excluded;       // tickers dropped during alignment

    std::size_t n_stocks() const { return tickers.size(); }
    std::size_t n_days() const { return calendar.size(); }

    // Index of a date in the calendar; throws WindowError if absent.
    std::size_t day_index(const Date& d) const;
};

struct WindowSpec {
    Date train_end;        // last training date (inclusive)
    int validation_days = 20;
    Date target_day;
};

struct SynthConfig {
    int n_stocks = 30;
    int n_days = 400;
    int n_groups = 3;
    double signal_strength = 0.75;  // in [0.5, 1]
    // Group drivers oscillate: direction holds until the cumulative drift
    // reaches cycle_band, then reverses; driver_noise is the per-day chance
    // of a random redirection (decorrelates group phases).
    int cycle_band = 8;
    double driver_noise = 0.05;
    // Heavy-tailed idiosyncratic moves: each day, with probability
    // jump_prob, a stock's move magnitude is scaled by jump_size.
    double jump_prob = 0.08;
    double jump_size = 12.0;
    std::uint64_t seed = 0;
};

// Load a directory of per-ticker CSV files (header: date,open,high,low,close,
// adj_close,volume). Calendar = union-majority alignment with forward-fill;
// tickers missing > 5% of the calendar or with < 60 usable bars are excluded.
MarketSnapshot load_csv(const std::string& dir);

// Geometric random walks with planted group structure: within a group each
// stock's next-day close direction equals the group driver's direction with
// probability signal_strength, the opposite otherwise.
MarketSnapshot generate_synthetic(const SynthConfig& config);

// Write a snapshot back out as per-ticker CSV files.
void save_csv(const MarketSnapshot& snapshot, const std::string& dir);

// Keep only bars dated <= cutoff.
MarketSnapshot truncate_after(const MarketSnapshot& snapshot, const Date& cutoff);

// Group assignment used by generate_synthetic (stock index -> group index).
int synthetic_group_of(const SynthConfig& config, int stock_index);

// Per-stock chronological sample split: validation = the spec.validation_days
// trading days immediately before target_day, training = all earlier days.
// Returned vectors hold calendar indices of the sample days.
struct SampleSplit {
    std::vector<std::size_t> train_days;
    std::vector<std::size_t> validation_days;
};
SampleSplit split(const MarketSnapshot& snapshot, const WindowSpec& spec,
                  std::size_t min_train_days = 40);

}  // namespace gcnet
