#pragma once

#include <array>
#include <string>
#include <vector>

#include "gcnet/market_data.hpp"

namespace gcnet {

// Indicator lookback periods; textbook defaults, all overridable.
struct IndicatorConfig {
    int rsi_period = 14;
    int bollinger_period = 20;
    double bollinger_sigma = 2.0;
    int macd_fast = 12;
    int macd_slow = 26;
    int macd_signal = 9;
    double sar_step = 0.02;
    double sar_max = 0.2;
    int adx_period = 14;
    int stochastic_period = 14;
    int stochastic_smooth = 3;
    int mfi_period = 14;
    int cci_period = 20;
    int volume_avg_period = 5;
};

inline constexpr int kNumFeatures = 23;  // 12 raw/indicator values + 11 signals
inline constexpr int kNumSignals = 11;

// Minimum number of prior bars before the first feature-complete day
// (longest lookback: MACD slow 26 + signal 9).
inline constexpr std::size_t kMinLookback = 35;

const std::array<std::string, kNumFeatures>& feature_schema();
const std::array<std::string, kNumSignals>& signal_schema();

struct FeatureVector {
    std::array<double, kNumFeatures> values{};
};

struct SignalVector {
    std::array<double, kNumSignals> values{};  // each in {-1, 0, +1}
};

// Per-series causal indicator table: column t only depends on bars [0, t].
class IndicatorTable {
public:
    IndicatorTable(const OhlcvSeries& series, const IndicatorConfig& config = {});

    std::size_t n_days() const { return n_; }
    // First day with the full lookback available.
    std::size_t first_valid_day() const { return kMinLookback; }

    FeatureVector features(std::size_t day) const;
    SignalVector signals(std::size_t day) const;

private:
    std::size_t n_;
    IndicatorConfig cfg_;
    std::vector<double> open_, high_, low_, close_, volume_;
    std::vector<double> rsi_, bb_lower_, bb_upper_, macd_, macd_signal_, sar_,
        adx_, plus_di_, minus_di_, sk_, sd_, mfi_, cci_, vol_avg_;
};

// One-shot per-day entry points (recompute the table each call).
FeatureVector compute_features(const OhlcvSeries& series, const Date& day,
                               const IndicatorConfig& config = {});
SignalVector compute_signals(const OhlcvSeries& series, const Date& day,
                             const IndicatorConfig& config = {});

// +1 if close(day+1) > close(day), else -1 (ties fall).
int movement_label(const OhlcvSeries& series, const Date& day);
int movement_label(const OhlcvSeries& series, std::size_t day_index);

}  // namespace gcnet
