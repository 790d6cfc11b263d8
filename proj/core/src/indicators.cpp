#include "gcnet/indicators.hpp"

#include <algorithm>
#include <cmath>

#include "gcnet/error.hpp"

namespace gcnet {

const std::array<std::string, kNumFeatures>& feature_schema() {
    static const std::array<std::string, kNumFeatures> names = {
        "OP",    "HP",     "LP",    "CP",    "Volume", "CCI",   "SAR",   "ADX",
        "MFI",   "RSI",    "SK",    "SD",    "RSI-S",  "BB-S",  "MACD-S",
        "SAR-S", "ADX-S",  "S-S",   "MFI-S", "CCI-S",  "V-S",   "CPOP-S",
        "CPCPY-S"};
    return names;
}

const std::array<std::string, kNumSignals>& signal_schema() {
    static const std::array<std::string, kNumSignals> names = {
        "RSI-S", "BB-S",  "MACD-S", "SAR-S",  "ADX-S",  "S-S",
        "MFI-S", "CCI-S", "V-S",    "CPOP-S", "CPCPY-S"};
    return names;
}

namespace {

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// Trailing-window mean over [max(0, t+1-window), t].
double trailing_mean(const std::vector<double>& v, std::size_t t, int window) {
    const std::size_t lo = t + 1 >= static_cast<std::size_t>(window)
                               ? t + 1 - static_cast<std::size_t>(window)
                               : 0;
    double sum = 0;
    for (std::size_t i = lo; i <= t; ++i) sum += v[i];
    return sum / static_cast<double>(t - lo + 1);
}

std::vector<double> ema(const std::vector<double>& v, int period) {
    std::vector<double> out(v.size());
    if (v.empty()) return out;
    const double alpha = 2.0 / (period + 1.0);
    out[0] = v[0];
    for (std::size_t t = 1; t < v.size(); ++t)
        out[t] = alpha * v[t] + (1.0 - alpha) * out[t - 1];
    return out;
}

}  // namespace

IndicatorTable::IndicatorTable(const OhlcvSeries& series, const IndicatorConfig& config)
    : n_(series.bars.size()), cfg_(config) {
    open_.resize(n_);
    high_.resize(n_);
    low_.resize(n_);
    close_.resize(n_);
    volume_.resize(n_);
    for (std::size_t t = 0; t < n_; ++t) {
        const auto& b = series.bars[t];
        open_[t] = b.open;
        high_[t] = b.high;
        low_[t] = b.low;
        close_[t] = b.close;
        volume_[t] = b.volume;
    }
    if (n_ == 0) return;

    // RSI, Wilder smoothing; flat series pinned to 50.
    rsi_.assign(n_, 50.0);
    {
        const int p = cfg_.rsi_period;
        double avg_gain = 0, avg_loss = 0;
        for (std::size_t t = 1; t < n_; ++t) {
            const double chg = close_[t] - close_[t - 1];
            const double gain = std::max(chg, 0.0);
            const double loss = std::max(-chg, 0.0);
            if (t <= static_cast<std::size_t>(p)) {
                // growing-window mean until the first full period
                avg_gain = (avg_gain * (static_cast<double>(t) - 1) + gain) /
                           static_cast<double>(t);
                avg_loss = (avg_loss * (static_cast<double>(t) - 1) + loss) /
                           static_cast<double>(t);
            } else {
                avg_gain = (avg_gain * (p - 1) + gain) / p;
                avg_loss = (avg_loss * (p - 1) + loss) / p;
            }
            if (avg_gain == 0.0 && avg_loss == 0.0) {
                rsi_[t] = 50.0;
            } else {
                rsi_[t] = 100.0 * avg_gain / (avg_gain + avg_loss);
            }
        }
    }

    // Bollinger bands, population stddev over the trailing window.
    bb_lower_.resize(n_);
    bb_upper_.resize(n_);
    for (std::size_t t = 0; t < n_; ++t) {
        const double m = trailing_mean(close_, t, cfg_.bollinger_period);
        const std::size_t lo =
            t + 1 >= static_cast<std::size_t>(cfg_.bollinger_period)
                ? t + 1 - static_cast<std::size_t>(cfg_.bollinger_period)
                : 0;
        double ss = 0;
        for (std::size_t i = lo; i <= t; ++i) ss += (close_[i] - m) * (close_[i] - m);
        const double sd = std::sqrt(ss / static_cast<double>(t - lo + 1));
        bb_lower_[t] = m - cfg_.bollinger_sigma * sd;
        bb_upper_[t] = m + cfg_.bollinger_sigma * sd;
    }

    // MACD line and its signal EMA.
    {
        const auto fast = ema(close_, cfg_.macd_fast);
        const auto slow = ema(close_, cfg_.macd_slow);
        macd_.resize(n_);
        for (std::size_t t = 0; t < n_; ++t) macd_[t] = fast[t] - slow[t];
        macd_signal_ = ema(macd_, cfg_.macd_signal);
    }

    // Parabolic SAR.
    sar_.resize(n_);
    {
        bool up = true;
        double sar = low_[0], ep = high_[0], af = cfg_.sar_step;
        sar_[0] = sar;
        for (std::size_t t = 1; t < n_; ++t) {
            double next = sar + af * (ep - sar);
            if (up) {
                next = std::min(next, low_[t - 1]);
                if (t >= 2) next = std::min(next, low_[t - 2]);
                if (low_[t] < next) {  // reversal to downtrend
                    up = false;
                    next = ep;
                    ep = low_[t];
                    af = cfg_.sar_step;
                } else if (high_[t] > ep) {
                    ep = high_[t];
                    af = std::min(af + cfg_.sar_step, cfg_.sar_max);
                }
            } else {
                next = std::max(next, high_[t - 1]);
                if (t >= 2) next = std::max(next, high_[t - 2]);
                if (high_[t] > next) {  // reversal to uptrend
                    up = true;
                    next = ep;
                    ep = high_[t];
                    af = cfg_.sar_step;
                } else if (low_[t] < ep) {
                    ep = low_[t];
                    af = std::min(af + cfg_.sar_step, cfg_.sar_max);
                }
            }
            sar = next;
            sar_[t] = sar;
        }
    }

    // ADX with +DI / -DI, Wilder smoothing.
    adx_.assign(n_, 0.0);
    plus_di_.assign(n_, 0.0);
    minus_di_.assign(n_, 0.0);
    {
        const int p = cfg_.adx_period;
        double s_tr = 0, s_pdm = 0, s_mdm = 0;  // Wilder-smoothed sums
        double adx = 0, dx_sum = 0;
        for (std::size_t t = 1; t < n_; ++t) {
            const double tr =
                std::max({high_[t] - low_[t], std::fabs(high_[t] - close_[t - 1]),
                          std::fabs(low_[t] - close_[t - 1])});
            const double up_move = high_[t] - high_[t - 1];
            const double down_move = low_[t - 1] - low_[t];
            const double pdm = (up_move > down_move && up_move > 0) ? up_move : 0.0;
            const double mdm = (down_move > up_move && down_move > 0) ? down_move : 0.0;
            if (t <= static_cast<std::size_t>(p)) {
                s_tr += tr;
                s_pdm += pdm;
                s_mdm += mdm;
            } else {
                s_tr += tr - s_tr / p;
                s_pdm += pdm - s_pdm / p;
                s_mdm += mdm - s_mdm / p;
            }
            const double pdi = s_tr > 0 ? 100.0 * s_pdm / s_tr : 0.0;
            const double mdi = s_tr > 0 ? 100.0 * s_mdm / s_tr : 0.0;
            plus_di_[t] = pdi;
            minus_di_[t] = mdi;
            const double dx = (pdi + mdi) > 0 ? 100.0 * std::fabs(pdi - mdi) / (pdi + mdi)
                                              : 0.0;
            const std::size_t first_adx = 2 * static_cast<std::size_t>(p) - 1;
            if (t < static_cast<std::size_t>(p)) {
                adx_[t] = 0.0;
            } else if (t < first_adx) {
                dx_sum += dx;
                adx = dx_sum / static_cast<double>(t - p + 1);
                adx_[t] = adx;
            } else {
                if (t == first_adx) {
                    dx_sum += dx;
                    adx = dx_sum / p;
                } else {
                    adx = (adx * (p - 1) + dx) / p;
                }
                adx_[t] = adx;
            }
        }
    }

    // Slow stochastic %K / %D.
    sk_.resize(n_);
    sd_.resize(n_);
    {
        std::vector<double> fast_k(n_);
        for (std::size_t t = 0; t < n_; ++t) {
            const std::size_t lo =
                t + 1 >= static_cast<std::size_t>(cfg_.stochastic_period)
                    ? t + 1 - static_cast<std::size_t>(cfg_.stochastic_period)
                    : 0;
            double hh = high_[lo], ll = low_[lo];
            for (std::size_t i = lo; i <= t; ++i) {
                hh = std::max(hh, high_[i]);
                ll = std::min(ll, low_[i]);
            }
            fast_k[t] = hh > ll ? 100.0 * (close_[t] - ll) / (hh - ll) : 50.0;
        }
        for (std::size_t t = 0; t < n_; ++t)
            sk_[t] = trailing_mean(fast_k, t, cfg_.stochastic_smooth);
        for (std::size_t t = 0; t < n_; ++t)
            sd_[t] = trailing_mean(sk_, t, cfg_.stochastic_smooth);
    }

    // Money flow index.
    mfi_.assign(n_, 50.0);
    {
        std::vector<double> tp(n_), pos(n_, 0.0), neg(n_, 0.0);
        for (std::size_t t = 0; t < n_; ++t) tp[t] = (high_[t] + low_[t] + close_[t]) / 3.0;
        for (std::size_t t = 1; t < n_; ++t) {
            const double flow = tp[t] * volume_[t];
            if (tp[t] > tp[t - 1]) pos[t] = flow;
            else if (tp[t] < tp[t - 1]) neg[t] = flow;
        }
        for (std::size_t t = 1; t < n_; ++t) {
            const std::size_t lo =
                t >= static_cast<std::size_t>(cfg_.mfi_period)
                    ? t - static_cast<std::size_t>(cfg_.mfi_period) + 1
                    : 1;
            double p = 0, m = 0;
            for (std::size_t i = lo; i <= t; ++i) {
                p += pos[i];
                m += neg[i];
            }
            mfi_[t] = (p + m) > 0 ? 100.0 * p / (p + m) : 50.0;
        }
    }

    // Commodity channel index.
    cci_.assign(n_, 0.0);
    {
        std::vector<double> tp(n_);
        for (std::size_t t = 0; t < n_; ++t) tp[t] = (high_[t] + low_[t] + close_[t]) / 3.0;
        for (std::size_t t = 0; t < n_; ++t) {
            const double m = trailing_mean(tp, t, cfg_.cci_period);
            const std::size_t lo =
                t + 1 >= static_cast<std::size_t>(cfg_.cci_period)
                    ? t + 1 - static_cast<std::size_t>(cfg_.cci_period)
                    : 0;
            double dev = 0;
            for (std::size_t i = lo; i <= t; ++i) dev += std::fabs(tp[i] - m);
            dev /= static_cast<double>(t - lo + 1);
            cci_[t] = dev > 0 ? (tp[t] - m) / (0.015 * dev) : 0.0;
        }
    }

    // Trailing volume average over the previous volume_avg_period days
    // (current day excluded).
    vol_avg_.resize(n_);
    for (std::size_t t = 0; t < n_; ++t) {
        if (t == 0) {
            vol_avg_[t] = volume_[0];
            continue;
        }
        vol_avg_[t] = trailing_mean(volume_, t - 1, cfg_.volume_avg_period);
    }
}

SignalVector IndicatorTable::signals(std::size_t day) const {
    if (day >= n_) throw ContractError("signals: day out of range");
    if (day < first_valid_day()) {
        throw WindowError("signals: insufficient lookback at day " + std::to_string(day));
    }
    const std::size_t t = day;
    SignalVector s;
    // RSI-S
    s.values[0] = rsi_[t] < 30 ? 1.0 : (rsi_[t] > 70 ? -1.0 : 0.0);
    // BB-S
    s.values[1] = close_[t] < bb_lower_[t] ? 1.0 : (close_[t] > bb_upper_[t] ? -1.0 : 0.0);
    // MACD-S
    s.values[2] = sign(macd_[t] - macd_signal_[t]);
    // SAR-S
    s.values[3] = sar_[t] < close_[t] ? 1.0 : -1.0;
    // ADX-S
    s.values[4] = adx_[t] > 25 ? sign(plus_di_[t] - minus_di_[t]) : 0.0;
    // S-S
    s.values[5] = sk_[t] < 20 ? 1.0 : (sk_[t] > 80 ? -1.0 : 0.0);
    // MFI-S
    s.values[6] = mfi_[t] < 20 ? 1.0 : (mfi_[t] > 80 ? -1.0 : 0.0);
    // CCI-S
    s.values[7] = cci_[t] < -100 ? 1.0 : (cci_[t] > 100 ? -1.0 : 0.0);
    // V-S
    s.values[8] = sign(volume_[t] - vol_avg_[t]);
    // CPOP-S
    s.values[9] = sign(close_[t] - open_[t]);
    // CPCPY-S
    s.values[10] = t > 0 ? sign(close_[t] - close_[t - 1]) : 0.0;
    return s;
}

FeatureVector IndicatorTable::features(std::size_t day) const {
    const SignalVector s = signals(day);  // validates the day
    const std::size_t t = day;
    FeatureVector f;
    f.values[0] = open_[t];
    f.values[1] = high_[t];
    f.values[2] = low_[t];
    f.values[3] = close_[t];
    f.values[4] = volume_[t];
    f.values[5] = cci_[t];
    f.values[6] = sar_[t];
    f.values[7] = adx_[t];
    f.values[8] = mfi_[t];
    f.values[9] = rsi_[t];
    f.values[10] = sk_[t];
    f.values[11] = sd_[t];
    for (int i = 0; i < kNumSignals; ++i) f.values[12 + i] = s.values[i];
    for (double v : f.values) {
        if (!std::isfinite(v)) throw ContractError("non-finite feature value");
    }
    return f;
}

namespace {
std::size_t find_day(const OhlcvSeries& series, const Date& day) {
    for (std::size_t t = 0; t < series.bars.size(); ++t)
        if (series.bars[t].date == day) return t;
    throw WindowError("day " + day.to_string() + " not in series " + series.ticker);
}
}  // namespace

FeatureVector compute_features(const OhlcvSeries& series, const Date& day,
                               const IndicatorConfig& config) {
    return IndicatorTable(series, config).features(find_day(series, day));
}

SignalVector compute_signals(const OhlcvSeries& series, const Date& day,
                             const IndicatorConfig& config) {
    return IndicatorTable(series, config).signals(find_day(series, day));
}

int movement_label(const OhlcvSeries& series, std::size_t day_index) {
    if (day_index + 1 >= series.bars.size()) {
        throw WindowError("movement label needs the next day's close");
    }
    return series.bars[day_index + 1].close > series.bars[day_index].close ? 1 : -1;
}

int movement_label(const OhlcvSeries& series, const Date& day) {
    return movement_label(series, find_day(series, day));
}

}  // namespace gcnet
