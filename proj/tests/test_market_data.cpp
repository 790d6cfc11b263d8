#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gcnet/error.hpp"
#include "gcnet/market_data.hpp"

using namespace gcnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gcnet_md_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string flat_csv(const std::vector<std::string>& rows) {
    std::string s = "date,open,high,low,close,adj_close,volume\n";
    for (const auto& r : rows) s += r + "\n";
    return s;
}

std::vector<std::string> ten_weekdays() {
    std::vector<std::string> days;
    Date d{2020, 1, 6};
    for (int i = 0; i < 10; ++i) {
        days.push_back(d.to_string());
        d = d.next_weekday();
    }
    return days;
}

std::vector<int> directions(const OhlcvSeries& s) {
    std::vector<int> out;
    for (std::size_t t = 0; t + 1 < s.bars.size(); ++t)
        out.push_back(s.bars[t + 1].close > s.bars[t].close ? 1 : -1);
    return out;
}

}  // namespace

TEST_CASE("load_csv aligns two identical calendars") {
    TempDir dir;
    const auto days = ten_weekdays();
    std::vector<std::string> rows;
    for (const auto& d : days) rows.push_back(d + ",10,11,9,10.5,10.5,1000");
    write_file(dir.path / "AAA.csv", flat_csv(rows));
    write_file(dir.path / "BBB.csv", flat_csv(rows));

    const auto snap = load_csv(dir.path.string());
    CHECK(snap.tickers == std::vector<std::string>{"AAA", "BBB"});
    CHECK(snap.calendar.size() == 10);
    CHECK(snap.excluded.empty());
    for (const auto& s : snap.series) {
        REQUIRE(s.bars.size() == 10);
        for (const auto& b : s.bars) CHECK(!b.filled);
    }
}

TEST_CASE("load_csv forward-fills a missing interior date") {
    TempDir dir;
    std::vector<std::string> days;
    {
        Date d{2020, 1, 6};
        for (int i = 0; i < 40; ++i) {
            days.push_back(d.to_string());
            d = d.next_weekday();
        }
    }
    std::vector<std::string> full, gapped;
    for (std::size_t i = 0; i < days.size(); ++i) {
        const double close = 10.0 + static_cast<double>(i);
        const std::string c = std::to_string(close);
        const std::string row = days[i] + "," + std::to_string(close - 0.2) + "," +
                                std::to_string(close + 1.0) + "," +
                                std::to_string(close - 1.0) + "," + c + "," + c +
                                ",500";
        full.push_back(row);
        if (i != 4) gapped.push_back(row);
    }
    write_file(dir.path / "AAA.csv", flat_csv(full));
    write_file(dir.path / "BBB.csv", flat_csv(gapped));

    const auto snap = load_csv(dir.path.string());
    REQUIRE(snap.calendar.size() == 40);
    const auto& bbb = snap.series[1];
    REQUIRE(bbb.bars.size() == 40);
    // hand-built expectation: bar 4 copies the day-3 close, volume 0
    const auto& filled = bbb.bars[4];
    CHECK(filled.filled);
    CHECK(filled.close == doctest::Approx(13.0));
    CHECK(filled.open == doctest::Approx(13.0));
    CHECK(filled.high == doctest::Approx(13.0));
    CHECK(filled.low == doctest::Approx(13.0));
    CHECK(filled.volume == 0.0);
    CHECK(!bbb.bars[3].filled);
    CHECK(!bbb.bars[5].filled);
}

TEST_CASE("load_csv rejects high < low naming file and line") {
    TempDir dir;
    const auto days = ten_weekdays();
    std::vector<std::string> rows;
    for (const auto& d : days) rows.push_back(d + ",10,11,9,10.5,10.5,1000");
    rows[3] = days[3] + ",10,8,9,10.5,10.5,1000";  // high 8 < low 9
    write_file(dir.path / "BAD.csv", flat_csv(rows));

    try {
        load_csv(dir.path.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("BAD.csv") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);  // header + 4 data rows
    }
}

TEST_CASE("load_csv excludes tickers with too little history") {
    TempDir dir;
    std::vector<std::string> long_rows, short_rows;
    Date d{2020, 1, 6};
    for (int i = 0; i < 80; ++i) {
        const std::string row = d.to_string() + ",10,11,9,10.5,10.5,1000";
        long_rows.push_back(row);
        if (i >= 30) short_rows.push_back(row);
        d = d.next_weekday();
    }
    write_file(dir.path / "AAA.csv", flat_csv(long_rows));
    write_file(dir.path / "SHR.csv", flat_csv(short_rows));

    const auto snap = load_csv(dir.path.string());
    CHECK(snap.tickers == std::vector<std::string>{"AAA"});
    REQUIRE(snap.excluded.size() == 1);
    CHECK(snap.excluded[0].find("SHR") == 0);
}

TEST_CASE("synthetic determinism: same seed, identical snapshots") {
    SynthConfig cfg;
    cfg.n_stocks = 6;
    cfg.n_days = 150;
    cfg.seed = 42;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    REQUIRE(a.tickers == b.tickers);
    REQUIRE(a.calendar == b.calendar);
    for (std::size_t s = 0; s < a.series.size(); ++s) {
        for (std::size_t t = 0; t < a.series[s].bars.size(); ++t) {
            const auto& x = a.series[s].bars[t];
            const auto& y = b.series[s].bars[t];
            CHECK(x.open == y.open);
            CHECK(x.high == y.high);
            CHECK(x.low == y.low);
            CHECK(x.close == y.close);
            CHECK(x.volume == y.volume);
        }
    }
}

TEST_CASE("synthetic bars satisfy OHLC invariants") {
    SynthConfig cfg;
    cfg.n_stocks = 4;
    cfg.n_days = 200;
    cfg.seed = 7;
    const auto snap = generate_synthetic(cfg);
    for (const auto& s : snap.series)
        for (const auto& b : s.bars) CHECK(b.valid());
}

TEST_CASE("signal_strength 1.0 with one group couples every stock") {
    SynthConfig cfg;
    cfg.n_stocks = 5;
    cfg.n_days = 150;
    cfg.n_groups = 1;
    cfg.signal_strength = 1.0;
    cfg.seed = 3;
    const auto snap = generate_synthetic(cfg);
    const auto ref = directions(snap.series[0]);
    for (std::size_t s = 1; s < snap.series.size(); ++s)
        CHECK(directions(snap.series[s]) == ref);
}

TEST_CASE("signal_strength 0.5 leaves stock directions independent") {
    // With no signal, two same-group stocks' direction sequences are
    // independent Bernoulli(1/2); a 2x2 chi-square stays under the
    // alpha = 0.01 critical value (6.635, 1 dof).
    SynthConfig cfg;
    cfg.n_stocks = 2;
    cfg.n_groups = 1;
    cfg.n_days = 10000;
    cfg.n_groups = 1;
    cfg.signal_strength = 0.5;
    cfg.seed = 5;
    const auto snap = generate_synthetic(cfg);
    const auto a = directions(snap.series[0]);
    const auto b = directions(snap.series[1]);
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        if (a[t] > 0 && b[t] > 0) ++n11;
        else if (a[t] > 0) ++n10;
        else if (b[t] > 0) ++n01;
        else ++n00;
    }
    const double n = n11 + n10 + n01 + n00;
    const double num = n11 * n00 - n10 * n01;
    const double chi2 = n * num * num /
                        ((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00));
    CHECK(chi2 < 6.635);
}

TEST_CASE("synthetic config validation") {
    SynthConfig cfg;
    cfg.n_stocks = 1;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.n_days = 60;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.signal_strength = 0.3;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.signal_strength = 1.2;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.cycle_band = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.driver_noise = 1.5;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

TEST_CASE("save_csv then load_csv round-trips a snapshot") {
    SynthConfig cfg;
    cfg.n_stocks = 3;
    cfg.n_days = 120;
    cfg.seed = 9;
    const auto snap = generate_synthetic(cfg);

    TempDir dir;
    save_csv(snap, dir.path.string());
    const auto back = load_csv(dir.path.string());

    REQUIRE(back.tickers == snap.tickers);
    REQUIRE(back.calendar == snap.calendar);
    for (std::size_t s = 0; s < snap.series.size(); ++s) {
        for (std::size_t t = 0; t < snap.calendar.size(); ++t) {
            const auto& x = snap.series[s].bars[t];
            const auto& y = back.series[s].bars[t];
            CHECK(x.close == y.close);  // %.17g is exact for doubles
            CHECK(x.open == y.open);
            CHECK(x.volume == y.volume);
        }
    }
}

TEST_CASE("alignment is idempotent") {
    SynthConfig cfg;
    cfg.n_stocks = 3;
    cfg.n_days = 120;
    cfg.seed = 13;
    TempDir d1, d2;
    save_csv(generate_synthetic(cfg), d1.path.string());
    const auto once = load_csv(d1.path.string());
    save_csv(once, d2.path.string());
    const auto twice = load_csv(d2.path.string());
    REQUIRE(once.calendar == twice.calendar);
    for (std::size_t s = 0; s < once.series.size(); ++s)
        for (std::size_t t = 0; t < once.calendar.size(); ++t)
            CHECK(once.series[s].bars[t].close == twice.series[s].bars[t].close);
}

TEST_CASE("split: 100 prior days with d=20 gives 80 train, 20 validation") {
    SynthConfig cfg;
    cfg.n_stocks = 2;
    cfg.n_groups = 1;
    cfg.n_days = 120;
    cfg.seed = 1;
    const auto snap = generate_synthetic(cfg);

    WindowSpec spec;
    spec.target_day = snap.calendar[100];
    spec.train_end = snap.calendar[79];
    spec.validation_days = 20;
    const auto parts = split(snap, spec);
    CHECK(parts.train_days.size() == 80);
    CHECK(parts.validation_days.size() == 20);
    // walk-forward purity
    CHECK(parts.train_days.back() < parts.validation_days.front());
    CHECK(parts.validation_days.back() < 100);
    CHECK(parts.validation_days.front() == 80);
    CHECK(parts.validation_days.back() == 99);
}

TEST_CASE("split rejects d=0 and a target with no history") {
    SynthConfig cfg;
    cfg.n_stocks = 2;
    cfg.n_groups = 1;
    cfg.n_days = 120;
    cfg.seed = 1;
    const auto snap = generate_synthetic(cfg);

    WindowSpec spec;
    spec.target_day = snap.calendar[100];
    spec.train_end = snap.calendar[79];
    spec.validation_days = 0;
    CHECK_THROWS_AS(split(snap, spec), ConfigError);

    spec.validation_days = 20;
    spec.target_day = snap.calendar[0];
    spec.train_end = snap.calendar[0];
    CHECK_THROWS_AS(split(snap, spec), WindowError);

    spec.target_day = snap.calendar[45];  // < 40 train days left
    spec.train_end = snap.calendar[24];
    CHECK_THROWS_AS(split(snap, spec), WindowError);
}

TEST_CASE("truncate_after drops bars past the cutoff") {
    SynthConfig cfg;
    cfg.n_stocks = 2;
    cfg.n_groups = 1;
    cfg.n_days = 130;
    cfg.seed = 2;
    const auto snap = generate_synthetic(cfg);
    const Date cutoff = snap.calendar[99];
    const auto cut = truncate_after(snap, cutoff);
    CHECK(cut.n_days() == 100);
    for (const auto& s : cut.series) {
        CHECK(s.bars.size() == 100);
        CHECK(!(cutoff < s.bars.back().date));
    }
    // bars kept are bit-identical to the source
    CHECK(cut.series[0].bars[99].close == snap.series[0].bars[99].close);
}

TEST_CASE("day_index finds calendar dates and rejects absences") {
    SynthConfig cfg;
    cfg.n_stocks = 2;
    cfg.n_groups = 1;
    cfg.n_days = 120;
    cfg.seed = 2;
    const auto snap = generate_synthetic(cfg);
    CHECK(snap.day_index(snap.calendar[17]) == 17);
    CHECK_THROWS_AS(snap.day_index(Date{1999, 1, 1}), WindowError);
}
