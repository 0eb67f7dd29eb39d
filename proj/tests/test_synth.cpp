#include <doctest.h>

#include <array>
#include <cmath>
#include <map>

#include "distress/error.hpp"
#include "distress/metrics.hpp"
#include "distress/synth.hpp"

using namespace distress;

TEST_CASE("zero missingness when both channels are off") {
    SynthConfig config;
    config.n_firms = 200;
    config.n_years = 5;
    config.seed = 1;
    const auto result = generate_panel(config);
    for (const auto& record : result.panel.records)
        for (const uint8_t m : record.missing) CHECK(m == 0);
}

TEST_CASE("same seed same panel, different seed different panel") {
    SynthConfig config;
    config.n_firms = 100;
    config.n_years = 6;
    config.mnar_strength = 1.0;
    config.mcar_rate = 0.05;
    config.seed = 42;
    const auto a = generate_panel(config);
    const auto b = generate_panel(config);
    REQUIRE(a.panel.records.size() == b.panel.records.size());
    for (std::size_t i = 0; i < a.panel.records.size(); ++i) {
        CHECK(a.panel.records[i].firm_id == b.panel.records[i].firm_id);
        CHECK(a.panel.records[i].features == b.panel.records[i].features);
        CHECK(a.panel.records[i].missing == b.panel.records[i].missing);
        CHECK(a.panel.records[i].failed == b.panel.records[i].failed);
    }
    config.seed = 43;
    const auto c = generate_panel(config);
    bool any_difference = c.panel.records.size() != a.panel.records.size();
    for (std::size_t i = 0; !any_difference && i < a.panel.records.size(); ++i)
        any_difference = a.panel.records[i].features != c.panel.records[i].features;
    CHECK(any_difference);
}

TEST_CASE("failure is absorbing") {
    SynthConfig config;
    config.n_firms = 400;
    config.n_years = 8;
    config.distress_loading = 2.0;
    config.seed = 3;
    const auto result = generate_panel(config);
    std::map<std::string, int> failure_year;
    for (const auto& record : result.panel.records)
        if (record.failed) failure_year[record.firm_id] = record.year;
    for (const auto& record : result.panel.records) {
        const auto it = failure_year.find(record.firm_id);
        if (it != failure_year.end()) CHECK(record.year <= it->second);
    }
    CHECK_NOTHROW(validate_panel(result.panel));
}

TEST_CASE("MNAR raises the missing rate among eventually failing firm-years") {
    double total_gap = 0.0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        SynthConfig config;
        config.n_firms = 800;
        config.n_years = 6;
        config.mnar_strength = 2.0;
        config.seed = seed;
        const auto result = generate_panel(config);

        std::map<std::string, bool> fails;
        for (const auto& record : result.panel.records)
            if (record.failed) fails[record.firm_id] = true;

        std::size_t failing_cells = 0, failing_missing = 0;
        std::size_t surviving_cells = 0, surviving_missing = 0;
        for (const auto& record : result.panel.records) {
            const bool failing = fails.count(record.firm_id) > 0;
            for (const uint8_t m : record.missing) {
                (failing ? failing_cells : surviving_cells) += 1;
                if (m) (failing ? failing_missing : surviving_missing) += 1;
            }
        }
        const double failing_rate = static_cast<double>(failing_missing) /
                                    static_cast<double>(failing_cells);
        const double surviving_rate = static_cast<double>(surviving_missing) /
                                      static_cast<double>(surviving_cells);
        total_gap += failing_rate - surviving_rate;
    }
    CHECK(total_gap / 10.0 >= 0.05);
}

TEST_CASE("marginal failure rate is monotone in hazard_base and loading") {
    auto failure_rate = [](double hazard_base, double loading) {
        double rate = 0.0;
        for (uint64_t seed = 0; seed < 10; ++seed) {
            SynthConfig config;
            config.n_firms = 500;
            config.n_years = 6;
            config.hazard_base = hazard_base;
            config.distress_loading = loading;
            config.seed = seed;
            const auto result = generate_panel(config);
            std::size_t failures = 0;
            for (const auto& record : result.panel.records)
                failures += record.failed;
            rate += static_cast<double>(failures) /
                    static_cast<double>(result.panel.records.size());
        }
        return rate / 10.0;
    };

    const std::array<double, 3> bases{0.01, 0.05, 0.15};
    double previous = -1.0;
    for (const double base : bases) {
        const double rate = failure_rate(base, 1.0);
        CHECK(rate >= previous);
        previous = rate;
    }
    const std::array<double, 3> loadings{0.0, 1.0, 2.0};
    previous = -1.0;
    for (const double loading : loadings) {
        const double rate = failure_rate(0.03, loading);
        CHECK(rate >= previous);
        previous = rate;
    }
}

TEST_CASE("with mnar off, missingness is independent of failure") {
    // chi-squared of (missing-any x failed) should reject at 1% in well under
    // 5% of seeds; 100 seeds keep the binomial tail negligible.
    int rejections = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SynthConfig config;
        config.n_firms = 300;
        config.n_years = 5;
        config.mcar_rate = 0.15;
        config.seed = seed;
        const auto result = generate_panel(config);
        std::array<std::array<double, 2>, 2> table{{{0.0, 0.0}, {0.0, 0.0}}};
        for (const auto& record : result.panel.records) {
            const bool any_missing = !record.complete();
            table[any_missing ? 1 : 0][record.failed] += 1.0;
        }
        if (chi_squared_2x2(table).significant_1pct) rejections += 1;
    }
    CHECK(rejections < 5);
}

TEST_CASE("bad configs are rejected") {
    SynthConfig config;
    config.hazard_base = 0.0;
    CHECK_THROWS_WITH_AS(generate_panel(config), doctest::Contains("BadConfig"),
                         Error);
    config = {};
    config.n_firms = 0;
    CHECK_THROWS_WITH_AS(generate_panel(config), doctest::Contains("BadConfig"),
                         Error);
    config = {};
    config.mcar_rate = 1.0;
    CHECK_THROWS_WITH_AS(generate_panel(config), doctest::Contains("BadConfig"),
                         Error);
}

TEST_CASE("ground truth stays out of the panel but matches its shape") {
    SynthConfig config;
    config.n_firms = 120;
    config.n_years = 5;
    config.persistent_fraction = 0.1;
    config.seed = 17;
    const auto result = generate_panel(config);
    REQUIRE(result.truth.size() == result.panel.records.size());
    std::size_t persistent = 0;
    for (std::size_t i = 0; i < result.truth.size(); ++i) {
        CHECK(result.truth[i].firm_id == result.panel.records[i].firm_id);
        CHECK(result.truth[i].year == result.panel.records[i].year);
        persistent += result.truth[i].persistent_distress;
    }
    CHECK(persistent > 0);
}
