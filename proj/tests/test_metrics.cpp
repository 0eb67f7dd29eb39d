#include <doctest.h>

#include <cmath>

#include "distress/error.hpp"
#include "distress/metrics.hpp"
#include "distress/rng.hpp"
#include "distress/synth.hpp"
#include "oracles.hpp"

using namespace distress;

TEST_CASE("roc_auc basics") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1}) ==
          0.5);
    CHECK(roc_auc(std::vector<double>{0.8, 0.6, 0.4, 0.2},
                  std::vector<int>{1, 0, 1, 0}) == doctest::Approx(0.75));
    CHECK_THROWS_WITH_AS(roc_auc(std::vector<double>{0.1, 0.2},
                                 std::vector<int>{1, 1}),
                         doctest::Contains("OneClass"), Error);
}

TEST_CASE("roc_auc invariances") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + static_cast<int>(rng.below(40));
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool pos = false, neg = false;
        for (int i = 0; i < n; ++i) {
            scores[i] = rng.uniform();
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
            (labels[i] ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        const double base = roc_auc(scores, labels);

        // strictly increasing transform preserves it
        std::vector<double> transformed(scores);
        for (auto& s : transformed) s = std::exp(3.0 * s) + 1.0;
        CHECK(roc_auc(transformed, labels) == doctest::Approx(base).epsilon(1e-12));

        // complement rule without ties (uniform draws are distinct a.s.)
        std::vector<double> negated(scores);
        for (auto& s : negated) s = -s;
        CHECK(roc_auc(negated, labels) == doctest::Approx(1.0 - base).epsilon(1e-12));
    }
}

TEST_CASE("pr_auc basics") {
    CHECK(pr_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1},
                 std::vector<int>{1, 1, 0, 0}) == 1.0);

    // single positive ranked last of 10
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        scores.push_back(1.0 - 0.05 * i);
        labels.push_back(i == 9 ? 1 : 0);
    }
    CHECK(pr_auc(scores, labels) == doctest::Approx(0.1));

    // constant classifier gives the prevalence
    std::vector<double> flat(20, 0.3);
    std::vector<int> mixed(20, 0);
    for (int i = 0; i < 6; ++i) mixed[i] = 1;
    CHECK(pr_auc(flat, mixed) == doctest::Approx(0.3));

    CHECK_THROWS_WITH_AS(pr_auc(std::vector<double>{0.4}, std::vector<int>{0}),
                         doctest::Contains("NoPositives"), Error);
}

TEST_CASE("f1 and bacc") {
    const auto a = f1_bacc(Confusion{8, 0, 90, 2});
    CHECK(a.bacc == doctest::Approx(0.9));
    const auto degenerate = f1_bacc(Confusion{0, 0, 5, 0});
    CHECK_FALSE(degenerate.f1_defined);
    CHECK_FALSE(degenerate.tpr_defined);
    CHECK(degenerate.f1 == 0.0);
    const auto perfect = f1_bacc(Confusion{10, 0, 10, 0});
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.bacc == 1.0);
}

TEST_CASE("pseudo_r2 closed forms") {
    std::vector<int> labels{1, 1, 0, 0};
    CHECK(pseudo_r2(std::vector<double>{1, 1, 0, 0}, labels) == 1.0);
    CHECK(pseudo_r2(std::vector<double>{0.5, 0.5, 0.5, 0.5}, labels) == 0.0);
    CHECK(pseudo_r2(std::vector<double>{0.9, 0.9, 0.1, 0.1}, labels) ==
          doctest::Approx(0.96));
}

TEST_CASE("chi squared 2x2") {
    const auto skewed = chi_squared_2x2({{{10, 20}, {20, 10}}});
    CHECK(skewed.statistic == doctest::Approx(20.0 / 3.0));
    CHECK(skewed.significant_1pct);

    const auto proportional = chi_squared_2x2({{{10, 20}, {20, 40}}});
    CHECK(proportional.statistic == doctest::Approx(0.0));
    CHECK_FALSE(proportional.significant_1pct);

    const auto swapped = chi_squared_2x2({{{20, 10}, {10, 20}}});
    CHECK(swapped.statistic == doctest::Approx(skewed.statistic));

    CHECK_THROWS_WITH_AS(chi_squared_2x2({{{0, 0}, {3, 4}}}),
                         doctest::Contains("ZeroMargin"), Error);
}

TEST_CASE("metrics agree with brute force on random instances") {
    Rng rng(67);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(47));
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // coarse grid makes ties common
            scores[i] = static_cast<double>(rng.below(8)) / 7.0;
            labels[i] = rng.bernoulli(0.35) ? 1 : 0;
            pos += labels[i];
        }
        if (pos == 0 || pos == n) continue;

        CHECK(roc_auc(scores, labels) ==
              doctest::Approx(oracle::roc_auc(scores, labels)).epsilon(1e-12));
        CHECK(pr_auc(scores, labels) ==
              doctest::Approx(oracle::pr_auc(scores, labels)).epsilon(1e-12));
        CHECK(pseudo_r2(scores, labels) ==
              doctest::Approx(oracle::pseudo_r2(scores, labels)).epsilon(1e-12));

        const auto confusion = confusion_at(scores, labels, 0.5);
        const auto fb = f1_bacc(confusion);
        CHECK(fb.f1 == doctest::Approx(oracle::f1(confusion.tp, confusion.fp,
                                                  confusion.fn))
                           .epsilon(1e-12));
        CHECK(fb.bacc == doctest::Approx(oracle::bacc(confusion.tp, confusion.fp,
                                                      confusion.tn, confusion.fn))
                             .epsilon(1e-12));
        CHECK(confusion.total() == n);
    }
}

TEST_CASE("missingness odds ratios: null vs MNAR") {
    int null_high = 0, mnar_high = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        SynthConfig config;
        config.n_firms = 600;
        config.n_years = 6;
        config.n_features = 3;
        config.mcar_rate = 0.15;
        config.seed = seed;
        const auto null_panel = generate_panel(config).panel;
        const auto null_rows = missingness_odds_ratios(null_panel);
        for (const auto& row : null_rows)
            if (row.odds_ratio < 0.8 || row.odds_ratio > 1.25) null_high += 1;

        config.mcar_rate = 0.02;
        config.mnar_strength = 2.0;
        const auto mnar_panel = generate_panel(config).panel;
        const auto mnar_rows = missingness_odds_ratios(mnar_panel);
        bool all_high = true;
        for (const auto& row : mnar_rows) all_high = all_high && row.odds_ratio > 1.5;
        mnar_high += all_high ? 1 : 0;
    }
    // null calibration: ORs stay near 1 for most feature-seed combinations
    CHECK(null_high <= 6);  // 30 feature-seed pairs total
    CHECK(mnar_high >= 9);
}

TEST_CASE("missingness odds ratios degenerate indicator") {
    SynthConfig config;
    config.n_firms = 50;
    config.n_years = 4;
    config.n_features = 2;
    config.seed = 5;
    auto panel = generate_panel(config).panel;  // no missingness at all
    CHECK_THROWS_WITH_AS(missingness_odds_ratios(panel),
                         doctest::Contains("DegenerateIndicator"), Error);
}
