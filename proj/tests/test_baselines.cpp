#include <doctest.h>

#include <cmath>
#include <numeric>

#include "distress/baselines.hpp"
#include "distress/error.hpp"
#include "distress/metrics.hpp"
#include "distress/panel.hpp"
#include "distress/rng.hpp"
#include "distress/synth.hpp"
#include "distress/util.hpp"

using namespace distress;

namespace {

SupervisedTable toy_table(std::size_t n, std::size_t p, uint64_t seed,
                          double signal = 1.5) {
    Rng rng(seed);
    SupervisedTable table;
    table.n_features = p;
    for (std::size_t f = 0; f < p; ++f)
        table.feature_names.push_back("x" + std::to_string(f));
    table.n_rows = n;
    table.missing.assign(n * p, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double margin = -1.0;
        for (std::size_t f = 0; f < p; ++f) {
            const double x = rng.normal();
            table.values.push_back(x);
            if (f == 0) margin += signal * x;  // only feature 0 is informative
        }
        table.labels.push_back(rng.bernoulli(sigmoid(margin)) ? 1 : 0);
        table.firm_ids.push_back("F" + std::to_string(i));
        table.years.push_back(2010);
    }
    return table;
}

double penalized_ll(const SupervisedTable& table, const LogitModel& model,
                    double l2) {
    double ll = 0.0;
    for (std::size_t i = 0; i < table.n_rows; ++i) {
        double margin = model.intercept;
        for (std::size_t f = 0; f < table.n_features; ++f)
            margin += model.coefficients[f] * table.value(i, f);
        const double p = clamp_prob(sigmoid(margin));
        ll += table.labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    double penalty = 0.0;
    for (const auto c : model.coefficients) penalty += c * c;
    return ll - 0.5 * l2 * penalty;
}

}  // namespace

TEST_CASE("fit_logit: intercept-only recovers the log-odds of the mean") {
    SupervisedTable table;
    table.n_features = 0;
    table.n_rows = 8;
    table.missing.clear();
    table.labels = {1, 1, 0, 0, 0, 0, 0, 0};  // share 0.25
    table.firm_ids.assign(8, "F");
    table.years.assign(8, 2000);
    const auto model = fit_logit(table, 0.0);
    CHECK(model.intercept == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-8));
}

TEST_CASE("fit_logit: all-zero feature gets zero coefficient under any l2 > 0") {
    auto table = toy_table(200, 2, 5);
    for (std::size_t i = 0; i < table.n_rows; ++i)
        table.values[i * table.n_features + 1] = 0.0;
    for (const double l2 : {1e-6, 0.1, 10.0}) {
        const auto model = fit_logit(table, l2);
        CHECK(model.coefficients[1] == doctest::Approx(0.0).epsilon(1e-10));
    }
}

TEST_CASE("fit_logit: gradient at the optimum vanishes (finite differences)") {
    const auto table = toy_table(300, 3, 11);
    const double l2 = 0.5;
    const auto model = fit_logit(table, l2);
    const double h = 1e-6;
    const double base = penalized_ll(table, model, l2);
    for (std::size_t f = 0; f < table.n_features; ++f) {
        LogitModel shifted = model;
        shifted.coefficients[f] += h;
        const double up = penalized_ll(table, shifted, l2);
        shifted.coefficients[f] -= 2 * h;
        const double down = penalized_ll(table, shifted, l2);
        CHECK((up - down) / (2 * h) == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(base >= up - 1e-9);
    }
}

TEST_CASE("fit_logit error paths") {
    auto table = toy_table(50, 2, 3);
    table.missing[3] = 1;
    CHECK_THROWS_WITH_AS(fit_logit(table, 0.1), doctest::Contains("MissingInput"),
                         Error);

    auto separable = toy_table(40, 1, 7);
    for (std::size_t i = 0; i < separable.n_rows; ++i) {
        separable.values[i] = i < 20 ? -1.0 : 1.0;
        separable.labels[i] = i < 20 ? 0 : 1;
    }
    CHECK_THROWS_WITH_AS(fit_logit(separable, 0.0), doctest::Contains("Separation"),
                         Error);
}

TEST_CASE("lasso: lambda at lambda_max gives the null model") {
    const auto table = toy_table(200, 4, 13);
    const double ybar = static_cast<double>(table.count_label(1)) /
                        static_cast<double>(table.n_rows);

    // compute lambda_max the way the contract states
    std::vector<double> mean(table.n_features, 0.0), sd(table.n_features, 0.0);
    for (std::size_t f = 0; f < table.n_features; ++f) {
        for (std::size_t i = 0; i < table.n_rows; ++i) mean[f] += table.value(i, f);
        mean[f] /= static_cast<double>(table.n_rows);
        for (std::size_t i = 0; i < table.n_rows; ++i)
            sd[f] += (table.value(i, f) - mean[f]) * (table.value(i, f) - mean[f]);
        sd[f] = std::sqrt(sd[f] / static_cast<double>(table.n_rows));
    }
    double lambda_max = 0.0;
    for (std::size_t f = 0; f < table.n_features; ++f) {
        double score = 0.0;
        for (std::size_t i = 0; i < table.n_rows; ++i)
            score += (table.value(i, f) - mean[f]) / sd[f] *
                     (table.labels[i] - ybar);
        lambda_max = std::max(lambda_max,
                              std::abs(score) / static_cast<double>(table.n_rows));
    }

    const auto path = fit_logit_lasso(table, {lambda_max * 1.0001, lambda_max * 2});
    for (const auto& model : path.models) {
        for (const double c : model.coefficients) CHECK(c == 0.0);
        CHECK(model.intercept == doctest::Approx(logit(ybar)).epsilon(1e-6));
    }
    CHECK(path.support_size == std::vector<int>{0, 0});
}

TEST_CASE("lasso: the unpenalized limit matches fit_logit") {
    const auto table = toy_table(400, 3, 17);
    const auto reference = fit_logit(table, 0.0);
    const auto path = fit_logit_lasso(table, {0.0});
    REQUIRE(path.models.size() == 1);
    for (std::size_t f = 0; f < table.n_features; ++f)
        CHECK(path.models[0].coefficients[f] ==
              doctest::Approx(reference.coefficients[f]).epsilon(1e-4));
    CHECK(path.models[0].intercept ==
          doctest::Approx(reference.intercept).epsilon(1e-4));
}

TEST_CASE("lasso: KKT conditions hold along the default path") {
    const auto table = toy_table(250, 5, 19);
    const auto path = fit_logit_lasso(table);

    // standardize exactly as the contract documents (population variance)
    const std::size_t n = table.n_rows, p = table.n_features;
    std::vector<double> mean(p, 0.0), sd(p, 0.0);
    for (std::size_t f = 0; f < p; ++f) {
        for (std::size_t i = 0; i < n; ++i) mean[f] += table.value(i, f);
        mean[f] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            sd[f] += (table.value(i, f) - mean[f]) * (table.value(i, f) - mean[f]);
        sd[f] = std::sqrt(sd[f] / static_cast<double>(n));
    }

    for (std::size_t g = 0; g < path.lambdas.size(); g += 7) {
        const auto& model = path.models[g];
        const double lambda = path.lambdas[g];
        for (std::size_t f = 0; f < p; ++f) {
            double score = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double margin = model.intercept;
                for (std::size_t k = 0; k < p; ++k)
                    margin += model.coefficients[k] * table.value(i, k);
                score += (table.value(i, f) - mean[f]) / sd[f] *
                         (table.labels[i] - sigmoid(margin));
            }
            score /= static_cast<double>(n);
            const double standardized_coef = model.coefficients[f] * sd[f];
            if (standardized_coef == 0.0) {
                CHECK(std::abs(score) <= lambda + 1e-6);
            } else {
                CHECK(score == doctest::Approx(lambda * (standardized_coef > 0 ? 1 : -1))
                                   .epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("lasso: support is invariant to feature rescaling") {
    const auto table = toy_table(300, 4, 23);
    auto scaled = table;
    for (std::size_t i = 0; i < scaled.n_rows; ++i)
        scaled.values[i * scaled.n_features + 2] *= 10.0;

    const auto a = fit_logit_lasso(table);
    const auto b = fit_logit_lasso(scaled);
    REQUIRE(a.models.size() == b.models.size());
    for (std::size_t g = 0; g < a.models.size(); ++g)
        for (std::size_t f = 0; f < table.n_features; ++f)
            CHECK((a.models[g].coefficients[f] != 0.0) ==
                  (b.models[g].coefficients[f] != 0.0));
    CHECK(a.selected == b.selected);
}

TEST_CASE("lasso: EBIC with gamma zero reduces to BIC") {
    const auto table = toy_table(150, 3, 29);
    const auto path = fit_logit_lasso(table, {}, 0.0);
    for (std::size_t g = 0; g < path.lambdas.size(); ++g) {
        const auto& model = path.models[g];
        double ll = 0.0;
        for (std::size_t i = 0; i < table.n_rows; ++i) {
            double margin = model.intercept;
            for (std::size_t f = 0; f < table.n_features; ++f)
                margin += model.coefficients[f] * table.value(i, f);
            const double prob = clamp_prob(sigmoid(margin));
            ll += table.labels[i] ? std::log(prob) : std::log(1.0 - prob);
        }
        const double bic = -2.0 * ll + path.support_size[g] *
                                           std::log(static_cast<double>(table.n_rows));
        CHECK(path.ebic[g] == doctest::Approx(bic).epsilon(1e-9));
    }
}

TEST_CASE("lasso: EBIC recovers planted signal features") {
    int hits = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        SynthConfig config;
        config.n_firms = 1200;
        config.n_years = 6;
        config.n_features = 10;  // features 0..2 signal, 3..9 noise
        config.distress_loading = 2.0;
        config.seed = seed;
        const auto table = lag_join(generate_panel(config).panel);
        const auto path = fit_logit_lasso(table);
        const auto& chosen = path.models[static_cast<std::size_t>(path.selected)];
        const bool all_signal = chosen.coefficients[0] != 0.0 &&
                                chosen.coefficients[1] != 0.0 &&
                                chosen.coefficients[2] != 0.0;
        hits += all_signal ? 1 : 0;
    }
    CHECK(hits >= 8);
}

TEST_CASE("imputation") {
    FirmPanel panel;
    panel.feature_names = {"x", "y"};
    auto add = [&](const std::string& id, double x, bool x_missing, double y) {
        FirmYearRecord record;
        record.firm_id = id;
        record.year = 2000;
        record.features = {x, y};
        record.missing = {static_cast<uint8_t>(x_missing), 0};
        panel.records.push_back(record);
    };
    add("A", 1.0, false, 4.0);
    add("B", 2.0, false, 5.0);
    add("C", 3.0, false, 6.0);
    add("D", 0.0, true, 7.0);

    SUBCASE("no missing entries is the identity") {
        FirmPanel clean = panel;
        clean.records.pop_back();
        const auto imputed = impute(clean, ImputeStrategy::Median);
        for (std::size_t i = 0; i < clean.records.size(); ++i)
            CHECK(imputed.records[i].features == clean.records[i].features);
    }

    SUBCASE("odd-count median fills the gap") {
        const auto imputed = impute(panel, ImputeStrategy::Median);
        CHECK(imputed.records[3].features[0] == 2.0);
        CHECK(imputed.records[3].missing[0] == 0);
    }

    SUBCASE("even-count median takes the lower middle") {
        add("E", 10.0, false, 8.0);
        add("F", 0.0, true, 9.0);
        const auto imputed = impute(panel, ImputeStrategy::Median);
        // observed {1,2,3,10}: lower middle is 2
        CHECK(imputed.records[3].features[0] == 2.0);
    }

    SUBCASE("median preserves per-feature observed medians") {
        const auto imputed = impute(panel, ImputeStrategy::Median);
        std::vector<double> observed;
        for (std::size_t i = 0; i < 3; ++i)
            observed.push_back(imputed.records[i].features[0]);
        std::sort(observed.begin(), observed.end());
        CHECK(observed[1] == 2.0);
    }

    SUBCASE("out of range writes 1e20") {
        const auto imputed = impute(panel, ImputeStrategy::OutOfRange);
        CHECK(imputed.records[3].features[0] == 1e20);
    }

    SUBCASE("all-missing feature fails for median") {
        for (auto& record : panel.records) record.missing[0] = 1;
        CHECK_THROWS_WITH_AS(impute(panel, ImputeStrategy::Median),
                             doctest::Contains("AllMissingFeature"), Error);
        CHECK_NOTHROW(impute(panel, ImputeStrategy::OutOfRange));
    }
}

TEST_CASE("out-of-range imputation leaves a split candidate isolating the fills") {
    SynthConfig config;
    config.n_firms = 400;
    config.n_years = 5;
    config.n_features = 3;
    config.mnar_strength = 2.0;
    config.distress_loading = 2.0;
    config.seed = 3;
    const auto table = lag_join(generate_panel(config).panel);
    const auto filled = impute(table, ImputeStrategy::OutOfRange);

    BoostConfig boost;
    boost.missing_strategy = MissingStrategy::RequireComplete;
    boost.n_rounds = 20;
    const auto model = fit_boosted(filled, boost, 2);

    // some split must separate the out-of-range cluster from real values
    bool isolating_split = false;
    double largest_real = 0.0;
    for (std::size_t i = 0; i < table.values.size(); ++i)
        if (!table.missing[i])
            largest_real = std::max(largest_real, std::abs(table.values[i]));
    for (const auto& tree : model.trees)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf() && node.rule.threshold > largest_real &&
                node.rule.threshold < kOutOfRangeValue)
                isolating_split = true;
    CHECK(isolating_split);
}

TEST_CASE("stacker: recovers the true generator") {
    Rng rng(31);
    const std::size_t n = 10000;
    std::vector<double> truth(n), distorted(n), constant(n, 0.2);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        truth[i] = 0.05 + 0.9 * rng.uniform();
        distorted[i] = clamp_prob(truth[i] * truth[i]);
        labels[i] = rng.bernoulli(truth[i]) ? 1 : 0;
    }
    const auto weights = fit_stacker({truth, distorted, constant}, labels);
    CHECK(weights[0] >= 0.9);
    double sum = 0.0;
    for (const double w : weights) {
        CHECK(w >= 0.0);
        sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("stacker: ties and the convexity guarantee") {
    Rng rng(37);
    const std::size_t n = 2000;
    std::vector<double> a(n), b(n), c(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = 0.1 + 0.8 * rng.uniform();
        b[i] = a[i];  // identical twin
        c[i] = clamp_prob(1.2 * a[i] * rng.uniform());
        labels[i] = rng.bernoulli(a[i]) ? 1 : 0;
    }
    const auto weights = fit_stacker({a, b, c}, labels);
    double sum = 0.0;
    for (const double w : weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    auto loss_of = [&](const std::vector<double>& probs) {
        return log_loss(probs, labels);
    };
    std::vector<double> mixed(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        mixed[i] = weights[0] * a[i] + weights[1] * b[i] + weights[2] * c[i];
    const double stacked = loss_of(mixed);
    const double best_single =
        std::min({loss_of(a), loss_of(b), loss_of(c)});
    CHECK(stacked <= best_single + 1e-9);
}
