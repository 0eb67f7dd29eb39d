#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "distress/error.hpp"
#include "distress/panel.hpp"
#include "distress/rng.hpp"
#include "distress/synth.hpp"
#include "distress/util.hpp"

using namespace distress;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

const std::vector<std::string> kSchema{"a", "b", "c"};

}  // namespace

TEST_CASE("load_csv happy path and NA tokens") {
    const auto path = temp_path("panel_basic.csv");
    write_file(path,
               "firm_id,year,failed,a,b,c\n"
               "F1,2010,0,1.5,2.0,3.25\n");
    const auto panel = load_csv(path, kSchema);
    REQUIRE(panel.records.size() == 1);
    CHECK(panel.records[0].features[2] == 3.25);
    CHECK(panel.records[0].complete());

    write_file(path,
               "firm_id,year,failed,a,b,c\n"
               "F1,2010,0,1.5,2.0,NA\n"
               "F2,2010,1,nan,,7\n");
    const auto masked = load_csv(path, kSchema);
    CHECK(masked.records[0].missing == std::vector<uint8_t>{0, 0, 1});
    CHECK(masked.records[1].missing == std::vector<uint8_t>{1, 1, 0});
}

TEST_CASE("load_csv error paths") {
    const auto path = temp_path("panel_bad.csv");

    write_file(path, "firm_id,year,failed,a,b,c\nF1,2010,0,1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(path, kSchema), doctest::Contains("MalformedRow"),
                         Error);

    write_file(path, "firm_id,year,failed,a,b,c\nF1,2010,2,1,2,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path, kSchema), doctest::Contains("BadLabel"),
                         Error);

    write_file(path,
               "firm_id,year,failed,a,b,c\n"
               "F1,2010,0,1,2,3\n"
               "F1,2010,0,4,5,6\n");
    CHECK_THROWS_WITH_AS(load_csv(path, kSchema), doctest::Contains("DuplicateKey"),
                         Error);

    write_file(path, "firm_id,year,failed,a,c,b\nF1,2010,0,1,2,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path, kSchema),
                         doctest::Contains("SchemaMismatch"), Error);

    // records after a failure year violate the absorbing invariant
    write_file(path,
               "firm_id,year,failed,a,b,c\n"
               "F1,2010,1,1,2,3\n"
               "F1,2011,0,4,5,6\n");
    CHECK_THROWS_WITH_AS(load_csv(path, kSchema),
                         doctest::Contains("InvariantViolation"), Error);
}

TEST_CASE("save then load round-trips bit-exactly") {
    SynthConfig config;
    config.n_firms = 80;
    config.n_years = 5;
    config.n_features = 4;
    config.mnar_strength = 1.0;
    config.mcar_rate = 0.1;
    config.seed = 12;
    const auto panel = generate_panel(config).panel;
    const auto path = temp_path("panel_roundtrip.csv");
    save_csv(panel, path);
    const auto loaded = load_csv(path, panel.feature_names);

    REQUIRE(loaded.records.size() == panel.records.size());
    for (std::size_t i = 0; i < panel.records.size(); ++i) {
        CHECK(loaded.records[i].firm_id == panel.records[i].firm_id);
        CHECK(loaded.records[i].year == panel.records[i].year);
        CHECK(loaded.records[i].failed == panel.records[i].failed);
        CHECK(loaded.records[i].missing == panel.records[i].missing);
        for (std::size_t f = 0; f < panel.n_features(); ++f)
            if (!panel.records[i].missing[f])
                CHECK(loaded.records[i].features[f] == panel.records[i].features[f]);
    }

    // the NA token itself survives a second round-trip byte-for-byte
    const auto path2 = temp_path("panel_roundtrip2.csv");
    save_csv(loaded, path2);
    std::ifstream first(path), second(path2);
    std::string a((std::istreambuf_iterator<char>(first)),
                  std::istreambuf_iterator<char>());
    std::string b((std::istreambuf_iterator<char>(second)),
                  std::istreambuf_iterator<char>());
    CHECK(a == b);
}

TEST_CASE("stratified_kfold exact small case and determinism") {
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) labels.push_back(1);
    for (int i = 0; i < 5; ++i) labels.push_back(0);

    const auto plan = stratified_kfold(labels, 5, 99);
    REQUIRE(plan.assignments.size() == 10);
    std::vector<int> pos_per_fold(5, 0), neg_per_fold(5, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? pos_per_fold : neg_per_fold)[plan.assignments[i]] += 1;
    for (int f = 0; f < 5; ++f) {
        CHECK(pos_per_fold[f] == 1);
        CHECK(neg_per_fold[f] == 1);
    }

    const auto again = stratified_kfold(labels, 5, 99);
    CHECK(again.assignments == plan.assignments);
    const auto other_seed = stratified_kfold(labels, 5, 100);
    CHECK(other_seed.assignments != plan.assignments);

    CHECK_THROWS_WITH_AS(stratified_kfold(std::vector<int>{1, 0, 0, 0, 0, 0}, 5, 1),
                         doctest::Contains("TooFewRecords"), Error);
}

TEST_CASE("stratified_kfold is a partition with balanced sizes and shares") {
    Rng rng(7);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t n = 100000;
        std::vector<int> labels(n);
        std::size_t positives = 0;
        for (auto& y : labels) {
            y = rng.bernoulli(0.07) ? 1 : 0;
            positives += y;
        }
        const auto plan = stratified_kfold(labels, 5, seed);

        std::vector<std::size_t> size(5, 0), pos(5, 0);
        for (std::size_t i = 0; i < n; ++i) {
            size[plan.assignments[i]] += 1;
            pos[plan.assignments[i]] += labels[i];
        }
        std::size_t total = 0;
        const double global_share =
            static_cast<double>(positives) / static_cast<double>(n);
        for (int f = 0; f < 5; ++f) {
            total += size[f];
            const double share =
                static_cast<double>(pos[f]) / static_cast<double>(size[f]);
            CHECK(std::abs(share - global_share) < 0.01);
        }
        CHECK(total == n);

        std::size_t smallest = *std::min_element(size.begin(), size.end());
        std::size_t largest = *std::max_element(size.begin(), size.end());
        CHECK(largest - smallest <= 1);
    }
}

TEST_CASE("fold plan json round trip") {
    const auto plan = stratified_kfold(std::vector<int>{1, 1, 0, 0, 1, 0, 1, 0}, 2, 3);
    const auto restored = FoldPlan::from_json(plan.to_json());
    CHECK(restored.k == plan.k);
    CHECK(restored.seed == plan.seed);
    CHECK(restored.assignments == plan.assignments);
}

TEST_CASE("complete_case_filter") {
    SynthConfig config;
    config.n_firms = 300;
    config.n_years = 4;
    config.n_features = 5;
    config.seed = 4;

    // no missing entries: identity
    const auto clean = generate_panel(config).panel;
    CHECK(complete_case_filter(clean).records.size() == clean.records.size());

    // heavy MNAR: filtered size matches a direct count
    config.mnar_strength = 2.0;
    config.mcar_rate = 0.2;
    const auto noisy = generate_panel(config).panel;
    std::size_t complete = 0;
    for (const auto& record : noisy.records) complete += record.complete() ? 1 : 0;
    const auto filtered = complete_case_filter(noisy);
    CHECK(filtered.records.size() == complete);
    CHECK(complete < noisy.records.size());

    // subset relation holds by key
    std::set<std::pair<std::string, int>> keys;
    for (const auto& record : noisy.records) keys.emplace(record.firm_id, record.year);
    for (const auto& record : filtered.records)
        CHECK(keys.count({record.firm_id, record.year}) == 1);

    // all-missing feature 0 empties the panel
    FirmPanel all_missing = clean;
    for (auto& record : all_missing.records) record.missing[0] = 1;
    CHECK(complete_case_filter(all_missing).records.empty());
}

TEST_CASE("missingness_summary") {
    SynthConfig config;
    config.n_firms = 200;
    config.n_years = 5;
    config.n_features = 4;
    config.seed = 9;
    const auto clean = generate_panel(config).panel;
    const auto zero = missingness_summary(clean);
    for (const double rate : zero.rate_total) CHECK(rate == 0.0);

    config.mnar_strength = 2.0;
    const auto mnar = generate_panel(config).panel;
    const auto summary = missingness_summary(mnar);
    for (std::size_t f = 0; f < 4; ++f) {
        CHECK(summary.missing_total[f] ==
              summary.missing_failed[f] + summary.missing_survivor[f]);
        CHECK(summary.rate_total[f] >= 0.0);
        CHECK(summary.rate_total[f] <= 1.0);
        // distressed firms hide accounts, so failed rates must exceed survivor
        CHECK(summary.rate_failed[f] > summary.rate_survivor[f]);
    }

    // exact half-missing feature
    FirmPanel half;
    half.feature_names = {"x"};
    for (int i = 0; i < 10; ++i) {
        FirmYearRecord record;
        record.firm_id = "F" + std::to_string(i);
        record.year = 2000;
        record.features = {1.0};
        record.missing = {static_cast<uint8_t>(i % 2)};
        half.records.push_back(record);
    }
    CHECK(missingness_summary(half).rate_total[0] == 0.5);
}

TEST_CASE("lag_join pairs t-1 features with t outcomes") {
    FirmPanel panel;
    panel.feature_names = {"x"};
    auto add = [&](const std::string& firm, int year, double x, int failed) {
        FirmYearRecord record;
        record.firm_id = firm;
        record.year = year;
        record.features = {x};
        record.missing = {0};
        record.failed = failed;
        panel.records.push_back(record);
    };

    add("A", 2010, 1.0, 0);
    add("A", 2011, 2.0, 1);   // failing firm: one supervised row
    add("B", 2010, 5.0, 0);   // single year: dropped
    add("C", 2010, 7.0, 0);
    add("C", 2011, 8.0, 0);
    add("C", 2012, 9.0, 0);   // surviving 3 years: two rows
    add("D", 2010, 3.0, 0);
    add("D", 2012, 4.0, 0);   // gap: the 2012 row is dropped

    const auto table = lag_join(panel);
    CHECK(table.n_rows == 3);
    CHECK(table.dropped == 5);  // every first year plus D's 2012

    for (std::size_t i = 0; i < table.n_rows; ++i) {
        if (table.firm_ids[i] == "A") {
            CHECK(table.labels[i] == 1);
            CHECK(table.value(i, 0) == 1.0);
            CHECK(table.years[i] == 2011);
        }
    }
    std::size_t c_rows = 0;
    for (std::size_t i = 0; i < table.n_rows; ++i)
        if (table.firm_ids[i] == "C") {
            ++c_rows;
            CHECK(table.labels[i] == 0);
        }
    CHECK(c_rows == 2);
}

TEST_CASE("lag_join emits no row whose label year precedes its feature year") {
    SynthConfig config;
    config.n_firms = 150;
    config.n_years = 6;
    config.seed = 21;
    config.mnar_strength = 1.0;
    const auto result = generate_panel(config);
    const auto table = lag_join(result.panel);
    // by construction the features come from year-1; verify via the panel
    std::set<std::pair<std::string, int>> keys;
    for (const auto& record : result.panel.records)
        keys.emplace(record.firm_id, record.year);
    for (std::size_t i = 0; i < table.n_rows; ++i)
        CHECK(keys.count({table.firm_ids[i], table.years[i] - 1}) == 1);
}
