// Batch pipeline driver: synthesize panels, run the cross-validated horse
// race, compare proxy credit scores, build the zombie reports and attribute
// predictions, all from one seeded configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "distress/baselines.hpp"
#include "distress/error.hpp"
#include "distress/metrics.hpp"
#include "distress/panel.hpp"
#include "distress/pipeline.hpp"
#include "distress/scores.hpp"
#include "distress/shapley.hpp"
#include "distress/svg.hpp"
#include "distress/synth.hpp"
#include "distress/tree.hpp"
#include "distress/util.hpp"
#include "distress/zombie.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string input;
    std::string config_path;
    std::string out;
    uint64_t seed = 7;
    int folds = 5;
    int jobs = 1;
    bool timings = false;
    json config = json::object();
};

json section(const json& config, const std::string& key) {
    if (config.contains(key)) return config.at(key);
    return json::object();
}

template <class T>
T get_or(const json& doc, const std::string& key, T fallback) {
    if (doc.contains(key)) return doc.at(key).get<T>();
    return fallback;
}

std::string resolve_out(const Options& options) {
    std::string out = options.out;
    if (out.empty()) {
        if (const char* env = std::getenv("DISTRESS_OUT")) out = env;
    }
    if (out.empty()) out = ".";
    fs::create_directories(out);
    return out;
}

distress::SynthConfig synth_config(const Options& options) {
    const json doc = section(options.config, "synth");
    distress::SynthConfig config;
    config.n_firms = get_or(doc, "n_firms", 2000);
    config.n_years = get_or(doc, "n_years", 8);
    config.n_features = get_or(doc, "n_features", 10);
    config.hazard_base = get_or(doc, "hazard_base", 0.03);
    config.distress_loading = get_or(doc, "distress_loading", 2.0);
    config.mnar_strength = get_or(doc, "mnar_strength", 1.5);
    config.mcar_rate = get_or(doc, "mcar_rate", 0.05);
    config.ar_persistence = get_or(doc, "ar_persistence", 0.8);
    config.mnar_base_logit = get_or(doc, "mnar_base_logit", -2.5);
    config.persistent_fraction = get_or(doc, "persistent_fraction", 0.02);
    config.persistent_shift = get_or(doc, "persistent_shift", 2.5);
    config.first_year = get_or(doc, "first_year", 2008);
    config.seed = options.seed;
    return config;
}

void apply_boost_overrides(distress::BoostConfig& config, const json& doc) {
    config.n_rounds = get_or(doc, "n_rounds", config.n_rounds);
    config.learning_rate = get_or(doc, "learning_rate", config.learning_rate);
    config.max_depth = get_or(doc, "max_depth", config.max_depth);
    config.lambda = get_or(doc, "lambda", config.lambda);
    config.gamma = get_or(doc, "gamma", config.gamma);
    config.min_child_hessian =
        get_or(doc, "min_child_hessian", config.min_child_hessian);
    config.n_bins = get_or(doc, "n_bins", config.n_bins);
    config.subsample = get_or(doc, "subsample", config.subsample);
    config.colsample = get_or(doc, "colsample", config.colsample);
}

std::vector<distress::ModelSpec> configured_specs(const Options& options) {
    auto specs = distress::default_model_specs();
    const json boost_doc = section(options.config, "boost");
    for (auto& spec : specs)
        if (spec.kind == distress::ModelKind::Boost ||
            spec.kind == distress::ModelKind::SuperLearner)
            apply_boost_overrides(spec.boost, boost_doc);
    const json cv_doc = section(options.config, "cv");
    if (cv_doc.contains("models")) {
        const auto wanted = cv_doc.at("models").get<std::vector<std::string>>();
        std::vector<distress::ModelSpec> filtered;
        for (const auto& name : wanted) {
            bool found = false;
            for (const auto& spec : specs) {
                if (spec.name == name) {
                    filtered.push_back(spec);
                    found = true;
                    break;
                }
            }
            distress::require(found, "ConfigError", "unknown model " + name);
        }
        return filtered;
    }
    return specs;
}

distress::ModelSpec spec_by_name(const Options& options, const std::string& name) {
    for (const auto& spec : configured_specs(options))
        if (spec.name == name) return spec;
    distress::fail("ConfigError", "unknown model " + name);
}

distress::FirmPanel load_panel(const std::string& path) {
    return distress::load_csv(path, distress::read_schema(path));
}

int feature_index(const distress::SupervisedTable& table, const std::string& name) {
    for (std::size_t f = 0; f < table.feature_names.size(); ++f)
        if (table.feature_names[f] == name) return static_cast<int>(f);
    distress::fail("ConfigError", "unknown feature " + name);
}

// ---------------------------------------------------------------------------
// synth

void run_synth(const Options& options) {
    const auto out = resolve_out(options);
    const auto result = distress::generate_panel(synth_config(options));
    distress::save_csv(result.panel, out + "/panel.csv");
    distress::save_truth_csv(result.truth, out + "/panel_truth.csv");
    std::cout << "panel: " << result.panel.records.size() << " firm-years -> "
              << out << "/panel.csv\n";
}

// ---------------------------------------------------------------------------
// cv

void run_cv(const Options& options) {
    const auto out = resolve_out(options);
    const auto panel = load_panel(options.input);
    const auto table = distress::lag_join(panel);
    const auto folds = distress::stratified_kfold(table, options.folds, options.seed);
    const auto specs = configured_specs(options);
    const auto outcome = distress::run_horse_race(table, folds, specs, options.seed,
                                                  options.jobs, options.timings);
    distress::write_horse_race_csv(outcome.rows, out + "/horse_race.csv");

    const json cv_doc = section(options.config, "cv");
    const auto risk_models = get_or<std::vector<std::string>>(
        cv_doc, "risk_models", {"gbt_mia"});
    for (const auto& name : risk_models) {
        const auto it = outcome.risk.find(name);
        if (it != outcome.risk.end())
            distress::write_risk_csv(it->second, out + "/risk_" + name + ".csv");
    }
    std::ofstream folds_out(out + "/folds.json");
    folds_out << folds.to_json() << '\n';
    std::cout << "horse race over " << table.n_rows << " supervised rows -> "
              << out << "/horse_race.csv\n";
}

// ---------------------------------------------------------------------------
// scores

struct ScoreSeries {
    std::string name;
    distress::ScoreDirection direction;
    std::vector<double> values;   // per supervised row; NaN = undefined
    std::vector<uint8_t> usable;  // 1 when the score exists for the row
};

ScoreSeries z_score_series(const distress::SupervisedTable& table, const json& doc) {
    ScoreSeries series;
    series.name = "z_score";
    // Synthetic readouts grow with distress, so the weighted sum is risky at
    // the high end by default; set "z_direction": "low" for classic ratios.
    series.direction = get_or<std::string>(doc, "z_direction", "high") == "low"
                           ? distress::ScoreDirection::LowIsRisky
                           : distress::ScoreDirection::HighIsRisky;
    distress::LinearScoreSpec spec;
    const auto defaults = distress::LinearScoreSpec::altman();
    std::vector<std::string> names;
    if (doc.contains("z_features")) {
        names = doc.at("z_features").get<std::vector<std::string>>();
    } else {
        for (std::size_t f = 0; f < std::min<std::size_t>(5, table.n_features); ++f)
            names.push_back(table.feature_names[f]);
    }
    spec.ratio_names = names;
    spec.weights = get_or<std::vector<double>>(doc, "z_weights", {});
    if (spec.weights.empty())
        for (std::size_t i = 0; i < names.size(); ++i)
            spec.weights.push_back(defaults.weights[i % defaults.weights.size()]);

    std::vector<int> columns;
    for (const auto& name : names) columns.push_back(feature_index(table, name));
    series.values.assign(table.n_rows, 0.0);
    series.usable.assign(table.n_rows, 0);
    std::vector<double> ratios(columns.size());
    for (std::size_t i = 0; i < table.n_rows; ++i) {
        bool complete = true;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (table.is_missing(i, columns[c])) {
                complete = false;
                break;
            }
            ratios[c] = table.value(i, columns[c]);
        }
        if (!complete) continue;
        series.values[i] = distress::z_score(ratios, spec);
        series.usable[i] = 1;
    }
    return series;
}

ScoreSeries dtd_series(const distress::SupervisedTable& table, const json& doc) {
    ScoreSeries series;
    series.name = "distance_to_default";
    series.direction = distress::ScoreDirection::LowIsRisky;
    const auto asset_name = get_or<std::string>(doc, "asset_feature",
                                                table.feature_names.front());
    const int asset = feature_index(table, asset_name);
    // Demo mapping for panels without balance-sheet semantics: asset value is
    // exp(-x) of the configured readout, so higher distress means lower DtD.
    const bool negate = get_or(doc, "negate_asset", true);
    const double debt = get_or(doc, "debt", 1.0);
    const double drift = get_or(doc, "drift", 0.05);
    const double volatility = get_or(doc, "volatility", 0.3);
    const double horizon = get_or(doc, "horizon", 1.0);

    series.values.assign(table.n_rows, 0.0);
    series.usable.assign(table.n_rows, 0);
    for (std::size_t i = 0; i < table.n_rows; ++i) {
        if (table.is_missing(i, asset)) continue;
        const double x = table.value(i, asset);
        const double value = std::exp(negate ? -x : x);
        series.values[i] =
            distress::distance_to_default(value, debt, drift, volatility, horizon);
        series.usable[i] = 1;
    }
    return series;
}

void run_scores(const Options& options) {
    const auto out = resolve_out(options);
    const auto panel = load_panel(options.input);
    const auto table = distress::lag_join(panel);
    const auto folds = distress::stratified_kfold(table, options.folds, options.seed);
    const json doc = section(options.config, "scores");

    std::vector<ScoreSeries> proxies = {z_score_series(table, doc),
                                        dtd_series(table, doc)};

    // Booster predictions via the same folds: in-sample cutoffs come from
    // training-fold predictions, classification happens out-of-fold.
    const auto model_name = get_or<std::string>(doc, "model", "gbt_mia");
    const auto spec = spec_by_name(options, model_name);

    struct Accumulated {
        std::map<int, std::pair<int64_t, int64_t>> counts;  // p -> (hits, predicted)
    };
    std::vector<Accumulated> tallies(proxies.size() + 1);
    const std::vector<int> percentiles = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

    for (int fold = 0; fold < folds.k; ++fold) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i = 0; i < table.n_rows; ++i)
            (folds.assignments[i] == fold ? test_rows : train_rows).push_back(i);

        for (std::size_t s = 0; s < proxies.size(); ++s) {
            const auto& proxy = proxies[s];
            std::vector<double> in_sample, test_scores;
            std::vector<int> test_labels;
            for (const auto r : train_rows)
                if (proxy.usable[r]) in_sample.push_back(proxy.values[r]);
            for (const auto r : test_rows) {
                if (!proxy.usable[r]) continue;
                test_scores.push_back(proxy.values[r]);
                test_labels.push_back(table.labels[r]);
            }
            if (in_sample.empty() || test_scores.empty()) continue;
            const auto report = distress::percentile_cutoff_report(
                test_scores, test_labels, proxy.direction, in_sample, percentiles);
            for (const auto& row : report) {
                tallies[s].counts[row.percentile].first += row.hits;
                tallies[s].counts[row.percentile].second += row.predicted;
            }
        }

        const auto train = table.subset(train_rows);
        const auto test = table.subset(test_rows);
        const auto model =
            distress::fit_boosted(train, spec.boost, options.seed + fold);
        const auto in_sample = model.predict_proba(distress::FeatureMatrix::of(train));
        const auto test_scores = model.predict_proba(distress::FeatureMatrix::of(test));
        const auto report = distress::percentile_cutoff_report(
            test_scores, test.labels, distress::ScoreDirection::HighIsRisky,
            in_sample, percentiles);
        for (const auto& row : report) {
            tallies.back().counts[row.percentile].first += row.hits;
            tallies.back().counts[row.percentile].second += row.predicted;
        }
    }

    std::ofstream csv(out + "/score_report.csv");
    distress::require(csv.good(), "IoError", "cannot write score_report.csv");
    csv << "percentile";
    for (const auto& proxy : proxies) csv << ',' << proxy.name << "_precision,"
                                          << proxy.name << "_fdr";
    csv << ',' << model_name << "_precision," << model_name << "_fdr\n";
    for (const int p : percentiles) {
        csv << p;
        for (auto& tally : tallies) {
            const auto [hits, predicted] = tally.counts[p];
            if (predicted == 0) {
                csv << ",NA,NA";
            } else {
                const double precision =
                    static_cast<double>(hits) / static_cast<double>(predicted);
                char buffer[64];
                std::snprintf(buffer, sizeof(buffer), ",%.4f,%.4f", precision,
                              1.0 - precision);
                csv << buffer;
            }
        }
        csv << '\n';
    }
    std::cout << "score report -> " << out << "/score_report.csv\n";
}

// ---------------------------------------------------------------------------
// zombie

void run_zombie(const Options& options) {
    const auto out = resolve_out(options);
    const auto panel = load_panel(options.input);
    const auto table = distress::lag_join(panel);
    const auto folds = distress::stratified_kfold(table, options.folds, options.seed);
    const json doc = section(options.config, "zombie");

    const auto model_name = get_or<std::string>(doc, "model", "gbt_mia");
    const auto spec = spec_by_name(options, model_name);
    const auto outcome = distress::run_horse_race(table, folds, {spec},
                                                  options.seed, options.jobs, false);
    const distress::RiskPanel& risk = outcome.risk.at(model_name);
    distress::write_risk_csv(risk, out + "/risk.csv");

    const auto thresholds = distress::decile_thresholds(risk);
    const int window = get_or(doc, "window", 3);
    const auto flags = distress::zombie_flags(risk, thresholds, window);

    {
        std::ofstream csv(out + "/zombie_flags.csv");
        csv << "firm_id,year,flag\n";
        for (std::size_t i = 0; i < risk.rows.size(); ++i)
            csv << risk.rows[i].firm_id << ',' << risk.rows[i].year << ','
                << int(flags[i]) << '\n';
    }
    {
        std::ofstream csv(out + "/zombie_shares.csv");
        csv << "year,active,zombies,share\n";
        for (const auto& row : distress::zombie_share_series(risk, flags)) {
            char buffer[64];
            std::snprintf(buffer, sizeof(buffer), "%.6f", row.share);
            csv << row.year << ',' << row.active << ',' << row.zombies << ','
                << buffer << '\n';
        }
    }
    {
        const auto matrix = distress::decile_transition_matrix(risk, thresholds);
        std::ofstream csv(out + "/decile_transitions.csv");
        csv << "from_bin";
        for (const auto& name : matrix.bin_names) csv << ',' << name;
        csv << '\n';
        for (std::size_t a = 0; a < matrix.bin_names.size(); ++a) {
            csv << matrix.bin_names[a];
            for (std::size_t b = 0; b < matrix.bin_names.size(); ++b) {
                char buffer[64];
                std::snprintf(buffer, sizeof(buffer), ",%.6f", matrix.shares[a][b]);
                csv << buffer;
            }
            csv << '\n';
        }
    }
    {
        const auto outcomes =
            distress::zombie_outcome_transitions(risk, flags, thresholds);
        std::ofstream csv(out + "/zombie_outcomes.csv");
        csv << "year,zombies,fail,remain,lower_distress,no_distress\n";
        for (const auto& row : outcomes) {
            char buffer[128];
            std::snprintf(buffer, sizeof(buffer), "%d,%lld,%.6f,%.6f,%.6f,%.6f",
                          row.year, static_cast<long long>(row.zombies), row.fail,
                          row.remain, row.lower_distress, row.no_distress);
            csv << buffer << '\n';
        }
    }
    {
        const auto scan = distress::bacc_cutoff_scan(risk);
        std::ofstream csv(out + "/bacc_scan.csv");
        csv << "cutoff,bacc\n";
        std::vector<double> xs, ys;
        for (const auto& row : scan.rows) {
            char buffer[64];
            std::snprintf(buffer, sizeof(buffer), "%.2f,%.6f", row.cutoff, row.bacc);
            csv << buffer << '\n';
            xs.push_back(row.cutoff);
            ys.push_back(row.bacc);
        }
        distress::write_line_plot(out + "/bacc_scan.svg", xs, ys,
                                  "Balanced accuracy by cutoff", "cutoff", "BACC");
    }
    {
        // Proxy indicator: a configured feature above its in-sample percentile.
        const auto feature_name =
            get_or<std::string>(doc, "indicator_feature", table.feature_names.front());
        const double percentile = get_or(doc, "indicator_percentile", 90.0);
        const int column = feature_index(table, feature_name);
        std::vector<double> observed;
        for (std::size_t i = 0; i < table.n_rows; ++i)
            if (!table.is_missing(i, column)) observed.push_back(table.value(i, column));
        std::sort(observed.begin(), observed.end());
        std::map<std::pair<std::string, int>, uint8_t> by_key;
        if (!observed.empty()) {
            const double cutoff =
                distress::nearest_rank_percentile(observed, percentile);
            for (std::size_t i = 0; i < table.n_rows; ++i)
                by_key[{table.firm_ids[i], table.years[i]}] =
                    !table.is_missing(i, column) && table.value(i, column) >= cutoff
                        ? 1
                        : 0;
        }
        std::vector<uint8_t> indicator(risk.rows.size(), 0);
        for (std::size_t i = 0; i < risk.rows.size(); ++i) {
            const auto it = by_key.find({risk.rows[i].firm_id, risk.rows[i].year});
            if (it != by_key.end()) indicator[i] = it->second;
        }
        const auto overlap = distress::overlap_report(risk, flags, indicator);
        std::ofstream csv(out + "/overlap.csv");
        csv << "common_support,zombie_only,indicator_only,union_size\n";
        char buffer[128];
        std::snprintf(buffer, sizeof(buffer), "%.6f,%.6f,%.6f,%lld",
                      overlap.common, overlap.zombie_only, overlap.indicator_only,
                      static_cast<long long>(overlap.union_size));
        csv << buffer << '\n';
    }
    std::cout << "zombie reports -> " << out << '\n';
}

// ---------------------------------------------------------------------------
// shap

void run_shap(const Options& options) {
    const auto out = resolve_out(options);
    const auto panel = load_panel(options.input);
    const auto table = distress::lag_join(panel);
    const json doc = section(options.config, "shap");

    const auto model_name = get_or<std::string>(doc, "model", "gbt_mia");
    const auto spec = spec_by_name(options, model_name);
    const auto model = distress::fit_boosted(table, spec.boost, options.seed);

    distress::ModelValueConfig value_config;
    value_config.background_rows = get_or(doc, "background_rows", 256);
    value_config.eval_rows = get_or(doc, "eval_rows", 512);
    value_config.draws_per_row = get_or(doc, "draws_per_row", 8);
    value_config.missingness_players = get_or(doc, "missingness_players", true);
    value_config.seed = options.seed;
    const distress::ModelValueFunction value(model, table, table, value_config);

    const int permutations = get_or(doc, "permutations", 64);
    const auto report = distress::shapley_sampled(
        [&value](const std::vector<uint8_t>& mask) { return value(mask); },
        value.n_players(), permutations, options.seed);
    const auto groups = value.player_groups(panel.group_labels);
    const auto group_values = distress::group_shapley(report, groups);

    {
        std::ofstream csv(out + "/shapley.csv");
        csv << "player,phi,se,group\n";
        for (int m = 0; m < value.n_players(); ++m) {
            char buffer[128];
            std::snprintf(buffer, sizeof(buffer), ",%.6f,%.6f,", report.phi[m],
                          report.se[m]);
            csv << value.player_names()[m] << buffer << groups[m] << '\n';
        }
    }
    {
        std::ofstream csv(out + "/shapley_groups.csv");
        csv << "group,phi\n";
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& [group, phi] : group_values) {
            char buffer[64];
            std::snprintf(buffer, sizeof(buffer), "%.6f", phi);
            csv << group << ',' << buffer << '\n';
            labels.push_back(group);
            values.push_back(phi);
        }
        distress::write_bar_plot(out + "/shapley_groups.svg", labels, values,
                                 "Group attribution of out-of-sample fit");
    }
    {
        std::vector<std::size_t> order(value.n_players());
        for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return report.phi[a] > report.phi[b];
        });
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto m : order) {
            labels.push_back(value.player_names()[m]);
            values.push_back(report.phi[m]);
        }
        distress::write_bar_plot(out + "/shapley.svg", labels, values,
                                 "Per-player attribution");
    }
    std::cout << "attribution -> " << out << "/shapley.csv\n";
}

void run_all(const Options& options) {
    Options staged = options;
    staged.out = resolve_out(options);
    run_synth(staged);
    staged.input = staged.out + "/panel.csv";
    run_cv(staged);
    run_scores(staged);
    run_zombie(staged);
    run_shap(staged);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Missing-aware distress prediction pipeline: synthetic panels, "
        "boosted-tree horse race, proxy credit scores, zombie-firm reports "
        "and Shapley attribution."};
    app.require_subcommand(1);

    Options options;
    app.add_option("--config", options.config_path,
                   "JSON config file (sections: synth, cv, boost, scores, "
                   "zombie, shap)");
    app.add_option("--seed", options.seed, "Run seed (default 7)");
    app.add_option("--folds", options.folds, "Cross-validation folds (default 5)");
    app.add_option("--jobs", options.jobs,
                   "Parallel fold fits; results are independent of it (default 1)");
    app.add_option("--out", options.out,
                   "Output directory (default $DISTRESS_OUT or .)");
    app.add_flag("--timings", options.timings,
                 "Report wall-clock training times (breaks byte-identical "
                 "reruns)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic panel CSV");
    auto* cv = app.add_subcommand("cv", "Cross-validated model horse race");
    auto* scores =
        app.add_subcommand("scores", "Percentile precision/FDR of proxy scores");
    auto* zombie = app.add_subcommand("zombie", "Risk deciles and zombie reports");
    auto* shap = app.add_subcommand("shap", "Shapley attribution of the booster");
    auto* all = app.add_subcommand("all", "Everything on one synthetic panel");
    for (auto* sub : {cv, scores, zombie, shap})
        sub->add_option("--input", options.input, "Panel CSV path")->required();
    for (auto* sub : {synth, cv, scores, zombie, shap, all}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!options.config_path.empty()) {
            std::ifstream in(options.config_path);
            distress::require(in.good(), "ConfigError",
                              "cannot open " + options.config_path);
            in >> options.config;
        }
        distress::require(options.folds >= 2, "ConfigError", "--folds must be >= 2");
        distress::require(options.jobs >= 1, "ConfigError", "--jobs must be >= 1");

        if (synth->parsed()) run_synth(options);
        if (cv->parsed()) run_cv(options);
        if (scores->parsed()) run_scores(options);
        if (zombie->parsed()) run_zombie(options);
        if (shap->parsed()) run_shap(options);
        if (all->parsed()) run_all(options);
        return 0;
    } catch (const distress::Error& error) {
        json doc{{"error", error.kind()}, {"message", error.what()}};
        std::cerr << doc.dump() << '\n';
        return 1;
    } catch (const std::exception& error) {
        json doc{{"error", "Unhandled"}, {"message", error.what()}};
        std::cerr << doc.dump() << '\n';
        return 1;
    }
}
