#include "distress/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>

#include "distress/error.hpp"
#include "distress/util.hpp"

namespace distress {

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Logit: return "logit";
        case ModelKind::Cart: return "cart";
        case ModelKind::RandomForest: return "random_forest";
        case ModelKind::Boost: return "boost";
        case ModelKind::SuperLearner: return "super_learner";
    }
    return "boost";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "logit") return ModelKind::Logit;
    if (name == "cart") return ModelKind::Cart;
    if (name == "random_forest") return ModelKind::RandomForest;
    if (name == "boost") return ModelKind::Boost;
    if (name == "super_learner") return ModelKind::SuperLearner;
    fail("ConfigError", "unknown model kind " + name);
}

std::vector<ModelSpec> default_model_specs() {
    std::vector<ModelSpec> specs;

    ModelSpec logit;
    logit.name = "logit";
    logit.kind = ModelKind::Logit;
    logit.complete_case = true;
    specs.push_back(logit);

    ModelSpec cart;
    cart.name = "cart";
    cart.kind = ModelKind::Cart;
    cart.complete_case = true;
    cart.boost.max_depth = 8;
    cart.boost.min_child_hessian = 5.0;
    cart.boost.missing_strategy = MissingStrategy::RequireComplete;
    specs.push_back(cart);

    ModelSpec forest;
    forest.name = "random_forest";
    forest.kind = ModelKind::RandomForest;
    forest.complete_case = true;
    forest.n_trees = 50;
    forest.boost.max_depth = 10;
    forest.boost.min_child_hessian = 5.0;
    forest.boost.subsample = 0.8;
    forest.boost.colsample = 0.5;
    forest.boost.missing_strategy = MissingStrategy::RequireComplete;
    specs.push_back(forest);

    ModelSpec boosted;
    boosted.name = "gbt_complete";
    boosted.kind = ModelKind::Boost;
    boosted.complete_case = true;
    boosted.boost.missing_strategy = MissingStrategy::RequireComplete;
    specs.push_back(boosted);

    ModelSpec stacker;
    stacker.name = "super_learner";
    stacker.kind = ModelKind::SuperLearner;
    stacker.complete_case = true;
    specs.push_back(stacker);

    ModelSpec missing_aware = boosted;
    missing_aware.name = "gbt_missing_aware";
    missing_aware.complete_case = false;
    missing_aware.boost.missing_strategy = MissingStrategy::DefaultDirections;
    specs.push_back(missing_aware);

    ModelSpec mia = boosted;
    mia.name = "gbt_mia";
    mia.complete_case = false;
    mia.boost.missing_strategy = MissingStrategy::MIA;
    specs.push_back(mia);

    return specs;
}

namespace {

// A fitted model reduced to its prediction function.
using Predictor = std::function<std::vector<double>(const SupervisedTable&)>;

Predictor fit_single(const ModelSpec& spec, const SupervisedTable& train,
                     uint64_t seed) {
    switch (spec.kind) {
        case ModelKind::Logit: {
            const LogitModel model = fit_logit(train, spec.l2);
            return [model](const SupervisedTable& test) {
                std::vector<double> out(test.n_rows);
                for (std::size_t i = 0; i < test.n_rows; ++i) {
                    for (std::size_t f = 0; f < test.n_features; ++f)
                        require(!test.is_missing(i, f), "MissingInput",
                                "logit prediction needs complete rows");
                    out[i] = model.predict_proba(
                        {test.values.data() + i * test.n_features, test.n_features});
                }
                return out;
            };
        }
        case ModelKind::Cart: {
            BoostConfig config = spec.boost;
            config.subsample = 1.0;
            config.colsample = 1.0;
            const BaggedForest tree = fit_forest(train, config, 1, seed);
            return [tree](const SupervisedTable& test) {
                return tree.predict_proba(FeatureMatrix::of(test));
            };
        }
        case ModelKind::RandomForest: {
            const BaggedForest forest =
                fit_forest(train, spec.boost, spec.n_trees, seed);
            return [forest](const SupervisedTable& test) {
                return forest.predict_proba(FeatureMatrix::of(test));
            };
        }
        case ModelKind::Boost: {
            const BoostedEnsemble model = fit_boosted(train, spec.boost, seed);
            return [model](const SupervisedTable& test) {
                return model.predict_proba(FeatureMatrix::of(test));
            };
        }
        case ModelKind::SuperLearner:
            break;  // handled below
    }

    // Convex stack: cross-fit the base models inside the training data, learn
    // simplex weights on the pooled out-of-fold predictions, then refit the
    // bases on the full training set.
    std::vector<ModelSpec> bases;
    for (const ModelKind kind :
         {ModelKind::Logit, ModelKind::Cart, ModelKind::RandomForest,
          ModelKind::Boost}) {
        ModelSpec base = spec;
        base.kind = kind;
        base.name = std::string(spec.name) + "." + to_string(kind);
        bases.push_back(base);
    }

    const int inner_k = 3;
    const FoldPlan inner = stratified_kfold(train, inner_k, seed ^ 0x5157ULL);
    std::vector<std::vector<double>> cross_fitted(
        bases.size(), std::vector<double>(train.n_rows, 0.5));
    for (int fold = 0; fold < inner_k; ++fold) {
        std::vector<std::size_t> fit_rows, holdout_rows;
        for (std::size_t i = 0; i < train.n_rows; ++i)
            (inner.assignments[i] == fold ? holdout_rows : fit_rows).push_back(i);
        const SupervisedTable fit_table = train.subset(fit_rows);
        const SupervisedTable holdout_table = train.subset(holdout_rows);
        for (std::size_t b = 0; b < bases.size(); ++b) {
            const auto predictor =
                fit_single(bases[b], fit_table, seed + 31 * (b + 1) + fold);
            const auto predictions = predictor(holdout_table);
            for (std::size_t i = 0; i < holdout_rows.size(); ++i)
                cross_fitted[b][holdout_rows[i]] = clamp_prob(predictions[i]);
        }
    }
    const std::vector<double> weights = fit_stacker(cross_fitted, train.labels);

    std::vector<Predictor> fitted;
    for (std::size_t b = 0; b < bases.size(); ++b)
        fitted.push_back(fit_single(bases[b], train, seed + 977 * (b + 1)));
    return [fitted, weights](const SupervisedTable& test) {
        std::vector<double> mixed(test.n_rows, 0.0);
        for (std::size_t b = 0; b < fitted.size(); ++b) {
            const auto predictions = fitted[b](test);
            for (std::size_t i = 0; i < test.n_rows; ++i)
                mixed[i] += weights[b] * predictions[i];
        }
        for (auto& p : mixed) p = clamp_prob(p);
        return mixed;
    };
}

struct FoldResult {
    MetricReport report;
    double seconds = 0.0;
    std::vector<std::size_t> rows;      // global row ids of scored rows
    std::vector<double> predictions;
    int fold = 0;
};

FoldResult run_fold(const ModelSpec& spec, const SupervisedTable& table,
                    const FoldPlan& folds, int fold, uint64_t seed, bool timings) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < table.n_rows; ++i)
        (folds.assignments[i] == fold ? test_rows : train_rows).push_back(i);

    SupervisedTable train = table.subset(train_rows);
    SupervisedTable test = table.subset(test_rows);
    if (spec.complete_case) {
        const auto train_complete = train.complete_rows();
        const auto test_complete = test.complete_rows();
        std::vector<std::size_t> kept;
        for (const auto r : test_complete) kept.push_back(test_rows[r]);
        train = train.subset(train_complete);
        test = test.subset(test_complete);
        test_rows = kept;
    } else if (spec.imputation) {
        const Imputer imputer = Imputer::fit(train, *spec.imputation);
        train = imputer.apply(train);
        test = imputer.apply(test);
    }
    require(train.has_both_labels(), "DegenerateLabels",
            spec.name + ": training fold lost a label class");

    const auto started = std::chrono::steady_clock::now();
    const Predictor predictor = fit_single(spec, train, seed);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();

    FoldResult result;
    result.fold = fold;
    result.seconds = timings ? seconds : 0.0;
    result.predictions = predictor(test);
    result.rows = test_rows;
    result.report =
        evaluate_classifier(result.predictions, test.labels, 0.5);
    return result;
}

}  // namespace

CvOutcome run_horse_race(const SupervisedTable& table, const FoldPlan& folds,
                         const std::vector<ModelSpec>& specs, uint64_t seed,
                         int jobs, bool timings) {
    require(folds.assignments.size() == table.n_rows, "ConfigError",
            "fold plan does not match the table");
    require(jobs >= 1, "ConfigError", "jobs must be >= 1");

    struct Task {
        std::size_t spec_index;
        int fold;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < specs.size(); ++s)
        for (int fold = 0; fold < folds.k; ++fold)
            tasks.push_back({s, fold});

    std::vector<FoldResult> results(tasks.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t index = cursor.fetch_add(1);
            if (index >= tasks.size()) return;
            const Task task = tasks[index];
            const uint64_t fold_seed =
                seed + 1000003ULL * (task.spec_index + 1) +
                static_cast<uint64_t>(task.fold);
            results[index] = run_fold(specs[task.spec_index], table, folds,
                                      task.fold, fold_seed, timings);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::future<void>> pool;
        const int workers = std::min<std::size_t>(jobs, tasks.size());
        for (int w = 0; w < workers; ++w)
            pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool) f.get();
    }

    CvOutcome outcome;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        CvRow row;
        row.method = specs[s].name;
        RiskPanel risk;
        risk.source = specs[s].name;
        double seconds = 0.0;
        MetricReport sum;
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            if (tasks[t].spec_index != s) continue;
            const FoldResult& fr = results[t];
            sum.auc += fr.report.auc;
            sum.pr += fr.report.pr;
            sum.f1 += fr.report.f1;
            sum.bacc += fr.report.bacc;
            sum.pseudo_r2 += fr.report.pseudo_r2;
            sum.confusion.tp += fr.report.confusion.tp;
            sum.confusion.fp += fr.report.confusion.fp;
            sum.confusion.tn += fr.report.confusion.tn;
            sum.confusion.fn += fr.report.confusion.fn;
            seconds += fr.seconds;
            for (std::size_t i = 0; i < fr.rows.size(); ++i) {
                const std::size_t global = fr.rows[i];
                risk.rows.push_back({table.firm_ids[global], table.years[global],
                                     clamp_prob(fr.predictions[i]),
                                     table.labels[global], fr.fold});
            }
        }
        const auto k = static_cast<double>(folds.k);
        row.report.auc = sum.auc / k;
        row.report.pr = sum.pr / k;
        row.report.f1 = sum.f1 / k;
        row.report.bacc = sum.bacc / k;
        row.report.pseudo_r2 = sum.pseudo_r2 / k;
        row.report.threshold_used = 0.5;
        row.report.confusion = sum.confusion;
        row.train_seconds = seconds / k;
        outcome.rows.push_back(row);

        std::sort(risk.rows.begin(), risk.rows.end(),
                  [](const RiskRow& a, const RiskRow& b) {
                      if (a.firm_id != b.firm_id) return a.firm_id < b.firm_id;
                      return a.year < b.year;
                  });
        outcome.risk.emplace(specs[s].name, std::move(risk));
    }
    return outcome;
}

namespace {

std::string fixed6(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6f", value);
    return buffer;
}

}  // namespace

void write_horse_race_csv(const std::vector<CvRow>& rows, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "IoError", "cannot write " + path);
    out << "method,AUC,PR,F1-Score,BACC,R2,time_seconds\n";
    for (const auto& row : rows) {
        out << row.method << ',' << fixed6(row.report.auc) << ','
            << fixed6(row.report.pr) << ',' << fixed6(row.report.f1) << ','
            << fixed6(row.report.bacc) << ',' << fixed6(row.report.pseudo_r2)
            << ',' << fixed6(row.train_seconds) << '\n';
    }
}

void write_risk_csv(const RiskPanel& risk, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "IoError", "cannot write " + path);
    out << "firm_id,year,probability,failed,fold\n";
    for (const auto& row : risk.rows)
        out << row.firm_id << ',' << row.year << ','
            << format_double(row.probability) << ',' << row.failed << ','
            << row.fold << '\n';
}

RiskPanel load_risk_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "IoError", "cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "MalformedRow",
            "empty file " + path);
    RiskPanel risk;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        require(cells.size() == 5, "MalformedRow",
                path + ":" + std::to_string(line_no));
        RiskRow row;
        row.firm_id = cells[0];
        require(parse_int(cells[1], row.year), "MalformedRow", "bad year");
        require(parse_double(cells[2], row.probability), "MalformedRow",
                "bad probability");
        require(parse_int(cells[3], row.failed), "MalformedRow", "bad label");
        require(parse_int(cells[4], row.fold), "MalformedRow", "bad fold");
        risk.rows.push_back(std::move(row));
    }
    risk.validate();
    return risk;
}

}  // namespace distress
