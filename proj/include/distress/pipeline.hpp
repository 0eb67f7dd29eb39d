#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "distress/baselines.hpp"
#include "distress/metrics.hpp"
#include "distress/panel.hpp"
#include "distress/tree.hpp"
#include "distress/zombie.hpp"

namespace distress {

enum class ModelKind : uint8_t {
    Logit = 0,
    Cart = 1,          // single classification tree
    RandomForest = 2,
    Boost = 3,
    SuperLearner = 4,  // convex stack of logit, cart, forest and booster
};

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// How a model sees missing data: drop incomplete rows, impute, or rely on
// the learner's native missing handling.
struct ModelSpec {
    std::string name;
    ModelKind kind = ModelKind::Boost;
    bool complete_case = false;
    std::optional<ImputeStrategy> imputation;
    BoostConfig boost;   // booster / tree / forest parameters
    int n_trees = 50;    // forest size
    double l2 = 1e-6;    // logit ridge
};

// The default horse-race lineup: complete-case logit, cart, random forest,
// booster and super learner, plus the native missing-aware boosters.
std::vector<ModelSpec> default_model_specs();

struct CvRow {
    std::string method;
    MetricReport report;      // fold averages; confusion summed
    double train_seconds = 0.0;
};

struct CvOutcome {
    std::vector<CvRow> rows;
    std::map<std::string, RiskPanel> risk;  // out-of-fold predictions per model
};

// Cross-validated evaluation of every spec on the lagged table. Fold metrics
// are averaged; predictions are collected out-of-fold. `jobs` bounds the
// number of concurrent fold fits; results do not depend on it. Wall-clock
// training times are reported only when `timings` is set, otherwise zero so
// repeated runs are byte-identical.
CvOutcome run_horse_race(const SupervisedTable& table, const FoldPlan& folds,
                         const std::vector<ModelSpec>& specs, uint64_t seed,
                         int jobs = 1, bool timings = false);

void write_horse_race_csv(const std::vector<CvRow>& rows, const std::string& path);
void write_risk_csv(const RiskPanel& risk, const std::string& path);
RiskPanel load_risk_csv(const std::string& path);

}  // namespace distress
