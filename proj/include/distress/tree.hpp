#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distress/panel.hpp"
#include "distress/rng.hpp"

namespace distress {

// How a split routes rows whose split feature is absent. DefaultLeft/Right
// are learned default directions (block propagation); MissingIsLeft/Right are
// the equivalent arms enumerated by the MIA scheme; MissingOnly splits purely
// on the missingness indicator (missing goes left, observed right).
enum class MissingPolicy : uint8_t {
    DefaultLeft = 0,
    DefaultRight = 1,
    MissingIsLeft = 2,
    MissingIsRight = 3,
    MissingOnly = 4,
};

const char* to_string(MissingPolicy policy);
MissingPolicy missing_policy_from_string(const std::string& name);

enum class MissingStrategy : uint8_t {
    DefaultDirections = 0,  // missing block tried left and right at every cut
    MIA = 1,                // default directions plus missing-only candidates
    RequireComplete = 2,    // refuses missing values outright
};

const char* to_string(MissingStrategy strategy);
MissingStrategy missing_strategy_from_string(const std::string& name);

struct SplitRule {
    int feature = -1;
    double threshold = 0.0;  // ignored for MissingOnly
    MissingPolicy policy = MissingPolicy::DefaultLeft;

    // Observed values go left iff value < threshold; missing values follow
    // the policy. Throws MissingNotAllowed only via callers that forbid it.
    bool route_left(double value, bool missing) const {
        if (policy == MissingPolicy::MissingOnly) return missing;
        if (missing)
            return policy == MissingPolicy::DefaultLeft ||
                   policy == MissingPolicy::MissingIsLeft;
        return value < threshold;
    }
};

// Flat tree storage; nodes[0] is the root, leaves have left == -1.
struct TreeNode {
    SplitRule rule;
    int left = -1;
    int right = -1;
    double weight = 0.0;

    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> features, std::span<const uint8_t> missing) const;
    int depth() const;
};

struct BoostConfig {
    int n_rounds = 50;
    double learning_rate = 0.3;
    int max_depth = 4;
    double lambda = 1.0;            // L2 on leaf weights
    double gamma = 0.0;             // per-leaf penalty
    double min_child_hessian = 1.0;
    int n_bins = 64;                // percentile split candidates per feature
    double subsample = 1.0;         // row fraction per round (without replacement)
    double colsample = 1.0;         // feature fraction per split
    MissingStrategy missing_strategy = MissingStrategy::DefaultDirections;

    void validate() const;  // BadConfig
};

// Second-order gain of a split against keeping the parent together:
//   1/2 [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - (GL+GR)^2/(HL+HR+lambda) ] - gamma
// A zero denominator contributes zero (guarded 0/0 convention).
double split_gain(double grad_left, double hess_left, double grad_right,
                  double hess_right, double lambda, double gamma);

// Non-owning row-major view over a feature block with its missing mask.
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    const double* values = nullptr;
    const uint8_t* missing = nullptr;

    double value(std::size_t row, std::size_t feature) const {
        return values[row * n_features + feature];
    }
    bool is_missing(std::size_t row, std::size_t feature) const {
        return missing[row * n_features + feature] != 0;
    }

    static FeatureMatrix of(const SupervisedTable& table) {
        return {table.n_rows, table.n_features, table.values.data(),
                table.missing.data()};
    }
};

// Percentile split candidates, built once from the rows seen at the root and
// reused at every depth. Candidates are midpoints between adjacent observed
// values, thinned to n_bins by rank when there are more.
struct BinIndex {
    std::vector<std::vector<double>> thresholds;  // per feature, ascending
    std::vector<uint16_t> codes;                  // row-major bin code per cell

    static BinIndex build(const FeatureMatrix& X, std::span<const uint32_t> rows,
                          int n_bins);
    uint16_t code(std::size_t row, std::size_t feature, std::size_t n_features) const {
        return codes[row * n_features + feature];
    }
};

struct SplitCandidate {
    SplitRule rule;
    double gain = 0.0;
};

// Gain-maximising rule over (feature, percentile threshold, missing policy),
// or nullopt when no candidate improves on the parent. Ties break on lowest
// feature, then lowest threshold, then policy order (MissingOnly carries no
// threshold and is examined after every threshold of its feature).
// Errors: MissingNotAllowed under RequireComplete when a row has a gap.
std::optional<SplitCandidate> find_best_split(
    const FeatureMatrix& X, std::span<const uint32_t> rows,
    std::span<const double> grad, std::span<const double> hess,
    const BoostConfig& config, const BinIndex* bins = nullptr,
    Rng* colsample_rng = nullptr);

// Greedy depth-wise tree under the second-order objective; leaf weights are
// -G/(H+lambda).
Tree fit_tree(const FeatureMatrix& X, std::span<const uint32_t> rows,
              std::span<const double> grad, std::span<const double> hess,
              const BoostConfig& config, const BinIndex* bins = nullptr,
              Rng* colsample_rng = nullptr);

struct BoostedEnsemble {
    BoostConfig config;
    double base_margin = 0.0;
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;
    std::vector<double> train_logloss;  // per completed round; not serialized

    double predict_margin(std::span<const double> features,
                          std::span<const uint8_t> missing) const;
    // Sigmoid of the margin, clamped into (0,1). Errors: ArityMismatch;
    // MissingNotAllowed for RequireComplete models fed missing inputs.
    double predict_proba(std::span<const double> features,
                         std::span<const uint8_t> missing) const;
    std::vector<double> predict_proba(const FeatureMatrix& X) const;

    std::string to_json() const;
    static BoostedEnsemble from_json(const std::string& text);
};

// Second-order boosting of logistic loss: g = p - y, h = p(1-p), starting
// from the logit of the training prevalence. Errors: DegenerateLabels.
BoostedEnsemble fit_boosted(const SupervisedTable& table, const BoostConfig& config,
                            uint64_t seed);

// Bagged classification forest; each tree is a CART grown on a bootstrap
// sample (plain rows when subsample == 1) with per-split feature sampling,
// and its leaves carry class rates. Probability is the across-tree mean.
struct BaggedForest {
    BoostConfig config;
    int n_trees = 0;
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;

    double predict_proba(std::span<const double> features,
                         std::span<const uint8_t> missing) const;
    std::vector<double> predict_proba(const FeatureMatrix& X) const;
};

BaggedForest fit_forest(const SupervisedTable& table, const BoostConfig& config,
                        int n_trees, uint64_t seed);

}  // namespace distress
