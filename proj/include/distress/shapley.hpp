#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "distress/panel.hpp"
#include "distress/tree.hpp"

namespace distress {

// Payoff of a player subset; the mask has one byte per player, nonzero =
// active. Must be deterministic for a given mask.
using ValueFunction = std::function<double(const std::vector<uint8_t>&)>;

struct ShapleyReport {
    std::vector<double> phi;
    std::vector<double> se;  // zero in exact mode
    double v_full = 0.0;
    double v_empty = 0.0;

    double total() const {
        double sum = 0.0;
        for (const double x : phi) sum += x;
        return sum;
    }
};

// Exact Shapley values by subset enumeration (2^q evaluations, memoised).
// Errors: TooManyFeatures for q > 14.
ShapleyReport shapley_exact(const ValueFunction& v, int q);

// Unbiased permutation-sampling estimator; per-player standard error is the
// sample std of marginal contributions over the square root of the draw
// count. Errors: BadConfig for fewer than 30 permutations.
ShapleyReport shapley_sampled(const ValueFunction& v, int q, int n_permutations,
                              uint64_t seed);

// Additive aggregation: group value = sum of member phi. Players with an
// empty group tag raise UnlabeledFeature.
std::map<std::string, double> group_shapley(const ShapleyReport& report,
                                            const std::vector<std::string>& groups);

// Model-backed value function: payoff of a subset is the AUC of predictions
// where inactive players are neutralized by resampling from a background
// sample (interventional convention; draws fixed per evaluation row, so v is
// deterministic). With missingness players on, each feature contributes a
// second player that controls where its missing bit comes from.
struct ModelValueConfig {
    int background_rows = 256;
    int eval_rows = 512;
    int draws_per_row = 8;
    bool missingness_players = false;
    uint64_t seed = 0;
};

class ModelValueFunction {
public:
    ModelValueFunction(const BoostedEnsemble& model, const SupervisedTable& eval,
                       const SupervisedTable& background,
                       const ModelValueConfig& config);

    int n_players() const { return static_cast<int>(player_names_.size()); }
    const std::vector<std::string>& player_names() const { return player_names_; }
    // Feature group per player; missingness players all map to "Missingness".
    std::vector<std::string> player_groups(
        const std::map<std::string, std::string>& feature_groups) const;

    double operator()(const std::vector<uint8_t>& active) const;

private:
    const BoostedEnsemble& model_;
    SupervisedTable eval_;
    SupervisedTable background_;
    ModelValueConfig config_;
    std::vector<std::string> player_names_;
    std::vector<int> player_feature_;     // feature index per player
    std::vector<uint8_t> player_is_mask_;  // 1 = controls the missing bit
    std::vector<std::size_t> draw_index_;  // eval row x draw -> background row
    std::vector<double> background_median_;  // observed median per feature
    std::vector<uint8_t> background_all_missing_;
};

}  // namespace distress
