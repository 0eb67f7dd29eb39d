#include "distress/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distress/error.hpp"
#include "distress/metrics.hpp"
#include "distress/rng.hpp"

namespace distress {

ShapleyReport shapley_exact(const ValueFunction& v, int q) {
    require(q >= 1, "BadConfig", "need at least one player");
    require(q <= 14, "TooManyFeatures", "exact mode is limited to 14 players");

    const std::size_t subsets = std::size_t{1} << q;
    std::vector<double> value(subsets);
    std::vector<uint8_t> mask(q, 0);
    for (std::size_t s = 0; s < subsets; ++s) {
        for (int m = 0; m < q; ++m) mask[m] = (s >> m) & 1 ? 1 : 0;
        value[s] = v(mask);
    }

    // Subset weights |S|! (q-|S|-1)! / q!
    std::vector<double> weight(q);
    {
        std::vector<double> log_factorial(q + 1, 0.0);
        for (int i = 2; i <= q; ++i)
            log_factorial[i] = log_factorial[i - 1] + std::log(static_cast<double>(i));
        for (int size = 0; size < q; ++size)
            weight[size] = std::exp(log_factorial[size] + log_factorial[q - size - 1] -
                                    log_factorial[q]);
    }

    ShapleyReport report;
    report.phi.assign(q, 0.0);
    report.se.assign(q, 0.0);
    report.v_empty = value[0];
    report.v_full = value[subsets - 1];
    for (int m = 0; m < q; ++m) {
        const std::size_t bit = std::size_t{1} << m;
        double phi = 0.0;
        for (std::size_t s = 0; s < subsets; ++s) {
            if (s & bit) continue;
            const int size = std::popcount(s);
            phi += weight[size] * (value[s | bit] - value[s]);
        }
        report.phi[m] = phi;
    }
    return report;
}

ShapleyReport shapley_sampled(const ValueFunction& v, int q, int n_permutations,
                              uint64_t seed) {
    require(q >= 1, "BadConfig", "need at least one player");
    require(n_permutations >= 30, "BadConfig", "need at least 30 permutations");

    std::vector<uint8_t> mask(q, 0);
    const double v_empty = v(mask);
    std::fill(mask.begin(), mask.end(), 1);
    const double v_full = v(mask);

    std::vector<double> sum(q, 0.0), sum_squares(q, 0.0);
    std::vector<int> order(q);
    Rng rng(seed);
    for (int draw = 0; draw < n_permutations; ++draw) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::fill(mask.begin(), mask.end(), 0);
        double previous = v_empty;
        for (int position = 0; position < q; ++position) {
            const int player = order[position];
            mask[player] = 1;
            // The prefix value of the full permutation is v_full; reuse it.
            const double current = position + 1 == q ? v_full : v(mask);
            const double marginal = current - previous;
            sum[player] += marginal;
            sum_squares[player] += marginal * marginal;
            previous = current;
        }
    }

    ShapleyReport report;
    report.phi.assign(q, 0.0);
    report.se.assign(q, 0.0);
    report.v_empty = v_empty;
    report.v_full = v_full;
    const auto n = static_cast<double>(n_permutations);
    for (int m = 0; m < q; ++m) {
        report.phi[m] = sum[m] / n;
        const double variance =
            std::max(0.0, sum_squares[m] / n - report.phi[m] * report.phi[m]);
        report.se[m] = std::sqrt(variance / n);
    }
    return report;
}

std::map<std::string, double> group_shapley(const ShapleyReport& report,
                                            const std::vector<std::string>& groups) {
    require(groups.size() == report.phi.size(), "ArityMismatch",
            "one group tag per player");
    std::map<std::string, double> totals;
    for (std::size_t m = 0; m < groups.size(); ++m) {
        require(!groups[m].empty(), "UnlabeledFeature",
                "player " + std::to_string(m) + " has no group");
        totals[groups[m]] += report.phi[m];
    }
    return totals;
}

ModelValueFunction::ModelValueFunction(const BoostedEnsemble& model,
                                       const SupervisedTable& eval,
                                       const SupervisedTable& background,
                                       const ModelValueConfig& config)
    : model_(model), config_(config) {
    require(eval.n_features == background.n_features, "ArityMismatch",
            "eval and background tables disagree on features");
    require(background.n_rows > 0, "EmptyInput", "background sample is empty");
    require(config.draws_per_row >= 1, "BadConfig", "draws_per_row must be >= 1");

    Rng rng(config.seed);
    auto pick_rows = [&](const SupervisedTable& table, int wanted,
                         uint64_t stream) {
        std::vector<std::size_t> rows(table.n_rows);
        std::iota(rows.begin(), rows.end(), 0);
        if (static_cast<std::size_t>(wanted) < table.n_rows) {
            Rng picker = rng.child(stream);
            picker.shuffle(rows);
            rows.resize(static_cast<std::size_t>(wanted));
            std::sort(rows.begin(), rows.end());
        }
        return rows;
    };
    eval_ = eval.subset(pick_rows(eval, config.eval_rows, 1));
    background_ = background.subset(pick_rows(background, config.background_rows, 2));

    // One fixed background draw per (eval row, draw); independent of the
    // subset mask so the payoff is smooth across subsets.
    Rng draw_rng = rng.child(3);
    draw_index_.resize(eval_.n_rows * static_cast<std::size_t>(config.draws_per_row));
    for (auto& index : draw_index_)
        index = static_cast<std::size_t>(draw_rng.below(background_.n_rows));

    background_median_.assign(eval_.n_features, 0.0);
    background_all_missing_.assign(eval_.n_features, 0);
    std::vector<double> observed;
    for (std::size_t f = 0; f < eval_.n_features; ++f) {
        observed.clear();
        for (std::size_t r = 0; r < background_.n_rows; ++r)
            if (!background_.is_missing(r, f))
                observed.push_back(background_.value(r, f));
        if (observed.empty()) {
            background_all_missing_[f] = 1;
            continue;
        }
        std::sort(observed.begin(), observed.end());
        background_median_[f] = observed[(observed.size() - 1) / 2];
    }

    for (std::size_t f = 0; f < eval_.n_features; ++f) {
        player_names_.push_back(eval_.feature_names[f]);
        player_feature_.push_back(static_cast<int>(f));
        player_is_mask_.push_back(0);
    }
    if (config.missingness_players) {
        for (std::size_t f = 0; f < eval_.n_features; ++f) {
            player_names_.push_back(eval_.feature_names[f] + "_missing");
            player_feature_.push_back(static_cast<int>(f));
            player_is_mask_.push_back(1);
        }
    }
}

std::vector<std::string> ModelValueFunction::player_groups(
    const std::map<std::string, std::string>& feature_groups) const {
    std::vector<std::string> groups;
    for (std::size_t m = 0; m < player_names_.size(); ++m) {
        if (player_is_mask_[m]) {
            groups.push_back("Missingness");
            continue;
        }
        const auto& feature = eval_.feature_names[player_feature_[m]];
        const auto it = feature_groups.find(feature);
        groups.push_back(it == feature_groups.end() ? feature : it->second);
    }
    return groups;
}

double ModelValueFunction::operator()(const std::vector<uint8_t>& active) const {
    require(active.size() == player_names_.size(), "ArityMismatch",
            "mask must have one entry per player");
    const std::size_t p = eval_.n_features;

    // Per-feature switches derived from the player mask.
    std::vector<uint8_t> value_from_row(p, 1), mask_from_row(p, 1);
    for (std::size_t m = 0; m < active.size(); ++m) {
        if (active[m]) continue;
        if (player_is_mask_[m])
            mask_from_row[player_feature_[m]] = 0;
        else
            value_from_row[player_feature_[m]] = 0;
    }
    if (!config_.missingness_players) {
        // One player controls value and missing bit together.
        mask_from_row = value_from_row;
    }

    std::vector<double> features(p);
    std::vector<uint8_t> missing(p);
    std::vector<double> predictions(eval_.n_rows, 0.0);
    const auto draws = static_cast<std::size_t>(config_.draws_per_row);
    for (std::size_t r = 0; r < eval_.n_rows; ++r) {
        double total = 0.0;
        for (std::size_t d = 0; d < draws; ++d) {
            const std::size_t b = draw_index_[r * draws + d];
            for (std::size_t f = 0; f < p; ++f) {
                const bool miss = mask_from_row[f] ? eval_.is_missing(r, f)
                                                   : background_.is_missing(b, f);
                if (miss) {
                    missing[f] = 1;
                    features[f] = 0.0;
                    continue;
                }
                missing[f] = 0;
                // Preferred source, then the other one, then the background
                // median; a feature nowhere observed stays missing.
                const bool prefer_row = value_from_row[f] != 0;
                if (prefer_row && !eval_.is_missing(r, f)) {
                    features[f] = eval_.value(r, f);
                } else if (!prefer_row && !background_.is_missing(b, f)) {
                    features[f] = background_.value(b, f);
                } else if (!eval_.is_missing(r, f)) {
                    features[f] = eval_.value(r, f);
                } else if (!background_.is_missing(b, f)) {
                    features[f] = background_.value(b, f);
                } else if (!background_all_missing_[f]) {
                    features[f] = background_median_[f];
                } else {
                    missing[f] = 1;
                }
            }
            total += model_.predict_proba(features, missing);
        }
        predictions[r] = total / static_cast<double>(draws);
    }
    return roc_auc(predictions, eval_.labels);
}

}  // namespace distress
