#include "distress/scores.hpp"

#include <algorithm>
#include <cmath>

#include "distress/error.hpp"
#include "distress/util.hpp"

namespace distress {

LinearScoreSpec LinearScoreSpec::altman() {
    return {{"working_capital_ta", "retained_earnings_ta", "ebit_ta",
             "market_equity_tl", "sales_ta"},
            {1.2, 1.4, 3.3, 0.6, 1.0}};
}

void LinearScoreSpec::validate() const {
    require(ratio_names.size() == weights.size(), "ArityMismatch",
            "ratio names and weights must have equal length");
    for (const double w : weights)
        require(std::isfinite(w), "BadConfig", "weights must be finite");
}

double z_score(std::span<const double> ratios, const LinearScoreSpec& spec,
               std::span<const uint8_t> missing) {
    spec.validate();
    require(ratios.size() == spec.weights.size(), "ArityMismatch",
            "ratio arity does not match the score spec");
    if (!missing.empty()) {
        require(missing.size() == ratios.size(), "ArityMismatch",
                "mask arity does not match the ratios");
        for (const uint8_t m : missing)
            require(m == 0, "MissingInput", "z_score needs all ratios observed");
    }
    double score = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i)
        score += spec.weights[i] * ratios[i];
    return score;
}

double distance_to_default(double asset_value, double debt, double drift,
                           double volatility, double horizon) {
    require(asset_value > 0.0 && debt > 0.0, "BadDomain",
            "asset value and debt must be positive");
    require(volatility > 0.0 && horizon > 0.0, "BadDomain",
            "volatility and horizon must be positive");
    return (std::log(asset_value / debt) +
            (drift - 0.5 * volatility * volatility) * horizon) /
           (volatility * std::sqrt(horizon));
}

std::vector<PercentileRow> percentile_cutoff_report(
    std::span<const double> scores, std::span<const int> labels,
    ScoreDirection direction, std::span<const double> in_sample_scores,
    const std::vector<int>& percentiles) {
    require(scores.size() == labels.size(), "ArityMismatch", "scores vs labels");
    require(!in_sample_scores.empty(), "EmptyInput",
            "need in-sample scores for the cutoffs");

    std::vector<double> sorted(in_sample_scores.begin(), in_sample_scores.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();

    std::vector<PercentileRow> report;
    for (const int p : percentiles) {
        require(p >= 1 && p <= 100, "BadConfig", "percentiles must lie in [1,100]");
        auto rank = static_cast<std::size_t>(
            std::ceil(static_cast<double>(p) / 100.0 * static_cast<double>(m)));
        rank = std::max<std::size_t>(1, std::min(rank, m));

        PercentileRow row;
        row.percentile = p;
        if (direction == ScoreDirection::LowIsRisky) {
            row.cutoff = sorted[rank - 1];
            for (std::size_t i = 0; i < scores.size(); ++i) {
                if (scores[i] <= row.cutoff) {
                    row.predicted += 1;
                    row.hits += labels[i] ? 1 : 0;
                }
            }
        } else {
            row.cutoff = sorted[m - rank];  // p-th percentile from the top
            for (std::size_t i = 0; i < scores.size(); ++i) {
                if (scores[i] >= row.cutoff) {
                    row.predicted += 1;
                    row.hits += labels[i] ? 1 : 0;
                }
            }
        }
        row.defined = row.predicted > 0;
        if (row.defined) {
            row.precision =
                static_cast<double>(row.hits) / static_cast<double>(row.predicted);
            row.fdr = 1.0 - row.precision;
        }
        report.push_back(row);
    }
    return report;
}

}  // namespace distress
