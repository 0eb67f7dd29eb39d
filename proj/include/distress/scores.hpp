#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace distress {

// Weighted-ratio credit score; lower means more distressed under the classic
// weighting.
struct LinearScoreSpec {
    std::vector<std::string> ratio_names;
    std::vector<double> weights;

    // 1.2 WC/TA + 1.4 RE/TA + 3.3 EBIT/TA + 0.6 MVE/TL + 1.0 Sales/TA.
    static LinearScoreSpec altman();
    void validate() const;
};

// Dot product of ratios and weights. A null missing mask means all observed.
// Errors: MissingInput, ArityMismatch.
double z_score(std::span<const double> ratios, const LinearScoreSpec& spec,
               std::span<const uint8_t> missing = {});

// Merton-style distance: [ln(V/D) + (mu - sigma^2/2) T] / (sigma sqrt(T)).
// Higher is safer. Errors: BadDomain (V, D, sigma, T must be positive).
double distance_to_default(double asset_value, double debt, double drift,
                           double volatility, double horizon);

enum class ScoreDirection : uint8_t {
    LowIsRisky = 0,   // cutoffs are lower percentiles, predict-fail below them
    HighIsRisky = 1,  // symmetric from the top of the in-sample distribution
};

struct PercentileRow {
    int percentile = 0;
    double cutoff = 0.0;
    int64_t predicted = 0;  // size of the predict-fail set
    int64_t hits = 0;       // true failures inside it
    double precision = 0.0;
    double fdr = 0.0;
    bool defined = true;  // false when the predict-fail set is empty
};

// Percentile-cutoff classification: cutoffs are nearest-rank percentiles of
// the in-sample scores (for HighIsRisky, the p-th percentile from the top, so
// the report on -scores mirrors the LowIsRisky report row for row); the
// predict-fail set compares inclusively. An empty set reports an undefined
// precision marker, not zero.
std::vector<PercentileRow> percentile_cutoff_report(
    std::span<const double> scores, std::span<const int> labels,
    ScoreDirection direction, std::span<const double> in_sample_scores,
    const std::vector<int>& percentiles = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});

}  // namespace distress
