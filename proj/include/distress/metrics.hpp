#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "distress/panel.hpp"

namespace distress {

struct Confusion {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t tn = 0;
    int64_t fn = 0;

    int64_t total() const { return tp + fp + tn + fn; }
};

// Confusion at a threshold; predicted failure means score >= threshold.
Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold);

// Mann-Whitney form: P(score_pos > score_neg) + 1/2 P(tie), computed exactly
// via midranks. Errors: OneClass.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Average-precision area: sum over distinct thresholds of (R_i - R_{i-1}) P_i.
// Errors: NoPositives.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

struct F1Bacc {
    double f1 = 0.0;
    double bacc = 0.0;
    bool f1_defined = true;    // false when 2TP+FP+FN == 0
    bool tpr_defined = true;   // false when TP+FN == 0
    bool tnr_defined = true;   // false when TN+FP == 0
};

// Zero-denominator terms contribute 0 and are flagged.
F1Bacc f1_bacc(const Confusion& confusion);

// Efron's pseudo R^2: 1 - sum (y-p)^2 / sum (y-ybar)^2. Errors: OneClass.
double pseudo_r2(std::span<const double> probs, std::span<const int> labels);

struct ChiSquared {
    double statistic = 0.0;
    bool significant_1pct = false;  // statistic > 6.635, df = 1
};

// Pearson statistic on a 2x2 count table. Errors: ZeroMargin.
ChiSquared chi_squared_2x2(const std::array<std::array<double, 2>, 2>& table);

struct MetricReport {
    double auc = 0.0;
    double pr = 0.0;
    double f1 = 0.0;
    double bacc = 0.0;
    double pseudo_r2 = 0.0;
    double threshold_used = 0.5;
    Confusion confusion;
};

MetricReport evaluate_classifier(std::span<const double> probs,
                                 std::span<const int> labels,
                                 double threshold = 0.5);

struct OddsRatioRow {
    std::string feature;
    double odds_ratio = 1.0;
    double coefficient = 0.0;
    std::size_t n = 0;
};

// Per-predictor odds ratio of failure on a missing-at-least-once indicator
// over the trailing `window` years (the firm-year's own year included).
// Fitted with the logistic baseline, no fixed effects.
// Errors: DegenerateIndicator when an indicator is constant.
std::vector<OddsRatioRow> missingness_odds_ratios(const FirmPanel& panel,
                                                  int window = 3);

}  // namespace distress
