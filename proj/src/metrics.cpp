#include "distress/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "distress/baselines.hpp"
#include "distress/error.hpp"
#include "distress/util.hpp"

namespace distress {

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold) {
    require(scores.size() == labels.size(), "ArityMismatch", "scores vs labels");
    Confusion confusion;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i]) {
            (predicted ? confusion.tp : confusion.fn) += 1;
        } else {
            (predicted ? confusion.fp : confusion.tn) += 1;
        }
    }
    return confusion;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "ArityMismatch", "scores vs labels");
    std::size_t n_pos = 0, n_neg = 0;
    for (const int y : labels) (y ? n_pos : n_neg) += 1;
    require(n_pos > 0 && n_neg > 0, "OneClass", "roc_auc needs both labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks handle ties exactly.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]]) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "ArityMismatch", "scores vs labels");
    std::size_t n_pos = 0;
    for (const int y : labels) n_pos += y ? 1 : 0;
    require(n_pos > 0, "NoPositives", "pr_auc needs at least one positive");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    std::size_t tp = 0, predicted = 0;
    double previous_recall = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            predicted += 1;
            tp += labels[order[k]] ? 1 : 0;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision =
            static_cast<double>(tp) / static_cast<double>(predicted);
        area += (recall - previous_recall) * precision;
        previous_recall = recall;
        i = j + 1;
    }
    return area;
}

F1Bacc f1_bacc(const Confusion& c) {
    require(c.tp >= 0 && c.fp >= 0 && c.tn >= 0 && c.fn >= 0, "BadConfig",
            "confusion counts must be nonnegative");
    F1Bacc out;
    const double f1_denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    out.f1_defined = f1_denom > 0.0;
    out.f1 = out.f1_defined ? 2.0 * static_cast<double>(c.tp) / f1_denom : 0.0;

    double tpr = 0.0, tnr = 0.0;
    out.tpr_defined = c.tp + c.fn > 0;
    if (out.tpr_defined)
        tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    out.tnr_defined = c.tn + c.fp > 0;
    if (out.tnr_defined)
        tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    out.bacc = 0.5 * (tpr + tnr);
    return out;
}

double pseudo_r2(std::span<const double> probs, std::span<const int> labels) {
    require(probs.size() == labels.size(), "ArityMismatch", "probs vs labels");
    std::size_t n_pos = 0;
    for (const int y : labels) n_pos += y ? 1 : 0;
    require(n_pos > 0 && n_pos < labels.size(), "OneClass",
            "pseudo_r2 needs both labels");
    const double mean =
        static_cast<double>(n_pos) / static_cast<double>(labels.size());
    double residual = 0.0, baseline = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double y = static_cast<double>(labels[i]);
        residual += (y - probs[i]) * (y - probs[i]);
        baseline += (y - mean) * (y - mean);
    }
    return 1.0 - residual / baseline;
}

ChiSquared chi_squared_2x2(const std::array<std::array<double, 2>, 2>& table) {
    for (const auto& row : table)
        for (const double cell : row)
            require(cell >= 0.0, "ZeroMargin", "cells must be nonnegative");
    const double row0 = table[0][0] + table[0][1];
    const double row1 = table[1][0] + table[1][1];
    const double col0 = table[0][0] + table[1][0];
    const double col1 = table[0][1] + table[1][1];
    const double total = row0 + row1;
    require(row0 > 0.0 && row1 > 0.0 && col0 > 0.0 && col1 > 0.0, "ZeroMargin",
            "all margins must be positive");
    ChiSquared result;
    const double rows[2] = {row0, row1};
    const double cols[2] = {col0, col1};
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            const double expected = rows[r] * cols[c] / total;
            const double delta = table[r][c] - expected;
            result.statistic += delta * delta / expected;
        }
    }
    result.significant_1pct = result.statistic > 6.635;  // df=1 critical value
    return result;
}

MetricReport evaluate_classifier(std::span<const double> probs,
                                 std::span<const int> labels, double threshold) {
    MetricReport report;
    report.auc = roc_auc(probs, labels);
    report.pr = pr_auc(probs, labels);
    report.threshold_used = threshold;
    report.confusion = confusion_at(probs, labels, threshold);
    const auto fb = f1_bacc(report.confusion);
    report.f1 = fb.f1;
    report.bacc = fb.bacc;
    report.pseudo_r2 = pseudo_r2(probs, labels);
    return report;
}

std::vector<OddsRatioRow> missingness_odds_ratios(const FirmPanel& panel,
                                                  int window) {
    require(window >= 1, "BadConfig", "window must be >= 1");
    std::map<std::string, std::map<int, std::size_t>> by_firm;
    for (std::size_t i = 0; i < panel.records.size(); ++i)
        by_firm[panel.records[i].firm_id][panel.records[i].year] = i;
    {
        int min_year = 0, max_year = 0;
        bool first = true;
        for (const auto& record : panel.records) {
            if (first || record.year < min_year) min_year = record.year;
            if (first || record.year > max_year) max_year = record.year;
            first = false;
        }
        require(!first && max_year > min_year, "TooFewRecords",
                "odds ratios need a panel spanning at least two years");
    }

    std::vector<OddsRatioRow> rows;
    const std::size_t n = panel.records.size();
    for (std::size_t f = 0; f < panel.n_features(); ++f) {
        // One indicator column: feature missing at least once in the trailing
        // window of existing records.
        SupervisedTable design;
        design.feature_names = {panel.feature_names[f] + "_missing_recent"};
        design.n_features = 1;
        design.n_rows = n;
        design.values.reserve(n);
        design.missing.assign(n, 0);
        design.labels.reserve(n);
        bool seen_zero = false, seen_one = false;
        for (const auto& record : panel.records) {
            const auto& years = by_firm[record.firm_id];
            int indicator = 0;
            for (int back = 0; back < window; ++back) {
                const auto it = years.find(record.year - back);
                if (it == years.end()) continue;
                if (panel.records[it->second].missing[f]) {
                    indicator = 1;
                    break;
                }
            }
            (indicator ? seen_one : seen_zero) = true;
            design.values.push_back(static_cast<double>(indicator));
            design.labels.push_back(record.failed);
            design.firm_ids.push_back(record.firm_id);
            design.years.push_back(record.year);
        }
        require(seen_zero && seen_one, "DegenerateIndicator",
                panel.feature_names[f] + " missing-indicator is constant");
        const LogitModel model = fit_logit(design, 0.0);
        rows.push_back({panel.feature_names[f], std::exp(model.coefficients[0]),
                        model.coefficients[0], n});
    }
    return rows;
}

}  // namespace distress
