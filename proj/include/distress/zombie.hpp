#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace distress {

// Out-of-fold failure probabilities per firm-year; the substrate for
// deciles, zombie flags and transition reports.
struct RiskRow {
    std::string firm_id;
    int year = 0;
    double probability = 0.0;  // in (0,1)
    int failed = 0;            // outcome realized that year
    int fold = -1;             // provenance
};

struct RiskPanel {
    std::vector<RiskRow> rows;
    std::string source;

    void validate() const;  // probabilities in (0,1), (firm, year) unique
};

// Per-year q_1..q_9 nearest-rank percentile thresholds over all predictions
// of that year (survivor filtering happens in the Q indicator, not here).
// Errors: TooFewPredictions for a year with fewer than 10 predictions.
using DecileThresholds = std::map<int, std::array<double, 9>>;

DecileThresholds decile_thresholds(const RiskPanel& risk);

// Q_{j,t} per risk row: 1 iff probability >= q_j of its year (inclusive) and
// the firm did not fail that year. Errors: MissingYearThresholds.
std::vector<uint8_t> q_indicator(const RiskPanel& risk,
                                 const DecileThresholds& thresholds, int decile);

// Zombie flag per risk row: Q_9 held on `window` consecutive calendar years
// ending at the row's year. A gap in the firm's records breaks the run.
std::vector<uint8_t> zombie_flags(const RiskPanel& risk,
                                  const DecileThresholds& thresholds,
                                  int window = 3);

struct BaccScanRow {
    double cutoff = 0.0;
    double bacc = 0.0;
};

struct BaccScan {
    std::vector<BaccScanRow> rows;
    std::size_t argmax = 0;  // first maximum

    double best_cutoff() const { return rows[argmax].cutoff; }
    double best_bacc() const { return rows[argmax].bacc; }
};

// Balanced accuracy of "failed = probability >= cutoff" over the grid
// (default 0.50..0.99 in steps of 0.01). Errors: OneClass.
BaccScan bacc_cutoff_scan(const RiskPanel& risk, std::vector<double> grid = {});

// Risk bins at t vs t+1 over firms surviving both years: 9th, 8th, 7th, 6th
// decile and below-6th. Rows are exact count ratios. Errors: NoPairs.
struct TransitionMatrix {
    std::vector<std::string> bin_names;
    std::vector<std::vector<int64_t>> counts;
    std::vector<std::vector<double>> shares;  // rows sum to 1 exactly
};

TransitionMatrix decile_transition_matrix(const RiskPanel& risk,
                                          const DecileThresholds& thresholds);

// Next-year outcomes of zombie firm-years: failure, staying a zombie,
// relatively lower distress (6th..9th decile band) or no distress (below the
// 6th decile). Shares per year over zombies with an observable next year;
// the final panel year has none and is omitted.
struct ZombieOutcomeRow {
    int year = 0;
    int64_t zombies = 0;  // with observable next year
    double fail = 0.0;
    double remain = 0.0;
    double lower_distress = 0.0;
    double no_distress = 0.0;
};

std::vector<ZombieOutcomeRow> zombie_outcome_transitions(
    const RiskPanel& risk, std::span<const uint8_t> flags,
    const DecileThresholds& thresholds);

struct ZombieShareRow {
    int year = 0;
    int64_t active = 0;
    int64_t zombies = 0;
    double share = 0.0;
};

// Share of zombie-flagged firm-years among the firms observed each year.
std::vector<ZombieShareRow> zombie_share_series(const RiskPanel& risk,
                                                std::span<const uint8_t> flags);

struct OverlapShares {
    double common = 0.0;
    double zombie_only = 0.0;
    double indicator_only = 0.0;
    int64_t union_size = 0;
};

// Overlap with an external firm-year indicator over the union of flagged
// firm-years; the three shares sum to one. Errors: EmptyUnion.
OverlapShares overlap_report(const RiskPanel& risk, std::span<const uint8_t> flags,
                             std::span<const uint8_t> indicator);

}  // namespace distress
