#include "distress/zombie.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "distress/error.hpp"
#include "distress/metrics.hpp"
#include "distress/util.hpp"

namespace distress {

void RiskPanel::validate() const {
    std::set<std::pair<std::string, int>> keys;
    for (const auto& row : rows) {
        require(row.probability > 0.0 && row.probability < 1.0, "BadConfig",
                "probabilities must lie strictly in (0,1)");
        require(row.failed == 0 || row.failed == 1, "BadLabel",
                "failed must be 0 or 1");
        require(keys.emplace(row.firm_id, row.year).second, "DuplicateKey",
                row.firm_id + "/" + std::to_string(row.year));
    }
}

DecileThresholds decile_thresholds(const RiskPanel& risk) {
    std::map<int, std::vector<double>> by_year;
    for (const auto& row : risk.rows) by_year[row.year].push_back(row.probability);

    DecileThresholds thresholds;
    for (auto& [year, probs] : by_year) {
        require(probs.size() >= 10, "TooFewPredictions",
                "year " + std::to_string(year) + " has fewer than 10 predictions");
        std::sort(probs.begin(), probs.end());
        std::array<double, 9> cuts{};
        for (int j = 1; j <= 9; ++j)
            cuts[j - 1] = nearest_rank_percentile(probs, 10.0 * j);
        thresholds.emplace(year, cuts);
    }
    return thresholds;
}

namespace {

const std::array<double, 9>& thresholds_for(const DecileThresholds& thresholds,
                                            int year) {
    const auto it = thresholds.find(year);
    require(it != thresholds.end(), "MissingYearThresholds",
            "no decile thresholds for year " + std::to_string(year));
    return it->second;
}

// 0 = 9th decile (>= q9) down to 4 = below the 6th decile.
int risk_bin(double probability, const std::array<double, 9>& cuts) {
    if (probability >= cuts[8]) return 0;
    if (probability >= cuts[7]) return 1;
    if (probability >= cuts[6]) return 2;
    if (probability >= cuts[5]) return 3;
    return 4;
}

}  // namespace

std::vector<uint8_t> q_indicator(const RiskPanel& risk,
                                 const DecileThresholds& thresholds, int decile) {
    require(decile >= 1 && decile <= 9, "BadConfig", "decile must lie in [1,9]");
    std::vector<uint8_t> q(risk.rows.size(), 0);
    for (std::size_t i = 0; i < risk.rows.size(); ++i) {
        const auto& row = risk.rows[i];
        const auto& cuts = thresholds_for(thresholds, row.year);
        q[i] = row.probability >= cuts[decile - 1] && row.failed != 1 ? 1 : 0;
    }
    return q;
}

std::vector<uint8_t> zombie_flags(const RiskPanel& risk,
                                  const DecileThresholds& thresholds, int window) {
    require(window >= 1, "BadConfig", "window must be >= 1");
    const auto q9 = q_indicator(risk, thresholds, 9);
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t i = 0; i < risk.rows.size(); ++i)
        index.emplace(std::make_pair(risk.rows[i].firm_id, risk.rows[i].year), i);

    std::vector<uint8_t> flags(risk.rows.size(), 0);
    for (std::size_t i = 0; i < risk.rows.size(); ++i) {
        bool run = true;
        for (int back = 0; back < window && run; ++back) {
            const auto it =
                index.find({risk.rows[i].firm_id, risk.rows[i].year - back});
            run = it != index.end() && q9[it->second] == 1;
        }
        flags[i] = run ? 1 : 0;
    }
    return flags;
}

BaccScan bacc_cutoff_scan(const RiskPanel& risk, std::vector<double> grid) {
    std::vector<double> probs;
    std::vector<int> labels;
    for (const auto& row : risk.rows) {
        probs.push_back(row.probability);
        labels.push_back(row.failed);
    }
    std::size_t positives = 0;
    for (const int y : labels) positives += y ? 1 : 0;
    require(positives > 0 && positives < labels.size(), "OneClass",
            "bacc scan needs both outcomes");

    if (grid.empty())
        for (int step = 0; step < 50; ++step)
            grid.push_back(0.50 + 0.01 * static_cast<double>(step));

    BaccScan scan;
    for (const double cutoff : grid) {
        const auto confusion = confusion_at(probs, labels, cutoff);
        scan.rows.push_back({cutoff, f1_bacc(confusion).bacc});
    }
    for (std::size_t i = 1; i < scan.rows.size(); ++i)
        if (scan.rows[i].bacc > scan.rows[scan.argmax].bacc) scan.argmax = i;
    return scan;
}

TransitionMatrix decile_transition_matrix(const RiskPanel& risk,
                                          const DecileThresholds& thresholds) {
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t i = 0; i < risk.rows.size(); ++i)
        index.emplace(std::make_pair(risk.rows[i].firm_id, risk.rows[i].year), i);

    TransitionMatrix matrix;
    matrix.bin_names = {"9th decile", "8th decile", "7th decile", "6th decile",
                        "below 6th decile"};
    matrix.counts.assign(5, std::vector<int64_t>(5, 0));
    matrix.shares.assign(5, std::vector<double>(5, 0.0));

    int64_t pairs = 0;
    for (std::size_t i = 0; i < risk.rows.size(); ++i) {
        const auto& now = risk.rows[i];
        if (now.failed) continue;
        const auto it = index.find({now.firm_id, now.year + 1});
        if (it == index.end()) continue;
        const auto& next = risk.rows[it->second];
        if (next.failed) continue;  // survivors of both years only
        const int from = risk_bin(now.probability, thresholds_for(thresholds, now.year));
        const int to =
            risk_bin(next.probability, thresholds_for(thresholds, next.year));
        matrix.counts[from][to] += 1;
        pairs += 1;
    }
    require(pairs > 0, "NoPairs", "no surviving consecutive-year pairs");

    for (int a = 0; a < 5; ++a) {
        int64_t total = 0;
        for (int b = 0; b < 5; ++b) total += matrix.counts[a][b];
        if (total == 0) continue;
        // The last populated cell absorbs rounding so the row sums to one
        // exactly.
        int last = -1;
        for (int b = 0; b < 5; ++b)
            if (matrix.counts[a][b] > 0) last = b;
        double partial = 0.0;
        for (int b = 0; b < 5; ++b) {
            if (b == last) continue;
            matrix.shares[a][b] = static_cast<double>(matrix.counts[a][b]) /
                                  static_cast<double>(total);
            partial += matrix.shares[a][b];
        }
        matrix.shares[a][last] = 1.0 - partial;
    }
    return matrix;
}

std::vector<ZombieOutcomeRow> zombie_outcome_transitions(
    const RiskPanel& risk, std::span<const uint8_t> flags,
    const DecileThresholds& thresholds) {
    require(flags.size() == risk.rows.size(), "ArityMismatch",
            "flags must parallel the risk panel");
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t i = 0; i < risk.rows.size(); ++i)
        index.emplace(std::make_pair(risk.rows[i].firm_id, risk.rows[i].year), i);

    struct Tally {
        int64_t fail = 0, remain = 0, lower = 0, none = 0;
        int64_t total() const { return fail + remain + lower + none; }
    };
    std::map<int, Tally> by_year;
    for (std::size_t i = 0; i < risk.rows.size(); ++i) {
        if (!flags[i]) continue;
        const auto& row = risk.rows[i];
        const auto it = index.find({row.firm_id, row.year + 1});
        if (it == index.end()) continue;  // next year unobservable
        const auto& next = risk.rows[it->second];
        Tally& tally = by_year[row.year];
        if (next.failed) {
            tally.fail += 1;
        } else if (flags[it->second]) {
            tally.remain += 1;
        } else if (risk_bin(next.probability,
                            thresholds_for(thresholds, next.year)) <= 3) {
            tally.lower += 1;
        } else {
            tally.none += 1;
        }
    }

    std::vector<ZombieOutcomeRow> report;
    for (const auto& [year, tally] : by_year) {
        const auto total = static_cast<double>(tally.total());
        report.push_back({year, tally.total(),
                          static_cast<double>(tally.fail) / total,
                          static_cast<double>(tally.remain) / total,
                          static_cast<double>(tally.lower) / total,
                          static_cast<double>(tally.none) / total});
    }
    return report;
}

std::vector<ZombieShareRow> zombie_share_series(const RiskPanel& risk,
                                                std::span<const uint8_t> flags) {
    require(flags.size() == risk.rows.size(), "ArityMismatch",
            "flags must parallel the risk panel");
    std::map<int, ZombieShareRow> by_year;
    for (std::size_t i = 0; i < risk.rows.size(); ++i) {
        auto& row = by_year[risk.rows[i].year];
        row.year = risk.rows[i].year;
        row.active += 1;
        row.zombies += flags[i] ? 1 : 0;
    }
    std::vector<ZombieShareRow> series;
    for (auto& [year, row] : by_year) {
        row.share = row.active == 0
                        ? 0.0
                        : static_cast<double>(row.zombies) /
                              static_cast<double>(row.active);
        series.push_back(row);
    }
    return series;
}

OverlapShares overlap_report(const RiskPanel& risk, std::span<const uint8_t> flags,
                             std::span<const uint8_t> indicator) {
    require(flags.size() == risk.rows.size() &&
                indicator.size() == risk.rows.size(),
            "ArityMismatch", "flags and indicator must parallel the risk panel");
    int64_t both = 0, zombie_only = 0, indicator_only = 0;
    for (std::size_t i = 0; i < risk.rows.size(); ++i) {
        if (flags[i] && indicator[i])
            both += 1;
        else if (flags[i])
            zombie_only += 1;
        else if (indicator[i])
            indicator_only += 1;
    }
    const int64_t unions = both + zombie_only + indicator_only;
    require(unions > 0, "EmptyUnion", "no flagged firm-years on either side");
    OverlapShares shares;
    shares.union_size = unions;
    const auto u = static_cast<double>(unions);
    shares.common = static_cast<double>(both) / u;
    shares.zombie_only = static_cast<double>(zombie_only) / u;
    shares.indicator_only = static_cast<double>(indicator_only) / u;
    return shares;
}

}  // namespace distress
