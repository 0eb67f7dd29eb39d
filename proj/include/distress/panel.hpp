#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace distress {

struct FirmYearRecord {
    std::string firm_id;
    int year = 0;
    std::vector<double> features;   // value is meaningless where missing[i] != 0
    std::vector<uint8_t> missing;   // parallel mask, 1 = value absent
    int failed = 0;                 // 0/1; failure is absorbing

    bool complete() const {
        for (uint8_t m : missing)
            if (m) return false;
        return true;
    }
};

// Longitudinal firm-year panel. Missingness is first-class: a mask next to
// the value vector, never a sentinel real, so downstream strategies pick
// their own encoding. Treated as immutable once built.
struct FirmPanel {
    std::vector<std::string> feature_names;
    std::vector<FirmYearRecord> records;
    std::map<std::string, std::string> group_labels;  // feature name -> group tag

    std::size_t n_features() const { return feature_names.size(); }
};

// Checks (firm_id, year) uniqueness, feature arity, labels in {0,1} and that
// no firm has records after a failed year. Throws Error on violation.
void validate_panel(const FirmPanel& panel);

// CSV header: firm_id,year,failed,<feature...>. Empty cells, "NA" and "NaN"
// (case-insensitive) parse as missing. Errors: SchemaMismatch, MalformedRow,
// BadLabel, DuplicateKey, InvariantViolation.
FirmPanel load_csv(const std::string& path, const std::vector<std::string>& schema);

// Reads just the feature schema from a panel CSV header.
std::vector<std::string> read_schema(const std::string& path);

// Missing cells serialize as the literal token NA; values round-trip exactly.
void save_csv(const FirmPanel& panel, const std::string& path);

struct FoldPlan {
    int k = 0;
    uint64_t seed = 0;
    std::vector<int> assignments;  // record index -> fold index in [0, k)

    std::string to_json() const;
    static FoldPlan from_json(const std::string& text);
};

// Stratified k-fold: indices are shuffled within label strata (seeded) and
// dealt round-robin with a running offset, so fold sizes differ by at most
// one overall and per stratum. Errors: TooFewRecords.
FoldPlan stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed);
FoldPlan stratified_kfold(const FirmPanel& panel, int k, uint64_t seed);

// Records with zero missing features; the input panel is untouched.
FirmPanel complete_case_filter(const FirmPanel& panel);

struct MissingnessSummary {
    std::vector<std::size_t> missing_total;     // per feature
    std::vector<std::size_t> missing_failed;    // among failed == 1 records
    std::vector<std::size_t> missing_survivor;  // among failed == 0 records
    std::vector<double> rate_total;
    std::vector<double> rate_failed;
    std::vector<double> rate_survivor;
    std::size_t n_records = 0;
    std::size_t n_failed = 0;
    std::size_t n_survivor = 0;
};

MissingnessSummary missingness_summary(const FirmPanel& panel);

// Supervised design pairing predictors at t-1 with the outcome at t. One row
// per (firm, t) whose t-1 record exists; strict year arithmetic, gaps drop.
struct SupervisedTable {
    std::vector<std::string> feature_names;
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<double> values;    // row-major, n_rows x n_features
    std::vector<uint8_t> missing;  // row-major mask
    std::vector<int> labels;       // outcome at the label year
    std::vector<std::string> firm_ids;  // per row
    std::vector<int> years;             // label year per row
    std::size_t dropped = 0;            // firm-years without a t-1 record

    double value(std::size_t row, std::size_t feature) const {
        return values[row * n_features + feature];
    }
    bool is_missing(std::size_t row, std::size_t feature) const {
        return missing[row * n_features + feature] != 0;
    }
    bool row_complete(std::size_t row) const {
        for (std::size_t f = 0; f < n_features; ++f)
            if (is_missing(row, f)) return false;
        return true;
    }
    std::size_t count_label(int label) const;
    bool has_both_labels() const;

    SupervisedTable subset(const std::vector<std::size_t>& rows) const;
    std::vector<std::size_t> complete_rows() const;
};

SupervisedTable lag_join(const FirmPanel& panel);

FoldPlan stratified_kfold(const SupervisedTable& table, int k, uint64_t seed);

}  // namespace distress
