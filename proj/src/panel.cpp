#include "distress/panel.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "distress/error.hpp"
#include "distress/rng.hpp"
#include "distress/util.hpp"

namespace distress {

void validate_panel(const FirmPanel& panel) {
    std::set<std::pair<std::string, int>> keys;
    std::map<std::string, int> failure_year;
    for (const auto& record : panel.records) {
        require(record.features.size() == panel.feature_names.size() &&
                    record.missing.size() == panel.feature_names.size(),
                "MalformedRow",
                "record arity mismatch for firm " + record.firm_id);
        require(record.failed == 0 || record.failed == 1, "BadLabel",
                "failed must be 0 or 1 for firm " + record.firm_id);
        if (!keys.emplace(record.firm_id, record.year).second)
            fail("DuplicateKey", record.firm_id + "/" + std::to_string(record.year));
        if (record.failed == 1) {
            auto [it, inserted] = failure_year.emplace(record.firm_id, record.year);
            if (!inserted) it->second = std::min(it->second, record.year);
        }
    }
    for (const auto& record : panel.records) {
        const auto it = failure_year.find(record.firm_id);
        if (it != failure_year.end() && record.year > it->second)
            fail("InvariantViolation",
                 "firm " + record.firm_id + " has records after its failure year");
    }
}

std::vector<std::string> read_schema(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "IoError", "cannot open " + path);
    std::string header;
    require(static_cast<bool>(std::getline(in, header)), "MalformedRow", "empty file " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    auto cells = split_csv_line(header);
    require(cells.size() >= 3 && cells[0] == "firm_id" && cells[1] == "year" &&
                cells[2] == "failed",
            "SchemaMismatch", "header must start with firm_id,year,failed");
    return {cells.begin() + 3, cells.end()};
}

FirmPanel load_csv(const std::string& path, const std::vector<std::string>& schema) {
    const auto file_schema = read_schema(path);
    require(file_schema == schema, "SchemaMismatch",
            "feature columns of " + path + " do not match the requested schema");

    FirmPanel panel;
    panel.feature_names = schema;

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header, already validated
    const std::size_t arity = 3 + schema.size();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        require(cells.size() == arity, "MalformedRow",
                path + ":" + std::to_string(line_no) + " has " +
                    std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(arity));
        FirmYearRecord record;
        record.firm_id = cells[0];
        require(parse_int(cells[1], record.year), "MalformedRow",
                path + ":" + std::to_string(line_no) + " bad year");
        int failed = -1;
        require(parse_int(cells[2], failed) && (failed == 0 || failed == 1), "BadLabel",
                path + ":" + std::to_string(line_no) + " failed must be 0 or 1");
        record.failed = failed;
        record.features.resize(schema.size(), 0.0);
        record.missing.resize(schema.size(), 0);
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const std::string& cell = cells[3 + f];
            if (is_missing_token(cell)) {
                record.missing[f] = 1;
            } else {
                require(parse_double(cell, record.features[f]), "MalformedRow",
                        path + ":" + std::to_string(line_no) + " bad value in column " +
                            schema[f]);
            }
        }
        panel.records.push_back(std::move(record));
    }
    validate_panel(panel);
    return panel;
}

void save_csv(const FirmPanel& panel, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "IoError", "cannot write " + path);
    out << "firm_id,year,failed";
    for (const auto& name : panel.feature_names) out << ',' << name;
    out << '\n';
    for (const auto& record : panel.records) {
        out << record.firm_id << ',' << record.year << ',' << record.failed;
        for (std::size_t f = 0; f < record.features.size(); ++f) {
            out << ',';
            if (record.missing[f])
                out << "NA";
            else
                out << format_double(record.features[f]);
        }
        out << '\n';
    }
}

std::string FoldPlan::to_json() const {
    nlohmann::json doc;
    doc["k"] = k;
    doc["seed"] = seed;
    doc["assignments"] = assignments;
    return doc.dump();
}

FoldPlan FoldPlan::from_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    FoldPlan plan;
    plan.k = doc.at("k").get<int>();
    plan.seed = doc.at("seed").get<uint64_t>();
    plan.assignments = doc.at("assignments").get<std::vector<int>>();
    return plan;
}

FoldPlan stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed) {
    require(k >= 2, "TooFewRecords", "k must be at least 2");
    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? positives : negatives).push_back(i);
    if (!positives.empty() && !negatives.empty()) {
        require(positives.size() >= static_cast<std::size_t>(k) &&
                    negatives.size() >= static_cast<std::size_t>(k),
                "TooFewRecords", "need at least k records of each label");
    }
    require(labels.size() >= static_cast<std::size_t>(k), "TooFewRecords",
            "fewer records than folds");

    Rng rng(seed);
    rng.child(0).shuffle(positives);
    rng.child(1).shuffle(negatives);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(labels.size(), -1);
    std::size_t cursor = 0;  // running offset keeps overall sizes within one
    for (const auto* stratum : {&positives, &negatives}) {
        for (const std::size_t index : *stratum) {
            plan.assignments[index] = static_cast<int>(cursor % static_cast<std::size_t>(k));
            ++cursor;
        }
    }
    return plan;
}

FoldPlan stratified_kfold(const FirmPanel& panel, int k, uint64_t seed) {
    std::vector<int> labels;
    labels.reserve(panel.records.size());
    for (const auto& record : panel.records) labels.push_back(record.failed);
    return stratified_kfold(labels, k, seed);
}

FoldPlan stratified_kfold(const SupervisedTable& table, int k, uint64_t seed) {
    return stratified_kfold(table.labels, k, seed);
}

FirmPanel complete_case_filter(const FirmPanel& panel) {
    FirmPanel filtered;
    filtered.feature_names = panel.feature_names;
    filtered.group_labels = panel.group_labels;
    for (const auto& record : panel.records)
        if (record.complete()) filtered.records.push_back(record);
    return filtered;
}

MissingnessSummary missingness_summary(const FirmPanel& panel) {
    const std::size_t p = panel.n_features();
    MissingnessSummary summary;
    summary.missing_total.assign(p, 0);
    summary.missing_failed.assign(p, 0);
    summary.missing_survivor.assign(p, 0);
    summary.n_records = panel.records.size();
    for (const auto& record : panel.records) {
        (record.failed ? summary.n_failed : summary.n_survivor) += 1;
        for (std::size_t f = 0; f < p; ++f) {
            if (!record.missing[f]) continue;
            summary.missing_total[f] += 1;
            (record.failed ? summary.missing_failed[f] : summary.missing_survivor[f]) += 1;
        }
    }
    auto rate = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    summary.rate_total.resize(p);
    summary.rate_failed.resize(p);
    summary.rate_survivor.resize(p);
    for (std::size_t f = 0; f < p; ++f) {
        summary.rate_total[f] = rate(summary.missing_total[f], summary.n_records);
        summary.rate_failed[f] = rate(summary.missing_failed[f], summary.n_failed);
        summary.rate_survivor[f] = rate(summary.missing_survivor[f], summary.n_survivor);
    }
    return summary;
}

std::size_t SupervisedTable::count_label(int label) const {
    std::size_t count = 0;
    for (int y : labels)
        if (y == label) ++count;
    return count;
}

bool SupervisedTable::has_both_labels() const {
    return count_label(0) > 0 && count_label(1) > 0;
}

SupervisedTable SupervisedTable::subset(const std::vector<std::size_t>& rows) const {
    SupervisedTable sub;
    sub.feature_names = feature_names;
    sub.n_features = n_features;
    sub.n_rows = rows.size();
    sub.values.reserve(rows.size() * n_features);
    sub.missing.reserve(rows.size() * n_features);
    for (const std::size_t r : rows) {
        sub.values.insert(sub.values.end(), values.begin() + r * n_features,
                          values.begin() + (r + 1) * n_features);
        sub.missing.insert(sub.missing.end(), missing.begin() + r * n_features,
                           missing.begin() + (r + 1) * n_features);
        sub.labels.push_back(labels[r]);
        sub.firm_ids.push_back(firm_ids[r]);
        sub.years.push_back(years[r]);
    }
    return sub;
}

std::vector<std::size_t> SupervisedTable::complete_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < n_rows; ++r)
        if (row_complete(r)) rows.push_back(r);
    return rows;
}

SupervisedTable lag_join(const FirmPanel& panel) {
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t i = 0; i < panel.records.size(); ++i)
        index.emplace(std::make_pair(panel.records[i].firm_id, panel.records[i].year), i);

    SupervisedTable table;
    table.feature_names = panel.feature_names;
    table.n_features = panel.n_features();
    for (const auto& record : panel.records) {
        const auto prior = index.find({record.firm_id, record.year - 1});
        if (prior == index.end()) {
            table.dropped += 1;
            continue;
        }
        const auto& lagged = panel.records[prior->second];
        table.values.insert(table.values.end(), lagged.features.begin(),
                            lagged.features.end());
        table.missing.insert(table.missing.end(), lagged.missing.begin(),
                             lagged.missing.end());
        table.labels.push_back(record.failed);
        table.firm_ids.push_back(record.firm_id);
        table.years.push_back(record.year);
        table.n_rows += 1;
    }
    return table;
}

}  // namespace distress
