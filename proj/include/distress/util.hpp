#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "distress/error.hpp"

namespace distress {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Clamp used everywhere a probability feeds a log; keeps log-loss finite.
inline constexpr double kProbEps = 1e-12;

inline double clamp_prob(double p) {
    return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}

inline double log_loss(const std::vector<double>& probs, const std::vector<int>& labels) {
    require(probs.size() == labels.size(), "ArityMismatch", "probabilities vs labels");
    require(!probs.empty(), "ArityMismatch", "empty inputs");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = clamp_prob(probs[i]);
        total += labels[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(probs.size());
}

// Nearest-rank percentile: the ceil(p/100 * n)-th order statistic (1-based).
// `sorted` must be ascending and nonempty; p in (0, 100].
inline double nearest_rank_percentile(const std::vector<double>& sorted, double p) {
    require(!sorted.empty(), "EmptyInput", "percentile of empty sample");
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::max<std::size_t>(1, std::min<std::size_t>(rank, sorted.size()));
    return sorted[rank - 1];
}

// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

inline std::string lower_ascii(std::string text) {
    for (char& c : text)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return text;
}

// "", "na", "nan" (any case, surrounding spaces ignored) denote a missing cell.
inline bool is_missing_token(const std::string& cell) {
    std::size_t begin = cell.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return true;
    std::size_t end = cell.find_last_not_of(" \t\r");
    const std::string token = lower_ascii(cell.substr(begin, end - begin + 1));
    return token.empty() || token == "na" || token == "nan";
}

inline bool parse_double(const std::string& cell, double& out) {
    std::size_t begin = cell.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return false;
    std::size_t end = cell.find_last_not_of(" \t\r") + 1;
    const char* first = cell.data() + begin;
    const char* last = cell.data() + end;
    const auto result = std::from_chars(first, last, out);
    return result.ec == std::errc() && result.ptr == last;
}

inline bool parse_int(const std::string& cell, int& out) {
    std::size_t begin = cell.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return false;
    std::size_t end = cell.find_last_not_of(" \t\r") + 1;
    const char* first = cell.data() + begin;
    const char* last = cell.data() + end;
    const auto result = std::from_chars(first, last, out);
    return result.ec == std::errc() && result.ptr == last;
}

}  // namespace distress
