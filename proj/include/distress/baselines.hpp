#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "distress/panel.hpp"

namespace distress {

struct LogitModel {
    double intercept = 0.0;
    std::vector<double> coefficients;
    std::vector<std::string> feature_names;

    double predict_margin(std::span<const double> features) const;
    double predict_proba(std::span<const double> features) const;
};

// Penalized maximum likelihood by damped Newton: maximizes
// loglik - 1/2 * l2 * |slopes|^2 (intercept unpenalized). Converged when the
// gradient sup-norm drops below 1e-8, capped at 100 iterations.
// Errors: MissingInput, DegenerateLabels, Separation (l2 = 0 and |beta| > 1e6).
LogitModel fit_logit(const SupervisedTable& table, double l2);

struct LassoPath {
    std::vector<double> lambdas;     // descending, standardized scale
    std::vector<LogitModel> models;  // original feature scale
    std::vector<double> ebic;
    std::vector<int> support_size;
    int selected = 0;  // argmin ebic

    // Predictor ranking: order of entry along the path, then |beta| at the
    // selected lambda.
    std::vector<std::string> ranked_features() const;
    std::string to_json() const;
};

// L1-penalized logistic regression solved by coordinate descent on the IRLS
// quadratic, features standardized internally (zero mean, unit population
// variance). The default grid is 50 log-spaced points from lambda_max down to
// 1e-3 * lambda_max. EBIC = -2 loglik + k ln n + 2 gamma k ln p.
// Errors: MissingInput, DegenerateLabels.
LassoPath fit_logit_lasso(const SupervisedTable& table,
                          std::vector<double> lambda_grid = {},
                          double ebic_gamma = 0.5);

enum class ImputeStrategy : uint8_t {
    OutOfRange = 0,  // every gap becomes 1e20
    Median = 1,      // per-feature observed median (lower middle when even)
};

inline constexpr double kOutOfRangeValue = 1e20;

// Fitted imputer so fold-wise pipelines can learn fills on training rows
// only. Errors: AllMissingFeature (Median with a fully missing feature).
struct Imputer {
    ImputeStrategy strategy = ImputeStrategy::OutOfRange;
    std::vector<double> fill;

    static Imputer fit(const FirmPanel& panel, ImputeStrategy strategy);
    static Imputer fit(const SupervisedTable& table, ImputeStrategy strategy);
    FirmPanel apply(const FirmPanel& panel) const;
    SupervisedTable apply(const SupervisedTable& table) const;
};

FirmPanel impute(const FirmPanel& panel, ImputeStrategy strategy);
SupervisedTable impute(const SupervisedTable& table, ImputeStrategy strategy);

// Convex stacking: weights on the simplex minimizing the log-loss of the
// mixed probability, by projected gradient (1000 iterations or projected
// gradient sup-norm < 1e-8). base_probs is one vector per base model.
std::vector<double> fit_stacker(const std::vector<std::vector<double>>& base_probs,
                                std::span<const int> labels);

}  // namespace distress
