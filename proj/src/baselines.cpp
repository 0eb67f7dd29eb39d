#include "distress/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "distress/error.hpp"
#include "distress/util.hpp"

namespace distress {

namespace {

// Cholesky solve of a symmetric positive definite system, in place.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                              std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
        require(diag > 1e-300, "Singular", "normal equations are singular");
        const double root = std::sqrt(diag);
        a[j * n + j] = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double value = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) value -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = value / root;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double value = b[i];
        for (std::size_t k = 0; k < i; ++k) value -= a[i * n + k] * b[k];
        b[i] = value / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double value = b[i];
        for (std::size_t k = i + 1; k < n; ++k) value -= a[k * n + i] * b[k];
        b[i] = value / a[i * n + i];
    }
    return b;
}

void require_no_missing(const SupervisedTable& table) {
    for (const uint8_t m : table.missing)
        require(m == 0, "MissingInput",
                "this estimator needs complete data; impute or filter first");
}

double penalized_loglik(const SupervisedTable& table, double intercept,
                        const std::vector<double>& beta, double l2) {
    double ll = 0.0;
    for (std::size_t i = 0; i < table.n_rows; ++i) {
        double margin = intercept;
        for (std::size_t f = 0; f < table.n_features; ++f)
            margin += beta[f] * table.value(i, f);
        // log(1+exp) with the stable branch
        const double y = static_cast<double>(table.labels[i]);
        if (margin >= 0.0)
            ll += y * margin - margin - std::log1p(std::exp(-margin));
        else
            ll += y * margin - std::log1p(std::exp(margin));
    }
    double penalty = 0.0;
    for (const double b : beta) penalty += b * b;
    return ll - 0.5 * l2 * penalty;
}

}  // namespace

double LogitModel::predict_margin(std::span<const double> features) const {
    require(features.size() == coefficients.size(), "ArityMismatch",
            "feature arity does not match the model");
    double margin = intercept;
    for (std::size_t f = 0; f < features.size(); ++f)
        margin += coefficients[f] * features[f];
    return margin;
}

double LogitModel::predict_proba(std::span<const double> features) const {
    return clamp_prob(sigmoid(predict_margin(features)));
}

LogitModel fit_logit(const SupervisedTable& table, double l2) {
    require(l2 >= 0.0, "BadConfig", "l2 must be >= 0");
    require(table.n_rows > 0, "TooFewRecords", "empty table");
    require(table.has_both_labels(), "DegenerateLabels",
            "logit needs both labels present");
    require_no_missing(table);

    const std::size_t n = table.n_rows;
    const std::size_t p = table.n_features;
    const std::size_t dim = p + 1;  // intercept first

    std::vector<double> theta(dim, 0.0);
    std::vector<double> beta(p, 0.0);
    double objective = penalized_loglik(table, theta[0], beta, l2);

    std::vector<double> gradient(dim), hessian(dim * dim), probs(n);
    for (int iteration = 0; iteration < 100; ++iteration) {
        std::fill(gradient.begin(), gradient.end(), 0.0);
        std::fill(hessian.begin(), hessian.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double margin = theta[0];
            for (std::size_t f = 0; f < p; ++f)
                margin += theta[f + 1] * table.value(i, f);
            const double prob = sigmoid(margin);
            probs[i] = prob;
            const double residual = static_cast<double>(table.labels[i]) - prob;
            const double weight = prob * (1.0 - prob);
            gradient[0] += residual;
            hessian[0] += weight;
            for (std::size_t f = 0; f < p; ++f) {
                const double x = table.value(i, f);
                gradient[f + 1] += residual * x;
                hessian[(f + 1) * dim] += weight * x;
                for (std::size_t g = 0; g <= f; ++g)
                    hessian[(f + 1) * dim + (g + 1)] += weight * x * table.value(i, g);
            }
        }
        for (std::size_t f = 0; f < p; ++f) {
            gradient[f + 1] -= l2 * theta[f + 1];
            hessian[(f + 1) * dim + (f + 1)] += l2;
        }
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = r + 1; c < dim; ++c)
                hessian[r * dim + c] = hessian[c * dim + r];

        double grad_norm = 0.0;
        for (const double g : gradient) grad_norm = std::max(grad_norm, std::abs(g));
        if (grad_norm < 1e-8) break;

        std::vector<double> step;
        try {
            step = solve_spd(hessian, gradient, dim);
        } catch (const Error&) {
            // Near-singular curvature: retreat to a tiny ridge.
            auto ridged = hessian;
            for (std::size_t d = 0; d < dim; ++d) ridged[d * dim + d] += 1e-8;
            step = solve_spd(ridged, gradient, dim);
        }

        // Damping: halve until the penalized likelihood does not decrease.
        double scale = 1.0;
        for (int halving = 0; halving < 60; ++halving) {
            std::vector<double> candidate(dim);
            for (std::size_t d = 0; d < dim; ++d)
                candidate[d] = theta[d] + scale * step[d];
            std::vector<double> candidate_beta(candidate.begin() + 1, candidate.end());
            const double value =
                penalized_loglik(table, candidate[0], candidate_beta, l2);
            if (value >= objective - 1e-14) {
                theta = candidate;
                beta = candidate_beta;
                objective = value;
                break;
            }
            scale *= 0.5;
        }

        if (l2 == 0.0) {
            double magnitude = 0.0;
            for (std::size_t d = 1; d < dim; ++d)
                magnitude = std::max(magnitude, std::abs(theta[d]));
            require(magnitude <= 1e6, "Separation",
                    "unpenalized logit diverged; data are separable");
        }
    }

    LogitModel model;
    model.intercept = theta[0];
    model.coefficients.assign(theta.begin() + 1, theta.end());
    model.feature_names = table.feature_names;
    for (const double c : model.coefficients)
        require(std::isfinite(c), "Separation", "non-finite coefficient");
    return model;
}

namespace {

double soft_threshold(double value, double threshold) {
    if (value > threshold) return value - threshold;
    if (value < -threshold) return value + threshold;
    return 0.0;
}

struct Standardized {
    std::vector<double> x;     // row-major standardized design
    std::vector<double> mean;
    std::vector<double> scale;  // population sd; 0 marks a dead feature
};

Standardized standardize(const SupervisedTable& table) {
    const std::size_t n = table.n_rows;
    const std::size_t p = table.n_features;
    Standardized out;
    out.mean.assign(p, 0.0);
    out.scale.assign(p, 0.0);
    for (std::size_t f = 0; f < p; ++f) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += table.value(i, f);
        out.mean[f] = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = table.value(i, f) - out.mean[f];
            ss += d * d;
        }
        out.scale[f] = std::sqrt(ss / static_cast<double>(n));
    }
    out.x.assign(n * p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < p; ++f)
            if (out.scale[f] > 0.0)
                out.x[i * p + f] = (table.value(i, f) - out.mean[f]) / out.scale[f];
    return out;
}

}  // namespace

LassoPath fit_logit_lasso(const SupervisedTable& table,
                          std::vector<double> lambda_grid, double ebic_gamma) {
    require(table.n_rows > 0, "TooFewRecords", "empty table");
    require(table.has_both_labels(), "DegenerateLabels",
            "lasso needs both labels present");
    require_no_missing(table);
    require(ebic_gamma >= 0.0, "BadConfig", "ebic_gamma must be >= 0");

    const std::size_t n = table.n_rows;
    const std::size_t p = table.n_features;
    const Standardized design = standardize(table);
    const double nn = static_cast<double>(n);

    const double ybar =
        static_cast<double>(table.count_label(1)) / nn;
    double lambda_max = 0.0;
    for (std::size_t f = 0; f < p; ++f) {
        double score = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            score += design.x[i * p + f] *
                     (static_cast<double>(table.labels[i]) - ybar);
        lambda_max = std::max(lambda_max, std::abs(score) / nn);
    }

    if (lambda_grid.empty()) {
        const int points = 50;
        const double floor_ratio = 1e-3;
        for (int g = 0; g < points; ++g) {
            const double t = static_cast<double>(g) / (points - 1);
            lambda_grid.push_back(lambda_max * std::pow(floor_ratio, t));
        }
    }

    LassoPath path;
    path.lambdas = lambda_grid;

    double b0 = logit(std::min(1.0 - 1e-12, std::max(1e-12, ybar)));
    std::vector<double> beta(p, 0.0);
    std::vector<double> eta(n), prob(n), weight(n), residual(n);

    for (const double lambda : lambda_grid) {
        require(lambda >= 0.0, "BadConfig", "lambda must be >= 0");
        // Outer IRLS loop; inner coordinate descent on the local quadratic.
        for (int outer = 0; outer < 200; ++outer) {
            for (std::size_t i = 0; i < n; ++i) {
                double margin = b0;
                for (std::size_t f = 0; f < p; ++f)
                    if (beta[f] != 0.0) margin += beta[f] * design.x[i * p + f];
                eta[i] = margin;
                prob[i] = sigmoid(margin);
                double w = prob[i] * (1.0 - prob[i]);
                if (w < 1e-10) w = 1e-10;
                weight[i] = w;
                // working residual of the quadratic at the expansion point
                residual[i] = (static_cast<double>(table.labels[i]) - prob[i]) / w;
            }
            std::vector<double> denom(p, 0.0);
            for (std::size_t f = 0; f < p; ++f) {
                if (design.scale[f] <= 0.0) continue;
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    d += weight[i] * design.x[i * p + f] * design.x[i * p + f];
                denom[f] = d / nn;
            }

            double outer_shift = 0.0;
            for (int inner = 0; inner < 1000; ++inner) {
                double shift = 0.0;
                double wsum = 0.0, wres = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    wsum += weight[i];
                    wres += weight[i] * residual[i];
                }
                const double db0 = wres / wsum;
                b0 += db0;
                for (std::size_t i = 0; i < n; ++i) residual[i] -= db0;
                shift = std::max(shift, std::abs(db0));

                for (std::size_t f = 0; f < p; ++f) {
                    if (design.scale[f] <= 0.0 || denom[f] <= 0.0) continue;
                    double inner_product = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        inner_product +=
                            weight[i] * design.x[i * p + f] * residual[i];
                    const double candidate =
                        inner_product / nn + denom[f] * beta[f];
                    const double updated =
                        soft_threshold(candidate, lambda) / denom[f];
                    const double delta = updated - beta[f];
                    if (delta != 0.0) {
                        beta[f] = updated;
                        for (std::size_t i = 0; i < n; ++i)
                            residual[i] -= delta * design.x[i * p + f];
                        shift = std::max(shift, std::abs(delta));
                    }
                }
                outer_shift = std::max(outer_shift, shift);
                if (shift < 1e-11) break;
            }
            if (outer_shift < 1e-10) break;
        }

        // Unpenalized log-likelihood at the solution for the EBIC.
        double ll = 0.0;
        int support = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double margin = b0;
            for (std::size_t f = 0; f < p; ++f)
                if (beta[f] != 0.0) margin += beta[f] * design.x[i * p + f];
            const double y = static_cast<double>(table.labels[i]);
            if (margin >= 0.0)
                ll += y * margin - margin - std::log1p(std::exp(-margin));
            else
                ll += y * margin - std::log1p(std::exp(margin));
        }
        for (std::size_t f = 0; f < p; ++f)
            if (beta[f] != 0.0) ++support;

        LogitModel model;
        model.feature_names = table.feature_names;
        model.coefficients.assign(p, 0.0);
        double intercept = b0;
        for (std::size_t f = 0; f < p; ++f) {
            if (design.scale[f] > 0.0 && beta[f] != 0.0) {
                model.coefficients[f] = beta[f] / design.scale[f];
                intercept -= beta[f] * design.mean[f] / design.scale[f];
            }
        }
        model.intercept = intercept;
        path.models.push_back(std::move(model));
        path.support_size.push_back(support);
        path.ebic.push_back(-2.0 * ll + support * std::log(nn) +
                            2.0 * ebic_gamma * support *
                                std::log(static_cast<double>(p)));
    }

    path.selected = 0;
    for (std::size_t g = 1; g < path.ebic.size(); ++g)
        if (path.ebic[g] < path.ebic[path.selected])
            path.selected = static_cast<int>(g);
    return path;
}

std::vector<std::string> LassoPath::ranked_features() const {
    if (models.empty()) return {};
    const std::size_t p = models.front().coefficients.size();
    std::vector<int> entry(p, -1);
    for (std::size_t g = 0; g < models.size(); ++g)
        for (std::size_t f = 0; f < p; ++f)
            if (entry[f] < 0 && models[g].coefficients[f] != 0.0)
                entry[f] = static_cast<int>(g);
    const auto& chosen = models[static_cast<std::size_t>(selected)];
    std::vector<std::size_t> order;
    for (std::size_t f = 0; f < p; ++f)
        if (entry[f] >= 0) order.push_back(f);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (entry[a] != entry[b]) return entry[a] < entry[b];
        const double wa = std::abs(chosen.coefficients[a]);
        const double wb = std::abs(chosen.coefficients[b]);
        if (wa != wb) return wa > wb;
        return a < b;
    });
    std::vector<std::string> names;
    for (const std::size_t f : order) names.push_back(chosen.feature_names[f]);
    return names;
}

std::string LassoPath::to_json() const {
    nlohmann::json doc;
    doc["lambdas"] = lambdas;
    doc["ebic"] = ebic;
    doc["support_size"] = support_size;
    doc["selected"] = selected;
    auto& model_docs = doc["models"] = nlohmann::json::array();
    for (const auto& model : models) {
        model_docs.push_back({{"intercept", model.intercept},
                              {"coefficients", model.coefficients}});
    }
    if (!models.empty()) doc["feature_names"] = models.front().feature_names;
    doc["ranked_features"] = ranked_features();
    return doc.dump();
}

Imputer Imputer::fit(const SupervisedTable& table, ImputeStrategy strategy) {
    Imputer imputer;
    imputer.strategy = strategy;
    const std::size_t p = table.n_features;
    if (strategy == ImputeStrategy::OutOfRange) {
        imputer.fill.assign(p, kOutOfRangeValue);
        return imputer;
    }
    imputer.fill.assign(p, 0.0);
    std::vector<double> observed;
    for (std::size_t f = 0; f < p; ++f) {
        observed.clear();
        for (std::size_t i = 0; i < table.n_rows; ++i)
            if (!table.is_missing(i, f)) observed.push_back(table.value(i, f));
        require(!observed.empty(), "AllMissingFeature",
                "median imputation needs at least one observed value in " +
                    table.feature_names[f]);
        std::sort(observed.begin(), observed.end());
        imputer.fill[f] = observed[(observed.size() - 1) / 2];  // lower middle
    }
    return imputer;
}

Imputer Imputer::fit(const FirmPanel& panel, ImputeStrategy strategy) {
    Imputer imputer;
    imputer.strategy = strategy;
    const std::size_t p = panel.n_features();
    if (strategy == ImputeStrategy::OutOfRange) {
        imputer.fill.assign(p, kOutOfRangeValue);
        return imputer;
    }
    imputer.fill.assign(p, 0.0);
    std::vector<double> observed;
    for (std::size_t f = 0; f < p; ++f) {
        observed.clear();
        for (const auto& record : panel.records)
            if (!record.missing[f]) observed.push_back(record.features[f]);
        require(!observed.empty(), "AllMissingFeature",
                "median imputation needs at least one observed value in " +
                    panel.feature_names[f]);
        std::sort(observed.begin(), observed.end());
        imputer.fill[f] = observed[(observed.size() - 1) / 2];
    }
    return imputer;
}

FirmPanel Imputer::apply(const FirmPanel& panel) const {
    FirmPanel out = panel;
    for (auto& record : out.records) {
        for (std::size_t f = 0; f < record.features.size(); ++f) {
            if (record.missing[f]) {
                record.features[f] = fill[f];
                record.missing[f] = 0;
            }
        }
    }
    return out;
}

SupervisedTable Imputer::apply(const SupervisedTable& table) const {
    SupervisedTable out = table;
    for (std::size_t i = 0; i < out.n_rows; ++i) {
        for (std::size_t f = 0; f < out.n_features; ++f) {
            if (out.missing[i * out.n_features + f]) {
                out.values[i * out.n_features + f] = fill[f];
                out.missing[i * out.n_features + f] = 0;
            }
        }
    }
    return out;
}

FirmPanel impute(const FirmPanel& panel, ImputeStrategy strategy) {
    return Imputer::fit(panel, strategy).apply(panel);
}

SupervisedTable impute(const SupervisedTable& table, ImputeStrategy strategy) {
    return Imputer::fit(table, strategy).apply(table);
}

namespace {

std::vector<double> project_to_simplex(std::vector<double> v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumulative = 0.0, tau = 0.0;
    int rho = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumulative += u[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) {
            rho = static_cast<int>(j + 1);
            tau = candidate;
        }
    }
    (void)rho;
    for (auto& x : v) x = std::max(0.0, x - tau);
    return v;
}

}  // namespace

std::vector<double> fit_stacker(const std::vector<std::vector<double>>& base_probs,
                                std::span<const int> labels) {
    require(base_probs.size() >= 2, "BadConfig", "need at least two base models");
    const std::size_t models = base_probs.size();
    const std::size_t n = labels.size();
    for (const auto& column : base_probs) {
        require(column.size() == n, "ArityMismatch", "base model length mismatch");
        for (const double p : column)
            require(p > 0.0 && p < 1.0, "BadConfig",
                    "base probabilities must lie in (0,1)");
    }

    std::vector<double> weights(models, 1.0 / static_cast<double>(models));
    auto loss_of = [&](const std::vector<double>& w) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mix = 0.0;
            for (std::size_t m = 0; m < models; ++m) mix += w[m] * base_probs[m][i];
            mix = clamp_prob(mix);
            total += labels[i] ? -std::log(mix) : -std::log(1.0 - mix);
        }
        return total / static_cast<double>(n);
    };

    double current = loss_of(weights);
    double step = 1.0;
    for (int iteration = 0; iteration < 1000; ++iteration) {
        std::vector<double> gradient(models, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double mix = 0.0;
            for (std::size_t m = 0; m < models; ++m)
                mix += weights[m] * base_probs[m][i];
            mix = clamp_prob(mix);
            const double factor = labels[i] ? -1.0 / mix : 1.0 / (1.0 - mix);
            for (std::size_t m = 0; m < models; ++m)
                gradient[m] += factor * base_probs[m][i];
        }
        for (auto& g : gradient) g /= static_cast<double>(n);

        // Projected-gradient residual as the stopping criterion.
        std::vector<double> probe(models);
        for (std::size_t m = 0; m < models; ++m) probe[m] = weights[m] - gradient[m];
        probe = project_to_simplex(probe);
        double residual = 0.0;
        for (std::size_t m = 0; m < models; ++m)
            residual = std::max(residual, std::abs(probe[m] - weights[m]));
        if (residual < 1e-8) break;

        bool moved = false;
        for (int backtrack = 0; backtrack < 60; ++backtrack) {
            std::vector<double> candidate(models);
            for (std::size_t m = 0; m < models; ++m)
                candidate[m] = weights[m] - step * gradient[m];
            candidate = project_to_simplex(candidate);
            const double value = loss_of(candidate);
            if (value <= current) {
                if (value < current) moved = true;
                weights = std::move(candidate);
                current = value;
                step = std::min(step * 2.0, 1e6);
                break;
            }
            step *= 0.5;
        }
        if (!moved && step < 1e-18) break;
    }
    return weights;
}

}  // namespace distress
