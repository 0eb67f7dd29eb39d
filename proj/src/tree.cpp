#include "distress/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <json.hpp>

#include "distress/error.hpp"
#include "distress/util.hpp"

namespace distress {

const char* to_string(MissingPolicy policy) {
    switch (policy) {
        case MissingPolicy::DefaultLeft: return "default_left";
        case MissingPolicy::DefaultRight: return "default_right";
        case MissingPolicy::MissingIsLeft: return "missing_left";
        case MissingPolicy::MissingIsRight: return "missing_right";
        case MissingPolicy::MissingOnly: return "missing_only";
    }
    return "default_left";
}

MissingPolicy missing_policy_from_string(const std::string& name) {
    if (name == "default_left") return MissingPolicy::DefaultLeft;
    if (name == "default_right") return MissingPolicy::DefaultRight;
    if (name == "missing_left") return MissingPolicy::MissingIsLeft;
    if (name == "missing_right") return MissingPolicy::MissingIsRight;
    if (name == "missing_only") return MissingPolicy::MissingOnly;
    fail("BadConfig", "unknown missing policy " + name);
}

const char* to_string(MissingStrategy strategy) {
    switch (strategy) {
        case MissingStrategy::DefaultDirections: return "default_directions";
        case MissingStrategy::MIA: return "mia";
        case MissingStrategy::RequireComplete: return "require_complete";
    }
    return "default_directions";
}

MissingStrategy missing_strategy_from_string(const std::string& name) {
    if (name == "default_directions") return MissingStrategy::DefaultDirections;
    if (name == "mia") return MissingStrategy::MIA;
    if (name == "require_complete") return MissingStrategy::RequireComplete;
    fail("BadConfig", "unknown missing strategy " + name);
}

void BoostConfig::validate() const {
    require(n_rounds >= 0, "BadConfig", "n_rounds must be >= 0");
    require(learning_rate > 0.0 && learning_rate <= 1.0, "BadConfig",
            "learning_rate must lie in (0,1]");
    require(max_depth >= 0, "BadConfig", "max_depth must be >= 0");
    require(lambda >= 0.0 && gamma >= 0.0 && min_child_hessian >= 0.0, "BadConfig",
            "lambda, gamma, min_child_hessian must be >= 0");
    require(n_bins >= 1, "BadConfig", "n_bins must be >= 1");
    require(subsample > 0.0 && subsample <= 1.0, "BadConfig", "subsample must lie in (0,1]");
    require(colsample > 0.0 && colsample <= 1.0, "BadConfig", "colsample must lie in (0,1]");
}

double Tree::predict(std::span<const double> features,
                     std::span<const uint8_t> missing) const {
    int node = 0;
    while (!nodes[node].is_leaf()) {
        const SplitRule& rule = nodes[node].rule;
        const bool left = rule.route_left(features[rule.feature],
                                          missing[rule.feature] != 0);
        node = left ? nodes[node].left : nodes[node].right;
    }
    return nodes[node].weight;
}

int Tree::depth() const {
    // Iterative depth over the flat layout.
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int deepest = 0;
    while (!stack.empty()) {
        auto [node, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes[node].is_leaf()) {
            stack.push_back({nodes[node].left, d + 1});
            stack.push_back({nodes[node].right, d + 1});
        }
    }
    return deepest;
}

namespace {

// 1/2 G^2/(H+lambda) with the guarded 0/0 -> 0 convention.
double structure_score(double grad, double hess, double lambda) {
    const double denom = hess + lambda;
    if (denom <= 0.0) return 0.0;
    return 0.5 * grad * grad / denom;
}

double leaf_weight(double grad, double hess, double lambda) {
    const double denom = hess + lambda;
    if (denom <= 0.0) return 0.0;
    return -grad / denom;
}

}  // namespace

double split_gain(double grad_left, double hess_left, double grad_right,
                  double hess_right, double lambda, double gamma) {
    return structure_score(grad_left, hess_left, lambda) +
           structure_score(grad_right, hess_right, lambda) -
           structure_score(grad_left + grad_right, hess_left + hess_right, lambda) -
           gamma;
}

BinIndex BinIndex::build(const FeatureMatrix& X, std::span<const uint32_t> rows,
                         int n_bins) {
    require(n_bins >= 1, "BadConfig", "n_bins must be >= 1");
    BinIndex index;
    index.thresholds.resize(X.n_features);
    std::vector<double> observed;
    for (std::size_t f = 0; f < X.n_features; ++f) {
        observed.clear();
        for (const uint32_t r : rows)
            if (!X.is_missing(r, f)) observed.push_back(X.value(r, f));
        std::sort(observed.begin(), observed.end());
        auto& cuts = index.thresholds[f];
        const std::size_t m = observed.size();
        if (m < 2) continue;
        std::size_t distinct_pairs = 0;
        for (std::size_t i = 1; i < m; ++i)
            if (observed[i] > observed[i - 1]) ++distinct_pairs;
        if (distinct_pairs <= static_cast<std::size_t>(n_bins)) {
            for (std::size_t i = 1; i < m; ++i)
                if (observed[i] > observed[i - 1])
                    cuts.push_back(observed[i - 1] +
                                   (observed[i] - observed[i - 1]) / 2.0);
        } else {
            // Rank-spaced candidates: midpoints at evenly spread percentiles.
            for (int b = 1; b <= n_bins; ++b) {
                const std::size_t r = static_cast<std::size_t>(
                    static_cast<double>(b) * static_cast<double>(m) /
                    static_cast<double>(n_bins + 1));
                if (r == 0 || r >= m) continue;
                if (observed[r] > observed[r - 1])
                    cuts.push_back(observed[r - 1] +
                                   (observed[r] - observed[r - 1]) / 2.0);
            }
            cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        }
        // Guard against midpoints that collapsed onto an observed value.
        cuts.erase(std::remove_if(cuts.begin(), cuts.end(),
                                  [&](double t) {
                                      return t <= observed.front() ||
                                             t > observed.back();
                                  }),
                   cuts.end());
    }

    index.codes.assign(X.n_rows * X.n_features, 0);
    for (std::size_t r = 0; r < X.n_rows; ++r) {
        for (std::size_t f = 0; f < X.n_features; ++f) {
            if (X.is_missing(r, f)) continue;
            const auto& cuts = index.thresholds[f];
            const auto it =
                std::upper_bound(cuts.begin(), cuts.end(), X.value(r, f));
            index.codes[r * X.n_features + f] =
                static_cast<uint16_t>(it - cuts.begin());
        }
    }
    return index;
}

namespace {

struct NodeStats {
    double grad = 0.0;
    double hess = 0.0;
};

std::vector<int> select_features(std::size_t n_features, double colsample,
                                 Rng* rng) {
    std::vector<int> features(n_features);
    std::iota(features.begin(), features.end(), 0);
    if (colsample >= 1.0 || rng == nullptr) return features;
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(colsample * static_cast<double>(n_features))));
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng->below(n_features - i));
        std::swap(features[i], features[j]);
    }
    features.resize(keep);
    std::sort(features.begin(), features.end());
    return features;
}

}  // namespace

std::optional<SplitCandidate> find_best_split(
    const FeatureMatrix& X, std::span<const uint32_t> rows,
    std::span<const double> grad, std::span<const double> hess,
    const BoostConfig& config, const BinIndex* bins, Rng* colsample_rng) {
    if (config.missing_strategy == MissingStrategy::RequireComplete) {
        for (const uint32_t r : rows)
            for (std::size_t f = 0; f < X.n_features; ++f)
                require(!X.is_missing(r, f), "MissingNotAllowed",
                        "RequireComplete cannot split rows with missing values");
    }

    BinIndex local;
    if (bins == nullptr) {
        local = BinIndex::build(X, rows, config.n_bins);
        bins = &local;
    }

    double total_grad = 0.0, total_hess = 0.0;
    for (const uint32_t r : rows) {
        total_grad += grad[r];
        total_hess += hess[r];
    }

    const bool mia = config.missing_strategy == MissingStrategy::MIA;
    const MissingPolicy left_policy =
        mia ? MissingPolicy::MissingIsLeft : MissingPolicy::DefaultLeft;
    const MissingPolicy right_policy =
        mia ? MissingPolicy::MissingIsRight : MissingPolicy::DefaultRight;

    std::optional<SplitCandidate> best;
    auto consider = [&](int feature, double threshold, MissingPolicy policy,
                        double gl, double hl, double gr, double hr) {
        if (hl < config.min_child_hessian || hr < config.min_child_hessian) return;
        const double gain = split_gain(gl, hl, gr, hr, config.lambda, config.gamma);
        if (gain <= 0.0) return;
        if (!best || gain > best->gain)
            best = SplitCandidate{{feature, threshold, policy}, gain};
    };

    const auto features =
        select_features(X.n_features, config.colsample, colsample_rng);
    std::vector<double> bin_grad, bin_hess;
    for (const int f : features) {
        const auto& cuts = bins->thresholds[f];
        bin_grad.assign(cuts.size() + 1, 0.0);
        bin_hess.assign(cuts.size() + 1, 0.0);
        double miss_grad = 0.0, miss_hess = 0.0;
        for (const uint32_t r : rows) {
            if (X.is_missing(r, f)) {
                miss_grad += grad[r];
                miss_hess += hess[r];
            } else {
                const uint16_t code = bins->code(r, f, X.n_features);
                bin_grad[code] += grad[r];
                bin_hess[code] += hess[r];
            }
        }
        const double obs_grad = total_grad - miss_grad;
        const double obs_hess = total_hess - miss_hess;

        double left_grad = 0.0, left_hess = 0.0;
        for (std::size_t b = 0; b < cuts.size(); ++b) {
            left_grad += bin_grad[b];
            left_hess += bin_hess[b];
            const double right_grad = obs_grad - left_grad;
            const double right_hess = obs_hess - left_hess;
            consider(f, cuts[b], left_policy, left_grad + miss_grad,
                     left_hess + miss_hess, right_grad, right_hess);
            if (config.missing_strategy != MissingStrategy::RequireComplete)
                consider(f, cuts[b], right_policy, left_grad, left_hess,
                         right_grad + miss_grad, right_hess + miss_hess);
        }
        if (mia)
            consider(f, 0.0, MissingPolicy::MissingOnly, miss_grad, miss_hess,
                     obs_grad, obs_hess);
    }
    return best;
}

namespace {

struct TreeBuilder {
    const FeatureMatrix& X;
    std::span<const double> grad;
    std::span<const double> hess;
    const BoostConfig& config;
    const BinIndex* bins;
    Rng* colsample_rng;
    Tree tree;

    int build(std::vector<uint32_t>& rows, int depth) {
        double node_grad = 0.0, node_hess = 0.0;
        for (const uint32_t r : rows) {
            node_grad += grad[r];
            node_hess += hess[r];
        }

        std::optional<SplitCandidate> split;
        if (depth < config.max_depth && rows.size() >= 2)
            split = find_best_split(X, rows, grad, hess, config, bins, colsample_rng);

        if (!split) {
            const int index = static_cast<int>(tree.nodes.size());
            TreeNode leaf;
            leaf.weight = leaf_weight(node_grad, node_hess, config.lambda);
            tree.nodes.push_back(leaf);
            return index;
        }

        std::vector<uint32_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (const uint32_t r : rows) {
            const bool left = split->rule.route_left(
                X.value(r, split->rule.feature),
                X.is_missing(r, split->rule.feature));
            (left ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[index].rule = split->rule;
        const int left_child = build(left_rows, depth + 1);
        const int right_child = build(right_rows, depth + 1);
        tree.nodes[index].left = left_child;
        tree.nodes[index].right = right_child;
        return index;
    }
};

}  // namespace

Tree fit_tree(const FeatureMatrix& X, std::span<const uint32_t> rows,
              std::span<const double> grad, std::span<const double> hess,
              const BoostConfig& config, const BinIndex* bins,
              Rng* colsample_rng) {
    config.validate();
    BinIndex local;
    if (bins == nullptr) {
        local = BinIndex::build(X, rows, config.n_bins);
        bins = &local;
    }
    TreeBuilder builder{X, grad, hess, config, bins, colsample_rng, {}};
    std::vector<uint32_t> root_rows(rows.begin(), rows.end());
    builder.build(root_rows, 0);
    return std::move(builder.tree);
}

double BoostedEnsemble::predict_margin(std::span<const double> features,
                                       std::span<const uint8_t> missing) const {
    double margin = base_margin;
    for (const Tree& tree : trees)
        margin += config.learning_rate * tree.predict(features, missing);
    return margin;
}

double BoostedEnsemble::predict_proba(std::span<const double> features,
                                      std::span<const uint8_t> missing) const {
    require(features.size() == feature_names.size() &&
                missing.size() == feature_names.size(),
            "ArityMismatch", "feature arity does not match the model");
    if (config.missing_strategy == MissingStrategy::RequireComplete)
        for (const uint8_t m : missing)
            require(m == 0, "MissingNotAllowed",
                    "RequireComplete model fed a missing value");
    return clamp_prob(sigmoid(predict_margin(features, missing)));
}

std::vector<double> BoostedEnsemble::predict_proba(const FeatureMatrix& X) const {
    std::vector<double> probs(X.n_rows);
    for (std::size_t r = 0; r < X.n_rows; ++r)
        probs[r] = predict_proba({X.values + r * X.n_features, X.n_features},
                                 {X.missing + r * X.n_features, X.n_features});
    return probs;
}

BoostedEnsemble fit_boosted(const SupervisedTable& table, const BoostConfig& config,
                            uint64_t seed) {
    config.validate();
    require(table.has_both_labels(), "DegenerateLabels",
            "training data must contain both labels");
    if (config.missing_strategy == MissingStrategy::RequireComplete)
        for (const uint8_t m : table.missing)
            require(m == 0, "MissingNotAllowed",
                    "RequireComplete cannot train on missing values");

    const FeatureMatrix X = FeatureMatrix::of(table);
    const std::size_t n = table.n_rows;
    std::vector<uint32_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    const BinIndex bins = BinIndex::build(X, all_rows, config.n_bins);

    BoostedEnsemble model;
    model.config = config;
    model.feature_names = table.feature_names;
    const double prevalence =
        static_cast<double>(table.count_label(1)) / static_cast<double>(n);
    model.base_margin = logit(prevalence);

    std::vector<double> margins(n, model.base_margin);
    std::vector<double> grad(n), hess(n), probs(n);
    Rng rng(seed);

    auto record_logloss = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = clamp_prob(sigmoid(margins[i]));
            total += table.labels[i] ? -std::log(p) : -std::log(1.0 - p);
        }
        model.train_logloss.push_back(total / static_cast<double>(n));
    };
    record_logloss();

    for (int round = 0; round < config.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margins[i]);
            grad[i] = p - static_cast<double>(table.labels[i]);
            hess[i] = p * (1.0 - p);
        }

        std::vector<uint32_t> rows;
        if (config.subsample < 1.0) {
            const auto keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(config.subsample *
                                            static_cast<double>(n)));
            std::vector<uint32_t> pool = all_rows;
            Rng sample_rng = rng.child(static_cast<uint64_t>(round));
            for (std::size_t i = 0; i < keep; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(sample_rng.below(n - i));
                std::swap(pool[i], pool[j]);
            }
            pool.resize(keep);
            std::sort(pool.begin(), pool.end());
            rows = std::move(pool);
        } else {
            rows = all_rows;
        }

        Rng col_rng = rng.child(0x100000ULL + static_cast<uint64_t>(round));
        Rng* col_rng_ptr = config.colsample < 1.0 ? &col_rng : nullptr;
        Tree tree = fit_tree(X, rows, grad, hess, config, &bins, col_rng_ptr);

        for (std::size_t i = 0; i < n; ++i)
            margins[i] += config.learning_rate *
                          tree.predict({X.values + i * X.n_features, X.n_features},
                                       {X.missing + i * X.n_features, X.n_features});
        model.trees.push_back(std::move(tree));
        record_logloss();
    }
    return model;
}

namespace {

nlohmann::json node_to_json(const Tree& tree, int index) {
    const TreeNode& node = tree.nodes[index];
    if (node.is_leaf()) return nlohmann::json{{"leaf", node.weight}};
    nlohmann::json doc;
    doc["feature"] = node.rule.feature;
    doc["threshold"] = node.rule.threshold;
    doc["policy"] = to_string(node.rule.policy);
    doc["left"] = node_to_json(tree, node.left);
    doc["right"] = node_to_json(tree, node.right);
    return doc;
}

int node_from_json(const nlohmann::json& doc, Tree& tree) {
    if (doc.contains("leaf")) {
        const int index = static_cast<int>(tree.nodes.size());
        TreeNode leaf;
        leaf.weight = doc.at("leaf").get<double>();
        tree.nodes.push_back(leaf);
        return index;
    }
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[index].rule.feature = doc.at("feature").get<int>();
    tree.nodes[index].rule.threshold = doc.at("threshold").get<double>();
    tree.nodes[index].rule.policy =
        missing_policy_from_string(doc.at("policy").get<std::string>());
    const int left = node_from_json(doc.at("left"), tree);
    const int right = node_from_json(doc.at("right"), tree);
    tree.nodes[index].left = left;
    tree.nodes[index].right = right;
    return index;
}

nlohmann::json config_to_json(const BoostConfig& config) {
    return nlohmann::json{
        {"n_rounds", config.n_rounds},
        {"learning_rate", config.learning_rate},
        {"max_depth", config.max_depth},
        {"lambda", config.lambda},
        {"gamma", config.gamma},
        {"min_child_hessian", config.min_child_hessian},
        {"n_bins", config.n_bins},
        {"subsample", config.subsample},
        {"colsample", config.colsample},
        {"missing_strategy", to_string(config.missing_strategy)},
    };
}

BoostConfig config_from_json(const nlohmann::json& doc) {
    BoostConfig config;
    config.n_rounds = doc.at("n_rounds").get<int>();
    config.learning_rate = doc.at("learning_rate").get<double>();
    config.max_depth = doc.at("max_depth").get<int>();
    config.lambda = doc.at("lambda").get<double>();
    config.gamma = doc.at("gamma").get<double>();
    config.min_child_hessian = doc.at("min_child_hessian").get<double>();
    config.n_bins = doc.at("n_bins").get<int>();
    config.subsample = doc.at("subsample").get<double>();
    config.colsample = doc.at("colsample").get<double>();
    config.missing_strategy =
        missing_strategy_from_string(doc.at("missing_strategy").get<std::string>());
    return config;
}

}  // namespace

std::string BoostedEnsemble::to_json() const {
    nlohmann::json doc;
    doc["config"] = config_to_json(config);
    doc["base_margin"] = base_margin;
    doc["feature_names"] = feature_names;
    auto& trees_doc = doc["trees"] = nlohmann::json::array();
    for (const Tree& tree : trees) trees_doc.push_back(node_to_json(tree, 0));
    return doc.dump();
}

BoostedEnsemble BoostedEnsemble::from_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    BoostedEnsemble model;
    model.config = config_from_json(doc.at("config"));
    model.base_margin = doc.at("base_margin").get<double>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    for (const auto& tree_doc : doc.at("trees")) {
        Tree tree;
        node_from_json(tree_doc, tree);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double BaggedForest::predict_proba(std::span<const double> features,
                                   std::span<const uint8_t> missing) const {
    require(features.size() == feature_names.size() &&
                missing.size() == feature_names.size(),
            "ArityMismatch", "feature arity does not match the model");
    if (config.missing_strategy == MissingStrategy::RequireComplete)
        for (const uint8_t m : missing)
            require(m == 0, "MissingNotAllowed",
                    "RequireComplete model fed a missing value");
    double total = 0.0;
    for (const Tree& tree : trees) total += tree.predict(features, missing);
    return clamp_prob(total / static_cast<double>(trees.size()));
}

std::vector<double> BaggedForest::predict_proba(const FeatureMatrix& X) const {
    std::vector<double> probs(X.n_rows);
    for (std::size_t r = 0; r < X.n_rows; ++r)
        probs[r] = predict_proba({X.values + r * X.n_features, X.n_features},
                                 {X.missing + r * X.n_features, X.n_features});
    return probs;
}

BaggedForest fit_forest(const SupervisedTable& table, const BoostConfig& config,
                        int n_trees, uint64_t seed) {
    config.validate();
    require(n_trees >= 1, "BadConfig", "n_trees must be >= 1");
    require(table.has_both_labels(), "DegenerateLabels",
            "training data must contain both labels");
    if (config.missing_strategy == MissingStrategy::RequireComplete)
        for (const uint8_t m : table.missing)
            require(m == 0, "MissingNotAllowed",
                    "RequireComplete cannot train on missing values");

    // Squared-loss stats from a zero prediction make each leaf weight the
    // class rate of its rows, so lambda is forced off for the forest.
    BoostConfig tree_config = config;
    tree_config.lambda = 0.0;

    const FeatureMatrix X = FeatureMatrix::of(table);
    const std::size_t n = table.n_rows;
    std::vector<double> grad(n), hess(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        grad[i] = -static_cast<double>(table.labels[i]);

    BaggedForest forest;
    forest.config = config;
    forest.n_trees = n_trees;
    forest.feature_names = table.feature_names;

    Rng rng(seed);
    for (int t = 0; t < n_trees; ++t) {
        Rng tree_rng = rng.child(static_cast<uint64_t>(t));
        std::vector<uint32_t> rows;
        if (config.subsample < 1.0) {
            // Bootstrap: draws with replacement, subsample of the table size.
            const auto draws = std::max<std::size_t>(
                1, static_cast<std::size_t>(config.subsample *
                                            static_cast<double>(n)));
            Rng boot = tree_rng.child(0);
            rows.resize(draws);
            for (auto& r : rows) r = static_cast<uint32_t>(boot.below(n));
            std::sort(rows.begin(), rows.end());
        } else {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), 0);
        }
        Rng col_rng = tree_rng.child(1);
        Rng* col_rng_ptr = config.colsample < 1.0 ? &col_rng : nullptr;
        forest.trees.push_back(
            fit_tree(X, rows, grad, hess, tree_config, nullptr, col_rng_ptr));
    }
    return forest;
}

}  // namespace distress
