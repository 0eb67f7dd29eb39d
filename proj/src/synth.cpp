#include "distress/synth.hpp"

#include <cmath>
#include <fstream>

#include "distress/error.hpp"
#include "distress/rng.hpp"
#include "distress/util.hpp"

namespace distress {

void SynthConfig::validate() const {
    require(n_firms >= 1 && n_years >= 1 && n_features >= 1, "BadConfig",
            "n_firms, n_years, n_features must be >= 1");
    require(hazard_base > 0.0 && hazard_base < 1.0, "BadConfig",
            "hazard_base must lie in (0,1)");
    require(distress_loading >= 0.0, "BadConfig", "distress_loading must be >= 0");
    require(mnar_strength >= 0.0, "BadConfig", "mnar_strength must be >= 0");
    require(mcar_rate >= 0.0 && mcar_rate < 1.0, "BadConfig", "mcar_rate must lie in [0,1)");
    require(ar_persistence >= 0.0 && ar_persistence < 1.0, "BadConfig",
            "ar_persistence must lie in [0,1)");
    require(persistent_fraction >= 0.0 && persistent_fraction < 1.0, "BadConfig",
            "persistent_fraction must lie in [0,1)");
}

namespace {

// Linear loadings for the three signal readouts; readout noise is fixed at
// sigma 0.5 so the signal-to-noise ratio is stable across configs.
constexpr double kLoadings[3] = {1.0, 0.8, 0.6};
constexpr double kQuadraticWeight = 0.3;  // nonlinear part mixed into feature 2
constexpr double kReadoutNoise = 0.5;

double readout(int feature, double distress, Rng& rng) {
    if (feature < 3) {
        double mean = kLoadings[feature] * distress;
        if (feature == 2) mean += kQuadraticWeight * (distress * distress - 1.0);
        return mean + kReadoutNoise * rng.normal();
    }
    return rng.normal();
}

}  // namespace

SynthResult generate_panel(const SynthConfig& config) {
    config.validate();

    SynthResult result;
    result.panel.feature_names.reserve(config.n_features);
    for (int f = 0; f < config.n_features; ++f) {
        const std::string name = "f" + std::to_string(f);
        result.panel.feature_names.push_back(name);
        result.panel.group_labels[name] = f < 3 ? "signal" : "noise";
    }

    const Rng root(config.seed);
    const double hazard_intercept = logit(config.hazard_base);
    // Stationary unit variance for the AR(1) innovation.
    const double innovation_sd = std::sqrt(1.0 - config.ar_persistence * config.ar_persistence);

    for (int firm = 0; firm < config.n_firms; ++firm) {
        Rng firm_rng = root.child(static_cast<uint64_t>(firm));
        Rng path_rng = firm_rng.child(0);
        Rng feature_rng = firm_rng.child(1);
        Rng missing_rng = firm_rng.child(2);
        Rng hazard_rng = firm_rng.child(3);

        const bool persistent = config.persistent_fraction > 0.0 &&
                                firm_rng.child(4).uniform() < config.persistent_fraction;
        const double offset = persistent ? config.persistent_shift : 0.0;

        std::string firm_id = "F" + std::to_string(firm);
        double state = path_rng.normal();
        for (int t = 0; t < config.n_years; ++t) {
            if (t > 0)
                state = config.ar_persistence * state + innovation_sd * path_rng.normal();
            const double distress = state + offset;

            FirmYearRecord record;
            record.firm_id = firm_id;
            record.year = config.first_year + t;
            record.features.resize(config.n_features);
            record.missing.assign(config.n_features, 0);
            for (int f = 0; f < config.n_features; ++f) {
                record.features[f] = readout(f, distress, feature_rng);
                bool missing = false;
                if (config.mnar_strength > 0.0)
                    missing = missing_rng.bernoulli(
                        sigmoid(config.mnar_base_logit + config.mnar_strength * distress));
                if (config.mcar_rate > 0.0)
                    missing = missing_rng.bernoulli(config.mcar_rate) || missing;
                if (missing) {
                    record.missing[f] = 1;
                    record.features[f] = 0.0;
                }
            }

            const double hazard =
                sigmoid(hazard_intercept + config.distress_loading * distress);
            record.failed = hazard_rng.bernoulli(hazard) ? 1 : 0;

            result.panel.records.push_back(std::move(record));
            result.truth.push_back(
                {firm_id, config.first_year + t, distress, persistent ? 1 : 0});
            if (result.panel.records.back().failed) break;  // absorbing
        }
    }
    return result;
}

void save_truth_csv(const std::vector<TruthRow>& truth, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "IoError", "cannot write " + path);
    out << "firm_id,year,latent_distress,persistent_distress\n";
    for (const auto& row : truth)
        out << row.firm_id << ',' << row.year << ',' << format_double(row.latent_distress)
            << ',' << row.persistent_distress << '\n';
}

}  // namespace distress
