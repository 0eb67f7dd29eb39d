#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distress/panel.hpp"

namespace distress {

// Synthetic firm-year generator. A latent per-firm distress process drives
// the failure hazard, the feature readouts and (optionally) the chance that
// a cell goes undisclosed, so missingness is genuinely MNAR.
//
// Feature layout: features 0..2 are noisy readouts of latent distress
// (feature 2 carries an extra quadratic term so part of the signal is
// nonlinear); everything from index 3 up is pure noise. Group labels on the
// emitted panel tag them "signal" / "noise" accordingly.
struct SynthConfig {
    int n_firms = 1000;
    int n_years = 8;
    int n_features = 10;
    double hazard_base = 0.03;       // failure probability at zero distress
    double distress_loading = 1.0;   // distress effect on failure log-odds
    double mnar_strength = 0.0;      // distress effect on missing log-odds
    double mcar_rate = 0.0;          // independent missingness noise
    uint64_t seed = 0;

    // Latent process and MNAR shape; defaults match the documented design.
    double ar_persistence = 0.8;       // AR(1) coefficient of latent distress
    double mnar_base_logit = -2.5;     // baseline of the MNAR channel (when active)
    double persistent_fraction = 0.0;  // share of firms with a fixed distress offset
    double persistent_shift = 2.5;     // size of that offset
    int first_year = 2008;

    void validate() const;  // BadConfig
};

struct TruthRow {
    std::string firm_id;
    int year = 0;
    double latent_distress = 0.0;
    int persistent_distress = 0;  // firm belongs to the planted high-risk group
};

struct SynthResult {
    FirmPanel panel;
    std::vector<TruthRow> truth;  // parallel to panel.records
};

// Deterministic per seed. Failure is absorbing: a firm's failure year is its
// last record. Ground truth is returned separately and never leaks into the
// panel.
SynthResult generate_panel(const SynthConfig& config);

void save_truth_csv(const std::vector<TruthRow>& truth, const std::string& path);

}  // namespace distress
