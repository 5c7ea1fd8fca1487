#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganorm/manifest.hpp"
#include "ganorm/montage.hpp"
#include "ganorm/tensor.hpp"

namespace ganorm {

/// Band coherence strength as a function of age: a flat base plus an optional
/// log-normal bump, strength(a) = base + bump * exp(-(ln a - ln peak)^2 / (2 w^2)).
struct BandEffect {
    double base = 0.5;
    double bump = 0.0;
    double peak_age = 30.0;
    double log_width = 0.55;

    double strength(double age) const;
};

struct SynthConfig {
    std::size_t n_subjects = 100;
    double age_min = 5.0;
    double age_max = 97.0;  // ages drawn log-uniform on [age_min, age_max]
    std::uint64_t seed = 1;
    double noise = 0.0;           // Hermitian perturbation scale before PSD projection
    double between_scale = 0.6;   // between-block connectivity relative to within
    double fc_attenuation = 0.0;  // patient effect: coherence scaled by (1 - this)
    std::string group = "HC";
    std::string id_prefix = "syn";
    ChannelMontage montage = ChannelMontage::standard_10_20();
    FrequencyGrid grid = FrequencyGrid::standard();
    std::vector<BandEffect> effects = default_effects();  // delta, theta, alpha, beta

    /// Alpha follows an inverted U peaking at age 30; other bands are flat.
    static std::vector<BandEffect> default_effects();
    void validate() const;
};

struct SynthTruthRow {
    std::string subject_id;
    std::string group;
    double age = 0.0;
    BandName band = BandName::alpha;
    double target_strength = 0.0;  // configured within-block coherence
    double within = 0.0;           // re-measured mean within-block coherence
    double between = 0.0;          // re-measured mean between-block coherence
    double mean_offdiag = 0.0;     // re-measured mean off-diagonal coherence
};

struct SynthResult {
    DatasetManifest manifest;
    std::vector<SynthTruthRow> truth;
};

/// Tensor for one subject; deterministic in (cfg, age, subject_seed).
CrossSpectrumTensor make_subject_tensor(const SynthConfig& cfg, double age,
                                        std::uint64_t subject_seed);

/// Build the cohort under out_dir: manifest.json, tensors/, truth.csv.
SynthResult generate_cohort(const SynthConfig& cfg, const std::string& out_dir, int jobs = 1);

void save_truth_csv(const std::vector<SynthTruthRow>& truth, const std::string& path);

}  // namespace ganorm
