#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ganorm/generator.hpp"
#include "ganorm/montage.hpp"
#include "ganorm/normcurves.hpp"
#include "ganorm/synthcohort.hpp"

namespace ganorm {

/// Everything a batch run needs; every field has a default and the effective
/// values are snapshotted into the output directory for reproducibility.
struct RunConfig {
    // [io]
    std::string dataset = "cohort/manifest.json";
    std::string out_dir = "out";

    // [pipeline]
    int jobs = 1;
    std::uint64_t seed = 42;
    std::vector<BandName> bands = {BandName::delta, BandName::theta, BandName::alpha,
                                   BandName::beta};

    // [metrics]
    double tau_fit = 0.0;  // threshold for trajectory NCs
    double tau_viz = 0.4;  // threshold for generated-network comparisons
    double gamma = 1.0;

    // [gamlss]
    GamlssConfig gamlss;

    // [training]
    BandName train_band = BandName::alpha;
    TrainConfig training;
    int folds = 5;

    // [score]
    BandName score_band = BandName::alpha;
    double score_tau = 0.4;
    std::string score_group = "cohort";

    // [report]
    double report_age_min = 5.0;
    double report_age_max = 97.0;
    int report_age_count = 41;

    // [synth]
    SynthConfig synth;
    std::string synth_out;  // empty: <out_dir>/cohort
};

/// Minimal TOML subset: [section] headers, key = value lines where value is a
/// quoted string, number, boolean, or flat array of those; # comments.
/// Unknown section.key pairs are schema violations.
void load_run_config(const std::string& path, RunConfig& cfg);

/// Apply the GANORM_OUT environment override, resolve derived defaults
/// (synth output dir, stage seeds), and range-check every field. Call once
/// after all file and flag overrides.
void finalize_run_config(RunConfig& cfg);

/// Canonical snapshot of every effective value, readable by load_run_config.
void write_effective_config(const RunConfig& cfg, const std::string& path);

struct StageResult {
    int exit_code = 0;  // 0 ok, 3 missing/invalid inputs, 4 stage failure
    std::string message;
};

StageResult stage_validate(const RunConfig& cfg);
StageResult stage_preprocess(const RunConfig& cfg);
StageResult stage_connectivity(const RunConfig& cfg);
StageResult stage_metrics(const RunConfig& cfg);
StageResult stage_fit_norms(const RunConfig& cfg);
StageResult stage_embed(const RunConfig& cfg);
StageResult stage_train(const RunConfig& cfg);
StageResult stage_generate_norm(const RunConfig& cfg, double age, BandName band);
StageResult stage_score(const RunConfig& cfg);
StageResult stage_report(const RunConfig& cfg);
StageResult stage_synth(const RunConfig& cfg);

/// Decoder training pairs assembled from the metrics table and connectivity
/// networks of the given band.
std::vector<TrainingExample> build_examples(const RunConfig& cfg, BandName band);

/// Snapshot the effective config into the output directory, run the stage,
/// write or clear <out_dir>/error.json, print one status line. Returns the
/// process exit code (0 ok, 3 missing inputs, 4 stage failure).
int execute_stage(const RunConfig& cfg, const std::string& stage_name,
                  const std::function<StageResult()>& body);

}  // namespace ganorm
