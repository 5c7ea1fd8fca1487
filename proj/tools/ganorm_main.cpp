#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ganorm/common.hpp"
#include "ganorm/pipeline.hpp"

using namespace ganorm;

int main(int argc, char** argv) {
    CLI::App app{"ganorm: EEG network normative modeling pipeline"};
    app.fallthrough();
    app.set_version_flag("--version", "ganorm 1.0.0");
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> dataset, out_dir;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "configuration file (TOML subset)")
        ->check(CLI::ExistingFile);
    app.add_option("--dataset", dataset, "dataset manifest path (overrides config)");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "master seed for every stochastic step");

    auto* cmd_validate = app.add_subcommand("validate", "check a dataset manifest and its tensors");
    auto* cmd_preprocess =
        app.add_subcommand("preprocess", "average reference + global scale normalization");
    auto* cmd_connectivity =
        app.add_subcommand("connectivity", "band coherence networks per subject");
    auto* cmd_metrics =
        app.add_subcommand("metrics", "the seven network characteristics per subject and band");
    auto* cmd_fit_norms =
        app.add_subcommand("fit-norms", "normative growth curves per band and characteristic");
    auto* cmd_embed =
        app.add_subcommand("embed", "input-target correlation screen for the decoder");
    auto* cmd_train =
        app.add_subcommand("train", "cross-validate and train the network decoder");
    auto* cmd_generate =
        app.add_subcommand("generate-norm", "decode the normative network at a given age");
    auto* cmd_score =
        app.add_subcommand("score", "deviation scores for every subject in the dataset");
    auto* cmd_report =
        app.add_subcommand("report", "percentile tables and group deviation summaries");
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic cohort dataset");

    std::optional<std::string> model_band;
    cmd_embed->add_option("--band", model_band, "frequency band to model");
    cmd_train->add_option("--band", model_band, "frequency band to model");
    std::optional<int> train_folds, train_epochs;
    cmd_train->add_option("--folds", train_folds, "cross-validation folds");
    cmd_train->add_option("--epochs", train_epochs, "maximum training epochs");

    double gen_age = 0.0;
    std::string gen_band;
    cmd_generate->add_option("--age", gen_age, "age in years")->required();
    cmd_generate->add_option("--band", gen_band, "frequency band (defaults to the training band)");

    std::optional<std::string> score_band, score_group;
    std::optional<double> score_tau;
    cmd_score->add_option("--band", score_band, "frequency band to score");
    cmd_score->add_option("--group", score_group, "group label for the scored records");
    cmd_score->add_option("--tau", score_tau, "threshold for network characteristic comparison");

    std::optional<std::size_t> synth_n;
    std::optional<double> synth_noise, synth_atten;
    std::optional<std::string> synth_group, synth_prefix, synth_dir;
    cmd_synth->add_option("--n", synth_n, "number of subjects");
    cmd_synth->add_option("--noise", synth_noise, "spectral perturbation scale");
    cmd_synth->add_option("--attenuation", synth_atten, "patient-effect coherence attenuation");
    cmd_synth->add_option("--group", synth_group, "group label");
    cmd_synth->add_option("--prefix", synth_prefix, "subject id prefix");
    cmd_synth->add_option("--cohort-out", synth_dir, "directory for the generated dataset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    RunConfig cfg;
    BandName generate_band = cfg.train_band;
    try {
        if (!config_path.empty()) load_run_config(config_path, cfg);
        if (dataset) cfg.dataset = *dataset;
        if (out_dir) cfg.out_dir = *out_dir;
        if (jobs) cfg.jobs = *jobs;
        if (seed) cfg.seed = *seed;
        if (model_band) cfg.train_band = band_name_from_str(*model_band);
        if (train_folds) cfg.folds = *train_folds;
        if (train_epochs) cfg.training.max_epochs = *train_epochs;
        if (score_band) cfg.score_band = band_name_from_str(*score_band);
        if (score_group) cfg.score_group = *score_group;
        if (score_tau) cfg.score_tau = *score_tau;
        if (synth_n) cfg.synth.n_subjects = *synth_n;
        if (synth_noise) cfg.synth.noise = *synth_noise;
        if (synth_atten) cfg.synth.fc_attenuation = *synth_atten;
        if (synth_group) cfg.synth.group = *synth_group;
        if (synth_prefix) cfg.synth.id_prefix = *synth_prefix;
        if (synth_dir) cfg.synth_out = *synth_dir;
        finalize_run_config(cfg);
        if (cmd_generate->parsed()) {
            if (!(gen_age > 0.0) || !std::isfinite(gen_age))
                throw Error("--age must be a positive number of years");
            generate_band = gen_band.empty() ? cfg.train_band : band_name_from_str(gen_band);
        }
    } catch (const Error& e) {
        std::cerr << "[error] " << e.what() << "\n";
        return 2;
    }

    if (cmd_validate->parsed())
        return execute_stage(cfg, "validate", [&] { return stage_validate(cfg); });
    if (cmd_preprocess->parsed())
        return execute_stage(cfg, "preprocess", [&] { return stage_preprocess(cfg); });
    if (cmd_connectivity->parsed())
        return execute_stage(cfg, "connectivity", [&] { return stage_connectivity(cfg); });
    if (cmd_metrics->parsed())
        return execute_stage(cfg, "metrics", [&] { return stage_metrics(cfg); });
    if (cmd_fit_norms->parsed())
        return execute_stage(cfg, "fit-norms", [&] { return stage_fit_norms(cfg); });
    if (cmd_embed->parsed())
        return execute_stage(cfg, "embed", [&] { return stage_embed(cfg); });
    if (cmd_train->parsed())
        return execute_stage(cfg, "train", [&] { return stage_train(cfg); });
    if (cmd_generate->parsed())
        return execute_stage(cfg, "generate-norm",
                             [&] { return stage_generate_norm(cfg, gen_age, generate_band); });
    if (cmd_score->parsed())
        return execute_stage(cfg, "score", [&] { return stage_score(cfg); });
    if (cmd_report->parsed())
        return execute_stage(cfg, "report", [&] { return stage_report(cfg); });
    if (cmd_synth->parsed())
        return execute_stage(cfg, "synth", [&] { return stage_synth(cfg); });

    std::cerr << "[error] no subcommand selected\n";
    return 2;
}
