#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = GANORM_CLI_PATH;

struct RunResult {
    int exit_code = -1;
    std::string output;
};

// Run the CLI through the shell, capturing combined stdout/stderr.
RunResult run(const std::string& args, const std::string& env_prefix = "") {
    const std::string log = "cli_last_output.txt";
    const std::string cmd = env_prefix + "\"" + kCli + "\" " + args + " > " + log + " 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = (raw >= 0) ? ((raw >> 8) & 0xff) : raw;
    std::ifstream in(log);
    r.output.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("help and version exit cleanly") {
    auto help = run("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("validate") != std::string::npos);
    CHECK(help.output.find("synth") != std::string::npos);

    auto version = run("--version");
    CHECK(version.exit_code == 0);
    CHECK(version.output.find("ganorm") != std::string::npos);

    auto sub = run("score --help");
    CHECK(sub.exit_code == 0);
    CHECK(sub.output.find("--tau") != std::string::npos);
}

TEST_CASE("usage and config errors exit 2") {
    CHECK(run("frobnicate").exit_code == 2);
    CHECK(run("").exit_code == 2);  // a subcommand is required
    CHECK(run("generate-norm").exit_code == 2);  // --age is required

    fs::create_directories("cli_scratch");
    {
        std::ofstream cfg("cli_scratch/bad.toml");
        cfg << "[pipeline]\nbogus_key = 3\n";
    }
    auto bad = run("validate --config cli_scratch/bad.toml");
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("bogus_key") != std::string::npos);

    {
        std::ofstream cfg("cli_scratch/badval.toml");
        cfg << "[training]\nval_fraction = 0.9\n";
    }
    CHECK(run("validate --config cli_scratch/badval.toml").exit_code == 2);

    CHECK(run("validate --config cli_scratch/no_such.toml").exit_code == 2);
}

TEST_CASE("missing inputs exit 3 and leave a machine-readable error") {
    fs::remove_all("cli_scratch/empty_out");
    auto r = run("metrics --dataset cli_scratch/nowhere/manifest.json --out cli_scratch/empty_out");
    CHECK(r.exit_code == 3);
    const std::string err_path = "cli_scratch/empty_out/error.json";
    REQUIRE(fs::exists(err_path));
    auto err = json::parse(slurp(err_path));
    CHECK(err["stage"] == "metrics");
    CHECK(err["exit_code"] == 3);
    CHECK(!err["message"].get<std::string>().empty());

    auto v = run("validate --dataset cli_scratch/nowhere/manifest.json --out cli_scratch/empty_out");
    CHECK(v.exit_code == 3);
}

TEST_CASE("full pipeline chain over a synthetic cohort") {
    const std::string root = "cli_chain";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg_path = root + "/run.toml";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[io]\n"
            << "dataset = \"" << root << "/cohort/manifest.json\"\n"
            << "out_dir = \"" << root << "/out\"\n"
            << "[pipeline]\n"
            << "seed = 42\n"
            << "jobs = 1\n"
            << "[synth]\n"
            << "n_subjects = 60\n"
            << "noise = 0.02\n"
            << "out = \"" << root << "/cohort\"\n"
            << "[training]\n"
            << "max_epochs = 120\n"
            << "folds = 3\n"
            << "[score]\n"
            << "tau = 0.0\n"
            << "group = \"cohort\"\n"
            << "[report]\n"
            << "age_count = 9\n";
    }
    const std::string with_cfg = " --config " + cfg_path;

    CHECK(run("synth" + with_cfg).exit_code == 0);
    REQUIRE(fs::exists(root + "/cohort/manifest.json"));
    CHECK(fs::exists(root + "/cohort/truth.csv"));

    CHECK(run("validate" + with_cfg).exit_code == 0);
    CHECK(fs::exists(root + "/out/validate.json"));
    CHECK(fs::exists(root + "/out/effective_config.toml"));
    CHECK(!fs::exists(root + "/out/error.json"));

    CHECK(run("preprocess" + with_cfg).exit_code == 0);
    REQUIRE(fs::exists(root + "/out/preprocessed/manifest.json"));

    CHECK(run("connectivity" + with_cfg).exit_code == 0);
    REQUIRE(fs::exists(root + "/out/connectivity/index.json"));

    CHECK(run("metrics" + with_cfg).exit_code == 0);
    const std::string nctable_path = root + "/out/metrics/nctable.csv";
    REQUIRE(fs::exists(nctable_path));
    auto nctable = slurp(nctable_path);
    CHECK(nctable.rfind("subject_id,band,age,cpl,ge,cc,le,m,bc,pc\n", 0) == 0);
    CHECK(line_count(nctable) == 1 + 60 * 4);  // header + subjects x bands

    // Stage rerun is byte-identical.
    CHECK(run("metrics" + with_cfg).exit_code == 0);
    CHECK(slurp(nctable_path) == nctable);

    CHECK(run("fit-norms" + with_cfg).exit_code == 0);
    REQUIRE(fs::exists(root + "/out/norms/curves.json"));

    CHECK(run("embed" + with_cfg).exit_code == 0);
    REQUIRE(fs::exists(root + "/out/embed/embedding.json"));
    auto embed = json::parse(slurp(root + "/out/embed/embedding.json"));
    CHECK(embed["strong_count"].get<int>() > 0);

    CHECK(run("train" + with_cfg).exit_code == 0);
    REQUIRE(fs::exists(root + "/out/model/model.bin"));
    REQUIRE(fs::exists(root + "/out/model/model.json"));
    REQUIRE(fs::exists(root + "/out/model/cv_report.json"));
    CHECK(fs::exists(root + "/out/model/cv_report.csv"));
    REQUIRE(fs::exists(root + "/out/model/final_eval.json"));

    CHECK(run("generate-norm --age 30" + with_cfg).exit_code == 0);
    CHECK(run("generate-norm --age 8" + with_cfg).exit_code == 0);
    std::string net30, ncs30, ncs8;
    for (const auto& e : fs::directory_iterator(root + "/out/norm_networks")) {
        const auto name = e.path().filename().string();
        if (name.rfind("net_alpha_age30", 0) == 0) net30 = e.path().string();
        if (name.rfind("ncs_alpha_age30", 0) == 0) ncs30 = e.path().string();
        if (name.rfind("ncs_alpha_age8", 0) == 0) ncs8 = e.path().string();
    }
    REQUIRE(!net30.empty());
    REQUIRE(!ncs30.empty());
    REQUIRE(!ncs8.empty());
    auto j30 = json::parse(slurp(ncs30));
    auto j8 = json::parse(slurp(ncs8));
    // The synthetic alpha effect peaks at age 30, so the decoded normative
    // network should carry more FC than at age 8.
    CHECK(j30["mfcs"].get<double>() >= j8["mfcs"].get<double>());

    CHECK(run("score" + with_cfg).exit_code == 0);
    const std::string dev_path = root + "/out/deviations/cohort.csv";
    REQUIRE(fs::exists(dev_path));
    auto devs = slurp(dev_path);
    CHECK(line_count(devs) == 1 + 60);
    CHECK(devs.find(",cohort,") != std::string::npos);

    // Scoring again reproduces the file byte for byte.
    CHECK(run("score" + with_cfg).exit_code == 0);
    CHECK(slurp(dev_path) == devs);

    CHECK(run("report" + with_cfg).exit_code == 0);
    REQUIRE(fs::exists(root + "/out/report/cohort_report.json"));
    auto report = json::parse(slurp(root + "/out/report/cohort_report.json"));
    CHECK(report["groups"].size() == 1);
    bool any_percentiles = false;
    for (const auto& e : fs::directory_iterator(root + "/out/report"))
        if (e.path().filename().string().rfind("percentiles_", 0) == 0) any_percentiles = true;
    CHECK(any_percentiles);

    // The written config snapshot is itself a valid config.
    CHECK(run("validate --config " + root + "/out/effective_config.toml").exit_code == 0);
}

TEST_CASE("environment override redirects outputs") {
    fs::remove_all("cli_scratch/env_out");
    {
        std::ofstream cfg("cli_scratch/env.toml");
        cfg << "[io]\nout_dir = \"cli_scratch/ignored\"\n[synth]\nn_subjects = 2\nout = "
               "\"cli_scratch/env_cohort\"\n";
    }
    fs::remove_all("cli_scratch/env_cohort");
    fs::remove_all("cli_scratch/ignored");
    auto r = run("synth --config cli_scratch/env.toml", "GANORM_OUT=cli_scratch/env_out ");
    CHECK(r.exit_code == 0);
    CHECK(fs::exists("cli_scratch/env_out/effective_config.toml"));
    CHECK(!fs::exists("cli_scratch/ignored"));
}
