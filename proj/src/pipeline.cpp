#include "ganorm/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

#include "json.hpp"

#include "ganorm/common.hpp"
#include "ganorm/deviation.hpp"
#include "ganorm/manifest.hpp"
#include "ganorm/network.hpp"
#include "ganorm/preprocess.hpp"
#include "ganorm/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ganorm {

namespace {

// ---------------------------------------------------------------------------
// Config file parsing: a flat TOML subset. [section] headers, key = value,
// values are quoted strings, numbers, booleans, or one-level arrays.
// ---------------------------------------------------------------------------

struct TomlValue {
    enum class Kind { str, num, boolean, array };
    Kind kind = Kind::str;
    std::string s;  // string payload, or the raw numeric token
    double num = 0.0;
    bool b = false;
    std::vector<TomlValue> items;
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Cut a trailing # comment, ignoring # inside quoted strings.
std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_str) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_str = false;
            }
        } else if (c == '"') {
            in_str = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string parse_quoted(const std::string& tok, int line_no) {
    if (tok.size() < 2 || tok.back() != '"')
        throw Error("config line " + std::to_string(line_no) + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
        char c = tok[i];
        if (c == '\\') {
            ++i;
            if (i + 1 >= tok.size() + 1)
                throw Error("config line " + std::to_string(line_no) + ": bad escape");
            char e = tok[i];
            if (e == '"') out += '"';
            else if (e == '\\') out += '\\';
            else if (e == 'n') out += '\n';
            else if (e == 't') out += '\t';
            else
                throw Error("config line " + std::to_string(line_no) + ": unknown escape \\" + e);
        } else {
            out += c;
        }
    }
    return out;
}

TomlValue parse_scalar(const std::string& tok, int line_no) {
    TomlValue v;
    if (!tok.empty() && tok.front() == '"') {
        v.kind = TomlValue::Kind::str;
        v.s = parse_quoted(tok, line_no);
        return v;
    }
    if (tok == "true" || tok == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.b = (tok == "true");
        return v;
    }
    char* end = nullptr;
    double d = std::strtod(tok.c_str(), &end);
    if (end == nullptr || *end != '\0' || tok.empty())
        throw Error("config line " + std::to_string(line_no) + ": cannot parse value '" + tok +
                    "'");
    v.kind = TomlValue::Kind::num;
    v.num = d;
    v.s = tok;
    return v;
}

// Split a top-level array body on commas, respecting quoted strings.
std::vector<std::string> split_array_items(const std::string& body, int line_no) {
    std::vector<std::string> items;
    std::string cur;
    bool in_str = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (in_str) {
            cur += c;
            if (c == '\\' && i + 1 < body.size()) {
                cur += body[++i];
            } else if (c == '"') {
                in_str = false;
            }
        } else if (c == '"') {
            in_str = true;
            cur += c;
        } else if (c == ',') {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (in_str) throw Error("config line " + std::to_string(line_no) + ": unterminated string");
    std::string last = trim(cur);
    if (!last.empty()) items.push_back(last);
    for (const auto& it : items)
        if (it.empty())
            throw Error("config line " + std::to_string(line_no) + ": empty array element");
    return items;
}

TomlValue parse_value(const std::string& tok, int line_no) {
    if (!tok.empty() && tok.front() == '[') {
        if (tok.back() != ']')
            throw Error("config line " + std::to_string(line_no) + ": unterminated array");
        TomlValue v;
        v.kind = TomlValue::Kind::array;
        for (const auto& item : split_array_items(tok.substr(1, tok.size() - 2), line_no))
            v.items.push_back(parse_scalar(item, line_no));
        return v;
    }
    return parse_scalar(tok, line_no);
}

struct ConfigEntry {
    std::string section, key;
    TomlValue value;
    int line_no = 0;

    std::string where() const { return section + "." + key + " (line " + std::to_string(line_no) + ")"; }

    const std::string& as_str() const {
        if (value.kind != TomlValue::Kind::str) throw Error("config: " + where() + " must be a string");
        return value.s;
    }
    double as_num() const {
        if (value.kind != TomlValue::Kind::num) throw Error("config: " + where() + " must be a number");
        return value.num;
    }
    bool as_bool() const {
        if (value.kind != TomlValue::Kind::boolean)
            throw Error("config: " + where() + " must be true or false");
        return value.b;
    }
    long long as_int() const {
        double d = as_num();
        long long i = static_cast<long long>(d);
        if (static_cast<double>(i) != d)
            throw Error("config: " + where() + " must be an integer");
        return i;
    }
    std::uint64_t as_u64() const {
        if (value.kind != TomlValue::Kind::num) throw Error("config: " + where() + " must be a number");
        try {
            if (!value.s.empty() && value.s[0] == '-') throw std::invalid_argument("negative");
            std::size_t pos = 0;
            std::uint64_t u = std::stoull(value.s, &pos);
            if (pos != value.s.size()) throw std::invalid_argument("trailing");
            return u;
        } catch (const std::exception&) {
            throw Error("config: " + where() + " must be a non-negative integer");
        }
    }
    std::vector<std::string> as_str_array() const {
        if (value.kind != TomlValue::Kind::array)
            throw Error("config: " + where() + " must be an array");
        std::vector<std::string> out;
        for (const auto& it : value.items) {
            if (it.kind != TomlValue::Kind::str)
                throw Error("config: " + where() + " must be an array of strings");
            out.push_back(it.s);
        }
        return out;
    }
};

std::vector<ConfigEntry> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::vector<ConfigEntry> entries;
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(strip_comment(line));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw Error("config line " + std::to_string(line_no) + ": bad section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw Error("config line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(line_no) + ": expected key = value");
        ConfigEntry e;
        e.section = section;
        e.key = trim(t.substr(0, eq));
        e.line_no = line_no;
        if (e.key.empty())
            throw Error("config line " + std::to_string(line_no) + ": empty key");
        e.value = parse_value(trim(t.substr(eq + 1)), line_no);
        entries.push_back(std::move(e));
    }
    return entries;
}

BandName band_from_entry(const ConfigEntry& e, const std::string& s) {
    try {
        return band_name_from_str(s);
    } catch (const Error& err) {
        throw Error("config: " + e.where() + ": " + err.what());
    }
}

void apply_entry(RunConfig& cfg, const ConfigEntry& e) {
    const std::string& sec = e.section;
    const std::string& key = e.key;
    if (sec == "io") {
        if (key == "dataset") { cfg.dataset = e.as_str(); return; }
        if (key == "out_dir") { cfg.out_dir = e.as_str(); return; }
    } else if (sec == "pipeline") {
        if (key == "jobs") { cfg.jobs = static_cast<int>(e.as_int()); return; }
        if (key == "seed") { cfg.seed = e.as_u64(); return; }
        if (key == "bands") {
            cfg.bands.clear();
            for (const auto& s : e.as_str_array()) cfg.bands.push_back(band_from_entry(e, s));
            return;
        }
    } else if (sec == "metrics") {
        if (key == "tau_fit") { cfg.tau_fit = e.as_num(); return; }
        if (key == "tau_viz") { cfg.tau_viz = e.as_num(); return; }
        if (key == "gamma") { cfg.gamma = e.as_num(); return; }
    } else if (sec == "gamlss") {
        if (key == "mu_knots") { cfg.gamlss.mu_interior_knots = static_cast<int>(e.as_int()); return; }
        if (key == "sigma_knots") { cfg.gamlss.sigma_interior_knots = static_cast<int>(e.as_int()); return; }
        if (key == "max_iterations") { cfg.gamlss.max_iterations = static_cast<int>(e.as_int()); return; }
        if (key == "tol") { cfg.gamlss.tol = e.as_num(); return; }
        if (key == "lambda_grid") { cfg.gamlss.lambda_grid = static_cast<int>(e.as_int()); return; }
        if (key == "lambda_min") { cfg.gamlss.lambda_min = e.as_num(); return; }
        if (key == "lambda_max") { cfg.gamlss.lambda_max = e.as_num(); return; }
        if (key == "min_n") { cfg.gamlss.min_n = static_cast<std::size_t>(e.as_int()); return; }
        if (key == "allow_offset") { cfg.gamlss.allow_offset = e.as_bool(); return; }
    } else if (sec == "training") {
        if (key == "band") { cfg.train_band = band_from_entry(e, e.as_str()); return; }
        if (key == "lr") { cfg.training.lr = e.as_num(); return; }
        if (key == "batch") { cfg.training.batch = static_cast<int>(e.as_int()); return; }
        if (key == "max_epochs") { cfg.training.max_epochs = static_cast<int>(e.as_int()); return; }
        if (key == "patience") { cfg.training.patience = static_cast<int>(e.as_int()); return; }
        if (key == "val_fraction") { cfg.training.val_fraction = e.as_num(); return; }
        if (key == "folds") { cfg.folds = static_cast<int>(e.as_int()); return; }
    } else if (sec == "score") {
        if (key == "band") { cfg.score_band = band_from_entry(e, e.as_str()); return; }
        if (key == "tau") { cfg.score_tau = e.as_num(); return; }
        if (key == "group") { cfg.score_group = e.as_str(); return; }
    } else if (sec == "report") {
        if (key == "age_min") { cfg.report_age_min = e.as_num(); return; }
        if (key == "age_max") { cfg.report_age_max = e.as_num(); return; }
        if (key == "age_count") { cfg.report_age_count = static_cast<int>(e.as_int()); return; }
    } else if (sec == "synth") {
        if (key == "n_subjects") { cfg.synth.n_subjects = static_cast<std::size_t>(e.as_int()); return; }
        if (key == "age_min") { cfg.synth.age_min = e.as_num(); return; }
        if (key == "age_max") { cfg.synth.age_max = e.as_num(); return; }
        if (key == "noise") { cfg.synth.noise = e.as_num(); return; }
        if (key == "between_scale") { cfg.synth.between_scale = e.as_num(); return; }
        if (key == "fc_attenuation") { cfg.synth.fc_attenuation = e.as_num(); return; }
        if (key == "group") { cfg.synth.group = e.as_str(); return; }
        if (key == "id_prefix") { cfg.synth.id_prefix = e.as_str(); return; }
        if (key == "out") { cfg.synth_out = e.as_str(); return; }
    }
    throw Error("config: unknown key " + e.where());
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

fs::path outp(const RunConfig& cfg, const std::string& rel) {
    return fs::path(cfg.out_dir) / rel;
}

// Filesystem-safe stem for per-subject artifacts; the index keeps stems unique
// even if sanitizing collides ids.
std::string subject_stem(std::size_t index, const std::string& id) {
    std::string clean;
    for (char c : id)
        clean += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_')
                     ? c
                     : '_';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%04zu", index);
    return std::string(buf) + "_" + clean;
}

DatasetManifest load_clean(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw Error(std::string(what) + " not found: " + path);
    std::vector<ManifestIssue> issues;
    DatasetManifest m = load_dataset(path, &issues);
    if (!issues.empty()) {
        std::ostringstream os;
        os << what << " has " << issues.size() << " issue(s); first: subject '"
           << issues.front().subject_id << "': " << issues.front().message;
        throw Error(os.str());
    }
    return m;
}

std::string preprocessed_manifest_path(const RunConfig& cfg) {
    return outp(cfg, "preprocessed/manifest.json").string();
}

json ncs_json(const NCVector& v) {
    json j;
    const auto& names = NCVector::names();
    auto vals = v.values();
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = vals[i];
    j["disconnected"] = v.disconnected;
    return j;
}

std::vector<double> report_age_grid(const RunConfig& cfg) {
    std::vector<double> ages(static_cast<std::size_t>(cfg.report_age_count));
    double la = std::log(cfg.report_age_min), lb = std::log(cfg.report_age_max);
    for (std::size_t i = 0; i < ages.size(); ++i) {
        double t = ages.size() == 1 ? 0.0 : static_cast<double>(i) / (ages.size() - 1.0);
        ages[i] = std::exp(la + t * (lb - la));
    }
    return ages;
}

void write_json_file(const json& j, const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Config API
// ---------------------------------------------------------------------------

void load_run_config(const std::string& path, RunConfig& cfg) {
    for (const auto& e : parse_config_file(path)) apply_entry(cfg, e);
}

void finalize_run_config(RunConfig& cfg) {
    if (const char* env = std::getenv("GANORM_OUT"); env != nullptr && *env != '\0')
        cfg.out_dir = env;
    if (cfg.synth_out.empty()) cfg.synth_out = (fs::path(cfg.out_dir) / "cohort").string();
    cfg.synth.seed = cfg.seed;
    cfg.training.seed = derive_seed(cfg.seed, 0x7EA1u);

    if (cfg.dataset.empty()) throw Error("config: io.dataset must not be empty");
    if (cfg.out_dir.empty()) throw Error("config: io.out_dir must not be empty");
    if (cfg.jobs < 1) throw Error("config: pipeline.jobs must be >= 1");
    if (cfg.bands.empty()) throw Error("config: pipeline.bands must not be empty");
    std::vector<BandName> seen;
    for (BandName b : cfg.bands) {
        if (std::find(seen.begin(), seen.end(), b) != seen.end())
            throw Error("config: pipeline.bands lists '" + band_name_str(b) + "' twice");
        seen.push_back(b);
    }
    auto in01 = [](double x) { return x >= 0.0 && x < 1.0; };
    if (!in01(cfg.tau_fit)) throw Error("config: metrics.tau_fit must be in [0, 1)");
    if (!in01(cfg.tau_viz)) throw Error("config: metrics.tau_viz must be in [0, 1)");
    if (!(cfg.gamma > 0.0)) throw Error("config: metrics.gamma must be > 0");
    if (cfg.gamlss.mu_interior_knots < 2) throw Error("config: gamlss.mu_knots must be >= 2");
    if (cfg.gamlss.sigma_interior_knots < 2) throw Error("config: gamlss.sigma_knots must be >= 2");
    if (cfg.gamlss.max_iterations < 1) throw Error("config: gamlss.max_iterations must be >= 1");
    if (!(cfg.gamlss.tol > 0.0)) throw Error("config: gamlss.tol must be > 0");
    if (cfg.gamlss.lambda_grid < 2) throw Error("config: gamlss.lambda_grid must be >= 2");
    if (!(cfg.gamlss.lambda_min > 0.0) || !(cfg.gamlss.lambda_max > cfg.gamlss.lambda_min))
        throw Error("config: gamlss lambda range must satisfy 0 < lambda_min < lambda_max");
    if (cfg.gamlss.min_n < 10) throw Error("config: gamlss.min_n must be >= 10");
    if (!(cfg.training.lr > 0.0)) throw Error("config: training.lr must be > 0");
    if (cfg.training.batch < 1) throw Error("config: training.batch must be >= 1");
    if (cfg.training.max_epochs < 1) throw Error("config: training.max_epochs must be >= 1");
    if (cfg.training.patience < 1) throw Error("config: training.patience must be >= 1");
    if (cfg.training.val_fraction < 0.0 || cfg.training.val_fraction > 0.5)
        throw Error("config: training.val_fraction must be in [0, 0.5]");
    if (cfg.folds < 2) throw Error("config: training.folds must be >= 2");
    if (!in01(cfg.score_tau)) throw Error("config: score.tau must be in [0, 1)");
    if (cfg.score_group.empty()) throw Error("config: score.group must not be empty");
    if (!(cfg.report_age_min > 0.0) || !(cfg.report_age_max > cfg.report_age_min))
        throw Error("config: report age range must satisfy 0 < age_min < age_max");
    if (cfg.report_age_count < 2) throw Error("config: report.age_count must be >= 2");
    cfg.synth.validate();
}

void write_effective_config(const RunConfig& cfg, const std::string& path) {
    std::ostringstream os;
    os << "# effective configuration (all values resolved)\n";
    os << "[io]\n";
    os << "dataset = " << quote(cfg.dataset) << "\n";
    os << "out_dir = " << quote(cfg.out_dir) << "\n";
    os << "\n[pipeline]\n";
    os << "jobs = " << cfg.jobs << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "bands = [";
    for (std::size_t i = 0; i < cfg.bands.size(); ++i)
        os << (i ? ", " : "") << quote(band_name_str(cfg.bands[i]));
    os << "]\n";
    os << "\n[metrics]\n";
    os << "tau_fit = " << dtos(cfg.tau_fit) << "\n";
    os << "tau_viz = " << dtos(cfg.tau_viz) << "\n";
    os << "gamma = " << dtos(cfg.gamma) << "\n";
    os << "\n[gamlss]\n";
    os << "mu_knots = " << cfg.gamlss.mu_interior_knots << "\n";
    os << "sigma_knots = " << cfg.gamlss.sigma_interior_knots << "\n";
    os << "max_iterations = " << cfg.gamlss.max_iterations << "\n";
    os << "tol = " << dtos(cfg.gamlss.tol) << "\n";
    os << "lambda_grid = " << cfg.gamlss.lambda_grid << "\n";
    os << "lambda_min = " << dtos(cfg.gamlss.lambda_min) << "\n";
    os << "lambda_max = " << dtos(cfg.gamlss.lambda_max) << "\n";
    os << "min_n = " << cfg.gamlss.min_n << "\n";
    os << "allow_offset = " << (cfg.gamlss.allow_offset ? "true" : "false") << "\n";
    os << "\n[training]\n";
    os << "band = " << quote(band_name_str(cfg.train_band)) << "\n";
    os << "lr = " << dtos(cfg.training.lr) << "\n";
    os << "batch = " << cfg.training.batch << "\n";
    os << "max_epochs = " << cfg.training.max_epochs << "\n";
    os << "patience = " << cfg.training.patience << "\n";
    os << "val_fraction = " << dtos(cfg.training.val_fraction) << "\n";
    os << "folds = " << cfg.folds << "\n";
    os << "\n[score]\n";
    os << "band = " << quote(band_name_str(cfg.score_band)) << "\n";
    os << "tau = " << dtos(cfg.score_tau) << "\n";
    os << "group = " << quote(cfg.score_group) << "\n";
    os << "\n[report]\n";
    os << "age_min = " << dtos(cfg.report_age_min) << "\n";
    os << "age_max = " << dtos(cfg.report_age_max) << "\n";
    os << "age_count = " << cfg.report_age_count << "\n";
    os << "\n[synth]\n";
    os << "n_subjects = " << cfg.synth.n_subjects << "\n";
    os << "age_min = " << dtos(cfg.synth.age_min) << "\n";
    os << "age_max = " << dtos(cfg.synth.age_max) << "\n";
    os << "noise = " << dtos(cfg.synth.noise) << "\n";
    os << "between_scale = " << dtos(cfg.synth.between_scale) << "\n";
    os << "fc_attenuation = " << dtos(cfg.synth.fc_attenuation) << "\n";
    os << "group = " << quote(cfg.synth.group) << "\n";
    os << "id_prefix = " << quote(cfg.synth.id_prefix) << "\n";
    os << "out = " << quote(cfg.synth_out) << "\n";

    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + path);
    out << os.str();
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

StageResult stage_validate(const RunConfig& cfg) {
    if (!fs::exists(cfg.dataset)) return {3, "dataset not found: " + cfg.dataset};
    std::vector<ManifestIssue> issues;
    DatasetManifest m;
    try {
        m = load_dataset(cfg.dataset, &issues);
    } catch (const Error& e) {
        return {3, std::string("dataset: ") + e.what()};
    }
    json j;
    j["dataset"] = cfg.dataset;
    j["n_subjects"] = m.subjects.size();
    j["n_channels"] = m.montage.count();
    j["n_frequencies"] = m.grid.count;
    j["issues"] = json::array();
    for (const auto& is : issues)
        j["issues"].push_back({{"subject_id", is.subject_id}, {"message", is.message}});
    write_json_file(j, outp(cfg, "validate.json"));
    if (!issues.empty()) {
        std::ostringstream os;
        os << issues.size() << " issue(s) in " << cfg.dataset << "; first: subject '"
           << issues.front().subject_id << "': " << issues.front().message;
        return {3, os.str()};
    }
    std::ostringstream os;
    os << m.subjects.size() << " subjects valid (" << m.montage.count() << " channels, "
       << m.grid.count << " frequencies)";
    return {0, os.str()};
}

StageResult stage_preprocess(const RunConfig& cfg) {
    DatasetManifest m;
    try {
        m = load_clean(cfg.dataset, "dataset");
    } catch (const Error& e) {
        return {3, e.what()};
    }
    fs::create_directories(outp(cfg, "preprocessed/tensors"));
    DatasetManifest out = m;
    out.notes = "harmonized: average reference + global scale normalization";
    parallel_for(m.subjects.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = m.subjects[i];
        CrossSpectrumTensor t = load_subject_tensor(m, s);
        CrossSpectrumTensor h = harmonize(t);
        std::string rel = "tensors/" + subject_stem(i, s.subject_id) + ".bin";
        save_tensor(h, outp(cfg, "preprocessed/" + rel).string());
        out.subjects[i].tensor_path = rel;
    });
    save_dataset(out, preprocessed_manifest_path(cfg));
    return {0, "harmonized " + std::to_string(m.subjects.size()) + " subjects"};
}

StageResult stage_connectivity(const RunConfig& cfg) {
    DatasetManifest m;
    try {
        m = load_clean(preprocessed_manifest_path(cfg), "preprocessed manifest");
    } catch (const Error& e) {
        return {3, std::string(e.what()) + " (run preprocess first)"};
    }
    fs::create_directories(outp(cfg, "connectivity"));
    parallel_for(m.subjects.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = m.subjects[i];
        CrossSpectrumTensor t = load_subject_tensor(m, s);
        for (BandName b : cfg.bands) {
            WeightedNetwork net = band_coherence(t, BandDefinition::of(b));
            std::string name = subject_stem(i, s.subject_id) + "__" + band_name_str(b) + ".csv";
            save_network_csv(net, outp(cfg, "connectivity/" + name).string());
        }
    });
    json idx;
    idx["bands"] = json::array();
    for (BandName b : cfg.bands) idx["bands"].push_back(band_name_str(b));
    idx["subjects"] = json::array();
    for (std::size_t i = 0; i < m.subjects.size(); ++i)
        idx["subjects"].push_back(
            {{"subject_id", m.subjects[i].subject_id}, {"stem", subject_stem(i, m.subjects[i].subject_id)}});
    write_json_file(idx, outp(cfg, "connectivity/index.json"));
    std::ostringstream os;
    os << m.subjects.size() * cfg.bands.size() << " band networks written";
    return {0, os.str()};
}

StageResult stage_metrics(const RunConfig& cfg) {
    DatasetManifest m;
    try {
        m = load_clean(preprocessed_manifest_path(cfg), "preprocessed manifest");
    } catch (const Error& e) {
        return {3, std::string(e.what()) + " (run preprocess first)"};
    }
    NCTable table(m.subjects.size() * cfg.bands.size());
    std::string missing;
    std::mutex missing_mu;
    parallel_for(m.subjects.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = m.subjects[i];
        for (std::size_t bi = 0; bi < cfg.bands.size(); ++bi) {
            BandName b = cfg.bands[bi];
            fs::path p = outp(cfg, "connectivity/" + subject_stem(i, s.subject_id) + "__" +
                                       band_name_str(b) + ".csv");
            if (!fs::exists(p)) {
                std::lock_guard<std::mutex> lk(missing_mu);
                if (missing.empty()) missing = p.string();
                return;
            }
            WeightedNetwork net = load_network_csv(p.string());
            NCRow& row = table[i * cfg.bands.size() + bi];
            row.subject_id = s.subject_id;
            row.band = b;
            row.age = s.age;
            row.ncs = compute_ncs(net, cfg.tau_fit, cfg.gamma, cfg.seed);
        }
    });
    if (!missing.empty())
        return {3, "connectivity network not found: " + missing + " (run connectivity first)"};
    fs::create_directories(outp(cfg, "metrics"));
    save_nctable_csv(table, outp(cfg, "metrics/nctable.csv").string());
    return {0, std::to_string(table.size()) + " metric rows written"};
}

StageResult stage_fit_norms(const RunConfig& cfg) {
    fs::path table_path = outp(cfg, "metrics/nctable.csv");
    if (!fs::exists(table_path))
        return {3, "metrics table not found: " + table_path.string() + " (run metrics first)"};
    NCTable table = load_nctable_csv(table_path.string());
    if (table.empty()) return {3, "metrics table is empty: " + table_path.string()};
    NormativeCurveSet set = fit_all(table, cfg.gamlss, cfg.jobs);
    fs::create_directories(outp(cfg, "norms"));
    save_curveset(set, outp(cfg, "norms/curves.json").string());
    std::size_t ok = 0, failed = 0, warned = 0;
    for (const auto& [band, cells] : set.cells) {
        for (const auto& [nc, cell] : cells) {
            if (cell.ok) {
                ++ok;
                if (!cell.family.diag.warning.empty()) ++warned;
            } else {
                ++failed;
                std::cerr << "  curve " << band << "/" << nc << " failed: " << cell.error << "\n";
            }
        }
    }
    std::ostringstream os;
    os << ok << " curves fitted, " << failed << " failed, " << warned << " with warnings";
    return {0, os.str()};
}

std::vector<TrainingExample> build_examples(const RunConfig& cfg, BandName band) {
    DatasetManifest m = load_clean(preprocessed_manifest_path(cfg), "preprocessed manifest");
    fs::path table_path = outp(cfg, "metrics/nctable.csv");
    if (!fs::exists(table_path))
        throw Error("metrics table not found: " + table_path.string() + " (run metrics first)");
    NCTable table = load_nctable_csv(table_path.string());
    std::map<std::string, const NCRow*> rows;
    for (const auto& r : table)
        if (r.band == band) rows[r.subject_id] = &r;

    std::vector<TrainingExample> examples(m.subjects.size());
    parallel_for(m.subjects.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = m.subjects[i];
        auto it = rows.find(s.subject_id);
        if (it == rows.end())
            throw Error("no metrics row for subject '" + s.subject_id + "' band " +
                        band_name_str(band) + " (rerun metrics)");
        fs::path p = outp(cfg, "connectivity/" + subject_stem(i, s.subject_id) + "__" +
                                   band_name_str(band) + ".csv");
        if (!fs::exists(p))
            throw Error("connectivity network not found: " + p.string() +
                        " (run connectivity first)");
        WeightedNetwork net = load_network_csv(p.string());
        TrainingExample& ex = examples[i];
        ex.subject_id = s.subject_id;
        ex.input = make_decoder_input(s.age, it->second->ncs);
        std::vector<double> upper = flatten_upper(net);
        ex.target = Eigen::Map<const Eigen::VectorXd>(upper.data(),
                                                      static_cast<Eigen::Index>(upper.size()));
    });
    return examples;
}

StageResult stage_embed(const RunConfig& cfg) {
    std::vector<TrainingExample> examples;
    try {
        examples = build_examples(cfg, cfg.train_band);
    } catch (const Error& e) {
        return {3, e.what()};
    }
    EmbeddingReport rep = select_embedding(examples);
    json j;
    j["band"] = band_name_str(cfg.train_band);
    j["n_examples"] = examples.size();
    j["strong_count"] = rep.strong_count;
    j["threshold_r"] = 0.6;
    j["threshold_p"] = 0.05;
    j["input_names"] = {"age", "cpl", "ge", "cc", "le", "m", "bc", "pc"};
    json rj = json::array(), pj = json::array();
    for (Eigen::Index i = 0; i < rep.r.rows(); ++i) {
        json rrow = json::array(), prow = json::array();
        for (Eigen::Index k = 0; k < rep.r.cols(); ++k) {
            rrow.push_back(rep.r(i, k));
            prow.push_back(rep.p(i, k));
        }
        rj.push_back(std::move(rrow));
        pj.push_back(std::move(prow));
    }
    j["r"] = std::move(rj);
    j["p"] = std::move(pj);
    write_json_file(j, outp(cfg, "embed/embedding.json"));
    std::ostringstream os;
    os << rep.strong_count << " strong input-target associations over " << examples.size()
       << " examples";
    return {0, os.str()};
}

StageResult stage_train(const RunConfig& cfg) {
    std::vector<TrainingExample> examples;
    try {
        examples = build_examples(cfg, cfg.train_band);
    } catch (const Error& e) {
        return {3, e.what()};
    }
    if (examples.size() < static_cast<std::size_t>(cfg.folds))
        return {3, "need at least " + std::to_string(cfg.folds) + " examples for " +
                       std::to_string(cfg.folds) + "-fold cross-validation, have " +
                       std::to_string(examples.size())};

    CVReport cv = kfold_cv(examples, cfg.folds, cfg.training);
    EmbeddingReport rep = select_embedding(examples);
    DecoderModel model = build_model(rep.strong_count, derive_seed(cfg.seed, 0xF1A1u),
                                     static_cast<int>(examples.front().target.size()));
    TrainTrace trace = train(model, examples, cfg.training);
    EvalMetrics ev = evaluate(model, examples);

    fs::create_directories(outp(cfg, "model"));
    save_model(model, outp(cfg, "model/model.bin").string(), outp(cfg, "model/model.json").string());
    save_cv_report_json(cv, outp(cfg, "model/cv_report.json").string());
    save_cv_report_csv(cv, outp(cfg, "model/cv_report.csv").string());
    json fj;
    fj["band"] = band_name_str(cfg.train_band);
    fj["n_examples"] = examples.size();
    fj["strong_count"] = rep.strong_count;
    fj["epochs_run"] = trace.epochs_run;
    fj["best_epoch"] = trace.best_epoch;
    fj["r2"] = ev.r2;
    fj["mae"] = ev.mae;
    fj["rmse"] = ev.rmse;
    write_json_file(fj, outp(cfg, "model/final_eval.json"));

    std::ostringstream os;
    os << cfg.folds << "-fold test R2 " << cv.test_mean.r2 << " (sd " << cv.test_sd.r2
       << "), final train R2 " << ev.r2;
    return {0, os.str()};
}

StageResult stage_generate_norm(const RunConfig& cfg, double age, BandName band) {
    fs::path curves_path = outp(cfg, "norms/curves.json");
    fs::path model_bin = outp(cfg, "model/model.bin");
    fs::path model_json = outp(cfg, "model/model.json");
    if (!fs::exists(curves_path))
        return {3, "curves not found: " + curves_path.string() + " (run fit-norms first)"};
    if (!fs::exists(model_bin) || !fs::exists(model_json))
        return {3, "model not found: " + model_bin.string() + " (run train first)"};

    NormativeCurveSet curves = load_curveset(curves_path.string());
    DecoderModel model = load_model(model_bin.string(), model_json.string());

    std::vector<std::string> labels;
    for (const std::string& mp :
         {preprocessed_manifest_path(cfg), cfg.dataset}) {
        if (!fs::exists(mp)) continue;
        std::ifstream in(mp);
        json j = json::parse(in, nullptr, true);
        labels = j.at("montage").at("names").get<std::vector<std::string>>();
        break;
    }
    if (labels.empty()) return {3, "no manifest found to supply channel labels: " + cfg.dataset};
    if (upper_tri_count(labels.size()) != static_cast<std::size_t>(model.n_outputs()))
        return {3, "model outputs (" + std::to_string(model.n_outputs()) +
                       ") do not match montage size (" + std::to_string(labels.size()) + ")"};

    NCVector median_ncs;
    try {
        median_ncs = normative_mean_ncs(curves, band, age);
    } catch (const Error& e) {
        return {3, std::string("normative curves unusable: ") + e.what()};
    }
    WeightedNetwork net = predict_network(model, age, median_ncs, labels);

    std::string stem = band_name_str(band) + "_age" + dtos(age);
    fs::create_directories(outp(cfg, "norm_networks"));
    std::string csv_name = "net_" + stem + ".csv";
    save_network_csv(net, outp(cfg, "norm_networks/" + csv_name).string());

    json j;
    j["age"] = age;
    j["band"] = band_name_str(band);
    j["network_csv"] = csv_name;
    j["input_ncs"] = ncs_json(median_ncs);
    double nc_count = static_cast<double>(net.size());
    j["mfcs"] = net.weights.sum() / (nc_count * nc_count);
    auto ncs_at = [&](double tau) -> json {
        try {
            return ncs_json(compute_ncs(net, tau, cfg.gamma, cfg.seed));
        } catch (const Error& e) {
            return json{{"error", e.what()}};
        }
    };
    j["ncs_fit_threshold"] = ncs_at(cfg.tau_fit);
    j["ncs_viz_threshold"] = ncs_at(cfg.tau_viz);
    write_json_file(j, outp(cfg, "norm_networks/ncs_" + stem + ".json"));

    std::ostringstream os;
    os << "normative " << band_name_str(band) << " network at age " << dtos(age) << " written";
    return {0, os.str()};
}

StageResult stage_score(const RunConfig& cfg) {
    DatasetManifest m;
    try {
        m = load_clean(cfg.dataset, "dataset");
    } catch (const Error& e) {
        return {3, e.what()};
    }
    fs::path curves_path = outp(cfg, "norms/curves.json");
    fs::path model_bin = outp(cfg, "model/model.bin");
    if (!fs::exists(curves_path))
        return {3, "curves not found: " + curves_path.string() + " (run fit-norms first)"};
    if (!fs::exists(model_bin))
        return {3, "model not found: " + model_bin.string() + " (run train first)"};
    NormativeCurveSet curves = load_curveset(curves_path.string());
    DecoderModel model = load_model(model_bin.string(), outp(cfg, "model/model.json").string());

    ScoringPolicy policy;
    policy.tau = cfg.score_tau;
    policy.gamma = cfg.gamma;
    policy.seed = cfg.seed;

    std::vector<DeviationRecord> records(m.subjects.size());
    parallel_for(m.subjects.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = m.subjects[i];
        CrossSpectrumTensor t = load_subject_tensor(m, s);
        records[i] = score_subject(t, s.subject_id, s.age, cfg.score_band, curves, model, policy);
        records[i].group = cfg.score_group;
    });

    std::string clean;
    for (char c : cfg.score_group)
        clean += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    fs::create_directories(outp(cfg, "deviations"));
    fs::path out = outp(cfg, "deviations/" + clean + ".csv");
    save_deviation_csv(records, out.string());

    double mean_dev = 0.0;
    for (const auto& r : records) mean_dev += r.mfcs_dev;
    if (!records.empty()) mean_dev /= static_cast<double>(records.size());
    std::ostringstream os;
    os << records.size() << " subjects scored (group " << cfg.score_group << ", band "
       << band_name_str(cfg.score_band) << "), mean MFCS deviation " << mean_dev;
    return {0, os.str()};
}

StageResult stage_report(const RunConfig& cfg) {
    fs::path curves_path = outp(cfg, "norms/curves.json");
    if (!fs::exists(curves_path))
        return {3, "curves not found: " + curves_path.string() + " (run fit-norms first)"};
    NormativeCurveSet curves = load_curveset(curves_path.string());

    std::vector<double> ages = report_age_grid(cfg);
    fs::create_directories(outp(cfg, "report"));
    std::size_t tables = 0, skipped = 0;
    for (BandName b : cfg.bands) {
        for (const auto& nc : NCVector::names()) {
            if (!curves.has(b, nc)) continue;
            // A cell can fit cleanly yet have no finite extreme percentile at
            // the grid edges (bounded-support fits); skip it, keep the rest.
            try {
                PercentileTable t = percentile_table(curves, b, nc, ages);
                save_percentile_csv(
                    t,
                    outp(cfg, "report/percentiles_" + band_name_str(b) + "_" + nc + ".csv").string());
                ++tables;
            } catch (const Error& e) {
                ++skipped;
                std::fprintf(stderr, "[skip] percentiles %s/%s: %s\n", band_name_str(b).c_str(),
                             nc.c_str(), e.what());
            }
        }
    }

    std::vector<DeviationRecord> all;
    fs::path devdir = outp(cfg, "deviations");
    if (fs::exists(devdir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(devdir))
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::vector<DeviationRecord> recs = load_deviation_csv(f.string());
            all.insert(all.end(), recs.begin(), recs.end());
        }
    }
    std::ostringstream os;
    os << tables << " percentile tables";
    if (skipped > 0) os << " (" << skipped << " cells skipped)";
    if (!all.empty()) {
        CohortReport rep = cohort_report(all);
        save_cohort_report_json(rep, outp(cfg, "report/cohort_report.json").string());
        os << ", cohort report over " << all.size() << " deviation records ("
           << rep.groups.size() << " groups)";
    } else {
        os << "; no deviation records found, cohort report skipped";
    }
    return {0, os.str()};
}

StageResult stage_synth(const RunConfig& cfg) {
    SynthResult res = generate_cohort(cfg.synth, cfg.synth_out, cfg.jobs);
    std::ostringstream os;
    os << res.manifest.subjects.size() << " synthetic subjects (group " << cfg.synth.group
       << ") written to " << cfg.synth_out;
    return {0, os.str()};
}

int execute_stage(const RunConfig& cfg, const std::string& stage_name,
                  const std::function<StageResult()>& body) {
    fs::create_directories(cfg.out_dir);
    write_effective_config(cfg, outp(cfg, "effective_config.toml").string());

    StageResult r;
    try {
        r = body();
    } catch (const Error& e) {
        r = {4, e.what()};
    } catch (const std::exception& e) {
        r = {4, std::string("unexpected: ") + e.what()};
    }

    fs::path err_path = outp(cfg, "error.json");
    if (r.exit_code == 0) {
        std::error_code ec;
        fs::remove(err_path, ec);
        std::cout << "[ok] " << stage_name << ": " << r.message << "\n";
    } else {
        json j;
        j["stage"] = stage_name;
        j["message"] = r.message;
        j["exit_code"] = r.exit_code;
        write_json_file(j, err_path);
        std::cerr << "[error] " << stage_name << ": " << r.message << "\n";
    }
    return r.exit_code;
}

}  // namespace ganorm
