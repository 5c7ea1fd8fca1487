#include "ganorm/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "ganorm/common.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ganorm {

std::string sex_str(Sex s) {
    switch (s) {
        case Sex::male: return "M";
        case Sex::female: return "F";
        case Sex::unknown: return "unknown";
    }
    throw Error("unknown sex enum");
}

Sex sex_from_str(const std::string& s) {
    if (s == "M") return Sex::male;
    if (s == "F") return Sex::female;
    if (s == "unknown" || s.empty()) return Sex::unknown;
    throw Error("unknown sex value: " + s);
}

void SubjectRecord::validate() const {
    if (subject_id.empty()) throw Error("subject with empty subject_id");
    if (!(age > 0.0) || !(age < 130.0))
        throw Error("subject " + subject_id + ": age " + dtos(age) + " outside (0, 130)");
    if (tensor_path.empty()) throw Error("subject " + subject_id + ": missing tensor path");
}

std::string DatasetManifest::tensor_file(const SubjectRecord& s) const {
    if (base_dir.empty()) return s.tensor_path;
    return (fs::path(base_dir) / s.tensor_path).string();
}

DatasetManifest load_dataset(const std::string& manifest_path, std::vector<ManifestIssue>* issues) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open manifest: " + manifest_path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error("manifest parse error in " + manifest_path + ": " + e.what());
    }

    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw Error("unsupported manifest schema version " + std::to_string(m.version));
    m.montage.names = j.at("montage").at("names").get<std::vector<std::string>>();
    m.grid.start_hz = j.at("grid").at("start_hz").get<double>();
    m.grid.step_hz = j.at("grid").at("step_hz").get<double>();
    m.grid.count = j.at("grid").at("count").get<std::size_t>();
    m.notes = j.value("notes", std::string{});
    m.base_dir = fs::path(manifest_path).parent_path().string();
    m.montage.validate();
    m.grid.validate();

    std::set<std::string> ids;
    for (const auto& js : j.at("subjects")) {
        SubjectRecord s;
        s.subject_id = js.at("subject_id").get<std::string>();
        s.age = js.at("age").get<double>();
        s.site = js.value("site", std::string{});
        s.sex = sex_from_str(js.value("sex", std::string{"unknown"}));
        s.tensor_path = js.at("tensor").get<std::string>();
        s.validate();
        if (!ids.insert(s.subject_id).second)
            throw Error("duplicate subject_id in manifest: " + s.subject_id);
        m.subjects.push_back(std::move(s));
    }

    // Eager per-subject validation: existence, dims, tensor invariants.
    auto report = [&](const std::string& id, const std::string& msg) {
        if (issues)
            issues->push_back({id, msg});
        else
            throw Error("subject " + id + ": " + msg);
    };
    for (const auto& s : m.subjects) {
        const std::string path = m.tensor_file(s);
        if (!fs::exists(path)) {
            report(s.subject_id, "missing tensor file " + s.tensor_path);
            continue;
        }
        try {
            CrossSpectrumTensor t = load_tensor(path);
            if (t.channels() != m.montage.count() || t.frequencies() != m.grid.count) {
                report(s.subject_id, "tensor dims (" + std::to_string(t.channels()) + " x " +
                                         std::to_string(t.frequencies()) +
                                         ") disagree with manifest montage/grid");
                continue;
            }
            t.montage = m.montage;
            for (const auto& v : validate_tensor(t))
                report(s.subject_id,
                       v.property + " at frequency index " + std::to_string(v.freq_index) +
                           " (" + v.detail + ")");
        } catch (const Error& e) {
            report(s.subject_id, e.what());
        }
    }
    return m;
}

void save_dataset(const DatasetManifest& m, const std::string& manifest_path) {
    json j;
    j["version"] = m.version;
    j["montage"] = {{"names", m.montage.names}};
    j["grid"] = {{"start_hz", m.grid.start_hz}, {"step_hz", m.grid.step_hz}, {"count", m.grid.count}};
    if (!m.notes.empty()) j["notes"] = m.notes;
    j["subjects"] = json::array();
    for (const auto& s : m.subjects) {
        json js = {{"subject_id", s.subject_id},
                   {"age", s.age},
                   {"site", s.site},
                   {"sex", sex_str(s.sex)},
                   {"tensor", s.tensor_path}};
        j["subjects"].push_back(std::move(js));
    }
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error("cannot write manifest: " + manifest_path);
    out << j.dump(2) << "\n";
}

CrossSpectrumTensor load_subject_tensor(const DatasetManifest& m, const SubjectRecord& s) {
    CrossSpectrumTensor t = load_tensor(m.tensor_file(s));
    if (t.channels() != m.montage.count() || t.frequencies() != m.grid.count)
        throw Error("subject " + s.subject_id + ": tensor dims disagree with manifest");
    t.montage = m.montage;
    t.grid = m.grid;
    return t;
}

}  // namespace ganorm
