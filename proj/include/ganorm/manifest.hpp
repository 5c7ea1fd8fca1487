#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ganorm/montage.hpp"
#include "ganorm/tensor.hpp"

namespace ganorm {

enum class Sex { male, female, unknown };

std::string sex_str(Sex s);
Sex sex_from_str(const std::string& s);

struct SubjectRecord {
    std::string subject_id;
    double age = 0.0;  // years
    std::string site;
    Sex sex = Sex::unknown;
    std::string tensor_path;  // relative to the manifest file

    void validate() const;
};

/// A dataset: montage + grid + subject roster. Immutable once loaded; tensors
/// are loaded on demand via load_subject_tensor.
struct DatasetManifest {
    int version = 1;
    ChannelMontage montage;
    FrequencyGrid grid;
    std::vector<SubjectRecord> subjects;
    std::string notes;
    std::string base_dir;  // directory of the manifest file, set on load

    std::string tensor_file(const SubjectRecord& s) const;
};

struct ManifestIssue {
    std::string subject_id;
    std::string message;
};

/// Parse and eagerly validate a manifest. Structural errors (unreadable file,
/// unknown schema, duplicate ids) throw; per-subject data findings are
/// returned through `issues` when non-null, otherwise the first finding throws.
DatasetManifest load_dataset(const std::string& manifest_path,
                             std::vector<ManifestIssue>* issues = nullptr);

void save_dataset(const DatasetManifest& m, const std::string& manifest_path);

CrossSpectrumTensor load_subject_tensor(const DatasetManifest& m, const SubjectRecord& s);

}  // namespace ganorm
