#include "ganorm/deviation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ganorm/common.hpp"
#include "ganorm/preprocess.hpp"
#include "json.hpp"

using nlohmann::json;

namespace ganorm {

double mfcs_deviation(const WeightedNetwork& subject_fc, const WeightedNetwork& norm_fc,
                      DeviationMode mode) {
    if (subject_fc.weights.rows() != norm_fc.weights.rows())
        throw Error("mfcs_deviation: dimension mismatch (" +
                    std::to_string(subject_fc.weights.rows()) + " vs " +
                    std::to_string(norm_fc.weights.rows()) + " nodes)");
    const Eigen::MatrixXd diff = subject_fc.weights - norm_fc.weights;
    const double denom = static_cast<double>(diff.size());
    if (mode == DeviationMode::absolute) return diff.cwiseAbs().sum() / denom;
    return diff.sum() / denom;
}

std::vector<double> nc_deviation(const NCVector& subject_ncs, const NCVector& norm_ncs) {
    const std::vector<double> s = subject_ncs.values();
    const std::vector<double> n = norm_ncs.values();
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] - n[i];
    return out;
}

DeviationRecord score_subject(const CrossSpectrumTensor& tensor, const std::string& subject_id,
                              double age, BandName band, const NormativeCurveSet& curves,
                              const DecoderModel& model, const ScoringPolicy& policy) {
    const CrossSpectrumTensor clean = harmonize(tensor);
    const WeightedNetwork subject_fc = band_coherence(clean, BandDefinition::of(band));
    const NCVector subject_ncs = compute_ncs(subject_fc, policy.tau, policy.gamma, policy.seed);

    const NCVector median_ncs = normative_mean_ncs(curves, band, age);
    const WeightedNetwork norm_fc =
        predict_network(model, age, median_ncs, tensor.montage.names);
    const NCVector norm_ncs = compute_ncs(norm_fc, policy.tau, policy.gamma, policy.seed);

    DeviationRecord rec;
    rec.subject_id = subject_id;
    rec.age = age;
    rec.band = band;
    rec.mfcs_dev = mfcs_deviation(subject_fc, norm_fc, DeviationMode::absolute);
    rec.mfcs_dev_signed = mfcs_deviation(subject_fc, norm_fc, DeviationMode::signed_mean);
    rec.nc_dev = nc_deviation(subject_ncs, norm_ncs);
    return rec;
}

CohortReport cohort_report(const std::vector<DeviationRecord>& records) {
    CohortReport report;
    // Group labels in first-appearance order.
    std::vector<std::string> labels;
    for (const auto& r : records)
        if (std::find(labels.begin(), labels.end(), r.group) == labels.end())
            labels.push_back(r.group);

    for (const auto& label : labels) {
        std::vector<double> devs, signed_devs;
        for (const auto& r : records)
            if (r.group == label) {
                devs.push_back(r.mfcs_dev);
                signed_devs.push_back(r.mfcs_dev_signed);
            }
        if (devs.empty()) {
            report.warnings.push_back("group '" + label + "' has no records; excluded");
            continue;
        }
        GroupSummary g;
        g.group = label;
        g.n = devs.size();
        g.mean = mean_of(devs);
        g.sd = sd_of(devs);
        g.median = median_of(devs);
        g.mean_signed = mean_of(signed_devs);
        g.kde = kde(devs);
        report.groups.push_back(std::move(g));
    }

    for (std::size_t a = 0; a < report.groups.size(); ++a) {
        for (std::size_t b = a + 1; b < report.groups.size(); ++b) {
            std::vector<double> xa, xb;
            for (const auto& r : records) {
                if (r.group == report.groups[a].group) xa.push_back(r.mfcs_dev);
                if (r.group == report.groups[b].group) xb.push_back(r.mfcs_dev);
            }
            GroupComparison cmp;
            cmp.group_a = report.groups[a].group;
            cmp.group_b = report.groups[b].group;
            cmp.test = rank_sum_test(xa, xb);
            report.pairwise.push_back(std::move(cmp));
        }
    }
    return report;
}

void save_deviation_csv(const std::vector<DeviationRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "subject_id,group,age,band,mfcs_dev,dcpl,dge,dcc,dle,dm,dbc,dpc\n";
    for (const auto& r : records) {
        if (r.subject_id.find(',') != std::string::npos ||
            r.group.find(',') != std::string::npos)
            throw Error("subject id or group contains a comma: " + r.subject_id);
        if (r.nc_dev.size() != 7) throw Error("deviation record must carry 7 NC deviations");
        out << r.subject_id << ',' << r.group << ',' << dtos(r.age) << ','
            << band_name_str(r.band) << ',' << dtos(r.mfcs_dev);
        for (double v : r.nc_dev) out << ',' << dtos(v);
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

std::vector<DeviationRecord> load_deviation_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty deviation table: " + path);
    if (line != "subject_id,group,age,band,mfcs_dev,dcpl,dge,dcc,dle,dm,dbc,dpc")
        throw Error("unexpected header in " + path + ": " + line);
    std::vector<DeviationRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12)
            throw Error(path + ":" + std::to_string(lineno) + ": expected 12 columns, got " +
                        std::to_string(cells.size()));
        DeviationRecord r;
        r.subject_id = cells[0];
        r.group = cells[1];
        r.age = std::stod(cells[2]);
        r.band = band_name_from_str(cells[3]);
        r.mfcs_dev = std::stod(cells[4]);
        for (std::size_t k = 0; k < 7; ++k) r.nc_dev.push_back(std::stod(cells[5 + k]));
        records.push_back(std::move(r));
    }
    return records;
}

void save_cohort_report_json(const CohortReport& report, const std::string& path) {
    json j;
    j["schema_version"] = 1;
    j["note"] = "mfcs compares unthresholded predicted FC; nc deviations use the "
                "thresholded networks recorded in the run config";
    j["groups"] = json::array();
    for (const auto& g : report.groups) {
        json gj;
        gj["group"] = g.group;
        gj["n"] = g.n;
        gj["mean_mfcs_dev"] = g.mean;
        gj["sd_mfcs_dev"] = g.sd;
        gj["median_mfcs_dev"] = g.median;
        gj["mean_mfcs_dev_signed"] = g.mean_signed;
        gj["kde"] = {{"bandwidth", g.kde.bandwidth}, {"grid", g.kde.grid},
                     {"density", g.kde.density}};
        j["groups"].push_back(std::move(gj));
    }
    j["pairwise"] = json::array();
    for (const auto& c : report.pairwise)
        j["pairwise"].push_back({{"group_a", c.group_a},
                                 {"group_b", c.group_b},
                                 {"rank_sum", c.test.rank_sum},
                                 {"u", c.test.u},
                                 {"z", c.test.z},
                                 {"p", c.test.p}});
    j["warnings"] = report.warnings;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

}  // namespace ganorm
