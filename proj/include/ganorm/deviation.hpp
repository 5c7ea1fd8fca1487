#pragma once

#include <string>
#include <vector>

#include "ganorm/generator.hpp"
#include "ganorm/graphmetrics.hpp"
#include "ganorm/montage.hpp"
#include "ganorm/network.hpp"
#include "ganorm/normcurves.hpp"
#include "ganorm/stats.hpp"
#include "ganorm/tensor.hpp"

namespace ganorm {

enum class DeviationMode { absolute, signed_mean };

/// Mean over all Nc^2 matrix cells of the FC difference; absolute mode takes
/// |difference| per cell, signed mode keeps the sign.
double mfcs_deviation(const WeightedNetwork& subject_fc, const WeightedNetwork& norm_fc,
                      DeviationMode mode = DeviationMode::absolute);

/// Elementwise subject - norm, in canonical NC order.
std::vector<double> nc_deviation(const NCVector& subject_ncs, const NCVector& norm_ncs);

struct DeviationRecord {
    std::string subject_id;
    std::string group;
    double age = 0.0;
    BandName band = BandName::alpha;
    double mfcs_dev = 0.0;         // absolute mode
    double mfcs_dev_signed = 0.0;  // literal signed mean, kept for verbose output
    std::vector<double> nc_dev;    // 7 entries
};

struct ScoringPolicy {
    double tau = 0.4;   // threshold used for NC comparison on both sides
    double gamma = 1.0;
    std::uint64_t seed = 42;
};

/// Harmonize the tensor, take band coherence, compute subject NCs, predict the
/// age-matched normative network from the median curves, and compare. MFCS
/// compares the unthresholded FC matrices; NC deviations compare NCs of the
/// tau-thresholded subject and normative networks.
DeviationRecord score_subject(const CrossSpectrumTensor& tensor, const std::string& subject_id,
                              double age, BandName band, const NormativeCurveSet& curves,
                              const DecoderModel& model, const ScoringPolicy& policy);

struct GroupSummary {
    std::string group;
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double median = 0.0;
    double mean_signed = 0.0;
    KdeTable kde;
};

struct GroupComparison {
    std::string group_a, group_b;
    RankSumResult test;
};

struct CohortReport {
    std::vector<GroupSummary> groups;        // deterministic group order
    std::vector<GroupComparison> pairwise;   // all group pairs
    std::vector<std::string> warnings;       // e.g. empty groups excluded
};

CohortReport cohort_report(const std::vector<DeviationRecord>& records);

/// Columns: subject_id,group,age,band,mfcs_dev,dcpl,dge,dcc,dle,dm,dbc,dpc
void save_deviation_csv(const std::vector<DeviationRecord>& records, const std::string& path);
std::vector<DeviationRecord> load_deviation_csv(const std::string& path);

void save_cohort_report_json(const CohortReport& report, const std::string& path);

}  // namespace ganorm
