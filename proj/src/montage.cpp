#include "ganorm/montage.hpp"

#include <set>

#include "ganorm/common.hpp"

namespace ganorm {

void ChannelMontage::validate() const {
    if (names.empty()) throw Error("montage has no channels");
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw Error("montage contains an empty channel label");
        if (!seen.insert(n).second) throw Error("duplicate channel label: " + n);
    }
}

ChannelMontage ChannelMontage::standard_10_20() {
    return ChannelMontage{{"Fp1", "Fp2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2",
                           "F7", "F8", "T3", "T4", "T5", "T6", "Fz", "Cz", "Pz"}};
}

std::vector<double> FrequencyGrid::freqs() const {
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = freq(k);
    return out;
}

void FrequencyGrid::validate() const {
    if (count == 0) throw Error("frequency grid is empty");
    if (!(start_hz > 0.0)) throw Error("frequency grid start must be positive");
    if (!(step_hz > 0.0)) throw Error("frequency grid step must be positive");
}

FrequencyGrid FrequencyGrid::standard() { return FrequencyGrid{1.17, 0.39, 47}; }

std::string band_name_str(BandName b) {
    switch (b) {
        case BandName::delta: return "delta";
        case BandName::theta: return "theta";
        case BandName::alpha: return "alpha";
        case BandName::beta: return "beta";
    }
    throw Error("unknown band");
}

BandName band_name_from_str(const std::string& s) {
    if (s == "delta") return BandName::delta;
    if (s == "theta") return BandName::theta;
    if (s == "alpha") return BandName::alpha;
    if (s == "beta") return BandName::beta;
    throw Error("unknown band name: " + s);
}

std::vector<std::size_t> BandDefinition::grid_indices(const FrequencyGrid& grid) const {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < grid.count; ++k)
        if (contains(grid.freq(k), grid.step_hz)) idx.push_back(k);
    return idx;
}

BandDefinition BandDefinition::of(BandName name) {
    switch (name) {
        case BandName::delta: return {BandName::delta, 1.17, 3.12};
        case BandName::theta: return {BandName::theta, 3.51, 7.81};
        case BandName::alpha: return {BandName::alpha, 8.20, 12.1};
        case BandName::beta: return {BandName::beta, 12.5, 19.14};
    }
    throw Error("unknown band");
}

std::vector<BandDefinition> BandDefinition::standard_four() {
    return {of(BandName::delta), of(BandName::theta), of(BandName::alpha), of(BandName::beta)};
}

}  // namespace ganorm
