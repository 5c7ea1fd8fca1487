#pragma once

#include <string>
#include <vector>

namespace ganorm {

/// Ordered electrode labels; nodes of every derived network.
struct ChannelMontage {
    std::vector<std::string> names;

    std::size_t count() const { return names.size(); }
    void validate() const;

    /// The 19-channel 10/20 montage, in standard order Fp1..Pz.
    static ChannelMontage standard_10_20();
};

/// Uniform frequency grid: freqs[k] = start_hz + k*step_hz.
struct FrequencyGrid {
    double start_hz = 0.0;
    double step_hz = 0.0;
    std::size_t count = 0;

    double freq(std::size_t k) const { return start_hz + static_cast<double>(k) * step_hz; }
    std::vector<double> freqs() const;
    void validate() const;

    /// 1.17 Hz start, 0.39 Hz step, 47 points (through ~19.11 Hz).
    static FrequencyGrid standard();
};

enum class BandName { delta, theta, alpha, beta };

std::string band_name_str(BandName b);
BandName band_name_from_str(const std::string& s);

/// Inclusive band bounds in Hz. A grid point at frequency f belongs to the band
/// when lo - step/2 <= f <= hi + step/2, so bounds need not land on grid points.
struct BandDefinition {
    BandName name = BandName::alpha;
    double lo_hz = 0.0;
    double hi_hz = 0.0;

    bool contains(double freq_hz, double step_hz) const {
        return freq_hz >= lo_hz - step_hz / 2.0 && freq_hz <= hi_hz + step_hz / 2.0;
    }

    /// Grid indices falling inside the band (rounding rule above).
    std::vector<std::size_t> grid_indices(const FrequencyGrid& grid) const;

    static BandDefinition of(BandName name);
    static std::vector<BandDefinition> standard_four();
};

}  // namespace ganorm
