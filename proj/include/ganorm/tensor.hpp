#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "ganorm/montage.hpp"

namespace ganorm {

using ComplexMatrix = Eigen::MatrixXcd;

/// One violated tensor invariant; violations are data, not failures.
struct TensorViolation {
    std::size_t freq_index = 0;
    std::string property;
    std::string detail;
};

/// Per-subject cross-spectral tensor: one Hermitian PSD Nc x Nc matrix per
/// grid frequency.
struct CrossSpectrumTensor {
    ChannelMontage montage;
    FrequencyGrid grid;
    std::vector<ComplexMatrix> data;  // grid.count matrices, each Nc x Nc

    std::size_t channels() const { return montage.count(); }
    std::size_t frequencies() const { return grid.count; }

    /// Throws if matrix count/shape disagrees with montage/grid.
    void check_dims() const;
};

/// Hermitian within 1e-8 relative Frobenius, real nonnegative diagonal,
/// smallest eigenvalue >= -1e-8 * trace. Empty result means all hold.
std::vector<TensorViolation> validate_tensor(const CrossSpectrumTensor& t);

/// Restrict to the grid points inside the band. Errors when no point falls in.
CrossSpectrumTensor band_slice(const CrossSpectrumTensor& t, const BandDefinition& band);

// Binary container: 64-byte header (magic "GANORMCS", version u32, Nc u32,
// Nf u32, start f64, step f64, zero padding) followed by Nf row-major Nc x Nc
// matrices of interleaved (re, im) binary64, little-endian.
void save_tensor(const CrossSpectrumTensor& t, const std::string& path);
CrossSpectrumTensor load_tensor(const std::string& path);

/// CSV import shim: one row per frequency, 2*Nc^2 columns of interleaved
/// re/im values for the row-major matrix.
CrossSpectrumTensor import_tensor_csv(const std::string& path, const ChannelMontage& montage,
                                      const FrequencyGrid& grid);

}  // namespace ganorm
