#pragma once

#include "ganorm/network.hpp"
#include "ganorm/tensor.hpp"

namespace ganorm {

/// H = I - 11^T / Nc. Symmetric idempotent projection removing the channel mean.
struct AvgRefOperator {
    Eigen::MatrixXd H;

    static AvgRefOperator of_size(std::size_t nc);
};

/// S~(w) = H S(w) H^T for every frequency. Output rows/columns sum to ~0;
/// Hermitianity and positive semidefiniteness are preserved.
CrossSpectrumTensor average_reference(const CrossSpectrumTensor& t);

struct GlobalScaleFactor {
    double value = 1.0;
};

/// Geometric mean of diagonal power over channels and retained frequencies.
/// Scale-equivariant: estimate_gsf(c*S) = c*estimate_gsf(S). Any positive
/// scalar estimate leaves coherence untouched, so the estimator is swappable.
GlobalScaleFactor estimate_gsf(const CrossSpectrumTensor& t);

CrossSpectrumTensor apply_gsf(const CrossSpectrumTensor& t, const GlobalScaleFactor& g);

/// Average reference, then global scale correction.
CrossSpectrumTensor harmonize(const CrossSpectrumTensor& t);

/// Coh_xy = |S_xy|^2 / (S_xx S_yy) at one grid frequency. Diagonal is stored
/// as 0 so graph metrics see no self-loops.
WeightedNetwork coherence(const CrossSpectrumTensor& t, std::size_t freq_index);

/// Arithmetic mean of per-frequency coherence matrices over the band's points.
WeightedNetwork band_coherence(const CrossSpectrumTensor& t, const BandDefinition& band);

}  // namespace ganorm
