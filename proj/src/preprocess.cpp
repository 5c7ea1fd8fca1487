#include "ganorm/preprocess.hpp"

#include <cmath>

#include "ganorm/common.hpp"

namespace ganorm {

namespace {
// Floor for diagonal power after average referencing; a channel identical to
// the channel mean would hit zero and poison every coherence it enters.
constexpr double kDiagFloor = 1e-15;
}  // namespace

AvgRefOperator AvgRefOperator::of_size(std::size_t nc) {
    const auto n = static_cast<Eigen::Index>(nc);
    AvgRefOperator op;
    op.H = Eigen::MatrixXd::Identity(n, n).array() - 1.0 / static_cast<double>(nc);
    return op;
}

CrossSpectrumTensor average_reference(const CrossSpectrumTensor& t) {
    t.check_dims();
    const AvgRefOperator op = AvgRefOperator::of_size(t.channels());
    CrossSpectrumTensor out = t;
    for (auto& m : out.data) {
        ComplexMatrix hm = op.H * m * op.H;  // H symmetric, so H^T = H
        // Re-symmetrize to keep the Hermitian invariant bit-tight.
        m = 0.5 * (hm + hm.adjoint().eval());
    }
    return out;
}

GlobalScaleFactor estimate_gsf(const CrossSpectrumTensor& t) {
    t.check_dims();
    double log_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < t.data.size(); ++k) {
        const auto& m = t.data[k];
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double p = m(i, i).real();
            if (!(p > 0.0) || !std::isfinite(p))
                throw Error("non-positive diagonal power at frequency index " + std::to_string(k) +
                            ", channel " + std::to_string(i) + ": " + dtos(p));
            log_sum += std::log(p);
            ++count;
        }
    }
    GlobalScaleFactor g;
    g.value = std::exp(log_sum / static_cast<double>(count));
    if (!(g.value > 0.0) || !std::isfinite(g.value)) throw Error("global scale factor is not a positive finite number");
    return g;
}

CrossSpectrumTensor apply_gsf(const CrossSpectrumTensor& t, const GlobalScaleFactor& g) {
    if (!(g.value > 0.0)) throw Error("global scale factor must be positive");
    CrossSpectrumTensor out = t;
    for (auto& m : out.data) m /= g.value;
    return out;
}

CrossSpectrumTensor harmonize(const CrossSpectrumTensor& t) {
    CrossSpectrumTensor referenced = average_reference(t);
    for (std::size_t k = 0; k < referenced.data.size(); ++k)
        for (Eigen::Index i = 0; i < referenced.data[k].rows(); ++i)
            if (referenced.data[k](i, i).real() < kDiagFloor)
                throw Error("diagonal power below floor after average reference (frequency index " +
                            std::to_string(k) + ", channel " + std::to_string(i) + ")");
    return apply_gsf(referenced, estimate_gsf(referenced));
}

WeightedNetwork coherence(const CrossSpectrumTensor& t, std::size_t freq_index) {
    t.check_dims();
    if (freq_index >= t.frequencies()) throw Error("frequency index out of range");
    const ComplexMatrix& s = t.data[freq_index];
    const auto n = s.rows();

    WeightedNetwork net;
    net.node_labels = t.montage.names;
    net.weights = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pii = s(i, i).real();
        if (!(pii > 0.0))
            throw Error("zero diagonal power at frequency index " + std::to_string(freq_index) +
                        ", channel " + std::to_string(i));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double num = std::norm(s(i, j));
            double c = num / (s(i, i).real() * s(j, j).real());
            if (c < 0.0) c = 0.0;
            if (c > 1.0) c = 1.0;  // PSD guarantees <= 1 up to rounding
            net.weights(i, j) = c;
            net.weights(j, i) = c;
        }
    }
    return net;
}

WeightedNetwork band_coherence(const CrossSpectrumTensor& t, const BandDefinition& band) {
    t.check_dims();
    const auto idx = band.grid_indices(t.grid);
    if (idx.empty())
        throw Error("band " + band_name_str(band.name) + " contains no grid point");
    WeightedNetwork acc = coherence(t, idx[0]);
    for (std::size_t q = 1; q < idx.size(); ++q) acc.weights += coherence(t, idx[q]).weights;
    acc.weights /= static_cast<double>(idx.size());
    return acc;
}

}  // namespace ganorm
