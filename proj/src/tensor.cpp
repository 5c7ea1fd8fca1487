#include "ganorm/tensor.hpp"

#include <Eigen/Eigenvalues>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ganorm/common.hpp"

namespace ganorm {

namespace {

constexpr char kMagic[9] = "GANORMCS";
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kHeaderBytes = 64;
constexpr double kHermitianRelTol = 1e-8;
constexpr double kPsdEigTol = 1e-8;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw Error("tensor write failed");
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw Error("tensor read failed or file truncated");
}

}  // namespace

void CrossSpectrumTensor::check_dims() const {
    montage.validate();
    grid.validate();
    const auto nc = static_cast<Eigen::Index>(channels());
    if (data.size() != grid.count)
        throw Error("tensor has " + std::to_string(data.size()) + " matrices, grid declares " +
                    std::to_string(grid.count));
    for (std::size_t k = 0; k < data.size(); ++k)
        if (data[k].rows() != nc || data[k].cols() != nc)
            throw Error("matrix at frequency index " + std::to_string(k) +
                        " is not Nc x Nc for Nc=" + std::to_string(channels()));
}

std::vector<TensorViolation> validate_tensor(const CrossSpectrumTensor& t) {
    t.check_dims();
    std::vector<TensorViolation> out;
    for (std::size_t k = 0; k < t.data.size(); ++k) {
        const ComplexMatrix& s = t.data[k];
        const double snorm = s.norm();
        const double herm_err = (s - s.adjoint()).norm();
        if (herm_err > kHermitianRelTol * std::max(snorm, 1e-300)) {
            out.push_back({k, "non-hermitian",
                           "||S - S^H|| / ||S|| = " + dtos(herm_err / std::max(snorm, 1e-300))});
            continue;  // eigen checks assume a self-adjoint matrix
        }
        double trace = 0.0;
        bool diag_bad = false;
        for (Eigen::Index i = 0; i < s.rows(); ++i) trace += s(i, i).real();
        const double diag_tol = kPsdEigTol * (std::abs(trace) + 1.0);
        for (Eigen::Index i = 0; i < s.rows() && !diag_bad; ++i) {
            const std::complex<double> d = s(i, i);
            if (std::abs(d.imag()) > diag_tol) {
                out.push_back({k, "non-real diagonal",
                               "Im(S[" + std::to_string(i) + "," + std::to_string(i) + "]) = " +
                                   dtos(d.imag())});
                diag_bad = true;
            } else if (d.real() < -diag_tol) {
                out.push_back({k, "negative diagonal power",
                               "S[" + std::to_string(i) + "," + std::to_string(i) + "] = " +
                                   dtos(d.real())});
                diag_bad = true;
            }
        }
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(s, Eigen::EigenvaluesOnly);
        const double min_eig = eig.eigenvalues().minCoeff();
        if (min_eig < -kPsdEigTol * std::max(trace, 0.0) - 1e-300)
            out.push_back({k, "not positive semidefinite", "min eigenvalue = " + dtos(min_eig)});
    }
    return out;
}

CrossSpectrumTensor band_slice(const CrossSpectrumTensor& t, const BandDefinition& band) {
    t.check_dims();
    const auto idx = band.grid_indices(t.grid);
    if (idx.empty())
        throw Error("band " + band_name_str(band.name) + " [" + dtos(band.lo_hz) + ", " +
                    dtos(band.hi_hz) + "] Hz contains no grid point");
    CrossSpectrumTensor out;
    out.montage = t.montage;
    out.grid.start_hz = t.grid.freq(idx.front());
    out.grid.step_hz = t.grid.step_hz;
    out.grid.count = idx.size();
    out.data.reserve(idx.size());
    for (std::size_t k : idx) out.data.push_back(t.data[k]);
    return out;
}

void save_tensor(const CrossSpectrumTensor& t, const std::string& path) {
    t.check_dims();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open tensor file for writing: " + path);

    char header[kHeaderBytes];
    std::memset(header, 0, sizeof(header));
    std::memcpy(header, kMagic, 8);
    const std::uint32_t version = kFormatVersion;
    const std::uint32_t nc = static_cast<std::uint32_t>(t.channels());
    const std::uint32_t nf = static_cast<std::uint32_t>(t.frequencies());
    std::memcpy(header + 8, &version, 4);
    std::memcpy(header + 12, &nc, 4);
    std::memcpy(header + 16, &nf, 4);
    std::memcpy(header + 20, &t.grid.start_hz, 8);
    std::memcpy(header + 28, &t.grid.step_hz, 8);
    write_bytes(out, header, kHeaderBytes);

    std::vector<double> row;
    row.resize(2 * t.channels());
    for (const auto& m : t.data) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                row[2 * static_cast<std::size_t>(j)] = m(i, j).real();
                row[2 * static_cast<std::size_t>(j) + 1] = m(i, j).imag();
            }
            write_bytes(out, row.data(), row.size() * sizeof(double));
        }
    }
}

CrossSpectrumTensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open tensor file: " + path);

    char header[kHeaderBytes];
    read_bytes(in, header, kHeaderBytes);
    if (std::memcmp(header, kMagic, 8) != 0) throw Error("bad tensor magic in " + path);
    std::uint32_t version = 0, nc = 0, nf = 0;
    std::memcpy(&version, header + 8, 4);
    std::memcpy(&nc, header + 12, 4);
    std::memcpy(&nf, header + 16, 4);
    if (version != kFormatVersion)
        throw Error("unsupported tensor format version " + std::to_string(version) + " in " + path);
    if (nc == 0 || nf == 0) throw Error("degenerate tensor dimensions in " + path);

    CrossSpectrumTensor t;
    t.montage.names.resize(nc);
    for (std::uint32_t i = 0; i < nc; ++i) t.montage.names[i] = "ch" + std::to_string(i);
    std::memcpy(&t.grid.start_hz, header + 20, 8);
    std::memcpy(&t.grid.step_hz, header + 28, 8);
    t.grid.count = nf;

    t.data.resize(nf);
    std::vector<double> row(2 * static_cast<std::size_t>(nc));
    for (std::uint32_t k = 0; k < nf; ++k) {
        ComplexMatrix m(nc, nc);
        for (std::uint32_t i = 0; i < nc; ++i) {
            read_bytes(in, row.data(), row.size() * sizeof(double));
            for (std::uint32_t j = 0; j < nc; ++j)
                m(i, j) = {row[2 * j], row[2 * j + 1]};
        }
        t.data[k] = std::move(m);
    }
    return t;
}

CrossSpectrumTensor import_tensor_csv(const std::string& path, const ChannelMontage& montage,
                                      const FrequencyGrid& grid) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open CSV tensor file: " + path);
    const std::size_t nc = montage.count();
    const std::size_t ncols = 2 * nc * nc;

    CrossSpectrumTensor t;
    t.montage = montage;
    t.grid = grid;

    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        vals.reserve(ncols);
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != ncols)
            throw Error("CSV row " + std::to_string(row_no) + " has " +
                        std::to_string(vals.size()) + " columns, expected " +
                        std::to_string(ncols));
        ComplexMatrix m(nc, nc);
        for (std::size_t i = 0; i < nc; ++i)
            for (std::size_t j = 0; j < nc; ++j) {
                const std::size_t base = 2 * (i * nc + j);
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = {vals[base],
                                                                                 vals[base + 1]};
            }
        t.data.push_back(std::move(m));
        ++row_no;
    }
    if (t.data.size() != grid.count)
        throw Error("CSV has " + std::to_string(t.data.size()) + " frequency rows, grid declares " +
                    std::to_string(grid.count));
    return t;
}

}  // namespace ganorm
