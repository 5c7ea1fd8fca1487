#include "ganorm/network.hpp"

#include <fstream>
#include <sstream>

#include "ganorm/common.hpp"

namespace ganorm {

void WeightedNetwork::check() const {
    const auto n = weights.rows();
    if (weights.cols() != n) throw Error("network weight matrix is not square");
    if (!node_labels.empty() && node_labels.size() != static_cast<std::size_t>(n))
        throw Error("network label count disagrees with matrix size");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (weights(i, i) != 0.0) throw Error("network diagonal must be zero");
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double w = weights(i, j);
            if (w != weights(j, i)) throw Error("network weights must be symmetric");
            if (!(w >= 0.0 && w <= 1.0)) throw Error("network weight outside [0,1]: " + dtos(w));
        }
    }
}

std::size_t upper_tri_index(std::size_t i, std::size_t j, std::size_t n) {
    if (i >= j || j >= n) throw Error("upper_tri_index requires i < j < n");
    return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

std::pair<std::size_t, std::size_t> upper_tri_pair(std::size_t k, std::size_t n) {
    std::size_t i = 0;
    std::size_t row_len = n - 1;
    while (k >= row_len) {
        k -= row_len;
        ++i;
        --row_len;
        if (row_len == 0) throw Error("upper_tri_pair index out of range");
    }
    return {i, i + 1 + k};
}

std::vector<double> flatten_upper(const WeightedNetwork& net) {
    const std::size_t n = net.size();
    std::vector<double> out(upper_tri_count(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            out[upper_tri_index(i, j, n)] =
                net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return out;
}

WeightedNetwork unflatten_upper(const std::vector<double>& upper,
                                const std::vector<std::string>& labels) {
    const std::size_t n = labels.size();
    if (upper.size() != upper_tri_count(n))
        throw Error("upper triangle has " + std::to_string(upper.size()) + " entries, expected " +
                    std::to_string(upper_tri_count(n)));
    WeightedNetwork net;
    net.node_labels = labels;
    net.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < upper.size(); ++k) {
        const auto [i, j] = upper_tri_pair(k, n);
        net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = upper[k];
        net.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = upper[k];
    }
    return net;
}

void save_network_csv(const WeightedNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write network CSV: " + path);
    const std::size_t n = net.size();
    for (std::size_t j = 0; j < n; ++j) {
        if (j) out << ",";
        out << (j < net.node_labels.size() ? net.node_labels[j] : "n" + std::to_string(j));
    }
    out << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) out << ",";
            out << dtos(net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << "\n";
    }
}

WeightedNetwork load_network_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open network CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty network CSV: " + path);
    WeightedNetwork net;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) net.node_labels.push_back(cell);
    }
    const std::size_t n = net.node_labels.size();
    net.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw Error("truncated network CSV: " + path);
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::getline(ss, cell, ',')) throw Error("short row in network CSV: " + path);
            net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::stod(cell);
        }
    }
    return net;
}

}  // namespace ganorm
