#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ganorm {

/// Symmetric nonnegative FC adjacency with zero diagonal, entries in [0,1].
struct WeightedNetwork {
    Eigen::MatrixXd weights;
    std::vector<std::string> node_labels;

    std::size_t size() const { return static_cast<std::size_t>(weights.rows()); }
    void check() const;  // throws on violated invariants
};

/// Number of strict upper-triangle slots for an n-node network.
inline std::size_t upper_tri_count(std::size_t n) { return n * (n - 1) / 2; }

/// Row-major position of (i,j), i<j, in the flattened strict upper triangle.
std::size_t upper_tri_index(std::size_t i, std::size_t j, std::size_t n);

/// Inverse of upper_tri_index.
std::pair<std::size_t, std::size_t> upper_tri_pair(std::size_t k, std::size_t n);

std::vector<double> flatten_upper(const WeightedNetwork& net);
WeightedNetwork unflatten_upper(const std::vector<double>& upper,
                                const std::vector<std::string>& labels);

// CSV form: header row of node labels, then the full Nc x Nc matrix with
// round-trip-exact doubles.
void save_network_csv(const WeightedNetwork& net, const std::string& path);
WeightedNetwork load_network_csv(const std::string& path);

}  // namespace ganorm
