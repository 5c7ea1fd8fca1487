#pragma once

#include <cstdint>
#include <vector>

#include "ganorm/network.hpp"

namespace ganorm {

/// Node-to-community assignment with its modularity value. Community ids are
/// contiguous from 0 in order of first appearance by node index.
struct Partition {
    std::vector<int> assignment;
    double q = 0.0;

    int community_count() const;
};

/// The seven network characteristics of one subject/band.
struct NCVector {
    double cpl = 0.0;  // characteristic path length (reachable pairs)
    double ge = 0.0;   // global efficiency
    double cc = 0.0;   // clustering coefficient (Onnela, mean over nodes)
    double le = 0.0;   // local efficiency (mean over nodes)
    double m = 0.0;    // modularity of the detected partition
    double bc = 0.0;   // betweenness centrality (mean over nodes)
    double pc = 0.0;   // participation coefficient (mean over nodes)
    bool disconnected = false;  // some pair had no path; cpl is over reachable pairs

    std::vector<double> values() const { return {cpl, ge, cc, le, m, bc, pc}; }
    static const std::vector<std::string>& names();
};

/// Entries < tau drop to 0; entries >= tau keep their weight.
WeightedNetwork threshold(const WeightedNetwork& net, double tau);

/// All-pairs weighted distances with edge length 1/w; inf when unreachable.
Eigen::MatrixXd shortest_path_lengths(const WeightedNetwork& net);

struct PathLengthSummary {
    double cpl = 0.0;
    bool disconnected = false;
};

/// Mean distance over ordered reachable pairs; errors when no pair is reachable.
PathLengthSummary char_path_length(const WeightedNetwork& net);

/// Mean of 1/d over ordered pairs, 1/inf = 0.
double global_efficiency(const WeightedNetwork& net);

/// Onnela weighted clustering: c_i = sum_jk (w~_ij w~_jk w~_ki)^(1/3) / (k_i (k_i-1))
/// with w~ = w / max(w); degree < 2 contributes 0; mean over nodes.
double clustering_coefficient(const WeightedNetwork& net);

/// Mean over nodes of the global efficiency of the subgraph induced by each
/// node's neighbors; degree < 2 contributes 0.
double local_efficiency(const WeightedNetwork& net);

/// Q of a given assignment: sum_ij [w_ij - gamma s_i s_j / (2t)] delta(c_i,c_j) / (2t).
double modularity_value(const WeightedNetwork& net, const std::vector<int>& assignment,
                        double gamma);

/// Seeded multilevel Louvain, 10 restarts keeping best Q; never returns a
/// partition worse than the single-community one. Errors on edgeless input.
Partition louvain_modularity(const WeightedNetwork& net, double gamma, std::uint64_t seed);

/// Brandes shortest-path betweenness over ordered pairs, halved for the
/// undirected double count, then averaged over nodes.
double betweenness_centrality(const WeightedNetwork& net);

/// PC_i = 1 - sum_c (s_i(c)/s_i)^2; isolated nodes contribute 0; mean over nodes.
double participation_coefficient(const WeightedNetwork& net, const Partition& p);

/// Threshold at tau, run Louvain once (gamma, seed), compute all seven
/// characteristics from the same thresholded network and partition.
NCVector compute_ncs(const WeightedNetwork& net, double tau, double gamma, std::uint64_t seed);

}  // namespace ganorm
