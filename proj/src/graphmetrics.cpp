#include "ganorm/graphmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ganorm/common.hpp"

namespace ganorm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative slack when comparing alternative path lengths for equality.
constexpr double kTieTol = 1e-12;

bool has_edge(const WeightedNetwork& net) {
    const auto n = net.weights.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (net.weights(i, j) > 0.0) return true;
    return false;
}

std::vector<int> canonical_labels(const std::vector<int>& raw) {
    std::vector<int> remap(raw.size(), -1);
    std::vector<int> out(raw.size());
    int next = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        int& slot = remap[static_cast<std::size_t>(raw[i])];
        if (slot < 0) slot = next++;
        out[i] = slot;
    }
    return out;
}

}  // namespace

int Partition::community_count() const {
    int mx = -1;
    for (int c : assignment) mx = std::max(mx, c);
    return mx + 1;
}

const std::vector<std::string>& NCVector::names() {
    static const std::vector<std::string> n = {"cpl", "ge", "cc", "le", "m", "bc", "pc"};
    return n;
}

WeightedNetwork threshold(const WeightedNetwork& net, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error("threshold must be in [0,1]");
    WeightedNetwork out = net;
    const auto n = out.weights.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (out.weights(i, j) < tau) out.weights(i, j) = 0.0;
    return out;
}

Eigen::MatrixXd shortest_path_lengths(const WeightedNetwork& net) {
    const auto n = net.weights.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, kInf);
    std::vector<char> done(static_cast<std::size_t>(n));
    for (Eigen::Index s = 0; s < n; ++s) {
        std::fill(done.begin(), done.end(), 0);
        d(s, s) = 0.0;
        for (Eigen::Index iter = 0; iter < n; ++iter) {
            Eigen::Index u = -1;
            double du = kInf;
            for (Eigen::Index v = 0; v < n; ++v)
                if (!done[static_cast<std::size_t>(v)] && d(s, v) < du) {
                    du = d(s, v);
                    u = v;
                }
            if (u < 0) break;
            done[static_cast<std::size_t>(u)] = 1;
            for (Eigen::Index v = 0; v < n; ++v) {
                const double w = net.weights(u, v);
                if (w <= 0.0 || done[static_cast<std::size_t>(v)]) continue;
                const double nd = du + 1.0 / w;
                if (nd < d(s, v)) d(s, v) = nd;
            }
        }
    }
    return d;
}

PathLengthSummary char_path_length(const WeightedNetwork& net) {
    const Eigen::MatrixXd d = shortest_path_lengths(net);
    const auto n = d.rows();
    double sum = 0.0;
    std::size_t finite = 0, total = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            ++total;
            if (std::isfinite(d(i, j))) {
                sum += d(i, j);
                ++finite;
            }
        }
    if (finite == 0) throw Error("characteristic path length undefined: no reachable pair");
    return {sum / static_cast<double>(finite), finite != total};
}

double global_efficiency(const WeightedNetwork& net) {
    const Eigen::MatrixXd d = shortest_path_lengths(net);
    const auto n = d.rows();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && std::isfinite(d(i, j))) sum += 1.0 / d(i, j);
    return sum / static_cast<double>(n * (n - 1));
}

double clustering_coefficient(const WeightedNetwork& net) {
    const auto n = net.weights.rows();
    if (n == 0) return 0.0;
    const double wmax = net.weights.maxCoeff();
    if (wmax <= 0.0) return 0.0;
    const Eigen::MatrixXd wn = (net.weights / wmax).array().pow(1.0 / 3.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int k = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (net.weights(i, j) > 0.0) ++k;
        if (k < 2) continue;
        double cyc3 = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (wn(i, j) == 0.0) continue;
            for (Eigen::Index l = 0; l < n; ++l) cyc3 += wn(i, j) * wn(j, l) * wn(l, i);
        }
        total += cyc3 / (static_cast<double>(k) * static_cast<double>(k - 1));
    }
    return total / static_cast<double>(n);
}

double local_efficiency(const WeightedNetwork& net) {
    const auto n = net.weights.rows();
    if (n == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> nbrs;
        for (Eigen::Index j = 0; j < n; ++j)
            if (net.weights(i, j) > 0.0) nbrs.push_back(j);
        if (nbrs.size() < 2) continue;
        WeightedNetwork sub;
        const auto m = static_cast<Eigen::Index>(nbrs.size());
        sub.weights.resize(m, m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b)
                sub.weights(a, b) =
                    net.weights(nbrs[static_cast<std::size_t>(a)], nbrs[static_cast<std::size_t>(b)]);
        total += global_efficiency(sub);
    }
    return total / static_cast<double>(n);
}

double modularity_value(const WeightedNetwork& net, const std::vector<int>& assignment,
                        double gamma) {
    const auto n = net.weights.rows();
    if (assignment.size() != static_cast<std::size_t>(n))
        throw Error("partition size disagrees with network size");
    const Eigen::VectorXd strength = net.weights.rowwise().sum();
    const double two_t = strength.sum();
    if (!(two_t > 0.0)) throw Error("modularity undefined for an edgeless network");
    double q = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (assignment[static_cast<std::size_t>(i)] != assignment[static_cast<std::size_t>(j)])
                continue;
            q += net.weights(i, j) - gamma * strength(i) * strength(j) / two_t;
        }
    return q / two_t;
}

namespace {

// One multilevel Louvain run over a fixed RNG stream.
std::vector<int> louvain_once(const Eigen::MatrixXd& w0, double gamma, Rng& rng) {
    const auto n0 = w0.rows();
    std::vector<int> node_to_final(static_cast<std::size_t>(n0));
    std::iota(node_to_final.begin(), node_to_final.end(), 0);

    Eigen::MatrixXd w = w0;       // current level adjacency (diagonal = 2x internal weight)
    const double two_m = w0.sum();

    while (true) {
        const auto n = w.rows();
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i) k(i) = w.row(i).sum();

        std::vector<int> comm(static_cast<std::size_t>(n));
        std::iota(comm.begin(), comm.end(), 0);
        std::vector<double> sigma_tot(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) sigma_tot[static_cast<std::size_t>(i)] = k(i);

        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);

        bool any_move = false;
        bool improved = true;
        int pass = 0;
        std::vector<double> w_to(static_cast<std::size_t>(n), 0.0);
        std::vector<int> touched;
        while (improved && pass < 128) {
            improved = false;
            ++pass;
            det_shuffle(order, rng);
            for (Eigen::Index i : order) {
                const int c_old = comm[static_cast<std::size_t>(i)];
                touched.clear();
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (j == i || w(i, j) <= 0.0) continue;
                    const int c = comm[static_cast<std::size_t>(j)];
                    if (w_to[static_cast<std::size_t>(c)] == 0.0) touched.push_back(c);
                    w_to[static_cast<std::size_t>(c)] += w(i, j);
                }
                sigma_tot[static_cast<std::size_t>(c_old)] -= k(i);
                int best_c = c_old;
                double best_gain = w_to[static_cast<std::size_t>(c_old)] -
                                   gamma * sigma_tot[static_cast<std::size_t>(c_old)] * k(i) / two_m;
                for (int c : touched) {
                    if (c == c_old) continue;
                    const double gain = w_to[static_cast<std::size_t>(c)] -
                                        gamma * sigma_tot[static_cast<std::size_t>(c)] * k(i) / two_m;
                    if (gain > best_gain + 1e-12) {
                        best_gain = gain;
                        best_c = c;
                    }
                }
                sigma_tot[static_cast<std::size_t>(best_c)] += k(i);
                comm[static_cast<std::size_t>(i)] = best_c;
                if (best_c != c_old) {
                    improved = true;
                    any_move = true;
                }
                for (int c : touched) w_to[static_cast<std::size_t>(c)] = 0.0;
                w_to[static_cast<std::size_t>(c_old)] = 0.0;
            }
        }
        if (!any_move) break;

        const std::vector<int> labels = canonical_labels(comm);
        const int nc = 1 + *std::max_element(labels.begin(), labels.end());
        for (auto& f : node_to_final) f = labels[static_cast<std::size_t>(f)];
        if (nc == static_cast<int>(n)) break;  // nothing merged

        Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(nc, nc);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                agg(labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)]) +=
                    w(i, j);
        w = std::move(agg);
    }
    return canonical_labels(node_to_final);
}

}  // namespace

Partition louvain_modularity(const WeightedNetwork& net, double gamma, std::uint64_t seed) {
    if (!has_edge(net)) throw Error("community detection undefined for an edgeless network");
    const auto n = net.weights.rows();

    Partition best;
    best.assignment.assign(static_cast<std::size_t>(n), 0);
    best.q = modularity_value(net, best.assignment, gamma);  // single-community floor

    constexpr int kRestarts = 10;
    for (int r = 0; r < kRestarts; ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::vector<int> assignment = louvain_once(net.weights, gamma, rng);
        const double q = modularity_value(net, assignment, gamma);
        if (q > best.q + 1e-15) {
            best.q = q;
            best.assignment = std::move(assignment);
        }
    }
    best.assignment = canonical_labels(best.assignment);
    return best;
}

double betweenness_centrality(const WeightedNetwork& net) {
    const auto n = net.weights.rows();
    if (n == 0) return 0.0;
    std::vector<double> bc(static_cast<std::size_t>(n), 0.0);

    std::vector<double> dist(static_cast<std::size_t>(n));
    std::vector<double> sigma(static_cast<std::size_t>(n));
    std::vector<double> delta(static_cast<std::size_t>(n));
    std::vector<char> done(static_cast<std::size_t>(n));
    std::vector<std::vector<Eigen::Index>> pred(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> settle_order;

    for (Eigen::Index s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(done.begin(), done.end(), 0);
        for (auto& p : pred) p.clear();
        settle_order.clear();
        dist[static_cast<std::size_t>(s)] = 0.0;
        sigma[static_cast<std::size_t>(s)] = 1.0;

        for (Eigen::Index iter = 0; iter < n; ++iter) {
            Eigen::Index u = -1;
            double du = kInf;
            for (Eigen::Index v = 0; v < n; ++v)
                if (!done[static_cast<std::size_t>(v)] && dist[static_cast<std::size_t>(v)] < du) {
                    du = dist[static_cast<std::size_t>(v)];
                    u = v;
                }
            if (u < 0) break;
            done[static_cast<std::size_t>(u)] = 1;
            settle_order.push_back(u);
            for (Eigen::Index v = 0; v < n; ++v) {
                const double w = net.weights(u, v);
                if (w <= 0.0 || done[static_cast<std::size_t>(v)]) continue;
                const double nd = du + 1.0 / w;
                const double dv = dist[static_cast<std::size_t>(v)];
                if (!std::isfinite(dv)) {
                    dist[static_cast<std::size_t>(v)] = nd;
                    sigma[static_cast<std::size_t>(v)] = sigma[static_cast<std::size_t>(u)];
                    pred[static_cast<std::size_t>(v)].assign(1, u);
                    continue;
                }
                const double tol = kTieTol * (std::abs(nd) + std::abs(dv) + 1.0);
                if (nd < dv - tol) {
                    dist[static_cast<std::size_t>(v)] = nd;
                    sigma[static_cast<std::size_t>(v)] = sigma[static_cast<std::size_t>(u)];
                    pred[static_cast<std::size_t>(v)].assign(1, u);
                } else if (nd <= dv + tol) {
                    sigma[static_cast<std::size_t>(v)] += sigma[static_cast<std::size_t>(u)];
                    pred[static_cast<std::size_t>(v)].push_back(u);
                }
            }
        }

        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto it = settle_order.rbegin(); it != settle_order.rend(); ++it) {
            const Eigen::Index v = *it;
            for (Eigen::Index u : pred[static_cast<std::size_t>(v)])
                delta[static_cast<std::size_t>(u)] +=
                    sigma[static_cast<std::size_t>(u)] / sigma[static_cast<std::size_t>(v)] *
                    (1.0 + delta[static_cast<std::size_t>(v)]);
            if (v != s) bc[static_cast<std::size_t>(v)] += delta[static_cast<std::size_t>(v)];
        }
    }

    double mean = 0.0;
    for (double v : bc) mean += v / 2.0;  // ordered pairs counted twice in undirected graphs
    return mean / static_cast<double>(n);
}

double participation_coefficient(const WeightedNetwork& net, const Partition& p) {
    const auto n = net.weights.rows();
    if (p.assignment.size() != static_cast<std::size_t>(n))
        throw Error("partition size disagrees with network size");
    if (n == 0) return 0.0;
    const int nc = p.community_count();
    double total = 0.0;
    std::vector<double> s_to(static_cast<std::size_t>(std::max(nc, 1)), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(s_to.begin(), s_to.end(), 0.0);
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = net.weights(i, j);
            if (w <= 0.0) continue;
            s += w;
            s_to[static_cast<std::size_t>(p.assignment[static_cast<std::size_t>(j)])] += w;
        }
        if (s <= 0.0) continue;  // isolated node
        double frac_sq = 0.0;
        for (double sc : s_to) frac_sq += (sc / s) * (sc / s);
        total += 1.0 - frac_sq;
    }
    return total / static_cast<double>(n);
}

NCVector compute_ncs(const WeightedNetwork& net, double tau, double gamma, std::uint64_t seed) {
    net.check();
    const WeightedNetwork thr = threshold(net, tau);
    if (!has_edge(thr)) throw Error("network is edgeless after thresholding at " + dtos(tau));
    const Partition part = louvain_modularity(thr, gamma, seed);
    const PathLengthSummary pl = char_path_length(thr);

    NCVector out;
    out.cpl = pl.cpl;
    out.disconnected = pl.disconnected;
    out.ge = global_efficiency(thr);
    out.cc = clustering_coefficient(thr);
    out.le = local_efficiency(thr);
    out.m = part.q;
    out.bc = betweenness_centrality(thr);
    out.pc = participation_coefficient(thr, part);
    return out;
}

}  // namespace ganorm
