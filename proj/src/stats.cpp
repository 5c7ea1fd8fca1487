#include "ganorm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ganorm/common.hpp"

namespace ganorm {

double t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw Error("t_quantile: p must be in (0,1), got " + dtos(p));
    if (!(df > 0.0)) throw Error("t_quantile: df must be positive, got " + dtos(df));
    boost::math::students_t_distribution<double> dist(df);
    return boost::math::quantile(dist, p);
}

double t_cdf(double x, double df) {
    if (!(df > 0.0)) throw Error("t_cdf: df must be positive, got " + dtos(df));
    boost::math::students_t_distribution<double> dist(df);
    return boost::math::cdf(dist, x);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("normal_quantile: p must be in (0,1)");
    boost::math::normal_distribution<double> dist;
    return boost::math::quantile(dist, p);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw Error("pearson: need at least 3 samples");
    // A literally constant column carries no signal; catch it before the mean
    // rounds and manufactures spurious tiny deviations.
    const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
    const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
    if (x_const || y_const) return {0.0, 1.0};
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return {0.0, 1.0};  // constant column convention
    double r = sxy / std::sqrt(sxx * syy);
    r = std::clamp(r, -1.0, 1.0);
    Correlation out;
    out.r = r;
    const double df = static_cast<double>(n - 2);
    const double denom = 1.0 - r * r;
    if (denom <= 0.0) {
        out.p = 0.0;
    } else {
        const double t = r * std::sqrt(df / denom);
        out.p = 2.0 * t_cdf(-std::abs(t), df);
    }
    return out;
}

namespace {

// Midranks of the pooled sample plus the tie-correction term sum(t^3 - t).
void midranks(const std::vector<double>& pooled, std::vector<double>& ranks, double& tie_term) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    ranks.assign(n, 0.0);
    tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
        const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
}

}  // namespace

RankSumResult rank_sum_test(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n1 = x.size(), n2 = y.size();
    if (n1 == 0 || n2 == 0) throw Error("rank_sum_test: empty sample");
    std::vector<double> pooled;
    pooled.reserve(n1 + n2);
    pooled.insert(pooled.end(), x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::vector<double> ranks;
    double tie_term = 0.0;
    midranks(pooled, ranks, tie_term);

    const double n = static_cast<double>(n1 + n2);
    double w = 0.0;
    for (std::size_t i = 0; i < n1; ++i) w += ranks[i];

    RankSumResult out;
    out.rank_sum = w;
    out.u = w - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
    const double mean_w = static_cast<double>(n1) * (n + 1.0) / 2.0;
    const double var_w = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                         ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var_w <= 0.0) throw Error("rank_sum_test: zero variance (all values tied)");
    out.z = (w - mean_w) / std::sqrt(var_w);
    out.p = std::erfc(std::abs(out.z) / std::sqrt(2.0));
    return out;
}

KdeTable kde(const std::vector<double>& values, std::size_t grid_points) {
    const std::size_t n = values.size();
    if (n == 0) throw Error("kde: empty sample");
    if (grid_points < 2) throw Error("kde: need at least 2 grid points");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = sorted[(n - 1) / 4];
    const double q3 = sorted[(3 * (n - 1)) / 4];
    const double sd = sd_of(values);
    const double iqr = q3 - q1;
    double scale = sd;
    if (iqr > 0.0) scale = std::min(scale, iqr / 1.34);
    if (!(scale > 0.0)) scale = std::max(std::abs(sorted.back()), 1.0) * 1e-3;
    const double h = 0.9 * scale * std::pow(static_cast<double>(n), -0.2);

    KdeTable out;
    out.bandwidth = h;
    const double lo = sorted.front() - 3.0 * h;
    const double hi = sorted.back() + 3.0 * h;
    out.grid.resize(grid_points);
    out.density.resize(grid_points);
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * 3.14159265358979323846));
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double xg = lo + step * static_cast<double>(g);
        double acc = 0.0;
        for (double v : values) {
            const double u = (xg - v) / h;
            acc += std::exp(-0.5 * u * u);
        }
        out.grid[g] = xg;
        out.density[g] = acc * norm;
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw Error("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
    if (v.empty()) throw Error("median of empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace ganorm
