#pragma once

#include <cstddef>
#include <vector>

namespace ganorm {

// Student-t with real df > 0.
double t_quantile(double p, double df);
double t_cdf(double x, double df);

double normal_quantile(double p);
double normal_cdf(double x);

struct Correlation {
    double r = 0.0;
    double p = 1.0;  // two-sided, from t = r sqrt((n-2)/(1-r^2)) with n-2 df
};

// Constant columns give r = 0, p = 1 by convention. Requires n >= 3.
Correlation pearson(const std::vector<double>& x, const std::vector<double>& y);

struct RankSumResult {
    double rank_sum = 0.0;  // midrank sum of the first sample
    double u = 0.0;         // Mann-Whitney U of the first sample
    double z = 0.0;         // tie-corrected normal approximation, no continuity correction
    double p = 1.0;         // two-sided
};

// Two-sample Wilcoxon rank-sum test via the normal approximation.
RankSumResult rank_sum_test(const std::vector<double>& x, const std::vector<double>& y);

struct KdeTable {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

// Gaussian kernel density with the robust rule-of-thumb bandwidth
// h = 0.9 min(sd, iqr/1.34) n^(-1/5); grid spans the data plus 3h margins.
KdeTable kde(const std::vector<double>& values, std::size_t grid_points = 128);

double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);      // ddof = 1; 0 when n < 2
double median_of(std::vector<double> v);         // by value: sorts a copy

}  // namespace ganorm
