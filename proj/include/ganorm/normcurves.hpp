#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ganorm/graphmetrics.hpp"
#include "ganorm/montage.hpp"
#include "ganorm/nctable.hpp"

namespace ganorm {

/// Penalized cubic B-spline on a log-age domain. Knots are clamped (4-fold
/// boundary multiplicity); evaluation outside [x_min, x_max] clamps x, so the
/// curve extends as a constant beyond the observed range.
struct SplineModel {
    double x_min = 0.0;
    double x_max = 1.0;
    Eigen::VectorXd knots;  // full clamped knot vector, size = basis count + 4
    Eigen::VectorXd coef;
    double lambda = 0.0;
    int penalty_order = 2;

    int basis_count() const { return static_cast<int>(knots.size()) - 4; }
    double eval(double x) const;

    /// Equally spaced interior knots over [x_min, x_max]; coefficients zeroed.
    static SplineModel make(double x_min, double x_max, int interior_knots);
};

/// Rows are basis evaluations at each x (clamped); one column per coefficient.
Eigen::MatrixXd bspline_basis(const SplineModel& s, const Eigen::VectorXd& x);

/// P = D'D for the order-th difference matrix D.
Eigen::MatrixXd difference_penalty(int n_coef, int order);

struct FitDiagnostics {
    int iterations = 0;
    double deviance = 0.0;   // -2 log-likelihood at the fit
    double objective = 0.0;  // deviance + smoothing penalties (the monotone quantity)
    std::size_t n = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // one entry per backfitting cycle
    std::string warning;
};

/// Box-Cox-t distributional fit against log-age: mu(x) identity link,
/// sigma(x) = exp(spline), scalar nu (identity) and tau (> 0). `offset` is the
/// shift that was added to the response to keep it positive; quantiles are
/// shifted back on output.
struct BCTFamily {
    SplineModel mu;
    SplineModel log_sigma;
    double nu = 1.0;
    double tau = 10.0;
    double offset = 0.0;
    FitDiagnostics diag;

    double mu_at(double age) const;
    double sigma_at(double age) const;
};

struct GamlssConfig {
    int mu_interior_knots = 20;
    int sigma_interior_knots = 5;
    int max_iterations = 200;
    double tol = 1e-6;          // on the penalized objective
    int lambda_grid = 20;       // log-spaced GCV grid size
    double lambda_min = 1e-4;
    double lambda_max = 1e4;
    std::size_t min_n = 50;
    bool allow_offset = true;   // shift non-positive responses instead of erroring
};

BCTFamily fit_gamlss(const std::vector<double>& ages, const std::vector<double>& values,
                     const GamlssConfig& cfg = {});

/// Inverse CDF at probability p for a subject of the given age.
double bct_quantile(const BCTFamily& f, double age, double p);
/// CDF of a value for a subject of the given age.
double bct_cdf(const BCTFamily& f, double age, double y);

struct CurveCell {
    bool ok = false;
    BCTFamily family;
    std::string error;
};

/// One fitted curve per (band, NC name) cell; failed cells keep their message.
struct NormativeCurveSet {
    std::map<std::string, std::map<std::string, CurveCell>> cells;  // band -> nc -> cell

    const BCTFamily& at(BandName band, const std::string& nc) const;
    bool has(BandName band, const std::string& nc) const;
};

NormativeCurveSet fit_all(const NCTable& table, const GamlssConfig& cfg = {}, int jobs = 1);

struct PercentileTable {
    std::vector<double> ages;
    std::vector<double> ps;
    Eigen::MatrixXd values;  // ages x ps
};

PercentileTable percentile_table(const NormativeCurveSet& set, BandName band,
                                 const std::string& nc, const std::vector<double>& ages,
                                 const std::vector<double>& ps = {0.05, 0.25, 0.50, 0.75, 0.95});

/// Columns: age,p5,p25,... one per requested probability.
void save_percentile_csv(const PercentileTable& t, const std::string& path);

/// The seven 50th-percentile values at an age, in NC order; the decoder input.
NCVector normative_mean_ncs(const NormativeCurveSet& set, BandName band, double age);

void save_curveset(const NormativeCurveSet& set, const std::string& path);
NormativeCurveSet load_curveset(const std::string& path);

}  // namespace ganorm
