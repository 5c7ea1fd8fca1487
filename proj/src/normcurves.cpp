#include "ganorm/normcurves.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ganorm/common.hpp"
#include "ganorm/stats.hpp"
#include "json.hpp"

using nlohmann::json;

namespace ganorm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Knot span index i with knots[i] <= x < knots[i+1]; x at the right boundary
// maps into the last non-empty span. x must already be clamped.
int find_span(const Eigen::VectorXd& t, double x) {
    const int nk = static_cast<int>(t.size());
    int lo = 3, hi = nk - 5;
    if (x >= t[hi]) return hi;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (t[mid] <= x)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

// Cubic basis values N[0..3] for the functions with support on span i.
void basis_funs(const Eigen::VectorXd& t, int i, double x, double N[4]) {
    double left[4], right[4];
    N[0] = 1.0;
    for (int j = 1; j <= 3; ++j) {
        left[j] = x - t[i + 1 - j];
        right[j] = t[i + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double tmp = N[r] / (right[r + 1] + left[j - r]);
            N[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        N[j] = saved;
    }
}

}  // namespace

SplineModel SplineModel::make(double x_min, double x_max, int interior_knots) {
    if (interior_knots < 0) throw Error("interior knot count must be nonnegative");
    if (!(x_max - x_min > 1e-9)) {
        const double mid = 0.5 * (x_min + x_max);
        x_min = mid - 0.5;
        x_max = mid + 0.5;
    }
    SplineModel s;
    s.x_min = x_min;
    s.x_max = x_max;
    const int m = interior_knots;
    s.knots.resize(m + 8);
    const double h = (x_max - x_min) / static_cast<double>(m + 1);
    for (int k = 0; k < 4; ++k) s.knots[k] = x_min;
    for (int k = 1; k <= m; ++k) s.knots[3 + k] = x_min + h * static_cast<double>(k);
    for (int k = 0; k < 4; ++k) s.knots[m + 4 + k] = x_max;
    s.coef = Eigen::VectorXd::Zero(m + 4);
    return s;
}

double SplineModel::eval(double x) const {
    x = std::clamp(x, x_min, x_max);
    const int i = find_span(knots, x);
    double N[4];
    basis_funs(knots, i, x, N);
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) acc += N[k] * coef[i - 3 + k];
    return acc;
}

Eigen::MatrixXd bspline_basis(const SplineModel& s, const Eigen::VectorXd& x) {
    const auto n = x.size();
    const int K = s.basis_count();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, K);
    double N[4];
    for (Eigen::Index r = 0; r < n; ++r) {
        const double xv = std::clamp(x[r], s.x_min, s.x_max);
        const int i = find_span(s.knots, xv);
        basis_funs(s.knots, i, xv, N);
        for (int k = 0; k < 4; ++k) B(r, i - 3 + k) = N[k];
    }
    return B;
}

Eigen::MatrixXd difference_penalty(int n_coef, int order) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n_coef, n_coef);
    for (int o = 0; o < order; ++o) {
        const auto rows = D.rows() - 1;
        Eigen::MatrixXd Dn(rows, n_coef);
        for (Eigen::Index r = 0; r < rows; ++r) Dn.row(r) = D.row(r + 1) - D.row(r);
        D = std::move(Dn);
    }
    return D.transpose() * D;
}

double BCTFamily::mu_at(double age) const {
    if (!(age > 0.0)) throw Error("age must be positive, got " + dtos(age));
    return mu.eval(std::log(age));
}

double BCTFamily::sigma_at(double age) const {
    if (!(age > 0.0)) throw Error("age must be positive, got " + dtos(age));
    return std::exp(std::clamp(log_sigma.eval(std::log(age)), -40.0, 40.0));
}

namespace {

// z_i of the Box-Cox-t transform; quiet NaN when mu or the transform is invalid.
void bct_z(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
           double nu, Eigen::VectorXd& z) {
    const auto n = y.size();
    z.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(mu[i] > 0.0) || !(sigma[i] > 0.0)) {
            z[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        if (std::abs(nu) > 1e-12)
            z[i] = (std::pow(y[i] / mu[i], nu) - 1.0) / (nu * sigma[i]);
        else
            z[i] = std::log(y[i] / mu[i]) / sigma[i];
    }
}

double bct_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                  const Eigen::VectorXd& sigma, double nu, double tau) {
    if (!(tau > 0.0)) return -kInf;
    const auto n = y.size();
    const double c = std::lgamma(0.5 * (tau + 1.0)) - std::lgamma(0.5 * tau) -
                     0.5 * std::log(3.14159265358979323846 * tau);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(mu[i] > 0.0) || !(sigma[i] > 0.0)) return -kInf;
        double z;
        if (std::abs(nu) > 1e-12)
            z = (std::pow(y[i] / mu[i], nu) - 1.0) / (nu * sigma[i]);
        else
            z = std::log(y[i] / mu[i]) / sigma[i];
        if (!std::isfinite(z)) return -kInf;
        acc += c - 0.5 * (tau + 1.0) * std::log1p(z * z / tau) + (nu - 1.0) * std::log(y[i]) -
               nu * std::log(mu[i]) - std::log(sigma[i]);
    }
    return std::isfinite(acc) ? acc : -kInf;
}

struct PwlsFit {
    Eigen::VectorXd coef;
    double edf = 0.0;
    double gcv = kInf;
};

PwlsFit pwls(const Eigen::MatrixXd& B, const Eigen::MatrixXd& P, const Eigen::VectorXd& w,
             const Eigen::VectorXd& z, double lambda) {
    const Eigen::MatrixXd BtW = B.transpose() * w.asDiagonal();
    const Eigen::MatrixXd A = BtW * B;
    Eigen::LDLT<Eigen::MatrixXd> solver(A + lambda * P);
    PwlsFit fit;
    fit.coef = solver.solve(BtW * z);
    fit.edf = solver.solve(A).trace();
    const Eigen::VectorXd res = z - B * fit.coef;
    const double rss = (w.array() * res.array().square()).sum();
    const double n = static_cast<double>(B.rows());
    const double denom = n - fit.edf;
    fit.gcv = denom > 1.0 ? n * rss / (denom * denom) : kInf;
    return fit;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
    std::vector<double> out(static_cast<std::size_t>(count));
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] =
            std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(count - 1));
    return out;
}

// State shared by the backfitting steps.
struct FitState {
    Eigen::VectorXd y;   // shifted response, all > 0
    Eigen::MatrixXd Bmu, Bsig, Pmu, Psig;
    Eigen::VectorXd cmu, csig;
    double nu = 1.0, tau = 10.0;
    double lam_mu = 1.0, lam_sig = 1.0;

    Eigen::VectorXd mu() const { return Bmu * cmu; }
    Eigen::VectorXd sigma() const {
        return (Bsig * csig).array().min(40.0).max(-40.0).exp().matrix();
    }
    double loglik() const { return bct_loglik(y, mu(), sigma(), nu, tau); }
    double objective() const {
        return -2.0 * loglik() + lam_mu * cmu.dot(Pmu * cmu) + lam_sig * csig.dot(Psig * csig);
    }
};

// Minimizes fn over [lo, hi] by golden-section; deterministic iteration count.
double golden_min(const std::function<double(double)>& fn, double lo, double hi) {
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = fn(x1), f2 = fn(x2);
    for (int it = 0; it < 80 && (b - a) > 1e-10 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = fn(x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

// Scalar profile update over grid + golden-section refinement; returns the new
// value only if it improves the log-likelihood, otherwise the current one.
double profile_scalar(const std::function<double(double)>& loglik_of, double current,
                      std::vector<double> grid) {
    grid.push_back(current);
    std::sort(grid.begin(), grid.end());
    std::size_t best = 0;
    double best_ll = -kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double ll = loglik_of(grid[i]);
        if (ll > best_ll) {
            best_ll = ll;
            best = i;
        }
    }
    if (!std::isfinite(best_ll)) return current;
    const double lo = grid[best > 0 ? best - 1 : best];
    const double hi = grid[std::min(best + 1, grid.size() - 1)];
    double refined = grid[best];
    if (hi > lo) {
        const double cand = golden_min([&](double v) { return -loglik_of(v); }, lo, hi);
        if (loglik_of(cand) > best_ll) refined = cand;
    }
    return loglik_of(refined) > loglik_of(current) ? refined : current;
}

}  // namespace

BCTFamily fit_gamlss(const std::vector<double>& ages, const std::vector<double>& values,
                     const GamlssConfig& cfg) {
    const std::size_t n = ages.size();
    if (values.size() != n) throw Error("fit_gamlss: ages/values length mismatch");
    if (n < cfg.min_n)
        throw Error("fit_gamlss: need at least " + std::to_string(cfg.min_n) + " samples, got " +
                    std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(ages[i] > 0.0)) throw Error("fit_gamlss: nonpositive age " + dtos(ages[i]));
        if (!std::isfinite(values[i])) throw Error("fit_gamlss: non-finite value");
    }

    // Shift the response onto (0, inf) if needed; the offset is recorded and
    // undone at quantile evaluation.
    double offset = 0.0;
    const double vmin = *std::min_element(values.begin(), values.end());
    const double vmax = *std::max_element(values.begin(), values.end());
    if (vmin <= 0.0) {
        if (!cfg.allow_offset) throw Error("fit_gamlss: nonpositive value " + dtos(vmin));
        offset = -vmin + std::max(1e-6, 0.01 * (vmax - vmin));
    }

    // Canonical sample order makes the fit independent of input order.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double xa = ages[a], xb = ages[b];
        if (xa != xb) return xa < xb;
        return values[a] < values[b];
    });

    FitState st;
    Eigen::VectorXd x(n);
    st.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        x[static_cast<Eigen::Index>(i)] = std::log(ages[idx[i]]);
        st.y[static_cast<Eigen::Index>(i)] = values[idx[i]] + offset;
    }

    BCTFamily fam;
    fam.offset = offset;
    fam.mu = SplineModel::make(x.minCoeff(), x.maxCoeff(), cfg.mu_interior_knots);
    fam.log_sigma = SplineModel::make(x.minCoeff(), x.maxCoeff(), cfg.sigma_interior_knots);

    st.Bmu = bspline_basis(fam.mu, x);
    st.Bsig = bspline_basis(fam.log_sigma, x);
    st.Pmu = difference_penalty(fam.mu.basis_count(), fam.mu.penalty_order);
    st.Psig = difference_penalty(fam.log_sigma.basis_count(), fam.log_sigma.penalty_order);

    // Initial mu: ridge-smoothed response; fall back to the flat mean if the
    // linear fit dips out of the positive support.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    st.cmu = pwls(st.Bmu, st.Pmu, ones, st.y, 1.0).coef;
    if ((st.Bmu * st.cmu).minCoeff() <= 0.0)
        st.cmu = Eigen::VectorXd::Constant(fam.mu.basis_count(), st.y.mean());
    {
        Eigen::VectorXd r(static_cast<Eigen::Index>(n));
        const Eigen::VectorXd mu0 = st.Bmu * st.cmu;
        for (Eigen::Index i = 0; i < r.size(); ++i)
            r[i] = std::log(st.y[i] / std::max(mu0[i], 1e-12));
        std::vector<double> rv(r.data(), r.data() + r.size());
        const double s0 = std::max(sd_of(rv), 1e-8);
        st.csig = Eigen::VectorXd::Constant(fam.log_sigma.basis_count(), std::log(s0));
    }
    st.nu = 1.0;
    st.tau = 10.0;

    const std::vector<double> lam_grid = log_spaced(cfg.lambda_min, cfg.lambda_max, cfg.lambda_grid);
    const std::vector<double> nu_grid = [] {
        std::vector<double> g;
        for (int i = 0; i <= 32; ++i) g.push_back(-4.0 + 8.0 * i / 32.0);
        return g;
    }();
    const std::vector<double> tau_grid = [] {
        std::vector<double> g;
        for (int i = 0; i <= 32; ++i)
            g.push_back(std::exp(std::log(0.5) + (std::log(1000.0) - std::log(0.5)) * i / 32.0));
        return g;
    }();

    auto mu_step = [&](bool select_lambda) {
        const Eigen::VectorXd mu = st.mu();
        const Eigen::VectorXd sigma = st.sigma();
        Eigen::VectorXd z;
        bct_z(st.y, mu, sigma, st.nu, z);
        Eigen::VectorXd u(mu.size()), W(mu.size());
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            const double wt = (st.tau + 1.0) / (st.tau + z[i] * z[i]);
            u[i] = (wt * z[i] / sigma[i] + st.nu * (wt * z[i] * z[i] - 1.0)) / mu[i];
            W[i] = ((st.tau + 1.0) / ((st.tau + 3.0) * sigma[i] * sigma[i]) +
                    2.0 * st.tau * st.nu * st.nu / (st.tau + 3.0)) /
                   (mu[i] * mu[i]);
            if (!std::isfinite(u[i]) || !(W[i] > 0.0)) return;  // skip a pathological step
        }
        const Eigen::VectorXd zeta = mu + (u.array() / W.array()).matrix();
        if (select_lambda) {
            double best = kInf;
            for (double lam : lam_grid) {
                const double g = pwls(st.Bmu, st.Pmu, W, zeta, lam).gcv;
                if (g < best) {
                    best = g;
                    st.lam_mu = lam;
                }
            }
        }
        const Eigen::VectorXd proposal = pwls(st.Bmu, st.Pmu, W, zeta, st.lam_mu).coef;
        const Eigen::VectorXd old = st.cmu;
        const double obj0 = st.objective();
        double s = 1.0;
        while (s >= 1e-4) {
            st.cmu = old + s * (proposal - old);
            if ((st.Bmu * st.cmu).minCoeff() > 0.0 && st.objective() <= obj0 + 1e-12) return;
            s *= 0.5;
        }
        st.cmu = old;
    };

    auto sigma_step = [&](bool select_lambda) {
        const Eigen::VectorXd mu = st.mu();
        const Eigen::VectorXd sigma = st.sigma();
        Eigen::VectorXd z;
        bct_z(st.y, mu, sigma, st.nu, z);
        const double Wconst = 2.0 * st.tau / (st.tau + 3.0);
        Eigen::VectorXd eta = st.Bsig * st.csig;
        Eigen::VectorXd zeta(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double wt = (st.tau + 1.0) / (st.tau + z[i] * z[i]);
            const double u = wt * z[i] * z[i] - 1.0;
            zeta[i] = eta[i] + u / Wconst;
            if (!std::isfinite(zeta[i])) return;
        }
        const Eigen::VectorXd W = Eigen::VectorXd::Constant(eta.size(), Wconst);
        if (select_lambda) {
            double best = kInf;
            for (double lam : lam_grid) {
                const double g = pwls(st.Bsig, st.Psig, W, zeta, lam).gcv;
                if (g < best) {
                    best = g;
                    st.lam_sig = lam;
                }
            }
        }
        const Eigen::VectorXd proposal = pwls(st.Bsig, st.Psig, W, zeta, st.lam_sig).coef;
        const Eigen::VectorXd old = st.csig;
        const double obj0 = st.objective();
        double s = 1.0;
        while (s >= 1e-4) {
            st.csig = old + s * (proposal - old);
            if (st.objective() <= obj0 + 1e-12) return;
            s *= 0.5;
        }
        st.csig = old;
    };

    FitDiagnostics& diag = fam.diag;
    diag.n = n;
    double prev_obj = kInf;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        diag.iterations = iter;
        mu_step(iter == 1);
        sigma_step(iter == 1);
        {
            const Eigen::VectorXd mu = st.mu();
            const Eigen::VectorXd sigma = st.sigma();
            st.nu = profile_scalar(
                [&](double v) { return bct_loglik(st.y, mu, sigma, v, st.tau); }, st.nu, nu_grid);
            st.tau = profile_scalar(
                [&](double v) { return bct_loglik(st.y, mu, sigma, st.nu, v); }, st.tau, tau_grid);
        }
        const double obj = st.objective();
        diag.objective_trace.push_back(obj);
        if (std::isfinite(prev_obj) && std::abs(prev_obj - obj) < cfg.tol) {
            diag.converged = true;
            prev_obj = obj;
            break;
        }
        prev_obj = obj;
    }
    diag.objective = prev_obj;
    diag.deviance = -2.0 * st.loglik();
    if (!std::isfinite(diag.deviance)) throw Error("fit_gamlss: fit diverged (non-finite deviance)");
    if (!diag.converged)
        diag.warning = "not converged after " + std::to_string(diag.iterations) +
                       " iterations; last objective " + dtos(diag.objective);

    fam.mu.coef = st.cmu;
    fam.mu.lambda = st.lam_mu;
    fam.log_sigma.coef = st.csig;
    fam.log_sigma.lambda = st.lam_sig;
    fam.nu = st.nu;
    fam.tau = st.tau;
    return fam;
}

double bct_quantile(const BCTFamily& f, double age, double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("bct_quantile: p must be in (0,1), got " + dtos(p));
    const double mu = f.mu_at(age);
    const double sigma = f.sigma_at(age);
    const double z = t_quantile(p, f.tau);
    double y;
    if (std::abs(f.nu) > 1e-12) {
        const double base = 1.0 + sigma * f.nu * z;
        if (base <= 0.0)
            throw Error("bct_quantile: p=" + dtos(p) + " at age=" + dtos(age) +
                        " lies outside the distribution's support");
        y = mu * std::pow(base, 1.0 / f.nu);
    } else {
        y = mu * std::exp(sigma * z);
    }
    return y - f.offset;
}

double bct_cdf(const BCTFamily& f, double age, double y) {
    const double ys = y + f.offset;
    const double mu = f.mu_at(age);
    const double sigma = f.sigma_at(age);
    if (ys <= 0.0) {
        // Continuous extension below the support boundary.
        return f.nu > 1e-12 ? t_cdf(-1.0 / (f.nu * sigma), f.tau) : 0.0;
    }
    double z;
    if (std::abs(f.nu) > 1e-12)
        z = (std::pow(ys / mu, f.nu) - 1.0) / (f.nu * sigma);
    else
        z = std::log(ys / mu) / sigma;
    return t_cdf(z, f.tau);
}

const BCTFamily& NormativeCurveSet::at(BandName band, const std::string& nc) const {
    const auto bi = cells.find(band_name_str(band));
    if (bi == cells.end()) throw Error("no curves fitted for band " + band_name_str(band));
    const auto ci = bi->second.find(nc);
    if (ci == bi->second.end())
        throw Error("no curve for " + band_name_str(band) + "/" + nc);
    if (!ci->second.ok)
        throw Error("curve " + band_name_str(band) + "/" + nc + " failed: " + ci->second.error);
    return ci->second.family;
}

bool NormativeCurveSet::has(BandName band, const std::string& nc) const {
    const auto bi = cells.find(band_name_str(band));
    if (bi == cells.end()) return false;
    const auto ci = bi->second.find(nc);
    return ci != bi->second.end() && ci->second.ok;
}

NormativeCurveSet fit_all(const NCTable& table, const GamlssConfig& cfg, int jobs) {
    // Collect per-cell samples in deterministic band order.
    struct Cell {
        std::string band, nc;
        std::vector<double> ages, values;
    };
    std::vector<Cell> work;
    for (BandName b : {BandName::delta, BandName::theta, BandName::alpha, BandName::beta}) {
        bool band_present = false;
        for (const auto& row : table)
            if (row.band == b) {
                band_present = true;
                break;
            }
        if (!band_present) continue;
        for (const auto& name : NCVector::names()) {
            Cell c;
            c.band = band_name_str(b);
            c.nc = name;
            work.push_back(std::move(c));
        }
    }
    for (const auto& row : table) {
        const std::string band = band_name_str(row.band);
        const std::vector<double> vals = row.ncs.values();
        for (auto& cell : work) {
            if (cell.band != band) continue;
            for (std::size_t k = 0; k < NCVector::names().size(); ++k) {
                if (NCVector::names()[k] == cell.nc) {
                    cell.ages.push_back(row.age);
                    cell.values.push_back(vals[k]);
                }
            }
        }
    }

    std::vector<CurveCell> results(work.size());
    parallel_for(work.size(), jobs, [&](std::size_t i) {
        try {
            results[i].family = fit_gamlss(work[i].ages, work[i].values, cfg);
            results[i].ok = true;
        } catch (const std::exception& e) {
            results[i].ok = false;
            results[i].error = e.what();
        }
    });

    NormativeCurveSet set;
    for (std::size_t i = 0; i < work.size(); ++i)
        set.cells[work[i].band][work[i].nc] = std::move(results[i]);
    return set;
}

PercentileTable percentile_table(const NormativeCurveSet& set, BandName band,
                                 const std::string& nc, const std::vector<double>& ages,
                                 const std::vector<double>& ps) {
    const BCTFamily& fam = set.at(band, nc);
    PercentileTable t;
    t.ages = ages;
    t.ps = ps;
    t.values.resize(static_cast<Eigen::Index>(ages.size()), static_cast<Eigen::Index>(ps.size()));
    for (std::size_t a = 0; a < ages.size(); ++a)
        for (std::size_t p = 0; p < ps.size(); ++p)
            t.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p)) =
                bct_quantile(fam, ages[a], ps[p]);
    return t;
}

void save_percentile_csv(const PercentileTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "age";
    for (double p : t.ps) {
        const double v = 100.0 * p;
        const double r = std::round(v);
        out << ",p" << (std::abs(v - r) < 1e-9 ? std::to_string(static_cast<int>(r)) : dtos(v));
    }
    out << '\n';
    for (std::size_t a = 0; a < t.ages.size(); ++a) {
        out << dtos(t.ages[a]);
        for (std::size_t p = 0; p < t.ps.size(); ++p)
            out << ',' << dtos(t.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p)));
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

NCVector normative_mean_ncs(const NormativeCurveSet& set, BandName band, double age) {
    NCVector out;
    double vals[7];
    for (std::size_t k = 0; k < 7; ++k)
        vals[k] = bct_quantile(set.at(band, NCVector::names()[k]), age, 0.5);
    out.cpl = vals[0];
    out.ge = vals[1];
    out.cc = vals[2];
    out.le = vals[3];
    out.m = vals[4];
    out.bc = vals[5];
    out.pc = vals[6];
    return out;
}

namespace {

json spline_to_json(const SplineModel& s) {
    json j;
    j["x_min"] = s.x_min;
    j["x_max"] = s.x_max;
    j["knots"] = std::vector<double>(s.knots.data(), s.knots.data() + s.knots.size());
    j["coef"] = std::vector<double>(s.coef.data(), s.coef.data() + s.coef.size());
    j["lambda"] = s.lambda;
    j["penalty_order"] = s.penalty_order;
    return j;
}

SplineModel spline_from_json(const json& j) {
    SplineModel s;
    s.x_min = j.at("x_min").get<double>();
    s.x_max = j.at("x_max").get<double>();
    const auto knots = j.at("knots").get<std::vector<double>>();
    const auto coef = j.at("coef").get<std::vector<double>>();
    s.knots = Eigen::Map<const Eigen::VectorXd>(knots.data(), static_cast<Eigen::Index>(knots.size()));
    s.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    s.lambda = j.at("lambda").get<double>();
    s.penalty_order = j.at("penalty_order").get<int>();
    if (s.knots.size() != s.coef.size() + 4) throw Error("corrupt spline record");
    return s;
}

}  // namespace

void save_curveset(const NormativeCurveSet& set, const std::string& path) {
    json root;
    root["schema_version"] = 1;
    json bands = json::object();
    for (const auto& [band, ncs] : set.cells) {
        json bj = json::object();
        for (const auto& [nc, cell] : ncs) {
            json cj;
            cj["ok"] = cell.ok;
            if (cell.ok) {
                cj["mu"] = spline_to_json(cell.family.mu);
                cj["log_sigma"] = spline_to_json(cell.family.log_sigma);
                cj["nu"] = cell.family.nu;
                cj["tau"] = cell.family.tau;
                cj["offset"] = cell.family.offset;
                cj["diagnostics"] = {{"iterations", cell.family.diag.iterations},
                                     {"deviance", cell.family.diag.deviance},
                                     {"objective", cell.family.diag.objective},
                                     {"n", cell.family.diag.n},
                                     {"converged", cell.family.diag.converged},
                                     {"warning", cell.family.diag.warning}};
            } else {
                cj["error"] = cell.error;
            }
            bj[nc] = std::move(cj);
        }
        bands[band] = std::move(bj);
    }
    root["bands"] = std::move(bands);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << root.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

NormativeCurveSet load_curveset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw Error("invalid curve-set JSON in " + path + ": " + e.what());
    }
    if (root.value("schema_version", 0) != 1)
        throw Error("unsupported curve-set schema version in " + path);
    NormativeCurveSet set;
    for (const auto& [band, bj] : root.at("bands").items()) {
        for (const auto& [nc, cj] : bj.items()) {
            CurveCell cell;
            cell.ok = cj.at("ok").get<bool>();
            if (cell.ok) {
                cell.family.mu = spline_from_json(cj.at("mu"));
                cell.family.log_sigma = spline_from_json(cj.at("log_sigma"));
                cell.family.nu = cj.at("nu").get<double>();
                cell.family.tau = cj.at("tau").get<double>();
                cell.family.offset = cj.at("offset").get<double>();
                const json& dj = cj.at("diagnostics");
                cell.family.diag.iterations = dj.at("iterations").get<int>();
                cell.family.diag.deviance = dj.at("deviance").get<double>();
                cell.family.diag.objective = dj.at("objective").get<double>();
                cell.family.diag.n = dj.at("n").get<std::size_t>();
                cell.family.diag.converged = dj.at("converged").get<bool>();
                cell.family.diag.warning = dj.at("warning").get<std::string>();
            } else {
                cell.error = cj.value("error", "");
            }
            set.cells[band][nc] = std::move(cell);
        }
    }
    return set;
}

}  // namespace ganorm
