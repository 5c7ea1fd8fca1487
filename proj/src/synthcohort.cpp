#include "ganorm/synthcohort.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ganorm/common.hpp"
#include "ganorm/preprocess.hpp"

namespace fs = std::filesystem;

namespace ganorm {

double BandEffect::strength(double age) const {
    const double d = std::log(age) - std::log(peak_age);
    return base + bump * std::exp(-d * d / (2.0 * log_width * log_width));
}

std::vector<BandEffect> SynthConfig::default_effects() {
    return {
        {0.55, 0.0, 30.0, 0.55},   // delta
        {0.50, 0.0, 30.0, 0.55},   // theta
        {0.45, 0.30, 30.0, 0.55},  // alpha: inverted U peaking at 30
        {0.45, 0.0, 30.0, 0.55},   // beta
    };
}

void SynthConfig::validate() const {
    if (n_subjects < 1) throw Error("synth: n_subjects must be at least 1");
    if (!(age_min > 0.0) || !(age_max > age_min)) throw Error("synth: invalid age range");
    if (noise < 0.0) throw Error("synth: noise must be nonnegative");
    if (between_scale < 0.0 || between_scale > 1.0)
        throw Error("synth: between_scale must be in [0,1]");
    if (fc_attenuation < 0.0 || fc_attenuation >= 1.0)
        throw Error("synth: fc_attenuation must be in [0,1)");
    if (effects.size() != 4) throw Error("synth: need one effect per band");
    montage.validate();
    grid.validate();
    // Feasibility: target coherence must stay inside [0,1] over the age range.
    for (const auto& e : effects) {
        const double peak = e.base + std::max(e.bump, 0.0);
        const double low = e.base + std::min(e.bump, 0.0);
        if (peak > 1.0 || low < 0.0)
            throw Error("synth: effect strength leaves [0,1] (base " + dtos(e.base) + ", bump " +
                        dtos(e.bump) + ")");
    }
}

namespace {

// Block id of a channel: first half (rounded up) vs rest.
int block_of(std::size_t ch, std::size_t nc) { return ch < (nc + 1) / 2 ? 0 : 1; }

ComplexMatrix psd_project(const ComplexMatrix& m) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

CrossSpectrumTensor make_subject_tensor(const SynthConfig& cfg, double age,
                                        std::uint64_t subject_seed) {
    const std::size_t nc = cfg.montage.count();
    const auto bands = BandDefinition::standard_four();
    CrossSpectrumTensor t;
    t.montage = cfg.montage;
    t.grid = cfg.grid;
    t.data.reserve(cfg.grid.count);

    Rng rng(derive_seed(subject_seed, 0x7e45));
    for (std::size_t f = 0; f < cfg.grid.count; ++f) {
        const double freq = cfg.grid.freq(f);
        double strength = 0.5;
        for (std::size_t b = 0; b < bands.size(); ++b) {
            if (bands[b].contains(freq, cfg.grid.step_hz)) {
                strength = cfg.effects[b].strength(age);
                break;
            }
        }
        ComplexMatrix s(nc, nc);
        for (std::size_t i = 0; i < nc; ++i) {
            for (std::size_t j = 0; j < nc; ++j) {
                if (i == j) {
                    s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
                    continue;
                }
                const double a = block_of(i, nc) == block_of(j, nc) ? 1.0 : cfg.between_scale;
                const double c = strength * a;
                if (c < 0.0 || c > 1.0)
                    throw Error("synth: infeasible coherence " + dtos(c) + " at age " + dtos(age));
                s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::sqrt(c);
            }
        }
        if (cfg.noise > 0.0) {
            ComplexMatrix g(nc, nc);
            for (std::size_t i = 0; i < nc; ++i)
                for (std::size_t j = 0; j < nc; ++j)
                    g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        std::complex<double>(rng.next_gaussian(), rng.next_gaussian());
            s += cfg.noise * 0.5 * (g + g.adjoint());
            s = psd_project(s);
            // Keep the diagonal usable for power normalization downstream.
            s += 1e-9 * ComplexMatrix::Identity(static_cast<Eigen::Index>(nc),
                                                static_cast<Eigen::Index>(nc));
        }
        if (cfg.fc_attenuation > 0.0) {
            // Convex mix with the diagonal scales every off-diagonal entry by
            // sqrt(1 - attenuation), so coherence scales by (1 - attenuation)
            // while PSD-ness and channel powers are preserved exactly.
            const double keep = std::sqrt(1.0 - cfg.fc_attenuation);
            ComplexMatrix d = s.diagonal().asDiagonal();
            s = keep * s + (1.0 - keep) * d;
        }
        t.data.push_back(std::move(s));
    }
    return t;
}

namespace {

std::string subject_name(const SynthConfig& cfg, std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    return cfg.id_prefix + "-" + buf;
}

}  // namespace

SynthResult generate_cohort(const SynthConfig& cfg, const std::string& out_dir, int jobs) {
    cfg.validate();
    fs::create_directories(fs::path(out_dir) / "tensors");

    const std::size_t n = cfg.n_subjects;
    std::vector<double> ages(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(cfg.seed, i));
        ages[i] = std::exp(rng.uniform(std::log(cfg.age_min), std::log(cfg.age_max)));
    }

    const auto bands = BandDefinition::standard_four();
    const std::size_t nc = cfg.montage.count();
    std::vector<std::vector<SynthTruthRow>> truth(n);
    std::vector<SubjectRecord> subjects(n);

    parallel_for(n, jobs, [&](std::size_t i) {
        const std::string sid = subject_name(cfg, i);
        const CrossSpectrumTensor tensor =
            make_subject_tensor(cfg, ages[i], derive_seed(cfg.seed, i));
        const std::string rel = "tensors/" + sid + ".bin";
        save_tensor(tensor, (fs::path(out_dir) / rel).string());

        SubjectRecord rec;
        rec.subject_id = sid;
        rec.age = ages[i];
        rec.site = "synth";
        rec.sex = Sex::unknown;
        rec.tensor_path = rel;
        subjects[i] = std::move(rec);

        for (std::size_t b = 0; b < bands.size(); ++b) {
            const WeightedNetwork coh = band_coherence(tensor, bands[b]);
            SynthTruthRow row;
            row.subject_id = sid;
            row.group = cfg.group;
            row.age = ages[i];
            row.band = bands[b].name;
            row.target_strength = cfg.effects[b].strength(ages[i]);
            double sw = 0.0, sb = 0.0, sa = 0.0;
            std::size_t cw = 0, cb = 0, ca = 0;
            for (std::size_t x = 0; x < nc; ++x) {
                for (std::size_t y = 0; y < nc; ++y) {
                    if (x == y) continue;
                    const double v = coh.weights(static_cast<Eigen::Index>(x),
                                                 static_cast<Eigen::Index>(y));
                    sa += v;
                    ++ca;
                    if (block_of(x, nc) == block_of(y, nc)) {
                        sw += v;
                        ++cw;
                    } else {
                        sb += v;
                        ++cb;
                    }
                }
            }
            row.within = cw ? sw / static_cast<double>(cw) : 0.0;
            row.between = cb ? sb / static_cast<double>(cb) : 0.0;
            row.mean_offdiag = ca ? sa / static_cast<double>(ca) : 0.0;
            truth[i].push_back(std::move(row));
        }
    });

    SynthResult result;
    result.manifest.version = 1;
    result.manifest.montage = cfg.montage;
    result.manifest.grid = cfg.grid;
    result.manifest.subjects = std::move(subjects);
    result.manifest.notes = "synthetic cohort (group " + cfg.group + ", seed " +
                            std::to_string(cfg.seed) + ", noise " + dtos(cfg.noise) + ")";
    for (auto& rows : truth)
        for (auto& row : rows) result.truth.push_back(std::move(row));

    save_dataset(result.manifest, (fs::path(out_dir) / "manifest.json").string());
    result.manifest.base_dir = out_dir;
    save_truth_csv(result.truth, (fs::path(out_dir) / "truth.csv").string());
    return result;
}

void save_truth_csv(const std::vector<SynthTruthRow>& truth, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "subject_id,group,age,band,target_strength,within,between,mean_offdiag\n";
    for (const auto& r : truth) {
        out << r.subject_id << ',' << r.group << ',' << dtos(r.age) << ','
            << band_name_str(r.band) << ',' << dtos(r.target_strength) << ',' << dtos(r.within)
            << ',' << dtos(r.between) << ',' << dtos(r.mean_offdiag) << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

}  // namespace ganorm
