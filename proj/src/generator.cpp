#include "ganorm/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "ganorm/common.hpp"
#include "ganorm/stats.hpp"
#include "json.hpp"

using nlohmann::json;

namespace ganorm {

Eigen::VectorXd make_decoder_input(double age, const NCVector& ncs) {
    Eigen::VectorXd v(8);
    v << age, ncs.cpl, ncs.ge, ncs.cc, ncs.le, ncs.m, ncs.bc, ncs.pc;
    return v;
}

EmbeddingReport select_embedding(const std::vector<TrainingExample>& examples) {
    const std::size_t n = examples.size();
    if (n < 3) throw Error("select_embedding: need at least 3 examples, got " + std::to_string(n));
    const auto n_in = examples.front().input.size();
    const auto n_out = examples.front().target.size();
    for (const auto& ex : examples)
        if (ex.input.size() != n_in || ex.target.size() != n_out)
            throw Error("select_embedding: inconsistent example dimensions");

    EmbeddingReport rep;
    rep.r.resize(n_in, n_out);
    rep.p.resize(n_in, n_out);
    std::vector<double> xi(n), yj(n);
    for (Eigen::Index i = 0; i < n_in; ++i) {
        for (std::size_t s = 0; s < n; ++s) xi[s] = examples[s].input[i];
        for (Eigen::Index j = 0; j < n_out; ++j) {
            for (std::size_t s = 0; s < n; ++s) yj[s] = examples[s].target[j];
            const Correlation c = pearson(xi, yj);
            rep.r(i, j) = c.r;
            rep.p(i, j) = c.p;
            if (std::abs(c.r) > 0.6 && c.p < 0.05) ++rep.strong_count;
        }
    }
    return rep;
}

namespace {

void he_uniform_init(DecoderModel& m) {
    m.W.clear();
    m.b.clear();
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
        const int fan_in = m.layers[l];
        const int fan_out = m.layers[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Rng rng(derive_seed(m.seed, static_cast<std::uint64_t>(l)));
        Eigen::MatrixXd W(fan_out, fan_in);
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-limit, limit);
        m.W.push_back(std::move(W));
        m.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
}

}  // namespace

DecoderModel build_model_with_layers(const std::vector<int>& layers, std::uint64_t seed) {
    if (layers.size() < 2) throw Error("build_model: need at least input and output layers");
    for (int sz : layers)
        if (sz < 1) throw Error("build_model: layer sizes must be positive");
    DecoderModel m;
    m.layers = layers;
    m.seed = seed;
    m.in_mean = Eigen::VectorXd::Zero(layers.front());
    m.in_std = Eigen::VectorXd::Ones(layers.front());
    he_uniform_init(m);
    return m;
}

DecoderModel build_model(int strong_count, std::uint64_t seed, int n_outputs) {
    const int h2 = std::clamp(strong_count, 32, 1368);
    DecoderModel m = build_model_with_layers({8, 1368, h2, n_outputs}, seed);
    m.strong_count = strong_count;
    return m;
}

namespace {

// Batched forward; returns activations per layer (A[0] is the scaled input).
void forward_batch(const DecoderModel& m, const Eigen::MatrixXd& x_scaled,
                   std::vector<Eigen::MatrixXd>& acts) {
    acts.assign(m.layers.size(), {});
    acts[0] = x_scaled;
    const std::size_t last = m.W.size() - 1;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        Eigen::MatrixXd z = (m.W[l] * acts[l]).colwise() + m.b[l];
        if (l != last) z = z.cwiseMax(0.0);
        acts[l + 1] = std::move(z);
    }
}

Eigen::MatrixXd scale_inputs(const DecoderModel& m, const Eigen::MatrixXd& raw) {
    return (raw.colwise() - m.in_mean).array().colwise() / m.in_std.array();
}

}  // namespace

Eigen::VectorXd forward(const DecoderModel& m, const Eigen::VectorXd& raw_input) {
    if (raw_input.size() != m.n_inputs())
        throw Error("forward: expected " + std::to_string(m.n_inputs()) + " inputs, got " +
                    std::to_string(raw_input.size()));
    std::vector<Eigen::MatrixXd> acts;
    forward_batch(m, scale_inputs(m, raw_input), acts);
    return acts.back().col(0);
}

TrainTrace train(DecoderModel& m, const std::vector<TrainingExample>& examples,
                 const TrainConfig& cfg) {
    const std::size_t n = examples.size();
    if (n < 2) throw Error("train: need at least 2 examples");
    for (const auto& ex : examples) {
        if (ex.input.size() != m.n_inputs()) throw Error("train: input size mismatch");
        if (ex.target.size() != m.n_outputs()) throw Error("train: target size mismatch");
    }

    // Validation split held out from the supplied examples.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    {
        Rng rng(derive_seed(cfg.seed, 0xA11dA7A));
        det_shuffle(order, rng);
    }
    std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(n));
    if (n_val >= n) n_val = n - 1;
    const std::size_t n_tr = n - n_val;
    std::vector<std::size_t> tr_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_tr));
    std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_tr), order.end());
    std::sort(tr_idx.begin(), tr_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    // Z-scoring statistics from the training portion.
    m.in_mean = Eigen::VectorXd::Zero(m.n_inputs());
    for (std::size_t i : tr_idx) m.in_mean += examples[i].input;
    m.in_mean /= static_cast<double>(n_tr);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(m.n_inputs());
    for (std::size_t i : tr_idx) {
        const Eigen::VectorXd d = examples[i].input - m.in_mean;
        var += d.cwiseProduct(d);
    }
    var /= static_cast<double>(n_tr);
    m.in_std = var.cwiseSqrt();
    for (Eigen::Index i = 0; i < m.in_std.size(); ++i)
        if (!(m.in_std[i] > 1e-12)) m.in_std[i] = 1.0;  // constant input column

    Eigen::MatrixXd Xtr(m.n_inputs(), static_cast<Eigen::Index>(n_tr));
    Eigen::MatrixXd Ttr(m.n_outputs(), static_cast<Eigen::Index>(n_tr));
    for (std::size_t c = 0; c < n_tr; ++c) {
        Xtr.col(static_cast<Eigen::Index>(c)) = examples[tr_idx[c]].input;
        Ttr.col(static_cast<Eigen::Index>(c)) = examples[tr_idx[c]].target;
    }
    Xtr = scale_inputs(m, Xtr);
    Eigen::MatrixXd Xval, Tval;
    if (n_val > 0) {
        Xval.resize(m.n_inputs(), static_cast<Eigen::Index>(n_val));
        Tval.resize(m.n_outputs(), static_cast<Eigen::Index>(n_val));
        for (std::size_t c = 0; c < n_val; ++c) {
            Xval.col(static_cast<Eigen::Index>(c)) = examples[val_idx[c]].input;
            Tval.col(static_cast<Eigen::Index>(c)) = examples[val_idx[c]].target;
        }
        Xval = scale_inputs(m, Xval);
    }

    // Adam state.
    const std::size_t n_layers = m.W.size();
    std::vector<Eigen::MatrixXd> mW(n_layers), vW(n_layers);
    std::vector<Eigen::VectorXd> mB(n_layers), vB(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        mW[l] = Eigen::MatrixXd::Zero(m.W[l].rows(), m.W[l].cols());
        vW[l] = mW[l];
        mB[l] = Eigen::VectorXd::Zero(m.b[l].size());
        vB[l] = mB[l];
    }

    auto mse_of = [&](const Eigen::MatrixXd& X, const Eigen::MatrixXd& T) {
        std::vector<Eigen::MatrixXd> acts;
        forward_batch(m, X, acts);
        return (acts.back() - T).squaredNorm() / static_cast<double>(T.size());
    };

    TrainTrace trace;
    std::vector<Eigen::MatrixXd> bestW = m.W;
    std::vector<Eigen::VectorXd> bestB = m.b;
    double best_val = std::numeric_limits<double>::infinity();
    int patience_left = cfg.patience;
    long step = 0;
    std::vector<std::size_t> batch_order(n_tr);
    std::iota(batch_order.begin(), batch_order.end(), 0);
    std::vector<Eigen::MatrixXd> acts;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng erng(derive_seed(cfg.seed, 0xB000 + static_cast<std::uint64_t>(epoch)));
        det_shuffle(batch_order, erng);
        double sse = 0.0;
        for (std::size_t start = 0; start < n_tr; start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t bsz = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch),
                                                          n_tr - start);
            Eigen::MatrixXd X(m.n_inputs(), static_cast<Eigen::Index>(bsz));
            Eigen::MatrixXd T(m.n_outputs(), static_cast<Eigen::Index>(bsz));
            for (std::size_t c = 0; c < bsz; ++c) {
                X.col(static_cast<Eigen::Index>(c)) =
                    Xtr.col(static_cast<Eigen::Index>(batch_order[start + c]));
                T.col(static_cast<Eigen::Index>(c)) =
                    Ttr.col(static_cast<Eigen::Index>(batch_order[start + c]));
            }
            forward_batch(m, X, acts);
            const Eigen::MatrixXd diff = acts.back() - T;
            const double batch_sse = diff.squaredNorm();
            if (!std::isfinite(batch_sse))
                throw Error("train: loss diverged at epoch " + std::to_string(epoch));
            sse += batch_sse;

            // Backpropagation of d(MSE)/d(output) = 2 diff / (batch * outputs).
            Eigen::MatrixXd delta = 2.0 * diff / static_cast<double>(T.size());
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t l = n_layers; l-- > 0;) {
                const Eigen::MatrixXd gW = delta * acts[l].transpose();
                const Eigen::VectorXd gB = delta.rowwise().sum();
                if (l > 0) {
                    Eigen::MatrixXd back = m.W[l].transpose() * delta;
                    delta = back.cwiseProduct(
                        (acts[l].array() > 0.0).cast<double>().matrix());
                }
                mW[l] = cfg.beta1 * mW[l] + (1.0 - cfg.beta1) * gW;
                vW[l] = cfg.beta2 * vW[l] + (1.0 - cfg.beta2) * gW.cwiseProduct(gW);
                mB[l] = cfg.beta1 * mB[l] + (1.0 - cfg.beta1) * gB;
                vB[l] = cfg.beta2 * vB[l] + (1.0 - cfg.beta2) * gB.cwiseProduct(gB);
                m.W[l] -= (cfg.lr * (mW[l] / bc1).array() /
                           ((vW[l] / bc2).array().sqrt() + cfg.eps))
                              .matrix();
                m.b[l] -= (cfg.lr * (mB[l] / bc1).array() /
                           ((vB[l] / bc2).array().sqrt() + cfg.eps))
                              .matrix();
            }
        }
        trace.train_mse.push_back(sse / static_cast<double>(Ttr.size()));
        trace.epochs_run = epoch + 1;

        if (n_val > 0) {
            const double val = mse_of(Xval, Tval);
            trace.val_mse.push_back(val);
            if (val < best_val) {
                best_val = val;
                bestW = m.W;
                bestB = m.b;
                trace.best_epoch = epoch;
                patience_left = cfg.patience;
            } else if (--patience_left <= 0) {
                break;
            }
        } else {
            trace.best_epoch = epoch;
        }
    }
    if (n_val > 0) {
        m.W = std::move(bestW);
        m.b = std::move(bestB);
    }
    return trace;
}

double loss_with_gradients(const DecoderModel& m, const std::vector<TrainingExample>& examples,
                           std::vector<Eigen::MatrixXd>& grad_w,
                           std::vector<Eigen::VectorXd>& grad_b) {
    if (examples.empty()) throw Error("loss_with_gradients: no examples");
    Eigen::MatrixXd X(m.n_inputs(), static_cast<Eigen::Index>(examples.size()));
    Eigen::MatrixXd T(m.n_outputs(), static_cast<Eigen::Index>(examples.size()));
    for (std::size_t c = 0; c < examples.size(); ++c) {
        X.col(static_cast<Eigen::Index>(c)) = examples[c].input;
        T.col(static_cast<Eigen::Index>(c)) = examples[c].target;
    }
    std::vector<Eigen::MatrixXd> acts;
    forward_batch(m, scale_inputs(m, X), acts);

    const Eigen::MatrixXd diff = acts.back() - T;
    const double loss = diff.squaredNorm() / static_cast<double>(T.size());

    grad_w.assign(m.W.size(), {});
    grad_b.assign(m.b.size(), {});
    Eigen::MatrixXd delta = 2.0 * diff / static_cast<double>(T.size());
    for (std::size_t l = m.W.size(); l-- > 0;) {
        grad_w[l] = delta * acts[l].transpose();
        grad_b[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = m.W[l].transpose() * delta;
            delta = back.cwiseProduct(
                (acts[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

EvalMetrics evaluate(const DecoderModel& m, const std::vector<TrainingExample>& examples) {
    if (examples.empty()) throw Error("evaluate: no examples");
    Eigen::MatrixXd X(m.n_inputs(), static_cast<Eigen::Index>(examples.size()));
    Eigen::MatrixXd T(m.n_outputs(), static_cast<Eigen::Index>(examples.size()));
    for (std::size_t c = 0; c < examples.size(); ++c) {
        X.col(static_cast<Eigen::Index>(c)) = examples[c].input;
        T.col(static_cast<Eigen::Index>(c)) = examples[c].target;
    }
    std::vector<Eigen::MatrixXd> acts;
    forward_batch(m, scale_inputs(m, X), acts);
    const Eigen::MatrixXd& Y = acts.back();

    const double n_entries = static_cast<double>(T.size());
    const double mean_actual = T.sum() / n_entries;
    const double ss_res = (Y - T).squaredNorm();
    const double ss_tot = (T.array() - mean_actual).square().sum();
    EvalMetrics out;
    out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    out.mae = (Y - T).cwiseAbs().sum() / n_entries;
    out.rmse = std::sqrt(ss_res / n_entries);
    return out;
}

namespace {

EvalMetrics metrics_mean(const std::vector<CVFold>& folds, bool test, bool want_sd) {
    std::vector<double> r2, mae, rmse;
    for (const auto& f : folds) {
        const EvalMetrics& m = test ? f.test_metrics : f.train_metrics;
        r2.push_back(m.r2);
        mae.push_back(m.mae);
        rmse.push_back(m.rmse);
    }
    EvalMetrics out;
    out.r2 = want_sd ? sd_of(r2) : mean_of(r2);
    out.mae = want_sd ? sd_of(mae) : mean_of(mae);
    out.rmse = want_sd ? sd_of(rmse) : mean_of(rmse);
    return out;
}

}  // namespace

CVReport kfold_cv(const std::vector<TrainingExample>& examples, int k, const TrainConfig& cfg) {
    if (k < 2) throw Error("kfold_cv: k must be at least 2");
    // Unique subjects in first-appearance order, then a seeded shuffle.
    std::vector<std::string> subjects;
    for (const auto& ex : examples)
        if (std::find(subjects.begin(), subjects.end(), ex.subject_id) == subjects.end())
            subjects.push_back(ex.subject_id);
    if (subjects.size() < static_cast<std::size_t>(k))
        throw Error("kfold_cv: fewer subjects than folds");
    {
        Rng rng(derive_seed(cfg.seed, 0xF01d));
        det_shuffle(subjects, rng);
    }
    std::vector<int> fold_of_example(examples.size());
    for (std::size_t e = 0; e < examples.size(); ++e) {
        const auto it = std::find(subjects.begin(), subjects.end(), examples[e].subject_id);
        fold_of_example[e] = static_cast<int>((it - subjects.begin()) % k);
    }

    CVReport rep;
    for (int f = 0; f < k; ++f) {
        std::vector<TrainingExample> tr, te;
        for (std::size_t e = 0; e < examples.size(); ++e)
            (fold_of_example[e] == f ? te : tr).push_back(examples[e]);
        CVFold fold;
        fold.n_train = tr.size();
        fold.n_test = te.size();
        const EmbeddingReport emb = select_embedding(tr);
        fold.strong_count = emb.strong_count;
        DecoderModel model = build_model(emb.strong_count,
                                         derive_seed(cfg.seed, 10 + static_cast<std::uint64_t>(f)),
                                         static_cast<int>(examples.front().target.size()));
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(f));
        train(model, tr, fold_cfg);
        fold.train_metrics = evaluate(model, tr);
        fold.test_metrics = evaluate(model, te);
        rep.folds.push_back(fold);
    }
    rep.train_mean = metrics_mean(rep.folds, false, false);
    rep.train_sd = metrics_mean(rep.folds, false, true);
    rep.test_mean = metrics_mean(rep.folds, true, false);
    rep.test_sd = metrics_mean(rep.folds, true, true);
    return rep;
}

namespace {

json metrics_json(const EvalMetrics& m) {
    return {{"r2", m.r2}, {"mae", m.mae}, {"rmse", m.rmse}};
}

}  // namespace

void save_cv_report_json(const CVReport& r, const std::string& path) {
    json j;
    j["schema_version"] = 1;
    j["folds"] = json::array();
    for (const auto& f : r.folds)
        j["folds"].push_back({{"train", metrics_json(f.train_metrics)},
                              {"test", metrics_json(f.test_metrics)},
                              {"strong_count", f.strong_count},
                              {"n_train", f.n_train},
                              {"n_test", f.n_test}});
    j["train_mean"] = metrics_json(r.train_mean);
    j["train_sd"] = metrics_json(r.train_sd);
    j["test_mean"] = metrics_json(r.test_mean);
    j["test_sd"] = metrics_json(r.test_sd);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

void save_cv_report_csv(const CVReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "fold,split,r2,mae,rmse,strong_count,n\n";
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
        const auto& fold = r.folds[f];
        out << f << ",train," << dtos(fold.train_metrics.r2) << ',' << dtos(fold.train_metrics.mae)
            << ',' << dtos(fold.train_metrics.rmse) << ',' << fold.strong_count << ','
            << fold.n_train << '\n';
        out << f << ",test," << dtos(fold.test_metrics.r2) << ',' << dtos(fold.test_metrics.mae)
            << ',' << dtos(fold.test_metrics.rmse) << ',' << fold.strong_count << ','
            << fold.n_test << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

WeightedNetwork predict_network(const DecoderModel& m, double age, const NCVector& ncs,
                                const std::vector<std::string>& node_labels) {
    const std::size_t n = node_labels.size();
    if (upper_tri_count(n) != static_cast<std::size_t>(m.n_outputs()))
        throw Error("predict_network: " + std::to_string(n) + " nodes need " +
                    std::to_string(upper_tri_count(n)) + " outputs, model has " +
                    std::to_string(m.n_outputs()));
    const Eigen::VectorXd y = forward(m, make_decoder_input(age, ncs));
    std::vector<double> upper(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i)
        upper[static_cast<std::size_t>(i)] = std::clamp(y[i], 0.0, 1.0);
    return unflatten_upper(upper, node_labels);
}

void save_model(const DecoderModel& m, const std::string& bin_path, const std::string& json_path) {
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + bin_path);
    const char magic[8] = {'G', 'A', 'N', 'O', 'R', 'M', 'N', 'N'};
    out.write(magic, 8);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint32_t n_layers = static_cast<std::uint32_t>(m.layers.size());
    out.write(reinterpret_cast<const char*>(&n_layers), 4);
    for (int d : m.layers) {
        const std::uint32_t u = static_cast<std::uint32_t>(d);
        out.write(reinterpret_cast<const char*>(&u), 4);
    }
    auto write_doubles = [&](const double* p, std::size_t count) {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * 8));
    };
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        write_doubles(m.W[l].data(), static_cast<std::size_t>(m.W[l].size()));
        write_doubles(m.b[l].data(), static_cast<std::size_t>(m.b[l].size()));
    }
    write_doubles(m.in_mean.data(), static_cast<std::size_t>(m.in_mean.size()));
    write_doubles(m.in_std.data(), static_cast<std::size_t>(m.in_std.size()));
    if (!out) throw Error("write failed: " + bin_path);
    out.close();

    json j;
    j["schema_version"] = 1;
    j["layers"] = m.layers;
    j["seed"] = m.seed;
    j["strong_count"] = m.strong_count;
    j["input_order"] = {"age", "cpl", "ge", "cc", "le", "m", "bc", "pc"};
    j["in_mean"] = std::vector<double>(m.in_mean.data(), m.in_mean.data() + m.in_mean.size());
    j["in_std"] = std::vector<double>(m.in_std.data(), m.in_std.data() + m.in_std.size());
    std::ofstream jout(json_path, std::ios::trunc);
    if (!jout) throw Error("cannot open for writing: " + json_path);
    jout << j.dump(2) << '\n';
    if (!jout) throw Error("write failed: " + json_path);
}

DecoderModel load_model(const std::string& bin_path, const std::string& json_path) {
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw Error("cannot open: " + bin_path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "GANORMNN", 8) != 0)
        throw Error("not a decoder model file: " + bin_path);
    std::uint32_t version = 0, n_layers = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&n_layers), 4);
    if (!in || version != 1) throw Error("unsupported model version in " + bin_path);
    if (n_layers < 2 || n_layers > 64) throw Error("corrupt layer count in " + bin_path);
    DecoderModel m;
    m.layers.resize(n_layers);
    for (auto& d : m.layers) {
        std::uint32_t u = 0;
        in.read(reinterpret_cast<char*>(&u), 4);
        d = static_cast<int>(u);
    }
    auto read_doubles = [&](double* p, std::size_t count) {
        in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * 8));
    };
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
        Eigen::MatrixXd W(m.layers[l + 1], m.layers[l]);
        Eigen::VectorXd b(m.layers[l + 1]);
        read_doubles(W.data(), static_cast<std::size_t>(W.size()));
        read_doubles(b.data(), static_cast<std::size_t>(b.size()));
        m.W.push_back(std::move(W));
        m.b.push_back(std::move(b));
    }
    m.in_mean.resize(m.layers.front());
    m.in_std.resize(m.layers.front());
    read_doubles(m.in_mean.data(), static_cast<std::size_t>(m.in_mean.size()));
    read_doubles(m.in_std.data(), static_cast<std::size_t>(m.in_std.size()));
    if (!in) throw Error("truncated model file: " + bin_path);

    std::ifstream jin(json_path);
    if (!jin) throw Error("cannot open: " + json_path);
    json j;
    try {
        jin >> j;
    } catch (const json::exception& e) {
        throw Error("invalid model metadata in " + json_path + ": " + e.what());
    }
    if (j.value("schema_version", 0) != 1)
        throw Error("unsupported model metadata version in " + json_path);
    if (j.at("layers").get<std::vector<int>>() != m.layers)
        throw Error("model metadata disagrees with binary layer sizes");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.strong_count = j.at("strong_count").get<int>();
    return m;
}

}  // namespace ganorm
