#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <vector>

#include "ganorm/common.hpp"
#include "ganorm/generator.hpp"
#include "ganorm/stats.hpp"
#include "oracles.hpp"

using namespace ganorm;

namespace {

std::vector<TrainingExample> random_examples(int n, int in_dim, int out_dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TrainingExample> ex(n);
    for (int i = 0; i < n; ++i) {
        ex[i].subject_id = "s" + std::to_string(i);
        ex[i].input = Eigen::VectorXd::NullaryExpr(in_dim, [&](Eigen::Index) { return rng.next_gaussian(); });
        ex[i].target =
            Eigen::VectorXd::NullaryExpr(out_dim, [&](Eigen::Index) { return rng.next_double(); });
    }
    return ex;
}

// Targets are a fixed affine map of the inputs: learnable to arbitrary precision.
std::vector<TrainingExample> affine_examples(int n, int in_dim, int out_dim, std::uint64_t seed) {
    Rng map_rng(seed ^ 0xA11FE);
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
        out_dim, in_dim, [&](Eigen::Index, Eigen::Index) { return 0.3 * map_rng.next_gaussian(); });
    Eigen::VectorXd c =
        Eigen::VectorXd::NullaryExpr(out_dim, [&](Eigen::Index) { return map_rng.next_double(); });
    auto ex = random_examples(n, in_dim, out_dim, seed);
    for (auto& e : ex) e.target = a * e.input + c;
    return ex;
}

}  // namespace

TEST_CASE("upper triangle indexing is a bijection") {
    const std::size_t n = 19;
    CHECK(upper_tri_count(n) == 171);
    std::vector<int> seen(171, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto k = upper_tri_index(i, j, n);
            REQUIRE(k < 171);
            ++seen[k];
            const auto [bi, bj] = upper_tri_pair(k, n);
            CHECK(bi == i);
            CHECK(bj == j);
        }
    for (int c : seen) CHECK(c == 1);
    CHECK(upper_tri_index(0, 1, n) == 0);
    CHECK(upper_tri_index(0, 18, n) == 17);
    CHECK(upper_tri_index(1, 2, n) == 18);
    CHECK(upper_tri_index(17, 18, n) == 170);
}

TEST_CASE("flatten/unflatten round trip") {
    Rng rng(3);
    auto net = oracle::random_graph(7, 0.8, rng);
    auto flat = flatten_upper(net);
    REQUIRE(flat.size() == upper_tri_count(7));
    auto back = unflatten_upper(flat, net.node_labels);
    CHECK((back.weights - net.weights).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.node_labels == net.node_labels);
    auto flat2 = flatten_upper(back);
    CHECK(flat == flat2);
}

TEST_CASE("decoder input vector order") {
    NCVector ncs;
    ncs.cpl = 1.0;
    ncs.ge = 2.0;
    ncs.cc = 3.0;
    ncs.le = 4.0;
    ncs.m = 5.0;
    ncs.bc = 6.0;
    ncs.pc = 7.0;
    auto v = make_decoder_input(33.5, ncs);
    REQUIRE(v.size() == 8);
    CHECK(v[0] == 33.5);
    for (int k = 1; k <= 7; ++k) CHECK(v[k] == static_cast<double>(k));
}

TEST_CASE("embedding selection against reference correlation") {
    // Reference pair frozen from an independent statistics package.
    const std::vector<double> xs = {1, 2, 3, 4, 5, 6.5, 8, 9.2};
    const std::vector<double> ys = {1.1, 2.3, 2.7, 4.4, 4.9, 6.9, 7.7, 9.9};
    auto c = pearson(xs, ys);
    CHECK(c.r == doctest::Approx(0.993089192113007).epsilon(1e-12));
    CHECK(c.p == doctest::Approx(8.208669090605617e-07).epsilon(1e-9));

    Rng rng(12);
    std::vector<TrainingExample> ex(8);
    for (int i = 0; i < 8; ++i) {
        ex[i].subject_id = "s" + std::to_string(i);
        ex[i].input = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return rng.next_gaussian(); });
        ex[i].input[0] = xs[i];
        ex[i].input[7] = 3.3;  // constant channel
        ex[i].target = Eigen::VectorXd::Zero(3);
        ex[i].target[0] = ys[i];
        ex[i].target[1] = ex[i].input[1];  // perfectly correlated
        ex[i].target[2] = -1.0;            // constant target
    }
    auto rep = select_embedding(ex);
    REQUIRE(rep.r.rows() == 8);
    REQUIRE(rep.r.cols() == 3);
    CHECK(rep.r(0, 0) == doctest::Approx(0.993089192113007).epsilon(1e-12));
    CHECK(rep.p(0, 0) == doctest::Approx(8.208669090605617e-07).epsilon(1e-9));
    CHECK(rep.r(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    // Constant rows/columns carry no signal by convention.
    CHECK(rep.r(7, 0) == 0.0);
    CHECK(rep.p(7, 0) == 1.0);
    CHECK(rep.r(3, 2) == 0.0);
    CHECK(rep.p(3, 2) == 1.0);
    CHECK(rep.strong_count >= 2);  // (0,0) and (1,1) at minimum

    std::vector<TrainingExample> two(ex.begin(), ex.begin() + 2);
    CHECK_THROWS_AS(select_embedding(two), Error);
}

TEST_CASE("model construction and He init") {
    auto m = build_model(5, 42);
    REQUIRE(m.layers == std::vector<int>{8, 1368, 32, 171});
    CHECK(m.strong_count == 5);
    auto wide = build_model(2000, 42);
    CHECK(wide.layers == std::vector<int>{8, 1368, 1368, 171});
    auto mid = build_model(100, 42);
    CHECK(mid.layers == std::vector<int>{8, 1368, 100, 171});

    REQUIRE(m.W.size() == 3);
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        CHECK(m.W[l].rows() == m.layers[l + 1]);
        CHECK(m.W[l].cols() == m.layers[l]);
        const double limit = std::sqrt(6.0 / static_cast<double>(m.layers[l]));
        CHECK(m.W[l].cwiseAbs().maxCoeff() <= limit);
        // A uniform draw this size essentially fills the range.
        CHECK(m.W[l].cwiseAbs().maxCoeff() > 0.8 * limit);
        CHECK(m.b[l].cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((m.in_mean.array() == 0.0).all());
    CHECK((m.in_std.array() == 1.0).all());

    auto same = build_model(5, 42);
    for (std::size_t l = 0; l < m.W.size(); ++l)
        CHECK((m.W[l] - same.W[l]).cwiseAbs().maxCoeff() == 0.0);
    auto other = build_model(5, 43);
    CHECK((m.W[0] - other.W[0]).cwiseAbs().maxCoeff() > 0.0);

    CHECK_THROWS_AS(build_model_with_layers({8}, 1), Error);
    CHECK_THROWS_AS(build_model_with_layers({8, 0, 3}, 1), Error);
}

TEST_CASE("forward pass matches a scalar reimplementation") {
    auto m = build_model_with_layers({3, 4, 2}, 9);
    m.in_mean << 0.5, -1.0, 2.0;
    m.in_std << 2.0, 0.5, 1.5;
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.3;

    Eigen::VectorXd scaled(3);
    for (int i = 0; i < 3; ++i) scaled[i] = (x[i] - m.in_mean[i]) / m.in_std[i];
    std::vector<double> hidden(4, 0.0);
    for (int r = 0; r < 4; ++r) {
        double acc = m.b[0][r];
        for (int c = 0; c < 3; ++c) acc += m.W[0](r, c) * scaled[c];
        hidden[r] = std::max(0.0, acc);
    }
    Eigen::VectorXd expect(2);
    for (int r = 0; r < 2; ++r) {
        double acc = m.b[1][r];
        for (int c = 0; c < 4; ++c) acc += m.W[1](r, c) * hidden[c];
        expect[r] = acc;
    }
    auto got = forward(m, x);
    CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("analytic gradients match central differences") {
    auto m = build_model_with_layers({8, 6, 5, 4}, 77);
    Rng rng(555);
    m.in_mean = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return 0.2 * rng.next_gaussian(); });
    m.in_std = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return 0.5 + rng.next_double(); });
    auto ex = random_examples(7, 8, 4, 31);

    std::vector<Eigen::MatrixXd> gw;
    std::vector<Eigen::VectorXd> gb;
    const double loss0 = loss_with_gradients(m, ex, gw, gb);
    CHECK(loss0 > 0.0);
    REQUIRE(gw.size() == m.W.size());

    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
    double max_rel = 0.0;
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n)); };
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        for (Eigen::Index r = 0; r < m.W[l].rows(); ++r)
            for (Eigen::Index c = 0; c < m.W[l].cols(); ++c) {
                DecoderModel pert = m;
                const double h = 1e-5 * (1.0 + std::abs(m.W[l](r, c)));
                pert.W[l](r, c) = m.W[l](r, c) + h;
                const double up = loss_with_gradients(pert, ex, dw, db);
                pert.W[l](r, c) = m.W[l](r, c) - h;
                const double dn = loss_with_gradients(pert, ex, dw, db);
                max_rel = std::max(max_rel, rel(gw[l](r, c), (up - dn) / (2.0 * h)));
            }
        for (Eigen::Index r = 0; r < m.b[l].size(); ++r) {
            DecoderModel pert = m;
            const double h = 1e-5;
            pert.b[l][r] = m.b[l][r] + h;
            const double up = loss_with_gradients(pert, ex, dw, db);
            pert.b[l][r] = m.b[l][r] - h;
            const double dn = loss_with_gradients(pert, ex, dw, db);
            max_rel = std::max(max_rel, rel(gb[l][r], (up - dn) / (2.0 * h)));
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("training is deterministic and reduces the loss") {
    auto ex = affine_examples(40, 8, 10, 2026);
    TrainConfig cfg;
    cfg.max_epochs = 60;
    cfg.batch = 8;
    cfg.val_fraction = 0.2;
    cfg.patience = 60;
    cfg.seed = 99;

    auto m1 = build_model_with_layers({8, 24, 10}, 7);
    const auto before = evaluate(m1, ex);
    auto tr1 = train(m1, ex, cfg);
    auto m2 = build_model_with_layers({8, 24, 10}, 7);
    auto tr2 = train(m2, ex, cfg);

    for (std::size_t l = 0; l < m1.W.size(); ++l) {
        CHECK((m1.W[l] - m2.W[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((m1.b[l] - m2.b[l]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(tr1.train_mse == tr2.train_mse);
    CHECK(tr1.val_mse == tr2.val_mse);
    REQUIRE(!tr1.train_mse.empty());
    CHECK(tr1.train_mse.back() < tr1.train_mse.front());
    CHECK(!tr1.val_mse.empty());

    const auto after = evaluate(m1, ex);
    CHECK(after.rmse < before.rmse);
    CHECK(after.r2 > before.r2);
    // Z-scoring statistics come from the training portion.
    CHECK((m1.in_std.array() > 0.0).all());
    CHECK(m1.in_mean.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("disabled validation split trains to the last epoch") {
    auto ex = affine_examples(30, 8, 6, 4);
    TrainConfig cfg;
    cfg.max_epochs = 15;
    cfg.batch = 8;
    cfg.val_fraction = 0.0;
    cfg.seed = 1;
    auto m = build_model_with_layers({8, 16, 6}, 2);
    auto tr = train(m, ex, cfg);
    CHECK(tr.val_mse.empty());
    CHECK(tr.epochs_run == 15);
    CHECK(static_cast<int>(tr.train_mse.size()) == 15);
}

TEST_CASE("early stopping respects patience") {
    auto ex = affine_examples(40, 8, 6, 10);
    TrainConfig cfg;
    cfg.max_epochs = 400;
    cfg.batch = 8;
    cfg.val_fraction = 0.25;
    cfg.patience = 5;
    cfg.seed = 3;
    auto m = build_model_with_layers({8, 16, 6}, 11);
    auto tr = train(m, ex, cfg);
    CHECK(tr.epochs_run <= 400);
    CHECK(tr.best_epoch <= tr.epochs_run);
    CHECK(!tr.val_mse.empty());
    // Either converged early or ran out of epochs; both leave a full trace.
    CHECK(static_cast<int>(tr.train_mse.size()) == tr.epochs_run);
}

TEST_CASE("evaluation metrics on exact and constant predictors") {
    auto m = build_model_with_layers({3, 2}, 5);
    auto ex = random_examples(12, 3, 2, 21);
    for (auto& e : ex) e.target = m.W[0] * e.input + m.b[0];
    auto perfect = evaluate(m, ex);
    CHECK(perfect.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(perfect.mae <= 1e-12);
    CHECK(perfect.rmse <= 1e-12);

    auto zero = build_model_with_layers({3, 2}, 5);
    zero.W[0].setZero();
    zero.b[0].setZero();
    auto ex2 = random_examples(12, 3, 2, 22);
    for (auto& e : ex2) e.target = e.target.array() + 2.0;  // mean far from zero
    auto constant = evaluate(zero, ex2);
    CHECK(constant.r2 < 0.0);
    CHECK(constant.rmse > 1.0);
}

TEST_CASE("k-fold cv keeps subjects together") {
    // Subject i contributes i+1 examples; subject-level folds reproduce the
    // multiset {1,2,3,4,5} of test sizes, which example-level splitting cannot.
    std::vector<TrainingExample> ex;
    Rng rng(6);
    for (int s = 0; s < 5; ++s)
        for (int c = 0; c <= s; ++c) {
            TrainingExample e;
            e.subject_id = "subj" + std::to_string(s);
            e.input = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return rng.next_gaussian(); });
            e.target = Eigen::VectorXd::NullaryExpr(4, [&](Eigen::Index) { return rng.next_double(); });
            ex.push_back(e);
        }
    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.batch = 4;
    cfg.val_fraction = 0.0;
    cfg.seed = 13;
    auto rep = kfold_cv(ex, 5, cfg);
    REQUIRE(rep.folds.size() == 5);
    std::vector<std::size_t> test_sizes;
    for (const auto& f : rep.folds) {
        test_sizes.push_back(f.n_test);
        CHECK(f.n_train + f.n_test == ex.size());
    }
    std::sort(test_sizes.begin(), test_sizes.end());
    CHECK(test_sizes == std::vector<std::size_t>{1, 2, 3, 4, 5});

    CHECK_THROWS_AS(kfold_cv(ex, 1, cfg), Error);
    CHECK_THROWS_AS(kfold_cv(ex, 6, cfg), Error);  // more folds than subjects
}

TEST_CASE("cv report aggregates and serializes") {
    auto ex = affine_examples(30, 8, 6, 77);
    TrainConfig cfg;
    cfg.max_epochs = 8;
    cfg.batch = 8;
    cfg.val_fraction = 0.0;
    cfg.seed = 4;
    auto rep = kfold_cv(ex, 3, cfg);
    REQUIRE(rep.folds.size() == 3);
    double mean_r2 = 0.0;
    for (const auto& f : rep.folds) mean_r2 += f.test_metrics.r2;
    mean_r2 /= 3.0;
    CHECK(rep.test_mean.r2 == doctest::Approx(mean_r2).epsilon(1e-12));

    save_cv_report_json(rep, "cv_test.json");
    save_cv_report_csv(rep, "cv_test.csv");
    std::ifstream jf("cv_test.json");
    REQUIRE(jf.good());
    std::string all((std::istreambuf_iterator<char>(jf)), std::istreambuf_iterator<char>());
    jf.close();
    CHECK(all.find("test_mean") != std::string::npos);
    std::ifstream cf("cv_test.csv");
    std::string header;
    std::getline(cf, header);
    cf.close();
    CHECK(header.find("fold") != std::string::npos);
    std::remove("cv_test.json");
    std::remove("cv_test.csv");
}

TEST_CASE("model serialization round trips bitwise") {
    auto m = build_model_with_layers({8, 14, 9}, 123);
    Rng rng(9);
    m.in_mean = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return rng.next_gaussian(); });
    m.in_std = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return 0.5 + rng.next_double(); });
    m.strong_count = 17;
    save_model(m, "model_test.bin", "model_test.json");
    auto back = load_model("model_test.bin", "model_test.json");

    CHECK(back.layers == m.layers);
    CHECK(back.seed == m.seed);
    CHECK(back.strong_count == 17);
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        CHECK((back.W[l] - m.W[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.b[l] - m.b[l]).cwiseAbs().maxCoeff() == 0.0);
    }
    Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(8, [&](Eigen::Index) { return rng.next_gaussian(); });
    CHECK((forward(back, x) - forward(m, x)).cwiseAbs().maxCoeff() == 0.0);

    // Corrupt magic is rejected.
    {
        std::fstream f("model_test.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_model("model_test.bin", "model_test.json"), Error);
    CHECK_THROWS_AS(load_model("no_such.bin", "model_test.json"), Error);
    std::remove("model_test.bin");
    std::remove("model_test.json");
}

TEST_CASE("predicted networks are clipped symmetric and hollow") {
    const std::size_t nodes = 19;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < nodes; ++i) labels.push_back("e" + std::to_string(i));
    NCVector ncs;
    ncs.cpl = 2.0;
    ncs.ge = 0.5;

    auto m = build_model_with_layers({8, static_cast<int>(upper_tri_count(nodes))}, 3);
    auto net = predict_network(m, 30.0, ncs, labels);
    REQUIRE(net.size() == nodes);
    CHECK(net.node_labels == labels);
    CHECK((net.weights - net.weights.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.weights.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.weights.minCoeff() >= 0.0);
    CHECK(net.weights.maxCoeff() <= 1.0);
    net.check();

    m.b[0].setConstant(50.0);  // saturate above
    auto high = predict_network(m, 30.0, ncs, labels);
    CHECK(high.weights(0, 1) == 1.0);
    m.b[0].setConstant(-50.0);  // saturate below
    auto low = predict_network(m, 30.0, ncs, labels);
    CHECK(low.weights.maxCoeff() == 0.0);

    std::vector<std::string> wrong(labels.begin(), labels.end() - 1);
    CHECK_THROWS_AS(predict_network(m, 30.0, ncs, wrong), Error);
}
