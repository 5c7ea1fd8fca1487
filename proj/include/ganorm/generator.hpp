#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ganorm/graphmetrics.hpp"
#include "ganorm/network.hpp"

namespace ganorm {

/// One decoder training pair: (age + the seven NCs) -> upper-triangle FC weights.
struct TrainingExample {
    std::string subject_id;
    Eigen::VectorXd input;   // size 8: age, cpl, ge, cc, le, m, bc, pc
    Eigen::VectorXd target;  // upper triangle, row-major above the diagonal
};

/// Assemble the 8-vector in canonical input order.
Eigen::VectorXd make_decoder_input(double age, const NCVector& ncs);

struct EmbeddingReport {
    Eigen::MatrixXd r;  // inputs x targets
    Eigen::MatrixXd p;
    int strong_count = 0;  // |r| > 0.6 and p < 0.05
};

EmbeddingReport select_embedding(const std::vector<TrainingExample>& examples);

/// Fully connected net: hidden layers ReLU, output linear. Inputs are z-scored
/// by the stored training statistics inside forward().
struct DecoderModel {
    std::vector<int> layers;            // e.g. [8, 1368, h2, targets]
    std::vector<Eigen::MatrixXd> W;     // W[l]: layers[l+1] x layers[l]
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd in_mean, in_std;    // z-scoring of raw inputs
    std::uint64_t seed = 0;
    int strong_count = 0;

    int n_inputs() const { return layers.front(); }
    int n_outputs() const { return layers.back(); }
};

/// Layers [8, 1368, clamp(strong_count, 32, 1368), n_outputs]; He-uniform
/// weights from the seed, zero biases, identity input scaling.
DecoderModel build_model(int strong_count, std::uint64_t seed, int n_outputs = 171);

/// Arbitrary layer sizes (testing and sweeps); same init rules.
DecoderModel build_model_with_layers(const std::vector<int>& layers, std::uint64_t seed);

/// Raw input -> z-score -> affine/ReLU stack -> linear output. No clipping.
Eigen::VectorXd forward(const DecoderModel& m, const Eigen::VectorXd& raw_input);

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 32;
    int max_epochs = 500;
    int patience = 20;          // early-stop patience on the validation split
    double val_fraction = 0.1;  // 0 disables early stopping
    std::uint64_t seed = 0;
};

struct TrainTrace {
    std::vector<double> train_mse;  // per epoch
    std::vector<double> val_mse;    // empty when no validation split
    int best_epoch = 0;
    int epochs_run = 0;
};

/// Adam on mean-squared error over all outputs; deterministic given the seed.
/// Sets the model's z-scoring statistics from the training portion.
TrainTrace train(DecoderModel& m, const std::vector<TrainingExample>& examples,
                 const TrainConfig& cfg);

/// Full-batch MSE loss with its exact parameter gradients: the training
/// backward pass exposed for gradient diagnostics. Gradients are resized to
/// match the model's layer shapes.
double loss_with_gradients(const DecoderModel& m, const std::vector<TrainingExample>& examples,
                           std::vector<Eigen::MatrixXd>& grad_w,
                           std::vector<Eigen::VectorXd>& grad_b);

struct EvalMetrics {
    double r2 = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
};

/// Metrics over all flattened (example x output) entries.
EvalMetrics evaluate(const DecoderModel& m, const std::vector<TrainingExample>& examples);

struct CVFold {
    EvalMetrics train_metrics;
    EvalMetrics test_metrics;
    int strong_count = 0;
    std::size_t n_train = 0, n_test = 0;
};

struct CVReport {
    std::vector<CVFold> folds;
    EvalMetrics train_mean, train_sd;
    EvalMetrics test_mean, test_sd;
};

/// Subject-level k-fold split (examples sharing a subject id stay together);
/// each fold selects its embedding, builds and trains a fresh model.
CVReport kfold_cv(const std::vector<TrainingExample>& examples, int k, const TrainConfig& cfg);

void save_cv_report_json(const CVReport& r, const std::string& path);
void save_cv_report_csv(const CVReport& r, const std::string& path);

/// Forward pass, clip to [0,1], unflatten into a symmetric zero-diagonal network.
WeightedNetwork predict_network(const DecoderModel& m, double age, const NCVector& ncs,
                                const std::vector<std::string>& node_labels);

/// Binary parameters plus a JSON sidecar (layers, seed, scaling, strong_count).
void save_model(const DecoderModel& m, const std::string& bin_path,
                const std::string& json_path);
DecoderModel load_model(const std::string& bin_path, const std::string& json_path);

}  // namespace ganorm
