#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gluekit/activation.hpp"
#include "gluekit/glue.hpp"
#include "gluekit/model.hpp"
#include "gluekit/rng.hpp"

namespace gluekit {

/// f_j(x) = (alpha / sqrt N) a_j^T sigma(W x) for readouts j = 1..K.
struct TwoLayerNet {
  Matrix W;         // N x d
  Matrix readouts;  // K x N
  double scale_alpha = 1.0;
  Activation activation;
  Matrix W0;
  Matrix readouts0;

  std::size_t hidden() const { return static_cast<std::size_t>(W.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(W.cols()); }
  std::size_t num_readouts() const { return static_cast<std::size_t>(readouts.rows()); }
};

/// W and readouts with i.i.d. N(0, 1/N) entries.
TwoLayerNet init_two_layer(std::size_t d, std::size_t N, std::size_t K, double alpha, Activation activation,
                           const RngStream& rng);

enum class Loss { Mse, Bce };

struct TrainConfig {
  double eta = 1.0;
  double readout_lr_factor = 0.0;
  Loss loss = Loss::Mse;
  std::size_t epochs = 1000;
  /// Empty: epoch 0 plus 50 log-uniform epochs.
  std::vector<std::size_t> checkpoint_epochs;
  std::size_t glue_draws = 100;
  std::size_t glue_draws_final = 200;
  /// Skip the GLUE analysis at intermediate checkpoints.
  bool glue_endpoints_only = false;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Inputs with one +-1 label per readout; `owner` maps rows to manifolds.
struct LabeledData {
  Matrix X;       // n x d
  Matrix labels;  // n x K, entries +-1
  std::vector<int> owner;
  std::size_t num_manifolds = 0;
};

/// Rows of the ensemble, labeled by manifold_labels (P x K, +-1).
LabeledData label_ensemble(const ManifoldEnsemble& ensemble, const Matrix& manifold_labels);

/// Per-readout outputs (B x K); hidden features written to `features` if given.
Matrix forward(const TwoLayerNet& net, const Matrix& X, Matrix* features = nullptr);

/// Scaled loss (1/alpha^2) mean_i mean_j l(f_j(x_i), y_ij).
double loss_value(const TwoLayerNet& net, const LabeledData& data, Loss loss);

struct Gradients {
  Matrix G;  // N x d, W update direction
  Matrix g;  // K x N, readout update directions
};

/// The update directions of one full-batch step (before multiplying by eta sqrt N).
Gradients update_directions(const TwoLayerNet& net, const LabeledData& data, Loss loss);

/// W += eta sqrt(N) G; a_j += c eta sqrt(N) g_j.
void grad_step(TwoLayerNet& net, const LabeledData& data, const TrainConfig& config);

double accuracy(const TwoLayerNet& net, const LabeledData& data);

double activation_stability(const TwoLayerNet& net, const Matrix& X);
double weight_change(const Matrix& Wt, const Matrix& W0);

/// NTK Gram of the readout-averaged output; readout term scaled by c^2.
Eigen::MatrixXd ntk_gram(const TwoLayerNet& net, const Matrix& X, double c);
Eigen::MatrixXd ntk_gram(const Matrix& W, const Matrix& readouts, double alpha, const Activation& activation,
                         const Matrix& X, double c);

double hsic(const Eigen::MatrixXd& K1, const Eigen::MatrixXd& K2);
double cka(const Eigen::MatrixXd& K1, const Eigen::MatrixXd& K2);
/// <A, B>_F / (|A| |B|)
double frobenius_cosine(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct AlignmentMetrics {
  double ntk_change = 0.0;
  double kernel_alignment = 0.0;
  double rep_similarity = 0.0;
  double cka_rep_label = 0.0;
  double cka_ntk_label = 0.0;
};

/// Kernel and representation alignment of time t against time 0 and labels.
AlignmentMetrics alignment_metrics(const Eigen::MatrixXd& ntk_t, const Eigen::MatrixXd& ntk_0,
                                   const Eigen::MatrixXd& rep_t, const Eigen::MatrixXd& rep_0,
                                   const Matrix& labels);

struct Checkpoint {
  std::size_t epoch = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double loss = 0.0;
  double weight_change = 0.0;
  double activation_stability = 0.0;
  AlignmentMetrics align;
  std::optional<GlueReport> glue;
};

struct MetricTrace {
  std::vector<Checkpoint> checkpoints;
  double eta_bar = 0.0;
  bool diverged = false;
};

std::vector<std::size_t> default_checkpoints(std::size_t epochs, std::size_t count = 50);

/// Full-batch training with metrics at checkpoints (GLUE on test features).
MetricTrace train(TwoLayerNet& net, const LabeledData& train_set, const LabeledData& test_set,
                  const TrainConfig& config);

}  // namespace gluekit
