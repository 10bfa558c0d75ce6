#include "gluekit/two_layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gluekit/error.hpp"

namespace gluekit {

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double sd, RngStream rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = sd * rng.normal();
  return m;
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct Pass {
  Matrix Z;  // pre-activations, B x N
  Matrix S;  // features
  Matrix F;  // outputs, B x K
};

Pass run_forward(const TwoLayerNet& net, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != net.input_dim())
    throw DataError("input dimension does not match the network");
  Pass p;
  p.Z.noalias() = X * net.W.transpose();
  p.S = p.Z.unaryExpr([&](double z) { return net.activation(z); });
  const double s = net.scale_alpha / std::sqrt(static_cast<double>(net.hidden()));
  p.F.noalias() = s * p.S * net.readouts.transpose();
  return p;
}

// y - f for MSE, y01 - logistic(f) for BCE
Matrix residual(const Matrix& F, const Matrix& labels, Loss loss) {
  if (loss == Loss::Mse) return labels - F;
  Matrix r(F.rows(), F.cols());
  for (Eigen::Index i = 0; i < F.rows(); ++i)
    for (Eigen::Index j = 0; j < F.cols(); ++j) r(i, j) = 0.5 * (labels(i, j) + 1.0) - logistic(F(i, j));
  return r;
}

Gradients directions(const TwoLayerNet& net, const Pass& p, const LabeledData& data, Loss loss) {
  const Matrix R = residual(p.F, data.labels, loss);
  const double n = static_cast<double>(data.X.rows());
  const double K = static_cast<double>(net.num_readouts());
  const double s = 1.0 / (net.scale_alpha * std::sqrt(static_cast<double>(net.hidden())) * n);
  Matrix M = R * net.readouts;
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) M(i, j) *= net.activation.derivative(p.Z(i, j));
  Gradients g;
  g.G.noalias() = (s / K) * M.transpose() * data.X;
  g.g.noalias() = s * R.transpose() * p.S;
  return g;
}

void check_labels(const TwoLayerNet& net, const LabeledData& data) {
  if (data.labels.rows() != data.X.rows() || static_cast<std::size_t>(data.labels.cols()) != net.num_readouts())
    throw DataError("label matrix must be n x K");
}

Eigen::MatrixXd gram(const Matrix& A) { return A * A.transpose(); }

// Zero feature vectors (dead ReLU units on every input) are dropped.
ManifoldEnsemble feature_ensemble(const Matrix& S, const std::vector<int>& owner, std::size_t& dropped) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < S.rows(); ++i)
    if (S.row(i).squaredNorm() > 0) keep.push_back(i);
  dropped = static_cast<std::size_t>(S.rows()) - keep.size();
  Matrix kept(static_cast<Eigen::Index>(keep.size()), S.cols());
  std::vector<std::int64_t> labels;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    kept.row(static_cast<Eigen::Index>(k)) = S.row(keep[k]);
    labels.push_back(owner[keep[k]]);
  }
  return build_ensemble(kept, labels);
}

}  // namespace

TwoLayerNet init_two_layer(std::size_t d, std::size_t N, std::size_t K, double alpha, Activation activation,
                           const RngStream& rng) {
  if (d == 0 || N == 0 || K == 0) throw ConfigError("network sizes must be positive");
  if (!(alpha > 0)) throw ConfigError("alpha must be positive");
  TwoLayerNet net;
  const double sd = 1.0 / std::sqrt(static_cast<double>(N));
  net.W = gaussian(N, d, sd, rng.substream(1));
  net.readouts = gaussian(K, N, sd, rng.substream(2));
  net.scale_alpha = alpha;
  net.activation = activation;
  net.W0 = net.W;
  net.readouts0 = net.readouts;
  return net;
}

LabeledData label_ensemble(const ManifoldEnsemble& ensemble, const Matrix& manifold_labels) {
  if (static_cast<std::size_t>(manifold_labels.rows()) != ensemble.num_manifolds())
    throw DataError("need one label row per manifold");
  LabeledData out;
  out.X = ensemble.stacked();
  out.owner = ensemble.row_owner();
  out.num_manifolds = ensemble.num_manifolds();
  out.labels.resize(out.X.rows(), manifold_labels.cols());
  for (Eigen::Index i = 0; i < out.X.rows(); ++i) out.labels.row(i) = manifold_labels.row(out.owner[i]);
  return out;
}

Matrix forward(const TwoLayerNet& net, const Matrix& X, Matrix* features) {
  Pass p = run_forward(net, X);
  if (features) *features = std::move(p.S);
  return p.F;
}

double loss_value(const TwoLayerNet& net, const LabeledData& data, Loss loss) {
  check_labels(net, data);
  const Matrix F = forward(net, data.X);
  double total = 0.0;
  for (Eigen::Index i = 0; i < F.rows(); ++i)
    for (Eigen::Index j = 0; j < F.cols(); ++j) {
      const double f = F(i, j), y = data.labels(i, j);
      if (loss == Loss::Mse) {
        total += 0.5 * (y - f) * (y - f);
      } else {
        const double y01 = 0.5 * (y + 1.0);
        total += softplus(f) - y01 * f;
      }
    }
  const double a = net.scale_alpha;
  return total / (a * a * static_cast<double>(F.size()));
}

Gradients update_directions(const TwoLayerNet& net, const LabeledData& data, Loss loss) {
  check_labels(net, data);
  return directions(net, run_forward(net, data.X), data, loss);
}

void grad_step(TwoLayerNet& net, const LabeledData& data, const TrainConfig& config) {
  const Gradients g = update_directions(net, data, config.loss);
  const double lr = config.eta * std::sqrt(static_cast<double>(net.hidden()));
  net.W += lr * g.G;
  if (config.readout_lr_factor != 0.0) net.readouts += config.readout_lr_factor * lr * g.g;
}

double accuracy(const TwoLayerNet& net, const LabeledData& data) {
  check_labels(net, data);
  const Matrix F = forward(net, data.X);
  const auto correct = (F.array() * data.labels.array() > 0).count();
  return static_cast<double>(correct) / static_cast<double>(F.size());
}

double activation_stability(const TwoLayerNet& net, const Matrix& X) {
  Matrix S;
  forward(net, X, &S);
  return static_cast<double>((S.array() > 0).count()) / static_cast<double>(S.size());
}

double weight_change(const Matrix& Wt, const Matrix& W0) {
  const double n0 = W0.norm();
  if (n0 == 0) throw NumericalError("initial weights are zero");
  return (Wt - W0).norm() / n0;
}

Eigen::MatrixXd ntk_gram(const Matrix& W, const Matrix& readouts, double alpha, const Activation& activation,
                         const Matrix& X, double c) {
  const double N = static_cast<double>(W.rows());
  const double K = static_cast<double>(readouts.rows());
  const Matrix Z = X * W.transpose();
  const Eigen::RowVectorXd mean_readout = readouts.colwise().mean();
  Matrix A(Z.rows(), Z.cols());
  Matrix S(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      A(i, j) = mean_readout(j) * activation.derivative(Z(i, j));
      S(i, j) = activation(Z(i, j));
    }
  const double s = alpha * alpha / N;
  Eigen::MatrixXd theta = s * gram(A).cwiseProduct(gram(X));
  if (c != 0.0) theta += (c * c * s / K) * gram(S);
  return theta;
}

Eigen::MatrixXd ntk_gram(const TwoLayerNet& net, const Matrix& X, double c) {
  return ntk_gram(net.W, net.readouts, net.scale_alpha, net.activation, X, c);
}

double hsic(const Eigen::MatrixXd& K1, const Eigen::MatrixXd& K2) {
  if (K1.rows() != K2.rows() || K1.cols() != K2.cols() || K1.rows() != K1.cols())
    throw DataError("kernel matrices must be square and of equal size");
  const Eigen::Index n = K1.rows();
  if (n < 2) throw DataError("need at least two samples");
  // tr(K1 H K2 H) = <H K1 H, K2>_F with H the centering matrix
  Eigen::MatrixXd C = K1;
  C.rowwise() -= C.colwise().mean();
  C.colwise() -= C.rowwise().mean();
  const double m = static_cast<double>(n - 1);
  return C.cwiseProduct(K2).sum() / (m * m);
}

double cka(const Eigen::MatrixXd& K1, const Eigen::MatrixXd& K2) {
  const double den = std::sqrt(hsic(K1, K1) * hsic(K2, K2));
  if (!(den > 0)) throw NumericalError("CKA of a constant kernel");
  return hsic(K1, K2) / den;
}

double frobenius_cosine(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const double den = A.norm() * B.norm();
  if (!(den > 0)) throw NumericalError("cosine of a zero matrix");
  return A.cwiseProduct(B).sum() / den;
}

AlignmentMetrics alignment_metrics(const Eigen::MatrixXd& ntk_t, const Eigen::MatrixXd& ntk_0,
                                   const Eigen::MatrixXd& rep_t, const Eigen::MatrixXd& rep_0,
                                   const Matrix& labels) {
  AlignmentMetrics m;
  m.ntk_change = (ntk_t - ntk_0).norm() / ntk_0.norm();
  m.kernel_alignment = frobenius_cosine(ntk_t, ntk_0);
  m.rep_similarity = frobenius_cosine(rep_t, rep_0);
  const Eigen::MatrixXd yy = gram(labels);
  m.cka_rep_label = cka(rep_t, yy);
  m.cka_ntk_label = cka(ntk_t, yy);
  return m;
}

std::vector<std::size_t> default_checkpoints(std::size_t epochs, std::size_t count) {
  std::vector<std::size_t> out{0};
  if (epochs == 0) return out;
  const double top = std::log(static_cast<double>(epochs));
  for (std::size_t k = 0; k < count; ++k) {
    const double u = count == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(count - 1);
    out.push_back(static_cast<std::size_t>(std::llround(std::exp(u * top))));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MetricTrace train(TwoLayerNet& net, const LabeledData& train_set, const LabeledData& test_set,
                  const TrainConfig& config) {
  check_labels(net, train_set);
  check_labels(net, test_set);
  if (!(config.eta >= 0)) throw ConfigError("learning rate must be non-negative");

  std::vector<std::size_t> marks = config.checkpoint_epochs.empty() ? default_checkpoints(config.epochs)
                                                                    : config.checkpoint_epochs;
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  marks.erase(std::remove_if(marks.begin(), marks.end(), [&](std::size_t e) { return e > config.epochs; }),
              marks.end());

  MetricTrace trace;
  trace.eta_bar = config.eta / net.scale_alpha;

  const double c = config.readout_lr_factor;
  const Eigen::MatrixXd ntk0 = ntk_gram(net.W0, net.readouts0, net.scale_alpha, net.activation, test_set.X, c);
  Matrix S0;
  {
    TwoLayerNet init = net;
    init.W = net.W0;
    init.readouts = net.readouts0;
    forward(init, test_set.X, &S0);
  }
  const Eigen::MatrixXd rep0 = gram(S0);
  const RngStream glue_rng(config.seed, 7);

  auto record = [&](std::size_t epoch, bool last) -> bool {
    Checkpoint cp;
    cp.epoch = epoch;
    cp.train_accuracy = accuracy(net, train_set);
    cp.test_accuracy = accuracy(net, test_set);
    cp.loss = loss_value(net, train_set, config.loss);
    if (!std::isfinite(cp.loss)) return false;
    cp.weight_change = weight_change(net.W, net.W0);
    Matrix S;
    forward(net, test_set.X, &S);
    cp.activation_stability = static_cast<double>((S.array() > 0).count()) / static_cast<double>(S.size());
    cp.align = alignment_metrics(ntk_gram(net, test_set.X, c), ntk0, gram(S), rep0, test_set.labels);
    const bool endpoint = epoch == 0 || last;
    if (!config.glue_endpoints_only || endpoint) {
      GlueOptions opts;
      opts.n_draws = last ? config.glue_draws_final : config.glue_draws;
      opts.threads = config.threads;
      if (opts.n_draws > 0) {
        std::size_t dropped = 0;
        const auto ensemble = feature_ensemble(S, test_set.owner, dropped);
        if (ensemble.num_manifolds() < test_set.num_manifolds)
          throw NumericalError("every feature vector of a manifold is zero");
        cp.glue = estimate_geometry(ensemble, opts, glue_rng);
        if (dropped > 0)
          cp.glue->warnings.push_back(std::to_string(dropped) + " zero feature vectors left out of the analysis");
      }
    }
    trace.checkpoints.push_back(std::move(cp));
    return true;
  };

  std::size_t next = 0;
  for (std::size_t epoch = 0;; ++epoch) {
    if (next < marks.size() && marks[next] == epoch) {
      bool ok = false;
      try {
        ok = record(epoch, epoch == marks.back());
      } catch (const NumericalError&) {
        if (epoch == 0) throw;
      }
      if (!ok) {
        trace.diverged = true;
        break;
      }
      ++next;
    }
    if (epoch == config.epochs || next == marks.size()) break;
    grad_step(net, train_set, config);
    if (!net.W.allFinite() || !net.readouts.allFinite()) {
      trace.diverged = true;
      break;
    }
  }
  return trace;
}

}  // namespace gluekit
