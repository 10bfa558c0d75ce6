#include <doctest.h>

#include <cmath>

#include "gluekit/error.hpp"
#include "gluekit/synth.hpp"
#include "gluekit/two_layer.hpp"

using namespace gluekit;

namespace {

Activation tanh_act() { return activation_from_name("tanh"); }

LabeledData make_data(std::size_t n, std::size_t d, std::size_t K, std::uint64_t seed) {
  RngStream rng(seed);
  LabeledData data;
  data.X = sample_gaussian_matrix(n, d, 1.0 / std::sqrt(double(d)), rng);
  data.labels.resize(n, K);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < K; ++j) data.labels(i, j) = rng.sign();
  for (std::size_t i = 0; i < n; ++i) data.owner.push_back(int(i % 3));
  data.num_manifolds = 3;
  return data;
}

// Scalar output of readout-averaged net, for NTK finite differences.
double mean_output(const TwoLayerNet& net, const Matrix& x) { return forward(net, x).mean(); }

}  // namespace

TEST_CASE("forward matches a naive loop and scales with alpha") {
  const auto net = init_two_layer(7, 11, 3, 1.7, activation_from_name("relu"), RngStream(3));
  const auto data = make_data(5, 7, 3, 4);
  const Matrix F = forward(net, data.X);
  for (int b = 0; b < 5; ++b)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 11; ++k) {
        double z = 0;
        for (int i = 0; i < 7; ++i) z += net.W(k, i) * data.X(b, i);
        s += net.readouts(j, k) * std::max(z, 0.0);
      }
      s *= 1.7 / std::sqrt(11.0);
      CHECK(F(b, j) == doctest::Approx(s).epsilon(1e-12));
    }
  auto doubled = net;
  doubled.scale_alpha *= 2;
  CHECK((forward(doubled, data.X) - 2 * F).norm() < 1e-12 * F.norm());
  CHECK(forward(net, Matrix::Zero(1, 7)).norm() == 0.0);
  CHECK_THROWS_AS(forward(net, Matrix::Zero(2, 6)), DataError);
}

TEST_CASE("update directions match finite differences of the scaled loss") {
  for (Loss loss : {Loss::Mse, Loss::Bce}) {
    auto net = init_two_layer(6, 9, 2, 0.8, tanh_act(), RngStream(5));
    const auto data = make_data(8, 6, 2, 6);
    const Gradients g = update_directions(net, data, loss);
    const double h = 1e-6;
    double err = 0, scale = 0;
    for (int k = 0; k < 9; ++k)
      for (int i = 0; i < 6; ++i) {
        auto p = net, m = net;
        p.W(k, i) += h;
        m.W(k, i) -= h;
        const double fd = -(loss_value(p, data, loss) - loss_value(m, data, loss)) / (2 * h);
        err = std::max(err, std::abs(fd - g.G(k, i)));
        scale = std::max(scale, std::abs(g.G(k, i)));
      }
    CHECK(err <= 1e-5 * scale);
    // readout direction is -K dL/da_j
    err = 0;
    scale = 0;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 9; ++k) {
        auto p = net, m = net;
        p.readouts(j, k) += h;
        m.readouts(j, k) -= h;
        const double fd = -2.0 * (loss_value(p, data, loss) - loss_value(m, data, loss)) / (2 * h);
        err = std::max(err, std::abs(fd - g.g(j, k)));
        scale = std::max(scale, std::abs(g.g(j, k)));
      }
    CHECK(err <= 1e-5 * scale);
  }
}

TEST_CASE("frozen readouts, zero update at a perfect fit, descent for small steps") {
  auto net = init_two_layer(5, 8, 1, 1.0, activation_from_name("relu"), RngStream(7));
  auto data = make_data(6, 5, 1, 8);
  TrainConfig cfg;
  cfg.eta = 0.5;
  const Matrix a0 = net.readouts;
  for (int t = 0; t < 3; ++t) grad_step(net, data, cfg);
  CHECK((net.readouts.array() == a0.array()).all());

  auto fit = data;
  fit.labels = forward(net, data.X);
  const Matrix W = net.W;
  grad_step(net, fit, cfg);
  CHECK((net.W - W).norm() == 0.0);

  cfg.eta = 1e-6;
  const double before = loss_value(net, data, Loss::Mse);
  grad_step(net, data, cfg);
  CHECK(loss_value(net, data, Loss::Mse) < before);
}

TEST_CASE("activation stability and weight change") {
  auto net = init_two_layer(50, 400, 1, 1.0, activation_from_name("relu"), RngStream(9));
  const auto data = make_data(200, 50, 1, 10);
  CHECK(activation_stability(net, data.X) == doctest::Approx(0.5).epsilon(0.04));
  auto zero = net;
  zero.W.setZero();
  CHECK(activation_stability(zero, data.X) == 0.0);
  auto pos = net;
  pos.W = pos.W.cwiseAbs();
  CHECK(activation_stability(pos, data.X.cwiseAbs()) == 1.0);

  CHECK(weight_change(net.W, net.W0) == 0.0);
  CHECK(weight_change(2 * net.W0, net.W0) == doctest::Approx(1.0));
  RngStream orng(11);
  const Matrix other = sample_gaussian_matrix(400, 50, 1.0, orng);
  double num = 0, den = 0;
  for (Eigen::Index i = 0; i < other.size(); ++i) {
    num += std::pow(other.data()[i] - net.W0.data()[i], 2);
    den += std::pow(net.W0.data()[i], 2);
  }
  CHECK(weight_change(other, net.W0) == doctest::Approx(std::sqrt(num / den)).epsilon(1e-12));
}

TEST_CASE("NTK gram: PSD, finite differences, readout term") {
  const auto net = init_two_layer(4, 6, 2, 1.3, tanh_act(), RngStream(12));
  const auto data = make_data(5, 4, 2, 13);
  const double c = 0.7;
  const Eigen::MatrixXd theta = ntk_gram(net, data.X, c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * theta.trace());

  // parameter gradients of the averaged output by central differences
  const double h = 1e-6;
  const int nw = 6 * 4, na = 2 * 6;
  Eigen::MatrixXd J(5, nw + na);
  for (int b = 0; b < 5; ++b) {
    const Matrix x = data.X.row(b);
    for (int p = 0; p < nw; ++p) {
      auto u = net, v = net;
      u.W.data()[p] += h;
      v.W.data()[p] -= h;
      J(b, p) = (mean_output(u, x) - mean_output(v, x)) / (2 * h);
    }
    for (int p = 0; p < na; ++p) {
      auto u = net, v = net;
      u.readouts.data()[p] += h;
      v.readouts.data()[p] -= h;
      J(b, nw + p) = c * (mean_output(u, x) - mean_output(v, x)) / (2 * h);
    }
  }
  const Eigen::MatrixXd fd = J * J.transpose();
  CHECK((fd - theta).norm() <= 1e-4 * theta.norm());

  const Eigen::MatrixXd w_only = J.leftCols(nw) * J.leftCols(nw).transpose();
  CHECK((ntk_gram(net, data.X, 0.0) - w_only).norm() <= 1e-4 * w_only.norm());
}

TEST_CASE("CKA and alignment metrics") {
  RngStream rng(14);
  const Matrix A = sample_gaussian_matrix(5, 3, 1.0, rng);
  const Matrix B = sample_gaussian_matrix(5, 4, 1.0, rng);
  const Eigen::MatrixXd K1 = A * A.transpose(), K2 = B * B.transpose();
  CHECK(cka(K1, K1) == doctest::Approx(1.0));
  CHECK(cka(3.5 * K1, K2) == doctest::Approx(cka(K1, K2)).epsilon(1e-12));
  // brute-force HSIC with explicit centering matrix
  const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(5, 5) - Eigen::MatrixXd::Constant(5, 5, 0.2);
  auto h = [&](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) { return (X * L * Y * L).trace() / 16.0; };
  CHECK(hsic(K1, K2) == doctest::Approx(h(K1, K2)).epsilon(1e-12));
  CHECK(cka(K1, K2) == doctest::Approx(h(K1, K2) / std::sqrt(h(K1, K1) * h(K2, K2))).epsilon(1e-12));
  const double v = cka(K1, K2);
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);

  Matrix y(5, 1);
  y << 1, -1, 1, 1, -1;
  const auto same = alignment_metrics(K1, K1, K2, K2, y);
  CHECK(same.ntk_change == 0.0);
  CHECK(same.kernel_alignment == doctest::Approx(1.0));
  CHECK(same.rep_similarity == doctest::Approx(1.0));
  CHECK(same.cka_ntk_label == doctest::Approx(cka(K1, y * y.transpose())));

  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(2, 2), e2 = e1;
  e1(0, 0) = 1;
  e2(1, 1) = 1;
  CHECK(frobenius_cosine(e1, e2) == 0.0);
  CHECK_THROWS_AS(frobenius_cosine(e1, Eigen::MatrixXd::Zero(2, 2)), NumericalError);

  const auto m = alignment_metrics(K2, K1, K1, K2, y);
  CHECK(m.ntk_change == doctest::Approx((K2 - K1).norm() / K1.norm()));
}

TEST_CASE("training trace is deterministic with increasing epochs") {
  SphericalSpec spec;
  spec.P = 4;
  spec.M = 5;
  spec.D = 3;
  spec.R = 0.5;
  spec.d = 20;
  const auto data = gen_isotropic_spherical(spec, RngStream(15));
  Matrix lab(4, 1);
  lab << 1, -1, 1, -1;
  const auto tr = label_ensemble(data.train, lab), te = label_ensemble(data.test, lab);
  TrainConfig cfg;
  cfg.eta = 2.0;
  cfg.epochs = 40;
  cfg.glue_draws = 10;
  cfg.glue_draws_final = 20;
  auto run = [&] {
    auto net = init_two_layer(20, 30, 1, 1.0, activation_from_name("relu"), RngStream(16));
    return train(net, tr, te, cfg);
  };
  const auto a = run(), b = run();
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  CHECK(a.checkpoints.front().epoch == 0);
  CHECK(a.checkpoints.back().epoch == 40);
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    if (i > 0) CHECK(a.checkpoints[i].epoch > a.checkpoints[i - 1].epoch);
    CHECK(a.checkpoints[i].loss == b.checkpoints[i].loss);
    CHECK(a.checkpoints[i].align.cka_ntk_label == b.checkpoints[i].align.cka_ntk_label);
    REQUIRE(a.checkpoints[i].glue);
    CHECK(a.checkpoints[i].glue->capacity.value == b.checkpoints[i].glue->capacity.value);
  }
  CHECK(a.checkpoints.back().loss < a.checkpoints.front().loss);
  CHECK(a.checkpoints.front().align.ntk_change == 0.0);

  cfg.eta = 1e12;
  auto net = init_two_layer(20, 30, 1, 1.0, activation_from_name("relu"), RngStream(16));
  const auto bad = train(net, tr, te, cfg);
  CHECK(bad.diverged);
}

TEST_CASE("large scale factor trains lazily") {
  RngStream root(21);
  const auto data = gen_isotropic_gaussian(8, 6, 0.5, 60, root.substream(1));
  RngStream lr = root.substream(2);
  const Matrix lab = assign_labels(8, lr);
  const auto tr = label_ensemble(data.train, lab), te = label_ensemble(data.test, lab);
  TrainConfig cfg;
  cfg.eta = 50;
  cfg.epochs = 1000;
  cfg.checkpoint_epochs = {0, 1000};
  cfg.glue_draws = 0;
  cfg.glue_draws_final = 0;
  auto net = init_two_layer(60, 100, 1, 1000.0, activation_from_name("relu"), root.substream(3));
  const auto trace = train(net, tr, te, cfg);
  CHECK(trace.eta_bar == doctest::Approx(0.05));
  CHECK(trace.checkpoints.back().train_accuracy >= 0.95);
  CHECK(trace.checkpoints.back().weight_change <= 0.05);
}
