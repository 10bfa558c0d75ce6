#include "gluekit/synth.hpp"

#include <cmath>
#include <string>

#include "gluekit/error.hpp"

namespace gluekit {
namespace {

enum Stream : std::uint64_t { kCenters = 1, kAxes = 2, kCoords = 3, kTrainNoise = 4, kTestNoise = 5, kScale = 6 };

void validate(const SphericalSpec& s) {
  if (s.P < 1 || s.M < 1 || s.d < 1) throw ConfigError("synthetic spec: P, M and d must be >= 1");
  if (s.D < 1 || s.D > s.d) throw ConfigError("synthetic spec: need 1 <= D <= d (D=" + std::to_string(s.D) + ", d=" + std::to_string(s.d) + ")");
  if (!(s.R >= 0.0) || !std::isfinite(s.R)) throw ConfigError("synthetic spec: R must be finite and >= 0");
  if (!(s.noise_eps >= 0.0)) throw ConfigError("synthetic spec: noise_eps must be >= 0");
}

void validate(const CorrelationSpec& c) {
  if (!(c.rho_center >= 0.0 && c.rho_center < 1.0)) throw ConfigError("rho_center must lie in [0, 1)");
  if (!(c.rho_axis >= 0.0 && c.rho_axis < 1.0)) throw ConfigError("rho_axis must lie in [0, 1)");
  if (!(c.psi_center_axis >= 0.0)) throw ConfigError("psi_center_axis must be >= 0");
}

ManifoldEnsemble assemble(const std::vector<Matrix>& clouds) {
  std::vector<PointCloudManifold> ms;
  ms.reserve(clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i) ms.push_back({static_cast<int>(i), clouds[i]});
  return ManifoldEnsemble(std::move(ms));
}

SyntheticEnsembles spherical(const SphericalSpec& spec, const CorrelationSpec& corr, const RngStream& rng) {
  validate(spec);
  validate(corr);
  const auto P = static_cast<Eigen::Index>(spec.P), M = static_cast<Eigen::Index>(spec.M);
  const auto D = static_cast<Eigen::Index>(spec.D), d = static_cast<Eigen::Index>(spec.d);
  const double sd = 1.0 / std::sqrt(static_cast<double>(spec.d));

  SyntheticEnsembles out;
  RngStream center_rng = rng.substream(kCenters);
  out.centers = sample_gaussian_matrix(spec.P, spec.d, sd, center_rng);

  RngStream axis_rng = rng.substream(kAxes);
  out.axes.assign(spec.D, Matrix(P, d));
  for (Eigen::Index i = 0; i < P; ++i)
    for (Eigen::Index j = 0; j < D; ++j)
      for (Eigen::Index c = 0; c < d; ++c) out.axes[j](i, c) = sd * axis_rng.normal();

  if (corr.rho_center > 0.0) out.centers = ar1_cholesky(spec.P, corr.rho_center) * out.centers;
  if (corr.rho_axis > 0.0) {
    const Matrix L = ar1_cholesky(spec.P, corr.rho_axis);
    for (auto& a : out.axes) a = L * a;
  }
  RngStream scale_rng = rng.substream(kScale);
  for (Eigen::Index i = 0; i < P; ++i) {
    const double q = scale_rng.normal();
    if (corr.psi_center_axis > 0.0) out.centers.row(i) *= 1.0 + corr.psi_center_axis * q;
  }

  RngStream coord_rng = rng.substream(kCoords);
  RngStream train_rng = rng.substream(kTrainNoise);
  RngStream test_rng = rng.substream(kTestNoise);
  std::vector<Matrix> train(spec.P), test(spec.P);
  for (Eigen::Index i = 0; i < P; ++i) {
    Matrix basis(D, d);
    for (Eigen::Index j = 0; j < D; ++j) basis.row(j) = out.axes[j].row(i);
    Matrix coords = sample_gaussian_matrix(spec.M, spec.D, 1.0, coord_rng);
    Matrix shape = coords * basis;
    for (Eigen::Index k = 0; k < M; ++k) {
      const double norm = shape.row(k).norm();
      if (norm > 0.0) shape.row(k) /= norm;
    }
    Matrix base = spec.R * shape;
    base.rowwise() += out.centers.row(i);
    train[i] = base + spec.noise_eps * sample_gaussian_matrix(spec.M, spec.d, sd, train_rng);
    test[i] = base + spec.noise_eps * sample_gaussian_matrix(spec.M, spec.d, sd, test_rng);
  }
  out.train = assemble(train);
  out.test = assemble(test);
  return out;
}

}  // namespace

Matrix ar1_cholesky(std::size_t P, double rho) {
  Matrix C(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) C(i, j) = std::pow(rho, std::abs(static_cast<double>(i - j)));
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success) throw NumericalError("correlation matrix is not positive definite");
  return llt.matrixL();
}

SyntheticEnsembles gen_isotropic_spherical(const SphericalSpec& spec, const RngStream& rng) {
  return spherical(spec, CorrelationSpec{}, rng);
}

SyntheticEnsembles apply_correlations(const SphericalSpec& spec, const CorrelationSpec& corr, const RngStream& rng) {
  return spherical(spec, corr, rng);
}

SyntheticEnsembles gen_isotropic_gaussian(std::size_t P, std::size_t M, double R, std::size_t d,
                                          const RngStream& rng) {
  if (P < 1 || M < 1 || d < 1) throw ConfigError("gaussian clouds: P, M and d must be >= 1");
  if (!(R >= 0.0)) throw ConfigError("gaussian clouds: R must be >= 0");
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  SyntheticEnsembles out;
  RngStream center_rng = rng.substream(kCenters);
  out.centers = sample_gaussian_matrix(P, d, sd, center_rng);
  RngStream train_rng = rng.substream(kTrainNoise);
  RngStream test_rng = rng.substream(kTestNoise);
  std::vector<Matrix> train(P), test(P);
  for (std::size_t i = 0; i < P; ++i) {
    const auto c = out.centers.row(static_cast<Eigen::Index>(i));
    train[i] = R * sample_gaussian_matrix(M, d, sd, train_rng);
    train[i].rowwise() += c;
    test[i] = R * sample_gaussian_matrix(M, d, sd, test_rng);
    test[i].rowwise() += c;
  }
  out.train = assemble(train);
  out.test = assemble(test);
  return out;
}

Vector assign_labels(std::size_t P, RngStream& rng) { return sample_dichotomy(P, rng).signs; }

}  // namespace gluekit
