#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "magsim/rng.hpp"

// Gaussian state over an ordered set of labeled real variables, kept in the
// doubled-covariance convention gamma_ij = 2 Re<(y_i - <y_i>)(y_j - <y_j>)>,
// so a vacuum quadrature has unit diagonal entry. Classical variances are
// gamma/2 throughout.

namespace magsim {

using Index = Eigen::Index;

namespace detail {

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace detail

class GaussianState {
 public:
  GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov,
                std::vector<std::string> labels)
      : mean_(std::move(mean)), cov_(std::move(cov)), labels_(std::move(labels)) {
    if (cov_.rows() != cov_.cols())
      throw std::invalid_argument("GaussianState: cov must be square");
    if (mean_.size() != cov_.rows())
      throw std::invalid_argument("GaussianState: mean/cov size mismatch");
    if (static_cast<Index>(labels_.size()) != mean_.size())
      throw std::invalid_argument("GaussianState: labels/mean size mismatch");
  }

  Index size() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Index of a labeled variable, or -1 if absent.
  Index index_of(const std::string& label) const {
    for (Index i = 0; i < static_cast<Index>(labels_.size()); ++i)
      if (labels_[static_cast<std::size_t>(i)] == label) return i;
    return -1;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  std::vector<std::string> labels_;
};

/// Which coordinate of the measured subsystem is actually read out
/// (the projector pi = diag(1, 0, ...) of the covariance update).
struct MeasurementSpec {
  Index index_in_measured = 0;
};

/// Covariance split into retained block A, measured block B and the
/// cross-correlation C, for a given retained index set.
struct BlockDecomposition {
  Eigen::MatrixXd retained;  // m x m
  Eigen::MatrixXd measured;  // k x k
  Eigen::MatrixXd cross;     // m x k
  std::vector<Index> retained_idx;
  std::vector<Index> measured_idx;
};

inline BlockDecomposition decompose(const GaussianState& s,
                                    const std::vector<Index>& retained) {
  const Index n = s.size();
  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  for (Index i : retained) {
    if (i < 0 || i >= n)
      throw std::out_of_range("decompose: retained index out of range");
    keep[static_cast<std::size_t>(i)] = true;
  }
  BlockDecomposition d;
  d.retained_idx = retained;
  for (Index i = 0; i < n; ++i)
    if (!keep[static_cast<std::size_t>(i)]) d.measured_idx.push_back(i);

  const Index m = static_cast<Index>(d.retained_idx.size());
  const Index k = static_cast<Index>(d.measured_idx.size());
  d.retained.resize(m, m);
  d.measured.resize(k, k);
  d.cross.resize(m, k);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b)
      d.retained(a, b) = s.cov()(d.retained_idx[a], d.retained_idx[b]);
    for (Index b = 0; b < k; ++b)
      d.cross(a, b) = s.cov()(d.retained_idx[a], d.measured_idx[b]);
  }
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b)
      d.measured(a, b) = s.cov()(d.measured_idx[a], d.measured_idx[b]);
  return d;
}

/// gamma -> S gamma S^T, <y> -> S <y>.
inline GaussianState linear_transform(const GaussianState& s,
                                      const Eigen::Ref<const Eigen::MatrixXd>& S) {
  if (S.rows() != s.size() || S.cols() != s.size())
    throw std::invalid_argument("linear_transform: S dimension mismatch");
  Eigen::MatrixXd cov = detail::symmetrized(S * s.cov() * S.transpose());
  return GaussianState(S * s.mean(), std::move(cov), s.labels());
}

/// gamma -> L gamma L + prefactor * M with diagonal L, M (entries passed as
/// vectors); the mean picks up the L contraction only.
inline GaussianState add_noise(const GaussianState& s,
                               const Eigen::Ref<const Eigen::VectorXd>& l_diag,
                               const Eigen::Ref<const Eigen::VectorXd>& m_diag,
                               double prefactor) {
  if (l_diag.size() != s.size() || m_diag.size() != s.size())
    throw std::invalid_argument("add_noise: diagonal size mismatch");
  if (prefactor < 0.0)
    throw std::invalid_argument("add_noise: negative prefactor");
  Eigen::MatrixXd cov =
      l_diag.asDiagonal() * s.cov() * l_diag.asDiagonal();
  cov.diagonal() += prefactor * m_diag;
  return GaussianState(l_diag.cwiseProduct(s.mean()),
                       detail::symmetrized(cov), s.labels());
}

struct Conditioned {
  GaussianState state;
  double innovation = 0.0;
};

/// Variance floor below which the pseudoinverse of the projected measured
/// block is taken as zero (the measurement then carries no information).
inline constexpr double kVarianceFloor = 1e-12;

/// Condition on a single quadrature of the measured subsystem and drop that
/// subsystem. A -> A - C (pi B pi)^+ C^T with
/// (pi B pi)^+ = diag(1/B(j,j), 0, ...); the mean of the retained block
/// moves by C (pi B pi)^+ (chi, 0, ...)^T with chi = outcome - <x_measured>.
inline Conditioned condition_on_quadrature(const GaussianState& s,
                                           const std::vector<Index>& retained,
                                           const MeasurementSpec& spec,
                                           double outcome) {
  BlockDecomposition d = decompose(s, retained);
  const Index k = static_cast<Index>(d.measured_idx.size());
  if (spec.index_in_measured < 0 || spec.index_in_measured >= k)
    throw std::out_of_range("condition_on_quadrature: measured index out of range");

  const Index j = spec.index_in_measured;
  const Index m = static_cast<Index>(d.retained_idx.size());
  const double b = d.measured(j, j);

  Eigen::VectorXd mean(m);
  for (Index a = 0; a < m; ++a) mean(a) = s.mean()(d.retained_idx[a]);
  const double chi = outcome - s.mean()(d.measured_idx[j]);

  Eigen::MatrixXd cov = d.retained;
  if (b > kVarianceFloor) {
    const Eigen::VectorXd gain = d.cross.col(j) / b;
    cov -= gain * d.cross.col(j).transpose();
    mean += gain * chi;
  }

  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(m));
  for (Index a = 0; a < m; ++a)
    labels.push_back(s.labels()[static_cast<std::size_t>(d.retained_idx[a])]);
  return Conditioned{GaussianState(std::move(mean), detail::symmetrized(cov),
                                   std::move(labels)),
                     chi};
}

/// Restriction to a subset of variables (order taken from `indices`).
inline GaussianState marginal(const GaussianState& s,
                              const std::vector<Index>& indices) {
  const Index m = static_cast<Index>(indices.size());
  Eigen::VectorXd mean(m);
  Eigen::MatrixXd cov(m, m);
  std::vector<std::string> labels;
  labels.reserve(indices.size());
  for (Index a = 0; a < m; ++a) {
    if (indices[a] < 0 || indices[a] >= s.size())
      throw std::out_of_range("marginal: index out of range");
    mean(a) = s.mean()(indices[a]);
    labels.push_back(s.labels()[static_cast<std::size_t>(indices[a])]);
    for (Index b = 0; b < m; ++b) cov(a, b) = s.cov()(indices[a], indices[b]);
  }
  return GaussianState(std::move(mean), std::move(cov), std::move(labels));
}

/// Tensor product with an uncorrelated subsystem (block-diagonal join).
inline GaussianState append(const GaussianState& a, const GaussianState& b) {
  const Index n = a.size() + b.size();
  Eigen::VectorXd mean(n);
  mean << a.mean(), b.mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  cov.topLeftCorner(a.size(), a.size()) = a.cov();
  cov.bottomRightCorner(b.size(), b.size()) = b.cov();
  std::vector<std::string> labels = a.labels();
  labels.insert(labels.end(), b.labels().begin(), b.labels().end());
  return GaussianState(std::move(mean), std::move(cov), std::move(labels));
}

/// Draw a measurement outcome for coordinate `index`: normal with mean <y_i>
/// and variance gamma_ii / 2.
inline double sample_outcome(const GaussianState& s, Index index,
                             std::mt19937_64& gen) {
  if (index < 0 || index >= s.size())
    throw std::out_of_range("sample_outcome: index out of range");
  const double g = s.cov()(index, index);
  if (g < 0.0)
    throw std::invalid_argument("sample_outcome: negative variance");
  return s.mean()(index) + std::sqrt(0.5 * g) * rng::normal(gen);
}

// ---------------------------------------------------------------------------
// Validity diagnostics
// ---------------------------------------------------------------------------

struct PairCheck {
  std::string x_label;
  std::string p_label;
  double determinant = 0.0;  // gamma_xx gamma_pp - gamma_xp^2
  bool ok = false;
};

struct ValidityReport {
  double symmetry_residual = 0.0;  // max |gamma - gamma^T| / max(1, |gamma|)
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double min_diagonal = 0.0;
  std::vector<PairCheck> pairs;
  bool symmetric = false;
  bool positive_semidefinite = false;
  bool diagonal_nonnegative = false;

  bool heisenberg_ok() const {
    for (const auto& p : pairs)
      if (!p.ok) return false;
    return true;
  }
  bool ok() const {
    return symmetric && positive_semidefinite && diagonal_nonnegative &&
           heisenberg_ok();
  }
};

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kEigenvalueTol = 1e-10;
inline constexpr double kHeisenbergTol = 1e-9;

/// Diagnostic pass over the state: symmetry residual, eigenvalue range,
/// diagonal sign and the Heisenberg determinant of every (x_*, p_*) label
/// pair present. Never throws.
inline ValidityReport check_validity(const GaussianState& s) {
  ValidityReport r;
  const Eigen::MatrixXd& g = s.cov();
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  r.symmetry_residual = (g - g.transpose()).cwiseAbs().maxCoeff() / scale;
  r.symmetric = r.symmetry_residual <= kSymmetryTol;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(detail::symmetrized(g),
                                                    Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  r.max_eigenvalue = es.eigenvalues().maxCoeff();
  r.positive_semidefinite =
      r.min_eigenvalue >= -kEigenvalueTol * std::max(r.max_eigenvalue, 0.0);

  r.min_diagonal = g.diagonal().minCoeff();
  r.diagonal_nonnegative = r.min_diagonal >= 0.0;

  for (std::size_t i = 0; i < s.labels().size(); ++i) {
    const std::string& lx = s.labels()[i];
    if (lx.rfind("x_", 0) != 0) continue;
    const Index jp = s.index_of("p_" + lx.substr(2));
    if (jp < 0) continue;
    const Index ix = static_cast<Index>(i);
    PairCheck pc;
    pc.x_label = lx;
    pc.p_label = s.labels()[static_cast<std::size_t>(jp)];
    pc.determinant = g(ix, ix) * g(jp, jp) - g(ix, jp) * g(jp, ix);
    pc.ok = pc.determinant >= 1.0 - kHeisenbergTol;
    r.pairs.push_back(std::move(pc));
  }
  return r;
}

}  // namespace magsim
