#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "fluxharm/embedding.hpp"
#include "fluxharm/errors.hpp"
#include "fluxharm/linalg.hpp"

namespace fluxharm {

enum class Method { SSA, NLSA };

inline const char* method_name(Method m) { return m == Method::SSA ? "SSA" : "NLSA"; }

// Output of either decomposition. modes are orthonormal length-W patterns;
// pcs.col(i) = Xᵀ·modes.col(i) for both methods, so reconstruction treats
// them identically. spectrum is descending for SSA (singular values); for
// NLSA it follows eigenvalue order and holds the projection norms ‖X·φ_i‖.
struct ModeSet {
  Method method = Method::SSA;
  int k = 0;
  Eigen::MatrixXd modes;  // W×k
  Eigen::MatrixXd pcs;    // P×k
  Eigen::VectorXd spectrum;
  Eigen::VectorXd variance;

  // NLSA diagnostics (empty for SSA): transition-matrix eigenvalues and the
  // corresponding eigenfunctions before lifting into window space.
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenfunctions;  // P×k
};

namespace detail {

// Makes each column's largest-magnitude entry positive (deterministic sign).
inline void fix_signs(Eigen::MatrixXd& modes) {
  for (Eigen::Index i = 0; i < modes.cols(); ++i) {
    Eigen::Index at = 0;
    modes.col(i).cwiseAbs().maxCoeff(&at);
    if (modes(at, i) < 0.0) modes.col(i) = -modes.col(i);
  }
}

// Orientation conventions for SVD output: within a degenerate pair (scales
// equal to pair_tol relative), rotate so the first pattern has maximal
// |value| at the window midpoint; then fix signs.
inline void canonicalize_modes(Eigen::MatrixXd& modes, Eigen::VectorXd& scale,
                               double pair_tol = 1e-6) {
  fix_signs(modes);
  const Eigen::Index k = modes.cols();
  const Eigen::Index mid = (modes.rows() - 1) / 2;
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    if (scale[i] <= 0.0) continue;
    if ((scale[i] - scale[i + 1]) > pair_tol * scale[i]) continue;
    const double theta = std::atan2(modes(mid, i + 1), modes(mid, i));
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::VectorXd a = modes.col(i), b = modes.col(i + 1);
    // The rotated first pattern peaks at the window midpoint (nonnegative by
    // construction); only its quadrature partner still needs a sign rule.
    modes.col(i) = c * a + s * b;
    modes.col(i + 1) = -s * a + c * b;
    Eigen::Index at = 0;
    modes.col(i + 1).cwiseAbs().maxCoeff(&at);
    if (modes(at, i + 1) < 0.0) modes.col(i + 1) = -modes.col(i + 1);
    ++i;
  }
}

}  // namespace detail

// Diagonal of Λ = (1/W)·modesᵀ·X·Xᵀ·modes, the variance carried by each
// mode's projection. For SSA this equals σ_i²/W.
inline Eigen::VectorXd variance_spectrum(const ModeSet& ms, const TrajectoryMatrix& X) {
  if (ms.modes.rows() != X.W() || ms.modes.cols() != ms.k)
    fail(ErrorCode::ShapeMismatch, "mode set does not match trajectory matrix");
  Eigen::MatrixXd proj = X.rows.transpose() * ms.modes;
  return proj.colwise().squaredNorm().transpose() / double(X.W());
}

inline ModeSet ssa_decompose(const TrajectoryMatrix& X, int k = 16) {
  if (!X.standardized) fail(ErrorCode::ConfigError, "ssa_decompose expects a standardized matrix");
  const Eigen::Index W = X.W(), P = X.P();
  const Eigen::Index mindim = std::min(W, P);
  if (k < 1 || Eigen::Index(k) > mindim)
    fail(ErrorCode::KOutOfRange, "k=" + std::to_string(k) + " not in [1, min(W,P)]");

  ModeSet ms;
  ms.method = Method::SSA;
  ms.k = k;

  // The truncated path only pays off when the matrix is large and few modes
  // are wanted; otherwise the dense SVD is both faster and more accurate.
  const bool truncated = mindim > 1024 && Eigen::Index(8 * k) <= mindim;
  if (!truncated) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X.rows, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) fail(ErrorCode::SvdFailure, "dense SVD did not converge");
    ms.modes = svd.matrixU().leftCols(k);
    ms.spectrum = svd.singularValues().head(k);
  } else if (W <= P) {
    auto apply = [&X](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
      out.noalias() = X.rows * (X.rows.transpose() * v);
    };
    EigenPairs ep = lanczos_topk(apply, W, k);
    ms.modes = ep.vectors;
    ms.spectrum = ep.values.cwiseMax(0.0).cwiseSqrt();
  } else {
    auto apply = [&X](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
      out.noalias() = X.rows.transpose() * (X.rows * v);
    };
    EigenPairs ep = lanczos_topk(apply, P, k);
    ms.modes.resize(W, k);
    ms.spectrum.resize(k);
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd u = X.rows * ep.vectors.col(i);
      const double norm = u.norm();
      if (!(norm > 0.0)) fail(ErrorCode::SvdFailure, "vanishing singular vector image");
      ms.modes.col(i) = u / norm;
      ms.spectrum[i] = norm;
    }
  }

  detail::canonicalize_modes(ms.modes, ms.spectrum);
  ms.pcs = X.rows.transpose() * ms.modes;
  ms.variance = variance_spectrum(ms, X);
  return ms;
}

}  // namespace fluxharm
