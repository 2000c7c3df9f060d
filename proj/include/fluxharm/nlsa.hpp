#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "fluxharm/embedding.hpp"
#include "fluxharm/errors.hpp"
#include "fluxharm/linalg.hpp"
#include "fluxharm/rng.hpp"
#include "fluxharm/ssa.hpp"

namespace fluxharm {

// Pairwise Euclidean distances between embedding columns. kNN sparsification
// marks dropped edges with +inf (the kernel maps them to exactly 0); an edge
// survives if either endpoint lists it, and the diagonal always survives.
struct DistanceMatrix {
  Eigen::MatrixXd d;
  std::optional<int> knn;
};

struct DiffusionKernel {
  double epsilon = 0.0;
  Eigen::MatrixXd J;
  std::optional<int> knn;
};

// Row-stochastic transition matrix T = diag(d)⁻¹·K together with the density
// vector d (row sums of the α=1 normalized kernel K), which the
// eigendecomposition needs to form the symmetric conjugate.
struct TransitionMatrix {
  Eigen::MatrixXd T;
  Eigen::VectorXd density;
};

struct NlsaConfig {
  std::vector<double> grid;  // ε candidates; empty selects an automatic grid
  int subset_size = 256;     // c, clamped to P
  int n_runs = 10;
  std::optional<int> knn;
  std::uint64_t seed = 0x5eed0f10c5ULL;

  // Fixed by construction; kept visible because they are part of the method.
  static constexpr int alpha = 1;
  static constexpr int t_diffusion = 1;
};

struct EpsilonEstimate {
  double epsilon = 0.0;
  std::vector<std::pair<double, double>> curve;  // (ln ε, Z^c) of the median run
  double turning_point = 0.0;                    // fitted Z^c_t of that run
  std::vector<double> runs;                      // per-run selected ε
  int subset_size = 0;
  bool fit_fallback = false;  // some run used the curve midpoint instead of the fit
};

namespace detail {

// Squared column distances via the Gram matrix. All operations scale exactly
// under power-of-two rescaling of X, which the transition-matrix scale
// invariance relies on.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& cols) {
  const Eigen::Index P = cols.cols();
  Eigen::VectorXd sq = cols.colwise().squaredNorm();
  Eigen::MatrixXd gram = cols.transpose() * cols;
  Eigen::MatrixXd z2(P, P);
  for (Eigen::Index i = 0; i < P; ++i) {
    z2(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < P; ++j) {
      const double v = std::max(0.0, sq[i] + sq[j] - 2.0 * gram(i, j));
      z2(i, j) = z2(j, i) = v;
    }
  }
  return z2;
}

}  // namespace detail

inline DistanceMatrix pairwise_distances(const TrajectoryMatrix& X,
                                         std::optional<int> knn = {}) {
  const Eigen::Index P = X.P();
  if (P < 2) fail(ErrorCode::ShapeMismatch, "need at least two embedding columns");

  DistanceMatrix D;
  D.d = detail::squared_distances(X.rows).cwiseSqrt();
  D.knn = knn;
  if (!knn || *knn >= P - 1) return D;
  if (*knn < 1) fail(ErrorCode::ConfigError, "knn must be at least 1");

  // Neighbor lists with (distance, index) ordering so ties break the same
  // way on every run.
  std::vector<std::vector<char>> keep(std::size_t(P), std::vector<char>(std::size_t(P), 0));
  std::vector<std::pair<double, Eigen::Index>> order(std::size_t(P - 1));
  for (Eigen::Index i = 0; i < P; ++i) {
    std::size_t n = 0;
    for (Eigen::Index j = 0; j < P; ++j)
      if (j != i) order[n++] = {D.d(i, j), j};
    std::nth_element(order.begin(), order.begin() + (*knn - 1), order.end());
    std::sort(order.begin(), order.begin() + *knn);
    for (int r = 0; r < *knn; ++r) keep[std::size_t(i)][std::size_t(order[std::size_t(r)].second)] = 1;
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < P; ++i)
    for (Eigen::Index j = i + 1; j < P; ++j)
      if (!keep[std::size_t(i)][std::size_t(j)] && !keep[std::size_t(j)][std::size_t(i)])
        D.d(i, j) = D.d(j, i) = inf;
  return D;
}

inline DiffusionKernel build_kernel(const DistanceMatrix& D, double epsilon) {
  if (!(epsilon > 0.0)) fail(ErrorCode::ConfigError, "kernel scale must be positive");
  DiffusionKernel K;
  K.epsilon = epsilon;
  K.knn = D.knn;
  // Vectorized exp clamps its argument, so exp(-inf) comes back denormal
  // rather than zero; masked edges must vanish exactly.
  K.J = D.d.array().isInf().select(0.0, (-D.d.array().square() / (2.0 * epsilon)).exp());
  return K;
}

inline TransitionMatrix build_transition(const DiffusionKernel& kernel) {
  const Eigen::Index P = kernel.J.rows();
  if (P < 1 || kernel.J.cols() != P) fail(ErrorCode::ShapeMismatch, "kernel must be square");

  Eigen::VectorXd q = kernel.J.rowwise().sum();
  for (Eigen::Index i = 0; i < P; ++i)
    if (!(q[i] > 0.0))
      fail(ErrorCode::ZeroDensity, "kernel row " + std::to_string(i) + " sums to zero");

  // α=1: divide out the sampling density on both sides, then row-normalize.
  Eigen::MatrixXd K = q.cwiseInverse().asDiagonal() * kernel.J * q.cwiseInverse().asDiagonal();
  Eigen::VectorXd d = K.rowwise().sum();
  for (Eigen::Index i = 0; i < P; ++i)
    if (!(d[i] > 0.0))
      fail(ErrorCode::ZeroDensity, "normalized kernel row " + std::to_string(i) + " sums to zero");

  TransitionMatrix T;
  T.T = d.cwiseInverse().asDiagonal() * K;
  T.density = std::move(d);
  return T;
}

inline EpsilonEstimate estimate_epsilon(const TrajectoryMatrix& X, const NlsaConfig& cfg = {}) {
  const Eigen::Index P = X.P();
  if (P < 2) fail(ErrorCode::ShapeMismatch, "need at least two embedding columns");
  if (cfg.subset_size < 2) fail(ErrorCode::ConfigError, "subset size must be at least 2");
  if (cfg.n_runs < 1) fail(ErrorCode::ConfigError, "need at least one sampling run");
  const int c = int(std::min<Eigen::Index>(cfg.subset_size, P));

  std::vector<double> grid = cfg.grid;
  if (grid.empty()) {
    // Auto grid: 48 log-spaced scales bracketing the median squared distance
    // of a fixed sample by six decades each way.
    Rng rng(derive_seed(cfg.seed, "eps-grid"));
    auto idx = rng.sample_without_replacement(std::size_t(P), std::size_t(c));
    Eigen::MatrixXd cols(X.W(), c);
    for (int j = 0; j < c; ++j) cols.col(j) = X.rows.col(Eigen::Index(idx[std::size_t(j)]));
    Eigen::MatrixXd z2 = detail::squared_distances(cols);
    std::vector<double> off;
    off.reserve(std::size_t(c) * std::size_t(c - 1) / 2);
    for (int i = 0; i < c; ++i)
      for (int j = i + 1; j < c; ++j) off.push_back(z2(i, j));
    auto mid = off.begin() + std::ptrdiff_t(off.size() / 2);
    std::nth_element(off.begin(), mid, off.end());
    const double med = *mid;
    if (!(med > 0.0)) fail(ErrorCode::DegenerateCurve, "sampled embedding points are identical");
    const double lo = std::log(1e-6 * med), hi = std::log(1e6 * med);
    grid.resize(48);
    for (int i = 0; i < 48; ++i) grid[std::size_t(i)] = std::exp(lo + (hi - lo) * i / 47.0);
  } else {
    std::sort(grid.begin(), grid.end());
    if (grid.size() < 8 || !(grid.front() > 0.0) || grid.back() < 1e4 * grid.front())
      fail(ErrorCode::ConfigError, "epsilon grid needs >= 8 positive points over >= 4 decades");
  }
  const std::size_t G = grid.size();
  std::vector<double> us(G);
  for (std::size_t g = 0; g < G; ++g) us[g] = std::log(grid[g]);

  struct RunResult {
    double eps;
    double turning;
    std::vector<std::pair<double, double>> curve;
  };
  std::vector<RunResult> results;
  results.reserve(std::size_t(cfg.n_runs));

  EpsilonEstimate est;
  est.subset_size = c;

  for (int run = 0; run < cfg.n_runs; ++run) {
    Rng rng(derive_seed(cfg.seed, "eps-run", std::uint64_t(run)));
    auto idx = rng.sample_without_replacement(std::size_t(P), std::size_t(c));
    Eigen::MatrixXd cols(X.W(), c);
    for (int j = 0; j < c; ++j) cols.col(j) = X.rows.col(Eigen::Index(idx[std::size_t(j)]));
    Eigen::MatrixXd z2 = detail::squared_distances(cols);

    const Eigen::Index gi = Eigen::Index(G);
    Eigen::VectorXd zc(gi);
    for (std::size_t g = 0; g < G; ++g)
      zc[Eigen::Index(g)] = (-z2.array() / (2.0 * grid[g])).exp().sum();

    const double zmin = zc.minCoeff(), zmax = zc.maxCoeff();
    if (!(zmax - zmin > 1e-9 * zmax))
      fail(ErrorCode::DegenerateCurve, "kernel sum curve is flat");

    // The saturation curve is sigmoidal between its plateaus only on log-log
    // axes, so the tanh is fitted to ln Z; a linear-Z fit would let the upper
    // plateau dominate the regression and push the pick far too coarse.
    Eigen::VectorXd uvec = Eigen::Map<const Eigen::VectorXd>(us.data(), Eigen::Index(G));
    Eigen::VectorXd lz = zc.array().log();
    TanhStepFit fit = fit_tanh_step(uvec, lz);
    double turning = fit.midpoint();
    if (!fit.converged || !(turning > std::log(zmin)) || !(turning < std::log(zmax))) {
      turning = 0.5 * (std::log(zmin) + std::log(zmax));
      est.fit_fallback = true;
    }

    // Select the grid scale whose Z is nearest (in log ε after linear
    // interpolation) to the 1/e point below the turning value.
    const double target = turning - 1.0;
    std::size_t pick = 0;
    if (target <= lz[0]) {
      pick = 0;
    } else if (target >= lz[Eigen::Index(G - 1)]) {
      pick = G - 1;
    } else {
      std::size_t hi = 1;
      while (lz[Eigen::Index(hi)] < target) ++hi;
      const double z0 = lz[Eigen::Index(hi - 1)], z1 = lz[Eigen::Index(hi)];
      const double frac = (z1 > z0) ? (target - z0) / (z1 - z0) : 0.0;
      const double ustar = us[hi - 1] + frac * (us[hi] - us[hi - 1]);
      pick = (std::abs(ustar - us[hi - 1]) <= std::abs(us[hi] - ustar)) ? hi - 1 : hi;
    }

    RunResult rr;
    rr.eps = grid[pick];
    rr.turning = std::exp(turning);
    rr.curve.reserve(G);
    for (std::size_t g = 0; g < G; ++g) rr.curve.emplace_back(us[g], zc[Eigen::Index(g)]);
    est.runs.push_back(rr.eps);
    results.push_back(std::move(rr));
  }

  // Median = the lower-middle attained value, so the estimate is always a
  // grid point and the reported curve belongs to an actual run.
  std::vector<double> sorted = est.runs;
  std::sort(sorted.begin(), sorted.end());
  est.epsilon = sorted[(sorted.size() - 1) / 2];
  for (const auto& rr : results)
    if (rr.eps == est.epsilon) {
      est.curve = rr.curve;
      est.turning_point = rr.turning;
      break;
    }
  return est;
}

inline ModeSet nlsa_decompose(const TransitionMatrix& tm, const TrajectoryMatrix& X, int k = 16) {
  const Eigen::Index P = X.P();
  if (tm.T.rows() != P || tm.T.cols() != P || tm.density.size() != P)
    fail(ErrorCode::ShapeMismatch, "transition matrix does not match trajectory matrix");
  if (k < 1 || Eigen::Index(k) >= P)
    fail(ErrorCode::KOutOfRange,
         "k=" + std::to_string(k) + " must lie in [1, P-1] (one slot is the trivial mode)");
  for (Eigen::Index i = 0; i < P; ++i)
    if (!(tm.density[i] > 0.0)) fail(ErrorCode::ZeroDensity, "nonpositive density entry");

  // T = D⁻¹K is similar to the symmetric S = D^{1/2}TD^{-1/2}; eigenvectors
  // of S map back to right eigenvectors of T via D^{-1/2}.
  Eigen::VectorXd dsqrt = tm.density.cwiseSqrt();
  Eigen::MatrixXd S = dsqrt.asDiagonal() * tm.T * dsqrt.cwiseInverse().asDiagonal();
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) fail(ErrorCode::EigFailure, "eigendecomposition did not converge");

  // Eigenvalues ascend; the last is the trivial λ=1 / constant eigenfunction.
  if (es.eigenvalues()[P - 2] >= 1.0 - 1e-10)
    fail(ErrorCode::EigFailure, "degenerate leading eigenspace; no nontrivial ordering exists");

  ModeSet ms;
  ms.method = Method::NLSA;
  ms.k = k;
  ms.eigenvalues.resize(k);
  ms.eigenfunctions.resize(P, k);
  for (int i = 0; i < k; ++i) {
    const Eigen::Index col = P - 2 - i;
    ms.eigenvalues[i] = es.eigenvalues()[col];
    Eigen::VectorXd phi = es.eigenvectors().col(col).cwiseQuotient(dsqrt);
    phi.normalize();
    ms.eigenfunctions.col(i) = phi;
  }
  detail::fix_signs(ms.eigenfunctions);

  // Lift eigenfunctions into window space; record the projection norms, then
  // orthonormalize the family (order preserved) so it feeds classification
  // and reconstruction exactly like an SVD basis.
  Eigen::MatrixXd lifted = X.rows * ms.eigenfunctions;
  ms.spectrum = lifted.colwise().norm();
  for (int i = 0; i < k; ++i)
    if (!(ms.spectrum[i] > 0.0))
      fail(ErrorCode::EigFailure, "eigenfunction " + std::to_string(i) + " projects to zero");
  orthonormalize_columns(lifted);
  detail::fix_signs(lifted);
  ms.modes = std::move(lifted);
  ms.pcs = X.rows.transpose() * ms.modes;
  ms.variance = variance_spectrum(ms, X);
  return ms;
}

}  // namespace fluxharm
