#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "fluxharm/errors.hpp"

namespace fluxharm {

// W×P trajectory matrix; column j holds the window (x_j, ..., x_{j+W-1}).
// row_means/row_stds are identity stats (0, 1) until standardize_rows runs,
// so destandardize is always well defined.
struct TrajectoryMatrix {
  Eigen::MatrixXd rows;
  Eigen::VectorXd row_means;
  Eigen::VectorXd row_stds;
  bool standardized = false;

  Eigen::Index W() const { return rows.rows(); }
  Eigen::Index P() const { return rows.cols(); }
  Eigen::Index N() const { return rows.rows() + rows.cols() - 1; }
};

enum class Domain { standardized, original };

struct ReconstructedComponent {
  std::vector<double> values;
  std::vector<int> mode_indices;
  Domain domain = Domain::standardized;
};

// Largest whole-year window (1 year = 365.25 days) that still satisfies
// W <= N/2; series shorter than two whole years fall back to floor(N/2).
inline std::size_t default_window(std::size_t n) {
  const std::size_t half = n / 2;
  for (std::size_t years = std::size_t(double(half) / 365.25) + 1; years >= 1; --years) {
    auto w = std::size_t(double(years) * 365.25);
    if (w >= 1 && w <= half) return w;
  }
  return half;
}

inline TrajectoryMatrix delay_embed(const std::vector<double>& values, std::size_t W) {
  const std::size_t N = values.size();
  if (W == 0) fail(ErrorCode::WindowZero, "embedding window must be positive");
  if (2 * W > N)
    fail(ErrorCode::WindowTooLarge,
         "window " + std::to_string(W) + " exceeds N/2 for N=" + std::to_string(N));
  const std::size_t P = N - W + 1;

  TrajectoryMatrix X;
  X.rows.resize(Eigen::Index(W), Eigen::Index(P));
  for (std::size_t j = 0; j < P; ++j)
    for (std::size_t i = 0; i < W; ++i) X.rows(Eigen::Index(i), Eigen::Index(j)) = values[i + j];
  X.row_means = Eigen::VectorXd::Zero(Eigen::Index(W));
  X.row_stds = Eigen::VectorXd::Ones(Eigen::Index(W));
  X.standardized = false;
  return X;
}

// Centers each row and scales to unit sample standard deviation (n-1
// denominator); the stats are kept so the map stays exactly invertible.
inline TrajectoryMatrix standardize_rows(TrajectoryMatrix X) {
  if (X.standardized) fail(ErrorCode::ShapeMismatch, "matrix already standardized");
  const Eigen::Index W = X.W(), P = X.P();
  if (P < 2) fail(ErrorCode::ShapeMismatch, "standardization needs P >= 2");
  for (Eigen::Index i = 0; i < W; ++i) {
    const double mean = X.rows.row(i).mean();
    const double ss = (X.rows.row(i).array() - mean).square().sum();
    const double sd = std::sqrt(ss / double(P - 1));
    if (!(sd > 0.0))
      fail(ErrorCode::ConstantRow, "constant row " + std::to_string(i) + " cannot be standardized");
    X.rows.row(i) = (X.rows.row(i).array() - mean) / sd;
    X.row_means[i] = mean;
    X.row_stds[i] = sd;
  }
  X.standardized = true;
  return X;
}

// Number of windows covering time step t (0-based), and the covered window
// offsets [lo, hi]: t (left edge), W (interior), N-t (right edge).
inline std::size_t trapezoid_weight(std::size_t t, std::size_t N, std::size_t W,
                                    std::size_t& lo, std::size_t& hi) {
  const std::size_t P = N - W + 1;
  if (t + 1 <= W - 1) {
    lo = 0;
    hi = t;
    return t + 1;
  }
  if (t + 1 <= P) {
    lo = 0;
    hi = W - 1;
    return W;
  }
  lo = t + 1 - P;
  hi = W - 1;
  return N - t;
}

// Diagonal-averaged reconstruction from selected modes (W×k) and their
// temporal projections (P×k). Each time step averages the k-rank window
// entries that cover it, with the trapezoid count as weight.
inline ReconstructedComponent reconstruct_component(const Eigen::MatrixXd& modes,
                                                    const Eigen::MatrixXd& pcs, std::size_t N,
                                                    std::vector<int> mode_indices = {}) {
  ReconstructedComponent rc;
  rc.mode_indices = std::move(mode_indices);
  rc.domain = Domain::standardized;
  rc.values.assign(N, 0.0);
  if (modes.cols() == 0) return rc;

  if (modes.cols() != pcs.cols()) fail(ErrorCode::ShapeMismatch, "mode/pc count mismatch");
  const std::size_t W = std::size_t(modes.rows());
  const std::size_t P = std::size_t(pcs.rows());
  if (W < 1 || P < W || P != N - W + 1)
    fail(ErrorCode::ShapeMismatch, "mode/pc shapes inconsistent with N");

  for (Eigen::Index c = 0; c < modes.cols(); ++c) {
    const double* u = modes.col(c).data();
    const double* pc = pcs.col(c).data();
    for (std::size_t t = 0; t < N; ++t) {
      std::size_t lo, hi;
      trapezoid_weight(t, N, W, lo, hi);
      double acc = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) acc += pc[t - j] * u[j];
      rc.values[t] += acc;
    }
  }
  for (std::size_t t = 0; t < N; ++t) {
    std::size_t lo, hi;
    rc.values[t] /= double(trapezoid_weight(t, N, W, lo, hi));
  }
  return rc;
}

// Maps a standardized-domain component back to original units. Standardizing
// and then diagonal-averaging sends x_t to x_t·ubar(t) − vbar(t), where ubar
// and vbar are the trapezoid averages of 1/std and mean/std over the windows
// covering t; this applies the exact inverse of that affine map.
inline ReconstructedComponent destandardize(const ReconstructedComponent& rc,
                                            const Eigen::VectorXd& row_means,
                                            const Eigen::VectorXd& row_stds, std::size_t N) {
  if (rc.domain != Domain::standardized)
    fail(ErrorCode::ShapeMismatch, "component is already in the original domain");
  if (rc.values.size() != N) fail(ErrorCode::ShapeMismatch, "component length differs from N");
  const std::size_t W = std::size_t(row_means.size());
  if (row_stds.size() != Eigen::Index(W) || W < 1 || N + 1 < 2 * W)
    fail(ErrorCode::ShapeMismatch, "standardization stats inconsistent with N");

  ReconstructedComponent out;
  out.mode_indices = rc.mode_indices;
  out.domain = Domain::original;
  out.values.resize(N);
  for (std::size_t t = 0; t < N; ++t) {
    std::size_t lo, hi;
    const double M = double(trapezoid_weight(t, N, W, lo, hi));
    double inv_sum = 0.0, ratio_sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      inv_sum += 1.0 / row_stds[Eigen::Index(j)];
      ratio_sum += row_means[Eigen::Index(j)] / row_stds[Eigen::Index(j)];
    }
    out.values[t] = (M * rc.values[t] + ratio_sum) / inv_sum;
  }
  return out;
}

// Debug serialization: 16-byte header (W, P as little-endian u64) followed by
// row-major float64.
inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  const std::uint64_t dims[2] = {std::uint64_t(m.rows()), std::uint64_t(m.cols())};
  os.write(reinterpret_cast<const char*>(dims), sizeof dims);
  std::vector<double> row(std::size_t(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[std::size_t(j)] = m(i, j);
    os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(sizeof(double) * row.size()));
  }
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
  std::uint64_t dims[2] = {0, 0};
  is.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!is) fail(ErrorCode::MalformedRow, "matrix header truncated");
  Eigen::MatrixXd m{Eigen::Index(dims[0]), Eigen::Index(dims[1])};
  std::vector<double> row(std::size_t{dims[1]});
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    is.read(reinterpret_cast<char*>(row.data()), std::streamsize(sizeof(double) * row.size()));
    if (!is) fail(ErrorCode::MalformedRow, "matrix payload truncated");
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = row[std::size_t(j)];
  }
  return m;
}

}  // namespace fluxharm
