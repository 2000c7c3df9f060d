#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "fluxharm/errors.hpp"
#include "fluxharm/rng.hpp"

namespace fluxharm {

// Re-orthonormalizes the columns of A in place, preserving column order
// (thin Householder QR; each column's R diagonal is forced positive so the
// result is deterministic).
inline void orthonormalize_columns(Eigen::MatrixXd& A) {
  const Eigen::Index k = A.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  A = std::move(Q);
}

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // matching columns, orthonormal
};

// Top-k eigenpairs of a symmetric operator given only v -> A·v, by Lanczos
// with full reorthogonalization and a seeded start vector. Intended for
// n in the thousands with k ≪ n; falls back to the caller's dense path below
// that. Convergence: residual bound β·|s_m| ≤ tol·max|θ| on each wanted pair.
inline EigenPairs lanczos_topk(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    Eigen::Index n, int k, double tol = 1e-10, std::uint64_t seed = 0x1a2b3c4d5e6f7788ULL,
    int max_iter = 0) {
  if (k < 1 || Eigen::Index(k) > n)
    fail(ErrorCode::KOutOfRange, "lanczos: k out of range");
  if (max_iter <= 0) max_iter = int(std::min<Eigen::Index>(n, std::max(8 * k + 32, 96)));
  max_iter = int(std::min<Eigen::Index>(max_iter, n));

  Rng rng(seed);
  Eigen::MatrixXd V(n, max_iter);
  std::vector<double> alpha, beta;  // beta[j] links v_j and v_{j+1}
  Eigen::VectorXd v(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  v.normalize();
  V.col(0) = v;

  auto reorthogonalize = [&](Eigen::VectorXd& x, int m) {
    // Two passes of classical Gram-Schmidt against all stored vectors.
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd coef = V.leftCols(m).transpose() * x;
      x.noalias() -= V.leftCols(m) * coef;
    }
  };

  int m = 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small;
  while (m < max_iter) {
    apply(V.col(m), w);
    double a = V.col(m).dot(w);
    alpha.push_back(a);
    ++m;
    reorthogonalize(w, m);
    double b = w.norm();

    if (m >= k) {
      // Ritz values/vectors of the current tridiagonal problem.
      Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        Tm(i, i) = alpha[std::size_t(i)];
        if (i + 1 < m) Tm(i, i + 1) = Tm(i + 1, i) = beta[std::size_t(i)];
      }
      small.compute(Tm);
      double scale = std::max(small.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
      bool done = true;
      for (int i = 0; i < k; ++i) {
        double s_last = std::abs(small.eigenvectors()(m - 1, m - 1 - i));
        if (b * s_last > tol * scale) {
          done = false;
          break;
        }
      }
      if (done || m == max_iter || Eigen::Index(m) == n) {
        EigenPairs out;
        out.values.resize(k);
        out.vectors.resize(n, k);
        for (int i = 0; i < k; ++i) {
          out.values[i] = small.eigenvalues()[m - 1 - i];
          out.vectors.col(i) = V.leftCols(m) * small.eigenvectors().col(m - 1 - i);
          out.vectors.col(i).normalize();
        }
        return out;
      }
    }

    if (b < 1e-13) {
      // Krylov space exhausted early; restart with a fresh direction.
      for (Eigen::Index i = 0; i < n; ++i) w[i] = rng.normal();
      reorthogonalize(w, m);
      b = w.norm();
      if (b < 1e-13) fail(ErrorCode::SvdFailure, "lanczos: cannot extend basis");
    }
    beta.push_back(b);
    V.col(m) = w / b;
  }
  fail(ErrorCode::SvdFailure, "lanczos: no convergence");
}

namespace detail {

template <typename Model>
struct LmAdapter {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const Model* model;
  const Eigen::VectorXd* xs;
  const Eigen::VectorXd* ys;

  int inputs() const { return Model::n_params; }
  int values() const { return int(xs->size()); }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (Eigen::Index i = 0; i < xs->size(); ++i)
      r[i] = model->eval((*xs)[i], p) - (*ys)[i];
    return 0;
  }
  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const {
    for (Eigen::Index i = 0; i < xs->size(); ++i) model->grad((*xs)[i], p, J, i);
    return 0;
  }
};

template <typename Model>
inline bool run_lm(const Model& model, const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                   Eigen::VectorXd& p, int max_iter, double tol) {
  LmAdapter<Model> f{&model, &xs, &ys};
  Eigen::LevenbergMarquardt<LmAdapter<Model>> lm(f);
  // maxfev counts function evaluations; the MINPACK convention for an
  // iteration budget of N is N*(n_params+1) evaluations.
  lm.parameters.maxfev = max_iter * (Model::n_params + 1);
  lm.parameters.xtol = tol;
  lm.parameters.ftol = tol;
  lm.parameters.gtol = tol;
  auto status = lm.minimize(p);
  if (!p.allFinite()) return false;
  using S = Eigen::LevenbergMarquardtSpace::Status;
  return status != S::TooManyFunctionEvaluation && status != S::ImproperInputParameters &&
         status != S::NotStarted && status != S::Running;
}

struct GaussianPeakModel {
  static constexpr int n_params = 3;
  double lo, hi;  // σ clamp keeps the optimizer off the degenerate flat-fit family
  double clamp_sigma(double s) const { return std::clamp(std::abs(s), lo, hi); }
  double eval(double x, const Eigen::VectorXd& p) const {
    double s = clamp_sigma(p[2]);
    double z = (x - p[1]) / s;
    return p[0] * std::exp(-0.5 * z * z);
  }
  void grad(double x, const Eigen::VectorXd& p, Eigen::MatrixXd& J, Eigen::Index i) const {
    double s = clamp_sigma(p[2]);
    double z = (x - p[1]) / s;
    double e = std::exp(-0.5 * z * z);
    J(i, 0) = e;
    J(i, 1) = p[0] * e * z / s;
    bool interior = std::abs(p[2]) > lo && std::abs(p[2]) < hi;
    J(i, 2) = interior ? p[0] * e * z * z / s * (p[2] < 0 ? -1.0 : 1.0) : 0.0;
  }
};

struct TanhStepModel {
  static constexpr int n_params = 4;
  double clamp_b(double b) const { return std::max(std::abs(b), 1e-6); }
  double eval(double u, const Eigen::VectorXd& p) const {
    return p[0] * 0.5 * (1.0 + std::tanh((u - p[1]) / clamp_b(p[2]))) + p[3];
  }
  void grad(double u, const Eigen::VectorXd& p, Eigen::MatrixXd& J, Eigen::Index i) const {
    double b = clamp_b(p[2]);
    double t = std::tanh((u - p[1]) / b);
    double sech2 = 1.0 - t * t;
    J(i, 0) = 0.5 * (1.0 + t);
    J(i, 1) = -p[0] * 0.5 * sech2 / b;
    J(i, 2) = (std::abs(p[2]) > 1e-6)
                  ? -p[0] * 0.5 * sech2 * (u - p[1]) / (b * b) * (p[2] < 0 ? -1.0 : 1.0)
                  : 0.0;
    J(i, 3) = 1.0;
  }
};

}  // namespace detail

// Scaled Gaussian peak A·exp(−(x−μ)²/2σ²). σ is clamped to [sigma_min,
// sigma_max] inside the model so the optimizer cannot wander into the
// degenerate flat-fit family.
struct GaussianPeakFit {
  bool converged = false;
  double amplitude = 0.0;  // fitted curve height at μ
  double mu = 0.0;
  double sigma = 0.0;
};

inline GaussianPeakFit fit_gaussian_peak(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                                         double amp0, double mu0, double sigma0,
                                         int max_iter = 200, double tol = 1e-10,
                                         double sigma_min = 1e-3, double sigma_max = 3.0) {
  detail::GaussianPeakModel model{sigma_min, sigma_max};
  auto cost = [&](const Eigen::VectorXd& q) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      double r = model.eval(xs[i], q) - ys[i];
      c += r * r;
    }
    return c;
  };

  Eigen::VectorXd p(3);
  p << amp0, mu0, std::clamp(sigma0, sigma_min, sigma_max);

  // First descent step: log-parabola through the apex bin and its neighbours.
  // Sharp peaks put gradient solvers in a stiff valley whose floor is exactly
  // this interpolant, so propose it up front and keep it only if it lowers the
  // cost from the caller's initialisation.
  Eigen::Index pk = 0;
  ys.maxCoeff(&pk);
  if (pk > 0 && pk + 1 < ys.size() && ys[pk - 1] > 0.0 && ys[pk] > 0.0 && ys[pk + 1] > 0.0) {
    const double xl = xs[pk - 1], xm = xs[pk], xr = xs[pk + 1];
    const double ll = std::log(ys[pk - 1]), lm = std::log(ys[pk]), lr = std::log(ys[pk + 1]);
    const double a = ((lr - lm) / (xr - xm) - (lm - ll) / (xm - xl)) / (xr - xl);
    if (a < 0.0) {
      const double b = (lm - ll) / (xm - xl) - a * (xl + xm);
      const double mu = -b / (2.0 * a);
      const double sigma = std::clamp(std::sqrt(-1.0 / (2.0 * a)), sigma_min, sigma_max);
      const double zm = (xm - mu) / sigma;
      Eigen::VectorXd q(3);
      q << ys[pk] * std::exp(0.5 * zm * zm), mu, sigma;
      if (q.allFinite() && cost(q) < cost(p)) p = q;
    }
  }

  GaussianPeakFit out;
  out.converged = detail::run_lm(model, xs, ys, p, max_iter, tol);
  out.amplitude = p[0];
  out.mu = p[1];
  out.sigma = model.clamp_sigma(p[2]);
  return out;
}

// Shifted/scaled saturation step a·(1+tanh((u−u₀)/b))/2 + c₀.
struct TanhStepFit {
  bool converged = false;
  double a = 0.0, u0 = 0.0, b = 1.0, c0 = 0.0;
  double midpoint() const { return c0 + 0.5 * a; }  // value at the turning point u₀
};

inline TanhStepFit fit_tanh_step(const Eigen::VectorXd& us, const Eigen::VectorXd& zs,
                                 int max_iter = 200, double tol = 1e-10) {
  detail::TanhStepModel model;
  const double zmin = zs.minCoeff(), zmax = zs.maxCoeff();
  double mid = 0.5 * (zmin + zmax);
  Eigen::Index i0 = 0;
  (zs.array() - mid).abs().minCoeff(&i0);

  Eigen::VectorXd p(4);
  p << (zmax - zmin), us[i0], std::max((us[us.size() - 1] - us[0]) / 8.0, 1e-3), zmin;
  TanhStepFit out;
  out.converged = detail::run_lm(model, us, zs, p, max_iter, tol);
  out.a = p[0];
  out.u0 = p[1];
  out.b = model.clamp_b(p[2]);
  out.c0 = p[3];
  return out;
}

}  // namespace fluxharm
