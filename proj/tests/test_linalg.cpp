#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>

#include "fluxharm/linalg.hpp"
#include "fluxharm/rng.hpp"

using namespace fluxharm;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Central finite differences of a scalar model in its parameters.
template <typename Model>
Eigen::VectorXd fd_grad(const Model& model, double x, const Eigen::VectorXd& p) {
  Eigen::VectorXd g(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
    Eigen::VectorXd hi = p, lo = p;
    hi[j] += h;
    lo[j] -= h;
    g[j] = (model.eval(x, hi) - model.eval(x, lo)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("orthonormalize_columns yields an orthonormal basis of the same span") {
  Eigen::MatrixXd A = random_matrix(20, 5, 31);
  Eigen::MatrixXd orig = A;
  orthonormalize_columns(A);
  CHECK((A.transpose() * A - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-12);
  // The original columns lie in the span of the result.
  Eigen::MatrixXd residual = orig - A * (A.transpose() * orig);
  CHECK(residual.norm() < 1e-10);
}

TEST_CASE("orthonormalize_columns is idempotent") {
  Eigen::MatrixXd A = random_matrix(15, 4, 32);
  orthonormalize_columns(A);
  Eigen::MatrixXd twice = A;
  orthonormalize_columns(twice);
  CHECK((twice - A).norm() < 1e-12);
}

TEST_CASE("lanczos_topk matches the dense eigensolver") {
  const Eigen::Index n = 200;
  Eigen::MatrixXd B = random_matrix(n, n, 33);
  Eigen::MatrixXd S = 0.5 * (B + B.transpose());
  // Shift to make the top of the spectrum unambiguous in magnitude.
  S += double(n) * Eigen::MatrixXd::Identity(n, n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  auto apply = [&S](const Eigen::VectorXd& v, Eigen::VectorXd& out) { out.noalias() = S * v; };
  const int k = 5;
  EigenPairs ep = lanczos_topk(apply, n, k);

  REQUIRE(ep.values.size() == k);
  for (int i = 0; i < k; ++i) {
    const double dense = es.eigenvalues()[n - 1 - i];
    CHECK(ep.values[i] == Catch::Approx(dense).epsilon(1e-8));
    // Vectors agree up to sign.
    const double overlap = std::abs(ep.vectors.col(i).dot(es.eigenvectors().col(n - 1 - i)));
    CHECK(overlap == Catch::Approx(1.0).margin(1e-6));
  }
  CHECK((ep.vectors.transpose() * ep.vectors - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-8);
  // Descending order.
  for (int i = 0; i + 1 < k; ++i) CHECK(ep.values[i] >= ep.values[i + 1]);
}

TEST_CASE("lanczos_topk rejects out-of-range k") {
  auto apply = [](const Eigen::VectorXd& v, Eigen::VectorXd& out) { out = v; };
  CHECK_THROWS_AS(lanczos_topk(apply, 10, 0), Error);
  CHECK_THROWS_AS(lanczos_topk(apply, 10, 11), Error);
}

TEST_CASE("gaussian peak model gradient matches finite differences") {
  detail::GaussianPeakModel model{1e-3, 3.0};
  Eigen::VectorXd p(3);
  p << 1.7, 2.3, 0.6;
  Eigen::MatrixXd J(1, 3);
  for (double x : {0.5, 1.9, 2.3, 3.4, 6.0}) {
    model.grad(x, p, J, 0);
    Eigen::VectorXd g = J.row(0);
    Eigen::VectorXd ref = fd_grad(model, x, p);
    CHECK((g - ref).norm() < 1e-5 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("tanh step model gradient matches finite differences") {
  detail::TanhStepModel model;
  Eigen::VectorXd p(4);
  p << 2.0, 0.3, 0.8, -1.0;
  Eigen::MatrixXd J(1, 4);
  for (double u : {-3.0, -0.5, 0.3, 1.1, 4.0}) {
    model.grad(u, p, J, 0);
    Eigen::VectorXd g = J.row(0);
    Eigen::VectorXd ref = fd_grad(model, u, p);
    CHECK((g - ref).norm() < 1e-5 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("fit_gaussian_peak recovers known parameters") {
  const double amp = 2.0, mu = 3.1, sigma = 0.4;
  Eigen::VectorXd xs(14), ys(14);
  for (int i = 0; i < 14; ++i) {
    xs[i] = 0.5 * (i + 1);
    const double z = (xs[i] - mu) / sigma;
    ys[i] = amp * std::exp(-0.5 * z * z);
  }
  auto fit = fit_gaussian_peak(xs, ys, ys.maxCoeff(), 3.0, 1.0);
  CHECK(fit.converged);
  CHECK(fit.amplitude == Catch::Approx(amp).epsilon(1e-6));
  CHECK(fit.mu == Catch::Approx(mu).epsilon(1e-6));
  CHECK(fit.sigma == Catch::Approx(sigma).epsilon(1e-6));
}

TEST_CASE("fit_gaussian_peak handles near-delta spectra") {
  // One dominant bin and numerically tiny neighbours, the shape a pure tone
  // produces after windowed projection. The optimum here is extremely narrow.
  Eigen::VectorXd xs(14), ys(14);
  for (int i = 0; i < 14; ++i) {
    xs[i] = 0.5 * (i + 1);
    ys[i] = 1e-9;
  }
  ys[1] = 1.0;  // spike at x = 1.0
  ys[0] = 3e-6;
  ys[2] = 3e-6;
  auto fit = fit_gaussian_peak(xs, ys, 1.0, 1.0, 0.25);
  CHECK(fit.converged);
  CHECK(fit.mu == Catch::Approx(1.0).margin(2e-2));
  CHECK(fit.sigma >= 1e-3);
  CHECK(fit.sigma <= 3.0);
  CHECK(fit.sigma < 0.2);
}

TEST_CASE("fit_gaussian_peak keeps sigma inside the clamp") {
  Eigen::VectorXd xs(10), ys(10);
  for (int i = 0; i < 10; ++i) {
    xs[i] = 0.5 * (i + 1);
    const double z = (xs[i] - 2.5) / 8.0;  // much wider than the allowed band
    ys[i] = std::exp(-0.5 * z * z);
  }
  auto fit = fit_gaussian_peak(xs, ys, 1.0, 2.5, 1.0);
  CHECK(fit.sigma <= 3.0);
  CHECK(fit.sigma >= 1e-3);
}

TEST_CASE("fit_tanh_step recovers a smooth step") {
  const double a = 2.0, u0 = 1.3, b = 0.5, c0 = -1.0;
  Eigen::VectorXd us(48), zs(48);
  for (int i = 0; i < 48; ++i) {
    us[i] = -6.0 + 0.25 * i;
    zs[i] = a * 0.5 * (1.0 + std::tanh((us[i] - u0) / b)) + c0;
  }
  auto fit = fit_tanh_step(us, zs);
  CHECK(fit.converged);
  CHECK(fit.a == Catch::Approx(a).epsilon(1e-6));
  CHECK(fit.u0 == Catch::Approx(u0).epsilon(1e-6));
  CHECK(fit.b == Catch::Approx(b).epsilon(1e-6));
  CHECK(fit.c0 == Catch::Approx(c0).epsilon(1e-6));
  CHECK(fit.midpoint() == Catch::Approx(c0 + 0.5 * a).margin(1e-6));
}

TEST_CASE("fit_tanh_step tolerates mild noise") {
  Rng rng(55);
  const double a = 3.0, u0 = -0.7, b = 1.1, c0 = 2.0;
  Eigen::VectorXd us(64), zs(64);
  for (int i = 0; i < 64; ++i) {
    us[i] = -8.0 + 0.25 * i;
    zs[i] = a * 0.5 * (1.0 + std::tanh((us[i] - u0) / b)) + c0 + 0.01 * rng.normal();
  }
  auto fit = fit_tanh_step(us, zs);
  CHECK(fit.converged);
  CHECK(fit.u0 == Catch::Approx(u0).margin(0.1));
  CHECK(fit.midpoint() == Catch::Approx(c0 + 0.5 * a).margin(0.05));
}
