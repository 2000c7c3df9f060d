#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "fluxharm/embedding.hpp"
#include "fluxharm/rng.hpp"

using namespace fluxharm;

namespace {

std::vector<double> random_series(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("delay_embed lays windows out as columns") {
  std::vector<double> x = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto X = delay_embed(x, 3);
  REQUIRE(X.W() == 3);
  REQUIRE(X.P() == 8);
  REQUIRE(X.N() == 10);
  CHECK_FALSE(X.standardized);
  for (Eigen::Index j = 0; j < 8; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(X.rows(i, j) == double(i + j));
  CHECK(X.row_means.isZero());
  CHECK(X.row_stds.isOnes());
}

TEST_CASE("delay_embed rejects bad windows") {
  std::vector<double> x(10, 1.0);
  CHECK_THROWS_AS(delay_embed(x, 0), Error);
  CHECK_THROWS_AS(delay_embed(x, 6), Error);  // 2W > N
  CHECK_NOTHROW(delay_embed(x, 5));
  try {
    delay_embed(x, 6);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WindowTooLarge);
  }
}

TEST_CASE("default_window picks the largest whole-year span under N/2") {
  CHECK(default_window(5114) == 2556);  // 7 years
  CHECK(default_window(2554) == 1095);  // 3 years
  CHECK(default_window(1461) == 730);   // 2 years, exactly N/2
  CHECK(default_window(731) == 365);    // 1 year
  CHECK(default_window(100) == 50);     // under two years: floor(N/2)
  // The chosen window always embeds.
  for (std::size_t n : {8UL, 365UL, 731UL, 1461UL, 2554UL, 5114UL}) {
    auto w = default_window(n);
    CHECK(2 * w <= n);
    CHECK(w >= 1);
  }
}

TEST_CASE("standardize_rows centers and scales with the n-1 denominator") {
  std::vector<double> x = {1, 2, 3};
  auto X = standardize_rows(delay_embed(x, 1));
  REQUIRE(X.W() == 1);
  REQUIRE(X.P() == 3);
  CHECK(X.standardized);
  CHECK(X.rows(0, 0) == Catch::Approx(-1.0));
  CHECK(X.rows(0, 1) == Catch::Approx(0.0));
  CHECK(X.rows(0, 2) == Catch::Approx(1.0));
  CHECK(X.row_means[0] == Catch::Approx(2.0));
  CHECK(X.row_stds[0] == Catch::Approx(1.0));
}

TEST_CASE("standardize_rows rejects repeats and constant rows") {
  auto X = standardize_rows(delay_embed(random_series(40, 1), 8));
  CHECK_THROWS_AS(standardize_rows(X), Error);

  std::vector<double> flat(20, 3.5);
  try {
    standardize_rows(delay_embed(flat, 4));
    FAIL("expected ConstantRow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantRow);
  }

  TrajectoryMatrix narrow;
  narrow.rows = Eigen::MatrixXd::Random(4, 1);
  narrow.row_means = Eigen::VectorXd::Zero(4);
  narrow.row_stds = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_AS(standardize_rows(narrow), Error);
}

TEST_CASE("trapezoid_weight counts covering windows") {
  const std::size_t N = 10, W = 3;
  const std::size_t expect[10] = {1, 2, 3, 3, 3, 3, 3, 3, 2, 1};
  std::size_t total = 0;
  for (std::size_t t = 0; t < N; ++t) {
    std::size_t lo = 99, hi = 99;
    const std::size_t M = trapezoid_weight(t, N, W, lo, hi);
    CHECK(M == expect[t]);
    CHECK(hi - lo + 1 == M);
    CHECK(hi <= W - 1);
    // Every covered offset j corresponds to a real window index t-j.
    CHECK(t >= lo);
    CHECK(t - hi <= N - W);
    total += M;
  }
  // Each of the P windows covers exactly W steps.
  CHECK(total == W * (N - W + 1));
}

TEST_CASE("identity modes reconstruct the raw series exactly") {
  auto x = random_series(60, 2);
  auto X = delay_embed(x, 12);
  Eigen::MatrixXd modes = Eigen::MatrixXd::Identity(12, 12);
  Eigen::MatrixXd pcs = X.rows.transpose() * modes;
  auto rc = reconstruct_component(modes, pcs, x.size());
  REQUIRE(rc.values.size() == x.size());
  CHECK(rc.domain == Domain::standardized);
  for (std::size_t t = 0; t < x.size(); ++t) CHECK(rc.values[t] == Catch::Approx(x[t]).margin(1e-12));
}

TEST_CASE("standardize then reconstruct then destandardize round-trips") {
  auto x = random_series(200, 3);
  for (auto& v : x) v = 5.0 + 2.0 * v;  // non-trivial offset and scale
  auto X = standardize_rows(delay_embed(x, 30));
  Eigen::MatrixXd modes = Eigen::MatrixXd::Identity(30, 30);
  Eigen::MatrixXd pcs = X.rows.transpose() * modes;
  auto rc = reconstruct_component(modes, pcs, x.size());
  auto back = destandardize(rc, X.row_means, X.row_stds, x.size());
  CHECK(back.domain == Domain::original);
  for (std::size_t t = 0; t < x.size(); ++t)
    CHECK(back.values[t] == Catch::Approx(x[t]).margin(1e-8));
}

TEST_CASE("reconstruction is additive over mode subsets") {
  auto x = random_series(80, 4);
  auto X = standardize_rows(delay_embed(x, 16));
  Eigen::MatrixXd modes = Eigen::MatrixXd::Random(16, 4);
  Eigen::MatrixXd pcs = X.rows.transpose() * modes;

  auto all = reconstruct_component(modes, pcs, x.size(), {0, 1, 2, 3});
  auto head = reconstruct_component(modes.leftCols(2), pcs.leftCols(2), x.size(), {0, 1});
  auto tail = reconstruct_component(modes.rightCols(2), pcs.rightCols(2), x.size(), {2, 3});
  CHECK(all.mode_indices == std::vector<int>{0, 1, 2, 3});
  for (std::size_t t = 0; t < x.size(); ++t)
    CHECK(all.values[t] == Catch::Approx(head.values[t] + tail.values[t]).margin(1e-12));
}

TEST_CASE("reconstruction shape errors") {
  Eigen::MatrixXd modes = Eigen::MatrixXd::Zero(5, 2);
  Eigen::MatrixXd pcs = Eigen::MatrixXd::Zero(6, 3);
  CHECK_THROWS_AS(reconstruct_component(modes, pcs, 10), Error);
  Eigen::MatrixXd pcs2 = Eigen::MatrixXd::Zero(6, 2);
  CHECK_THROWS_AS(reconstruct_component(modes, pcs2, 11), Error);  // P != N-W+1
  CHECK_NOTHROW(reconstruct_component(modes, pcs2, 10));

  Eigen::MatrixXd none(5, 0);
  auto rc = reconstruct_component(none, Eigen::MatrixXd(6, 0), 10);
  REQUIRE(rc.values.size() == 10);
  for (double v : rc.values) CHECK(v == 0.0);
}

TEST_CASE("destandardize validates domain and lengths") {
  ReconstructedComponent rc;
  rc.values.assign(10, 0.0);
  rc.domain = Domain::original;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(3), sd = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(destandardize(rc, mu, sd, 10), Error);
  rc.domain = Domain::standardized;
  CHECK_THROWS_AS(destandardize(rc, mu, sd, 11), Error);
  CHECK_NOTHROW(destandardize(rc, mu, sd, 10));
}

TEST_CASE("matrix serialization round-trips bitwise") {
  Eigen::MatrixXd m(3, 4);
  Rng rng(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
  std::stringstream buf;
  write_matrix(buf, m);
  Eigen::MatrixXd back = read_matrix(buf);
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 4);
  CHECK((back.array() == m.array()).all());

  std::stringstream trunc;
  write_matrix(trunc, m);
  std::string payload = trunc.str();
  std::istringstream short_stream(payload.substr(0, payload.size() / 2));
  CHECK_THROWS_AS(read_matrix(short_stream), Error);
}
