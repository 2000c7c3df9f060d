// Acceptance sweep: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. Exits nonzero if any check fails.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fluxharm/embedding.hpp"
#include "fluxharm/ingest.hpp"
#include "fluxharm/metrics.hpp"
#include "fluxharm/nlsa.hpp"
#include "fluxharm/pipeline.hpp"
#include "fluxharm/rng.hpp"
#include "fluxharm/spectral.hpp"
#include "fluxharm/ssa.hpp"
#include "fluxharm/synth.hpp"

using namespace fluxharm;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const char* id, const char* what, bool ok, const std::string& detail = "") {
  std::printf("%s: %s %s%s%s\n", ok ? "PASS" : "FAIL", id, what,
              detail.empty() ? "" : " — ", detail.c_str());
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> smooth_noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  double level = 0.0;
  for (auto& v : x) {
    level = 0.9 * level + rng.normal();
    v = level;
  }
  return x;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    ma += a[t];
    mb += b[t];
  }
  ma /= double(n);
  mb /= double(n);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    num += (a[t] - ma) * (b[t] - mb);
    da += (a[t] - ma) * (a[t] - ma);
    db += (b[t] - mb) * (b[t] - mb);
  }
  return num / std::sqrt(da * db);
}

HarmonicInventory ssa_inventory(const TrajectoryMatrix& X, ModeSet& ms, int k = 16) {
  ms = ssa_decompose(X, k);
  return pair_harmonics(classify_modes(ms));
}

HarmonicInventory nlsa_inventory(const TrajectoryMatrix& X, ModeSet& ms, std::uint64_t seed,
                                 int k = 16) {
  NlsaConfig ncfg;
  ncfg.seed = seed;
  auto est = estimate_epsilon(X, ncfg);
  auto tm = build_transition(build_kernel(pairwise_distances(X), est.epsilon));
  ms = nlsa_decompose(tm, X, k);
  return pair_harmonics(classify_modes(ms));
}

// ---------------------------------------------------------------------------

void c1_reconstruction_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t N = 400, W = 100;
  auto x = smooth_noise(N, 20070101);
  auto X = standardize_rows(delay_embed(x, W));
  auto ms = ssa_decompose(X, int(W));  // full rank
  auto rc = reconstruct_component(ms.modes, ms.pcs, N);

  // Reference: diagonal average of the standardized matrix itself.
  double max_std_err = 0.0;
  for (std::size_t t = 0; t < N; ++t) {
    std::size_t lo, hi;
    const double M = double(trapezoid_weight(t, N, W, lo, hi));
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += X.rows(Eigen::Index(j), Eigen::Index(t - j));
    max_std_err = std::max(max_std_err, std::abs(rc.values[t] - acc / M));
  }

  auto back = destandardize(rc, X.row_means, X.row_stds, N);
  double max_abs = 0.0, max_err = 0.0;
  for (std::size_t t = 0; t < N; ++t) {
    max_abs = std::max(max_abs, std::abs(x[t]));
    max_err = std::max(max_err, std::abs(back.values[t] - x[t]));
  }
  const double rel = max_err / max_abs;
  const double dt = seconds_since(t0);

  char buf[160];
  std::snprintf(buf, sizeof buf, "std err %.2e, round-trip rel %.2e, %.1f s", max_std_err, rel,
                dt);
  report("C1", "full-rank reconstruction identity",
         max_std_err <= 1e-8 && rel <= 1e-6 && dt < 5.0, buf);
}

void c2_degenerate_pair() {
  const std::size_t N = 2554;  // seven years; the default window divides the tone period
  std::vector<double> x(N);
  for (std::size_t t = 0; t < N; ++t)
    x[t] = std::sin(2.0 * std::numbers::pi * double(t) / 365.0);
  const std::size_t W = default_window(N);
  auto X = standardize_rows(delay_embed(x, W));
  auto ms = ssa_decompose(X, 4);
  const double gap = (ms.spectrum[0] - ms.spectrum[1]) / ms.spectrum[0];

  auto labels = classify_modes(ms);
  const bool pair_harmonic = labels[0].is_harmonic && labels[1].is_harmonic &&
                             labels[0].matched_f && *labels[0].matched_f == 1 &&
                             labels[1].matched_f && *labels[1].matched_f == 1;

  char buf[160];
  std::snprintf(buf, sizeof buf, "W=%zu, relative gap %.2e, both modes at f=1: %s", W, gap,
                pair_harmonic ? "yes" : "no");
  report("C2", "single-tone degenerate mode pair", gap <= 1e-6 && pair_harmonic, buf);
}

void c3_harmonic_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  int good = 0;
  std::string detail;
  for (int s = 0; s < 5; ++s) {
    SignalRecipe recipe;
    recipe.harmonics = {{1, 1.0, 0.0}, {2, 0.5, 0.4}, {3, 0.3, 1.1}, {4, 0.2, 2.2}};
    recipe.noise = {NoiseKind::white, 0.1, 0.0};
    recipe.seed = derive_seed(4242, "recovery", std::uint64_t(s));
    auto out = generate(recipe);
    auto X = standardize_rows(delay_embed(out.series.values, 730));

    bool ok = false;
    try {
      ModeSet ssa_ms, nlsa_ms;
      auto ssa_inv = ssa_inventory(X, ssa_ms);
      auto nlsa_inv = nlsa_inventory(X, nlsa_ms, derive_seed(recipe.seed, "eps"));
      double ssa_corr = 0.0, nlsa_corr = 0.0;
      if (!ssa_inv.pairs.empty()) {
        auto cyc = build_seasonal_cycle(ssa_ms, ssa_inv, X.row_means, X.row_stds, out.noiseless.size());
        ssa_corr = pearson(cyc.values, out.noiseless);
      }
      if (!nlsa_inv.pairs.empty()) {
        auto cyc = build_seasonal_cycle(nlsa_ms, nlsa_inv, X.row_means, X.row_stds, out.noiseless.size());
        nlsa_corr = pearson(cyc.values, out.noiseless);
      }
      ok = ssa_inv.pairs.size() >= 2 && nlsa_inv.pairs.size() >= 3 && ssa_corr >= 0.98 &&
           nlsa_corr >= 0.98;
      char buf[96];
      std::snprintf(buf, sizeof buf, "[seed %d: ssa %zu pairs r=%.3f, nlsa %zu pairs r=%.3f]", s,
                    ssa_inv.pairs.size(), ssa_corr, nlsa_inv.pairs.size(), nlsa_corr);
      detail += buf;
    } catch (const std::exception& e) {
      detail += std::string("[seed ") + std::to_string(s) + ": " + e.what() + "]";
    }
    if (ok) ++good;
  }
  const double dt = seconds_since(t0);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d/5 seeds, %.0f s ", good, dt);
  report("C3", "harmonic stack recovery under white noise", good >= 3 && dt < 120.0,
         buf + detail);
}

void c4_noise_asymmetry() {
  // Part one: strong low-frequency noise buries the annual cycle for the
  // geometry-based method but not for the variance-based one.
  int part1 = 0;
  std::string detail = "unfiltered:";
  for (int s = 0; s < 5; ++s) {
    SignalRecipe recipe;
    recipe.harmonics = {{1, 1.0, 0.0}};
    recipe.noise = {NoiseKind::broadband, 1.5, 1.0};
    recipe.seed = derive_seed(4343, "asymmetry", std::uint64_t(s));
    auto out = generate(recipe);
    auto X = standardize_rows(delay_embed(out.series.values, 730));
    bool ok = false;
    try {
      ModeSet ssa_ms, nlsa_ms;
      auto ssa_inv = ssa_inventory(X, ssa_ms);
      auto nlsa_inv = nlsa_inventory(X, nlsa_ms, derive_seed(recipe.seed, "eps"));
      const bool ssa_found = ssa_inv.category == DetectionCategory::fundamental ||
                             ssa_inv.category == DetectionCategory::multiple;
      ok = ssa_found && nlsa_inv.category == DetectionCategory::none;
      char buf[64];
      std::snprintf(buf, sizeof buf, " [%d: ssa=%s nlsa=%s]", s,
                    category_name(ssa_inv.category), category_name(nlsa_inv.category));
      detail += buf;
    } catch (const std::exception& e) {
      detail += std::string(" [") + std::to_string(s) + ": " + e.what() + "]";
    }
    if (ok) ++part1;
  }

  // Part two: removing band-limited fast noise must never cost the geometry
  // method pairs, while the variance method stays put.
  int part2 = 0;
  detail += " filtered:";
  for (int s = 0; s < 5; ++s) {
    SignalRecipe recipe;
    recipe.harmonics = {{1, 1.0, 0.0}};
    recipe.seed = derive_seed(4444, "hfnoise", std::uint64_t(s));
    auto out = generate(recipe);
    const std::size_t N = out.noiseless.size();

    // Noise confined to bins strictly above 6 cycles per year: the band edge
    // must not straddle the sixth harmonic's acceptance window, so the split
    // frequency sits half a bin beyond it.
    const double split = 6.0 + 0.5 * days_per_year / double(N);
    Rng rng(derive_seed(recipe.seed, "hf"));
    std::vector<double> w(N);
    for (auto& v : w) v = 1.5 * rng.normal();
    auto slow = lowpass(w, split);
    std::vector<double> noisy(N);
    for (std::size_t t = 0; t < N; ++t) noisy[t] = out.noiseless[t] + (w[t] - slow[t]);

    bool ok = false;
    try {
      auto Xu = standardize_rows(delay_embed(noisy, 730));
      auto Xf = standardize_rows(delay_embed(lowpass(noisy, 6.0), 730));
      ModeSet m1, m2, m3, m4;
      const std::size_t ssa_u = ssa_inventory(Xu, m1).pairs.size();
      const std::size_t ssa_f = ssa_inventory(Xf, m2).pairs.size();
      const std::size_t nlsa_u =
          nlsa_inventory(Xu, m3, derive_seed(recipe.seed, "eps-u")).pairs.size();
      const std::size_t nlsa_f =
          nlsa_inventory(Xf, m4, derive_seed(recipe.seed, "eps-f")).pairs.size();
      ok = nlsa_f >= nlsa_u && ssa_f == ssa_u;
      char buf[64];
      std::snprintf(buf, sizeof buf, " [%d: ssa %zu->%zu nlsa %zu->%zu]", s, ssa_u, ssa_f,
                    nlsa_u, nlsa_f);
      detail += buf;
    } catch (const std::exception& e) {
      detail += std::string(" [") + std::to_string(s) + ": " + e.what() + "]";
    }
    if (ok) ++part2;
  }

  char buf[64];
  std::snprintf(buf, sizeof buf, "broadband %d/5 seeds, band-limited %d/5 seeds; ", part1, part2);
  report("C4", "noise-type asymmetry between methods", part1 >= 3 && part2 >= 3, buf + detail);
}

void c5_transition_contract() {
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    Rng rng(derive_seed(4545, "kernel", std::uint64_t(trial)));
    const Eigen::Index W = 3 + Eigen::Index(rng.uniform_index(8));
    const Eigen::Index P = 24 + Eigen::Index(rng.uniform_index(57));
    TrajectoryMatrix X;
    X.rows.resize(W, P);
    for (Eigen::Index i = 0; i < W; ++i)
      for (Eigen::Index j = 0; j < P; ++j) X.rows(i, j) = rng.normal();
    X.row_means = Eigen::VectorXd::Zero(W);
    X.row_stds = Eigen::VectorXd::Ones(W);
    X.standardized = true;

    std::optional<int> knn;
    if (trial % 3 == 1) knn = int(P / 4);
    if (trial % 3 == 2) knn = 5;
    auto D = pairwise_distances(X, knn);

    // Scale epsilon off the typical squared distance so rows stay connected.
    double med = 0.0;
    {
      std::vector<double> z2;
      for (Eigen::Index i = 0; i < P; ++i)
        for (Eigen::Index j = i + 1; j < P; ++j)
          if (std::isfinite(D.d(i, j))) z2.push_back(D.d(i, j) * D.d(i, j));
      std::nth_element(z2.begin(), z2.begin() + std::ptrdiff_t(z2.size() / 2), z2.end());
      med = z2[z2.size() / 2];
    }
    const double eps = med * std::exp((rng.uniform() - 0.5) * 2.0);
    auto tm = build_transition(build_kernel(D, eps));

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(P);
    if (tm.T.minCoeff() < 0.0) ok = false;
    if ((tm.T * ones - ones).cwiseAbs().maxCoeff() > 1e-10) ok = false;

    Eigen::VectorXd dsqrt = tm.density.cwiseSqrt();
    Eigen::MatrixXd S = dsqrt.asDiagonal() * tm.T * dsqrt.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym(S);
    Eigen::EigenSolver<Eigen::MatrixXd> direct(tm.T);
    if (sym.info() != Eigen::Success || direct.info() != Eigen::Success) ok = false;

    std::vector<double> d_re;
    for (Eigen::Index i = 0; i < P; ++i) {
      if (std::abs(direct.eigenvalues()[i].imag()) > 1e-8) ok = false;
      d_re.push_back(direct.eigenvalues()[i].real());
    }
    std::sort(d_re.begin(), d_re.end());
    for (Eigen::Index i = 0; i < P; ++i) {
      const double lam = sym.eigenvalues()[i];
      if (lam < -1.0 - 1e-10 || lam > 1.0 + 1e-10) ok = false;
      if (std::abs(lam - d_re[std::size_t(i)]) > 1e-8) ok = false;
    }
    if (std::abs(sym.eigenvalues()[P - 1] - 1.0) > 1e-10) ok = false;
    // The λ=1 right eigenvector of T is constant.
    Eigen::VectorXd lead = sym.eigenvectors().col(P - 1).cwiseQuotient(dsqrt);
    lead /= lead[0];
    if ((lead - ones).cwiseAbs().maxCoeff() > 1e-8) ok = false;
    if (!ok) detail = "failed at trial " + std::to_string(trial);
  }
  report("C5", "transition-matrix spectral contract on 50 random kernels", ok, detail);
}

void c6_kernel_scale_selection() {
  // Fixed cloud of 96 points in five dimensions.
  Rng rng(6001);
  TrajectoryMatrix X;
  X.rows.resize(5, 96);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 96; ++j) X.rows(i, j) = rng.normal();
  X.row_means = Eigen::VectorXd::Zero(5);
  X.row_stds = Eigen::VectorXd::Ones(5);
  X.standardized = true;

  NlsaConfig cfg;
  cfg.subset_size = 64;
  auto est = estimate_epsilon(X, cfg);
  const double c = double(est.subset_size);
  const bool limits = std::abs(est.curve.front().second - c) <= 1e-6 * c &&
                      std::abs(est.curve.back().second - c * c) <= 1e-3 * c * c;

  double lo = est.epsilon, hi = est.epsilon;
  for (int s = 0; s < 20; ++s) {
    cfg.seed = derive_seed(6002, "stability", std::uint64_t(s));
    const double e = estimate_epsilon(X, cfg).epsilon;
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  const bool stable = hi <= 2.0 * lo;

  bool degenerate_raised = false;
  TrajectoryMatrix same = X;
  for (Eigen::Index j = 0; j < 96; ++j) same.rows.col(j) = X.rows.col(0);
  try {
    estimate_epsilon(same, cfg);
  } catch (const Error& e) {
    degenerate_raised = e.code() == ErrorCode::DegenerateCurve;
  }

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "limits %s, spread %.3g..%.3g (x%.2f), degenerate raised %s",
                limits ? "ok" : "off", lo, hi, hi / lo, degenerate_raised ? "yes" : "no");
  report("C6", "kernel-scale selection behaviour", limits && stable && degenerate_raised, buf);
}

void c7_classifier_boundaries() {
  auto spectrum = [](double mu, double sigma) {
    PowerSpectrum ps;
    ps.n_samples = 1461;
    for (int n = 1; n <= 28; ++n) {
      const double k = 0.25 * n;
      ps.freqs.push_back(k);
      const double z = (k - mu) / sigma;
      ps.power.push_back(std::exp(-0.5 * z * z));
    }
    return ps;
  };

  bool ok = true;
  for (int f : {1, 3}) {
    auto in_low = classify_spectrum(spectrum(double(f) - 0.149, 0.3));
    auto in_high = classify_spectrum(spectrum(double(f) + 0.149, 0.3));
    auto out_low = classify_spectrum(spectrum(double(f) - 0.151, 0.3));
    auto out_high = classify_spectrum(spectrum(double(f) + 0.151, 0.3));
    ok = ok && in_low.is_harmonic && in_low.matched_f == f;
    ok = ok && in_high.is_harmonic && in_high.matched_f == f;
    ok = ok && !out_low.is_harmonic && !out_high.is_harmonic;
  }

  auto with_spike = [&](double ratio) {
    auto ps = spectrum(2.0, 0.3);
    ps.power[25] = ratio;  // bin at 6.5 cycles/year, far outside the peak support
    return classify_spectrum(ps);
  };
  ok = ok && with_spike(0.149).is_harmonic;
  ok = ok && !with_spike(0.151).is_harmonic;

  report("C7", "classifier frequency and residual boundaries at 0.15", ok);
}

void c8_sample_entropy_oracle() {
  auto naive_counts = [](const std::vector<double>& x, int m, double r_frac, std::uint64_t& a,
                         std::uint64_t& b) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double tol = r_frac * std::sqrt(var / double(n));
    a = b = 0;
    const std::size_t last = n - std::size_t(m) - 1;
    for (std::size_t i = 0; i <= last; ++i)
      for (std::size_t j = i + 1; j <= last; ++j) {
        double dm = 0.0;
        for (int t = 0; t < m; ++t)
          dm = std::max(dm, std::abs(x[i + std::size_t(t)] - x[j + std::size_t(t)]));
        if (dm > tol) continue;
        ++b;
        if (std::abs(x[i + std::size_t(m)] - x[j + std::size_t(m)]) <= tol) ++a;
      }
  };

  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    Rng rng(derive_seed(4646, "entropy", std::uint64_t(trial)));
    const std::size_t n = 50 + rng.uniform_index(451);  // up to 500
    std::vector<double> x(n);
    if (trial % 2 == 0)
      for (auto& v : x) v = rng.normal();
    else
      for (auto& v : x) v = double(rng.uniform_index(10)) * 0.25;  // heavy ties
    std::uint64_t a = 0, b = 0;
    naive_counts(x, 2, 0.2, a, b);
    auto got = sample_entropy(x, 2, 0.2);
    if (got.a != a || got.b != b) {
      ok = false;
      detail = "count mismatch at trial " + std::to_string(trial);
    }
  }

  auto flat = sample_entropy(std::vector<double>(100, 1.5));
  if (flat.undefined || flat.value != 0.0) {
    ok = false;
    detail += " constant series not zero";
  }
  report("C8", "sample-entropy counts match the brute-force oracle", ok, detail);
}

void c9_metrics_algebra() {
  bool ok = true;
  std::string detail;

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 120 + 14 * std::size_t(trial);
    auto x = smooth_noise(n, derive_seed(4747, "hfzero", std::uint64_t(trial)));
    worst = std::max(worst, hf_variability(fft_power(lowpass(x, 6.0))));
  }
  if (worst > 1e-12) {
    ok = false;
    detail += "residual hf " + std::to_string(worst);
  }

  std::vector<double> fast(1461);
  for (std::size_t t = 0; t < fast.size(); ++t)
    fast[t] = std::sin(2.0 * std::numbers::pi * 10.0 * double(t) / days_per_year);
  const double hf_tone = hf_variability(fft_power(fast));
  if (std::abs(hf_tone - 1.0) > 1e-10) {
    ok = false;
    detail += " tone hf " + std::to_string(hf_tone);
  }

  auto run_of = [](std::size_t len) {
    std::vector<double> qf(1000, 1.0);
    for (std::size_t t = 300; t < 300 + len; ++t) qf[t] = 0.0;
    return persistent_qf(qf).flagged;
  };
  if (run_of(182) || !run_of(183)) {
    ok = false;
    detail += " qf threshold off";
  }

  char buf[64];
  std::snprintf(buf, sizeof buf, "max hf after lowpass %.1e", worst);
  report("C9", "filter and flag metric algebra", ok, detail.empty() ? buf : detail);
}

void c10_determinism() {
  const fs::path tmp = fs::temp_directory_path() / "fluxharm_acceptance_c10";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  SignalRecipe recipe;
  recipe.harmonics = {{1, 1.0, 0.2}};
  recipe.noise = {NoiseKind::white, 0.1, 0.0};
  recipe.seed = 777;
  auto out = generate(recipe);
  const fs::path csv = tmp / "site_GPP.csv";
  {
    std::ofstream os(csv);
    write_flux_csv(os, out.series);
  }

  PipelineConfig cfg;
  cfg.inputs = {csv.string()};
  cfg.k = 8;
  cfg.nlsa.subset_size = 128;
  cfg.nlsa.n_runs = 4;

  const std::string first = report_json(run_pipeline(cfg));
  const std::string second = report_json(run_pipeline(cfg));
  fs::remove_all(tmp);

  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu bytes each", first.size());
  report("C10", "byte-identical report across reruns", !first.empty() && first == second, buf);
}

}  // namespace

int main() {
  c1_reconstruction_identity();
  c2_degenerate_pair();
  c3_harmonic_recovery();
  c4_noise_asymmetry();
  c5_transition_contract();
  c6_kernel_scale_selection();
  c7_classifier_boundaries();
  c8_sample_entropy_oracle();
  c9_metrics_algebra();
  c10_determinism();
  std::printf("SKIP: C11 site-data reproduction — manual recipe documented in README; needs "
              "externally licensed measurements\n");
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
