#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "fluxharm/embedding.hpp"
#include "fluxharm/errors.hpp"
#include "fluxharm/linalg.hpp"
#include "fluxharm/ssa.hpp"

namespace fluxharm {

inline constexpr double days_per_year = 365.25;

// Relative power over the positive-frequency bins k_n = n/(N·Δt_years),
// n = 1..⌊N/2⌋. zero_power marks a spectrum with no variance (constant
// input); its power entries are all zero instead of NaN.
struct PowerSpectrum {
  std::vector<double> freqs;  // cycles per year, ascending
  std::vector<double> power;  // sums to 1 unless zero_power
  std::size_t n_samples = 0;
  bool zero_power = false;

  double bin_width() const { return freqs.empty() ? 0.0 : freqs.front(); }
};

inline PowerSpectrum fft_power(const std::vector<double>& series, double dt_days = 1.0) {
  const std::size_t N = series.size();
  if (N < 4) fail(ErrorCode::TooShort, "spectrum needs at least 4 samples");

  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= double(N);
  std::vector<double> centered(N);
  double ss = 0.0;
  for (std::size_t t = 0; t < N; ++t) {
    centered[t] = series[t] - mean;
    ss += centered[t] * centered[t];
  }

  PowerSpectrum ps;
  ps.n_samples = N;
  const double dt_years = dt_days / days_per_year;
  const std::size_t half = N / 2;
  ps.freqs.resize(half);
  ps.power.assign(half, 0.0);
  for (std::size_t n = 1; n <= half; ++n)
    ps.freqs[n - 1] = double(n) / (double(N) * dt_years);

  // A constant series leaves only cancellation residue after centering;
  // report a flagged all-zero spectrum rather than normalizing noise.
  const double scale = std::max(std::abs(mean), 1.0);
  if (ss <= double(N) * (1e-13 * scale) * (1e-13 * scale)) {
    ps.zero_power = true;
    return ps;
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, centered);
  double total = 0.0;
  for (std::size_t n = 1; n <= half; ++n) {
    const double fold = (2 * n == N) ? 1.0 : 2.0;  // Nyquist bin has no mirror
    ps.power[n - 1] = fold * std::norm(spec[n]);
    total += ps.power[n - 1];
  }
  for (double& p : ps.power) p /= total;
  return ps;
}

// Zeroes every FFT bin at |k| ≥ f_l cycles/year (DC is always kept) and
// transforms back.
inline std::vector<double> lowpass(const std::vector<double>& series, double f_l,
                                   double dt_days = 1.0) {
  if (!(f_l > 0.0)) fail(ErrorCode::InvalidCutoff, "cutoff frequency must be positive");
  const std::size_t N = series.size();
  if (N < 4) fail(ErrorCode::TooShort, "lowpass needs at least 4 samples");

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  std::vector<double> input = series;
  fft.fwd(spec, input);
  const double dt_years = dt_days / days_per_year;
  for (std::size_t n = 1; n < N; ++n) {
    const double k = double(std::min(n, N - n)) / (double(N) * dt_years);
    if (k >= f_l) spec[n] = 0.0;
  }
  std::vector<double> out;
  fft.inv(out, spec);
  return out;
}

struct HarmonicLabel {
  int mode_index = -1;
  bool is_harmonic = false;
  double mu_k = std::numeric_limits<double>::quiet_NaN();
  double sigma_g = std::numeric_limits<double>::quiet_NaN();
  double peak_height = 0.0;    // fitted curve maximum
  double residual_max = 0.0;   // largest bin outside the ±3σ peak support
  std::optional<int> matched_f;
  bool fit_failed = false;
};

inline const std::vector<int>& default_harmonic_set() {
  static const std::vector<int> fs = {1, 2, 3, 4, 5, 6};
  return fs;
}

// Gaussian-peak classification of a power spectrum restricted to
// k ∈ [0,7] yr⁻¹. A spectrum is harmonic when the fitted center lies within
// eps_f of an integer harmonic and everything outside the peak's ±3σ support
// stays below eps_p of the fitted height.
inline HarmonicLabel classify_spectrum(const PowerSpectrum& ps, double eps_f = 0.15,
                                       double eps_p = 0.15,
                                       const std::vector<int>& harmonic_set = default_harmonic_set()) {
  HarmonicLabel label;
  if (ps.zero_power || ps.power.empty()) return label;

  std::size_t n_fit = 0;
  while (n_fit < ps.freqs.size() && ps.freqs[n_fit] <= 7.0) ++n_fit;
  if (n_fit < 3) {
    label.fit_failed = true;
    return label;
  }

  const Eigen::Index nf = Eigen::Index(n_fit);
  Eigen::VectorXd xs(nf), ys(nf);
  std::size_t peak_bin = 0;
  for (std::size_t i = 0; i < n_fit; ++i) {
    xs[Eigen::Index(i)] = ps.freqs[i];
    ys[Eigen::Index(i)] = ps.power[i];
    if (ps.power[i] > ps.power[peak_bin]) peak_bin = i;
  }

  GaussianPeakFit fit = fit_gaussian_peak(xs, ys, ps.power[peak_bin], ps.freqs[peak_bin],
                                          ps.bin_width());
  label.mu_k = fit.mu;
  label.sigma_g = fit.sigma;
  label.peak_height = fit.amplitude;
  if (!fit.converged) {
    label.fit_failed = true;
    return label;
  }

  int best_f = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int f : harmonic_set) {
    const double d = std::abs(fit.mu - double(f));
    if (d < best_dist) {
      best_dist = d;
      best_f = f;
    }
  }
  if (best_dist <= eps_f) label.matched_f = best_f;

  std::size_t outside = 0;
  for (std::size_t i = 0; i < n_fit; ++i)
    if (std::abs(ps.freqs[i] - fit.mu) > 3.0 * fit.sigma) {
      ++outside;
      label.residual_max = std::max(label.residual_max, ps.power[i]);
    }

  // A fit whose support swallows the whole analyzed band leaves nothing to
  // test the peak against; such a mode is broadband, not a harmonic.
  label.is_harmonic = label.matched_f.has_value() && label.peak_height > 0.0 && outside > 0 &&
                      label.residual_max <= eps_p * label.peak_height;
  return label;
}

inline HarmonicLabel classify_mode(const Eigen::VectorXd& mode, double eps_f = 0.15,
                                   double eps_p = 0.15,
                                   const std::vector<int>& harmonic_set = default_harmonic_set(),
                                   double dt_days = 1.0) {
  if (double(mode.size()) * dt_days < 730.0)
    fail(ErrorCode::ConfigError, "mode classification needs a window of at least two years");
  std::vector<double> vals(mode.data(), mode.data() + mode.size());
  return classify_spectrum(fft_power(vals, dt_days), eps_f, eps_p, harmonic_set);
}

inline std::vector<HarmonicLabel> classify_modes(const ModeSet& ms, double eps_f = 0.15,
                                                 double eps_p = 0.15,
                                                 const std::vector<int>& harmonic_set =
                                                     default_harmonic_set(),
                                                 double dt_days = 1.0) {
  std::vector<HarmonicLabel> labels(std::size_t(ms.k));
  // Directions whose projection amplitude is roundoff relative to the leading
  // one live in the numerical nullspace of the decomposition; their patterns
  // are arbitrary and must not be mistaken for detected oscillations.
  const double floor =
      ms.spectrum.size() > 0 ? 1e-8 * ms.spectrum[0] : 0.0;
  for (int i = 0; i < ms.k; ++i) {
    if (Eigen::Index(i) < ms.spectrum.size() && ms.spectrum[i] <= floor) {
      labels[std::size_t(i)].mode_index = i;
      continue;
    }
    labels[std::size_t(i)] = classify_mode(ms.modes.col(i), eps_f, eps_p, harmonic_set, dt_days);
    labels[std::size_t(i)].mode_index = i;
  }
  return labels;
}

struct HarmonicPair {
  int mode_a = -1;
  int mode_b = -1;
  int f = 0;
};

enum class DetectionCategory { none, deficient, fundamental, multiple };

inline const char* category_name(DetectionCategory c) {
  switch (c) {
    case DetectionCategory::none: return "none";
    case DetectionCategory::deficient: return "deficient";
    case DetectionCategory::fundamental: return "fundamental";
    case DetectionCategory::multiple: return "multiple";
  }
  return "?";
}

struct HarmonicInventory {
  std::vector<HarmonicLabel> labels;
  std::vector<HarmonicPair> pairs;      // ordered by (f, first mode index)
  std::vector<int> deficient;           // harmonic modes left unpaired
  DetectionCategory category = DetectionCategory::none;
};

// Greedy pairing of harmonic modes that share a matched frequency, in
// ascending mode-index order. Category: none without harmonic labels;
// deficient when harmonics exist but the fundamental has no complete pair;
// fundamental for pairs at f=1 only; multiple once f=1 and some f≥2 both
// carry complete pairs.
inline HarmonicInventory pair_harmonics(std::vector<HarmonicLabel> labels) {
  HarmonicInventory inv;
  std::map<int, std::vector<int>> by_f;
  for (const auto& l : labels)
    if (l.is_harmonic && l.matched_f) by_f[*l.matched_f].push_back(l.mode_index);
  inv.labels = std::move(labels);

  bool any_harmonic = !by_f.empty();
  for (auto& [f, idx] : by_f) {
    std::sort(idx.begin(), idx.end());
    std::size_t i = 0;
    for (; i + 1 < idx.size(); i += 2) inv.pairs.push_back({idx[i], idx[i + 1], f});
    if (i < idx.size()) inv.deficient.push_back(idx[i]);
  }
  std::sort(inv.deficient.begin(), inv.deficient.end());

  bool has_f1 = false, has_higher = false;
  for (const auto& p : inv.pairs) (p.f == 1 ? has_f1 : has_higher) = true;
  if (!any_harmonic)
    inv.category = DetectionCategory::none;
  else if (!has_f1)
    inv.category = DetectionCategory::deficient;
  else
    inv.category = has_higher ? DetectionCategory::multiple : DetectionCategory::fundamental;
  return inv;
}

struct SeasonalCycle {
  std::vector<double> values;  // original units, length N
  std::vector<int> harmonics_used;
  Method method = Method::SSA;
};

inline SeasonalCycle build_seasonal_cycle(const ModeSet& ms, const HarmonicInventory& inv,
                                          const Eigen::VectorXd& row_means,
                                          const Eigen::VectorXd& row_stds, std::size_t N) {
  if (inv.pairs.empty()) fail(ErrorCode::NoPairs, "no complete harmonic pairs to reconstruct");

  std::vector<int> sel;
  SeasonalCycle sc;
  sc.method = ms.method;
  for (const auto& p : inv.pairs) {
    sel.push_back(p.mode_a);
    sel.push_back(p.mode_b);
    sc.harmonics_used.push_back(p.f);
  }
  std::sort(sel.begin(), sel.end());
  std::sort(sc.harmonics_used.begin(), sc.harmonics_used.end());
  sc.harmonics_used.erase(std::unique(sc.harmonics_used.begin(), sc.harmonics_used.end()),
                          sc.harmonics_used.end());

  Eigen::MatrixXd modes(ms.modes.rows(), Eigen::Index(sel.size()));
  Eigen::MatrixXd pcs(ms.pcs.rows(), Eigen::Index(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    modes.col(Eigen::Index(i)) = ms.modes.col(sel[i]);
    pcs.col(Eigen::Index(i)) = ms.pcs.col(sel[i]);
  }
  ReconstructedComponent rc = reconstruct_component(modes, pcs, N, sel);
  sc.values = destandardize(rc, row_means, row_stds, N).values;
  return sc;
}

}  // namespace fluxharm
