#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "fluxharm/errors.hpp"
#include "fluxharm/spectral.hpp"

namespace fluxharm {

// Share of spectral power at or above 6 cycles/year.
inline double hf_variability(const PowerSpectrum& ps) {
  if (ps.zero_power) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < ps.freqs.size(); ++i)
    if (ps.freqs[i] >= 6.0) s += ps.power[i];
  return s;
}

inline const std::vector<int>& default_regularity_set() {
  static const std::vector<int> fs = {1, 2, 3, 4};
  return fs;
}

// Share of spectral power concentrated at the integer harmonics: every bin
// within one bin width of some f in the set counts once.
inline double regularity(const PowerSpectrum& ps,
                         const std::vector<int>& harmonic_set = default_regularity_set()) {
  if (ps.zero_power || ps.power.empty()) return 0.0;
  const double bw = ps.bin_width();
  double s = 0.0;
  for (std::size_t i = 0; i < ps.freqs.size(); ++i)
    for (int f : harmonic_set)
      if (std::abs(ps.freqs[i] - double(f)) <= bw) {
        s += ps.power[i];
        break;
      }
  return s;
}

struct SampleEntropyResult {
  double value = 0.0;      // -ln(A/B); +inf when undefined
  bool undefined = false;  // no length-m or no length-(m+1) matches
  std::uint64_t a = 0;     // length-(m+1) template matches
  std::uint64_t b = 0;     // length-m template matches
};

// Standard SampEn over template pairs i < j drawn from [0, N-m-1], Chebyshev
// distance, tolerance r = r_frac times the population standard deviation of
// the whole series. A constant series yields A = B and thus entropy 0.
inline SampleEntropyResult sample_entropy(const std::vector<double>& x, int m = 2,
                                          double r_frac = 0.2) {
  const std::size_t N = x.size();
  if (m < 1 || N < std::size_t(m) + 2) fail(ErrorCode::TooShort, "series too short for SampEn");

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(N);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double r = r_frac * std::sqrt(ss / double(N));

  SampleEntropyResult res;
  const std::size_t T = N - std::size_t(m);  // templates end at index N-m-1
  for (std::size_t i = 0; i + 1 < T; ++i) {
    for (std::size_t j = i + 1; j < T; ++j) {
      bool close = true;
      for (int t = 0; t < m; ++t)
        if (std::abs(x[i + std::size_t(t)] - x[j + std::size_t(t)]) > r) {
          close = false;
          break;
        }
      if (!close) continue;
      ++res.b;
      if (std::abs(x[i + std::size_t(m)] - x[j + std::size_t(m)]) <= r) ++res.a;
    }
  }

  if (res.a == 0 || res.b == 0) {
    res.undefined = true;
    res.value = std::numeric_limits<double>::infinity();
  } else {
    res.value = -std::log(double(res.a) / double(res.b));
  }
  return res;
}

struct QfWindows {
  bool flagged = false;
  std::vector<std::pair<std::size_t, std::size_t>> windows;  // inclusive index ranges
};

// Maximal runs of quality flags strictly below the whole-series mean that
// last at least half a year (183 daily samples).
inline QfWindows persistent_qf(const std::vector<double>& qf, std::size_t min_run = 183) {
  if (qf.empty()) fail(ErrorCode::ConfigError, "persistent_qf needs a quality-flag series");
  double mean = 0.0;
  for (double v : qf) mean += v;
  mean /= double(qf.size());

  QfWindows out;
  std::size_t start = 0;
  bool in_run = false;
  for (std::size_t t = 0; t <= qf.size(); ++t) {
    const bool low = t < qf.size() && qf[t] < mean;
    if (low && !in_run) {
      start = t;
      in_run = true;
    } else if (!low && in_run) {
      if (t - start >= min_run) out.windows.emplace_back(start, t - 1);
      in_run = false;
    }
  }
  out.flagged = !out.windows.empty();
  return out;
}

enum class BinLabel { low, mid, high };

inline const char* bin_label_name(BinLabel b) {
  switch (b) {
    case BinLabel::low: return "low";
    case BinLabel::mid: return "mid";
    case BinLabel::high: return "high";
  }
  return "?";
}

struct BinResult {
  std::vector<BinLabel> labels;
  bool degenerate = false;  // min = max; everything labeled low
};

// Histogram labeling over [min, max] in three equal intervals; the upper
// edge belongs to the last bin.
inline BinResult bin_metrics(const std::vector<double>& values) {
  if (values.empty()) fail(ErrorCode::ConfigError, "bin_metrics needs at least one value");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;

  BinResult out;
  out.labels.reserve(values.size());
  if (!(hi > lo)) {
    out.degenerate = true;
    out.labels.assign(values.size(), BinLabel::low);
    return out;
  }
  const double e1 = lo + (hi - lo) / 3.0;
  const double e2 = lo + 2.0 * (hi - lo) / 3.0;
  for (double v : values)
    out.labels.push_back(v < e1 ? BinLabel::low : (v < e2 ? BinLabel::mid : BinLabel::high));
  return out;
}

// Per-series characterization; the 3-bin labels are batch-relative and get
// filled in later by the caller that sees the whole batch.
struct CharacterizationReport {
  double hf_variability = 0.0;
  double regularity = 0.0;
  double sample_entropy = 0.0;
  bool entropy_undefined = false;
  bool qf_flagged = false;
  std::vector<std::pair<std::size_t, std::size_t>> qf_windows;
  bool has_qf = false;
  std::optional<BinLabel> hf_bin, regularity_bin, entropy_bin;
};

inline CharacterizationReport characterize(const std::vector<double>& values,
                                           const std::vector<double>* qf,
                                           const PowerSpectrum& ps,
                                           const std::vector<int>& regularity_set =
                                               default_regularity_set()) {
  CharacterizationReport rep;
  rep.hf_variability = hf_variability(ps);
  rep.regularity = regularity(ps, regularity_set);
  SampleEntropyResult se = sample_entropy(values);
  rep.sample_entropy = se.value;
  rep.entropy_undefined = se.undefined;
  if (qf && !qf->empty()) {
    rep.has_qf = true;
    QfWindows qw = persistent_qf(*qf);
    rep.qf_flagged = qw.flagged;
    rep.qf_windows = std::move(qw.windows);
  }
  return rep;
}

}  // namespace fluxharm
