#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fluxharm/errors.hpp"
#include "fluxharm/rng.hpp"
#include "fluxharm/series.hpp"
#include "fluxharm/spectral.hpp"

namespace fluxharm {

struct HarmonicComponent {
  int f = 1;  // cycles per year
  double amplitude = 1.0;
  double phase = 0.0;
};

enum class NoiseKind { none, white, broadband };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.0;  // population std of the added noise
  double beta = 0.0;   // 1/f^β spectral slope (broadband only)
};

// Smooth amplitude step: the envelope ramps from 1 to `factor` around
// time_fraction·N, crossing 10%→90% of the step over 60 days.
struct AmplitudeChange {
  double time_fraction = 0.5;
  double factor = 1.0;
};

struct SignalRecipe {
  double n_years = 4.0;
  std::vector<HarmonicComponent> harmonics;
  NoiseSpec noise;
  std::optional<AmplitudeChange> amplitude_change;
  std::uint64_t seed = 0;
  std::string site_id = "synth";
  std::string variable = "SYN";
};

struct SyntheticSeries {
  FluxSeries series;              // harmonics × envelope + noise
  std::vector<double> noiseless;  // ground truth
  std::vector<int> harmonic_fs;   // distinct frequencies present, ascending
};

namespace detail {

inline std::vector<double> broadband_noise(std::size_t N, double beta, Rng& rng) {
  // Spectral synthesis: 1/f^(β/2) magnitudes with random phases, then
  // inverse FFT. Hermitian symmetry keeps the result real; DC stays zero.
  std::vector<std::complex<double>> spec(N, 0.0);
  for (std::size_t n = 1; 2 * n <= N; ++n) {
    const double mag = std::pow(double(n), -beta / 2.0);
    if (2 * n == N) {
      spec[n] = mag * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      continue;
    }
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    spec[n] = std::polar(mag, theta);
    spec[N - n] = std::conj(spec[n]);
  }
  Eigen::FFT<double> fft;
  std::vector<double> out;
  fft.inv(out, spec);
  return out;
}

}  // namespace detail

inline SyntheticSeries generate(const SignalRecipe& recipe) {
  if (recipe.n_years < 2.0) fail(ErrorCode::ConfigError, "recipe needs at least two years");
  for (const auto& h : recipe.harmonics)
    if (h.amplitude < 0.0) fail(ErrorCode::ConfigError, "harmonic amplitudes must be nonnegative");
  const auto N = std::size_t(std::llround(recipe.n_years * days_per_year));

  SyntheticSeries out;
  out.noiseless.resize(N);
  for (std::size_t t = 0; t < N; ++t) {
    const double t_yr = double(t) / days_per_year;
    double v = 0.0;
    for (const auto& h : recipe.harmonics)
      v += h.amplitude * std::sin(2.0 * std::numbers::pi * h.f * t_yr + h.phase);
    out.noiseless[t] = v;
  }

  if (recipe.amplitude_change) {
    const double t_c = recipe.amplitude_change->time_fraction * double(N);
    const double s = 30.0 / std::log(9.0);
    for (std::size_t t = 0; t < N; ++t) {
      const double g =
          1.0 + (recipe.amplitude_change->factor - 1.0) /
                    (1.0 + std::exp(-(double(t) - t_c) / s));
      out.noiseless[t] *= g;
    }
  }

  std::vector<double> values = out.noiseless;
  if (recipe.noise.kind == NoiseKind::white && recipe.noise.sigma > 0.0) {
    Rng rng(derive_seed(recipe.seed, "white-noise"));
    for (double& v : values) v += recipe.noise.sigma * rng.normal();
  } else if (recipe.noise.kind == NoiseKind::broadband && recipe.noise.sigma > 0.0) {
    Rng rng(derive_seed(recipe.seed, "broadband-noise"));
    std::vector<double> w = detail::broadband_noise(N, recipe.noise.beta, rng);
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= double(N);
    double ss = 0.0;
    for (double v : w) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / double(N));
    if (sd > 0.0)
      for (std::size_t t = 0; t < N; ++t)
        values[t] += recipe.noise.sigma * (w[t] - mean) / sd;
  }

  out.series.site_id = recipe.site_id;
  out.series.variable = recipe.variable;
  out.series.values = std::move(values);
  for (const auto& h : recipe.harmonics)
    if (h.amplitude > 0.0) out.harmonic_fs.push_back(h.f);
  std::sort(out.harmonic_fs.begin(), out.harmonic_fs.end());
  out.harmonic_fs.erase(std::unique(out.harmonic_fs.begin(), out.harmonic_fs.end()),
                        out.harmonic_fs.end());
  return out;
}

}  // namespace fluxharm
