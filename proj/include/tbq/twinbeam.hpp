#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "tbq/errors.hpp"
#include "tbq/parallel.hpp"
#include "tbq/rng.hpp"

namespace tbq {

// ===========================================================================
// Cavity model of the intensity-difference noise spectrum.
// ===========================================================================

/// Physical parameters of the NOPO twin-beam source. The frequency and
/// storage time enter only as the plain product omega_mhz * tau_c_us
/// (MHz x us), which is the convention that gives 8.1 dB for the reference
/// cavity (eta 0.893, xi 0.953, tau_c 0.0196 us, 4 MHz).
struct CavityParams {
  double eta = 0.893;       ///< total detection efficiency, [0,1]
  double xi = 0.953;        ///< output coupling efficiency T/(T+loss), [0,1]
  double tau_c_us = 0.0196; ///< cavity storage time, microseconds
  double omega_mhz = 4.0;   ///< analysis frequency, MHz

  void validate() const {
    detail::require(eta >= 0.0 && eta <= 1.0, "cavity: eta must lie in [0,1]");
    detail::require(xi >= 0.0 && xi <= 1.0, "cavity: xi must lie in [0,1]");
    detail::require(tau_c_us > 0.0 && std::isfinite(tau_c_us), "cavity: tau_c must be positive");
    detail::require(omega_mhz >= 0.0 && std::isfinite(omega_mhz), "cavity: omega must be non-negative");
  }
};

/// Intensity-difference noise power normalised to the shot-noise limit:
/// 1 - eta*xi / (1 + (omega*tau_c)^2).
inline double intensity_difference_spectrum(const CavityParams& p) {
  p.validate();
  const double x = p.omega_mhz * p.tau_c_us;
  return 1.0 - p.eta * p.xi / (1.0 + x * x);
}

/// Noise reduction below the SNL in dB (positive means squeezed).
inline double squeezing_db(const CavityParams& p) {
  const double s = intensity_difference_spectrum(p);
  detail::require(s > 0.0, "cavity: spectrum is not positive, squeezing in dB is undefined");
  return -10.0 * std::log10(s);
}

// ===========================================================================
// Time-domain twin-beam noise simulator.
// ===========================================================================

struct TwinBeamConfig {
  double sigma_quant_sq = 4765.26;   ///< quantum noise variance per beam, mV^2
  double sigma_classical_sq = 3.18;  ///< electronic noise variance per beam, mV^2
  double rho = 0.75;                 ///< Pearson correlation of the quantum parts
  double bandwidth_hz = 3.0e5;       ///< baseband low-pass cutoff
  double sample_rate_hz = 1.0e7;
  std::uint64_t rng_seed = 20180101;

  void validate() const {
    detail::require(sigma_quant_sq > 0.0 && std::isfinite(sigma_quant_sq), "twinbeam: sigma_quant_sq must be positive");
    detail::require(sigma_classical_sq >= 0.0 && std::isfinite(sigma_classical_sq),
                    "twinbeam: sigma_classical_sq must be non-negative");
    detail::require(std::abs(rho) <= 1.0, "twinbeam: |rho| must not exceed 1");
    detail::require(sample_rate_hz > 0.0 && std::isfinite(sample_rate_hz), "twinbeam: sample rate must be positive");
    detail::require(bandwidth_hz > 0.0 && bandwidth_hz <= sample_rate_hz / 2.0,
                    "twinbeam: bandwidth must lie in (0, sample_rate/2]");
  }

  double sigma_total_sq() const noexcept { return sigma_quant_sq + sigma_classical_sq; }

  /// Var(a-b) of this config relative to an uncorrelated (SNL) pair with the
  /// same marginals.
  double difference_noise_ratio() const noexcept { return 1.0 - rho * sigma_quant_sq / sigma_total_sq(); }

  double squeezing_db() const { return -10.0 * std::log10(difference_noise_ratio()); }
};

/// Quantum correlation that puts the difference noise `db` below the SNL.
inline double correlation_for_squeezing(double db, double sigma_quant_sq, double sigma_classical_sq) {
  detail::require(sigma_quant_sq > 0.0 && sigma_classical_sq >= 0.0, "variances must be positive");
  const double rho = (1.0 - std::pow(10.0, -db / 10.0)) * (sigma_quant_sq + sigma_classical_sq) / sigma_quant_sq;
  detail::require(std::abs(rho) <= 1.0, "requested squeezing is not reachable with this classical noise");
  return rho;
}

struct AnalogPair {
  std::vector<double> beam_a;  ///< mV
  std::vector<double> beam_b;  ///< mV
  double sample_rate_hz = 0.0;

  std::size_t size() const noexcept { return beam_a.size(); }
};

/// Generates the baseband noise pair
///
///   a = sq * (g+ c + g- d) + sc * e_a
///   b = sq * (g+ c - g- d) + sc * e_b,   g+- = sqrt((1 +- rho) / 2)
///
/// where c (common mode), d (differential), e_a and e_b are independent unit
/// variance first-order low-pass Gaussian processes. Each is white Philox
/// noise convolved with the impulse response r^k of a single-pole filter,
/// r = exp(-2 pi B / fs), truncated once the discarded tail energy drops
/// below 1e-12 and renormalised to unit energy. Because every white sample
/// is a pure function of (seed, stream, index), any range of output samples
/// can be generated independently and matches a sequential run bit for bit.
class TwinBeamSimulator {
 public:
  static constexpr std::size_t kChunk = std::size_t{1} << 15;
  static constexpr std::size_t kMaxTaps = std::size_t{1} << 20;

  explicit TwinBeamSimulator(TwinBeamConfig config, std::uint64_t stream_base = 0)
      : config_(config), stream_base_(stream_base) {
    config_.validate();
    const double r = std::exp(-2.0 * std::numbers::pi * config_.bandwidth_hz / config_.sample_rate_hz);
    double energy = 1.0, tail = 1.0;
    taps_.push_back(1.0);
    while (tail * r * r > 1e-12 * energy) {
      detail::require(taps_.size() < kMaxTaps, "twinbeam: bandwidth too small relative to sample rate");
      taps_.push_back(taps_.back() * r);
      tail *= r * r;
      energy += tail;
    }
    const double norm = 1.0 / std::sqrt(energy);
    for (auto& h : taps_) h *= norm;
    const double g_plus = std::sqrt((1.0 + config_.rho) / 2.0);
    const double g_minus = std::sqrt((1.0 - config_.rho) / 2.0);
    const double sq = std::sqrt(config_.sigma_quant_sq);
    common_gain_ = sq * g_plus;
    diff_gain_ = sq * g_minus;
    classical_gain_ = std::sqrt(config_.sigma_classical_sq);
  }

  const TwinBeamConfig& config() const noexcept { return config_; }
  std::size_t tap_count() const noexcept { return taps_.size(); }

  /// Samples [start, start + count) of the infinite pair.
  AnalogPair generate(std::uint64_t start, std::size_t count, std::size_t threads = 0) const {
    AnalogPair out;
    out.sample_rate_hz = config_.sample_rate_hz;
    out.beam_a.resize(count);
    out.beam_b.resize(count);
    const std::size_t chunks = (count + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t first, std::size_t last) {
      Scratch scratch;
      for (std::size_t c = first; c < last; ++c) {
        const std::size_t offset = c * kChunk;
        const std::size_t len = std::min(kChunk, count - offset);
        fill_chunk(start + offset, len, out.beam_a.data() + offset, out.beam_b.data() + offset, scratch);
      }
    });
    return out;
  }

 private:
  struct Scratch {
    std::vector<double> white, filtered[4];
  };

  void filter_stream(std::uint64_t stream, std::uint64_t start, std::size_t len, Scratch& s, std::vector<double>& out) const {
    const std::size_t taps = taps_.size();
    const Philox4x32 gen(derive_key(config_.rng_seed, stream_base_ + stream));
    // white[j] holds the innovation at sample index start + j - (taps - 1)
    s.white.resize(len + taps - 1);
    const std::uint64_t first = start - (taps - 1);
    for (std::size_t j = 0; j < s.white.size(); ++j) {
      const std::uint64_t idx = first + j;
      s.white[j] = gaussian_pair(gen, idx >> 1)[idx & 1];
    }
    out.assign(len, 0.0);
    const double* w = s.white.data() + (taps - 1);
    for (std::size_t k = 0; k < taps; ++k) {
      const double h = taps_[k];
      const double* src = w - k;
      for (std::size_t n = 0; n < len; ++n) out[n] += h * src[n];
    }
  }

  void fill_chunk(std::uint64_t start, std::size_t len, double* a, double* b, Scratch& s) const {
    for (std::uint64_t stream = 0; stream < 4; ++stream) filter_stream(stream, start, len, s, s.filtered[stream]);
    const auto& c = s.filtered[0];
    const auto& d = s.filtered[1];
    const auto& ea = s.filtered[2];
    const auto& eb = s.filtered[3];
    for (std::size_t n = 0; n < len; ++n) {
      const double common = common_gain_ * c[n];
      const double diff = diff_gain_ * d[n];
      a[n] = (common + diff) + classical_gain_ * ea[n];
      b[n] = (common - diff) + classical_gain_ * eb[n];
    }
  }

  TwinBeamConfig config_;
  std::uint64_t stream_base_;
  std::vector<double> taps_;
  double common_gain_ = 0, diff_gain_ = 0, classical_gain_ = 0;
};

inline AnalogPair simulate_twin_streams(const TwinBeamConfig& config, std::size_t n_samples, std::size_t threads = 0) {
  detail::require(n_samples > 0, "twinbeam: n_samples must be positive");
  return TwinBeamSimulator(config).generate(0, n_samples, threads);
}

/// Shot-noise reference: same marginals, rho forced to 0, drawn from a
/// disjoint set of noise streams so it is statistically independent of the
/// correlated pair generated from the same seed.
inline AnalogPair simulate_snl_reference(const TwinBeamConfig& config, std::size_t n_samples, std::size_t threads = 0) {
  detail::require(n_samples > 0, "twinbeam: n_samples must be positive");
  TwinBeamConfig snl = config;
  snl.rho = 0.0;
  return TwinBeamSimulator(snl, 4).generate(0, n_samples, threads);
}

}  // namespace tbq
