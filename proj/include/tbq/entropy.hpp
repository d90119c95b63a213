#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "tbq/acquisition.hpp"
#include "tbq/errors.hpp"

namespace tbq {

struct VarianceDecomposition {
  double sigma_total_sq = 0;      ///< mV^2
  double sigma_classical_sq = 0;  ///< mV^2
  double sigma_quant_sq = 0;      ///< mV^2
};

/// Splits the measured output variance into quantum and classical parts,
/// assuming the two are independent.
inline VarianceDecomposition decompose_variance(double total, double classical) {
  detail::require(std::isfinite(total) && std::isfinite(classical), "entropy: variances must be finite");
  detail::require(classical >= 0.0, "entropy: classical variance must be non-negative");
  detail::require(classical <= total, "entropy: classical variance exceeds total variance");
  return {total, classical, total - classical};
}

namespace detail {

inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_sf(double z) noexcept { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// Gaussian mass of [lo, hi) in units of sigma, picking the CDF form that
// avoids cancellation on either tail.
inline double normal_mass(double lo, double hi) noexcept {
  if (lo >= 0.0) return normal_sf(lo) - normal_sf(hi);
  if (hi <= 0.0) return normal_cdf(hi) - normal_cdf(lo);
  return 1.0 - normal_cdf(lo) - normal_sf(hi);
}

}  // namespace detail

/// Probability of every ADC code for a zero-mean Gaussian input of standard
/// deviation sigma (mV). The extreme codes absorb the clamped tails.
inline std::vector<double> gaussian_bin_probabilities(double sigma, const AdcConfig& adc) {
  detail::require(sigma > 0.0 && std::isfinite(sigma), "entropy: sigma must be positive");
  adc.validate();
  const std::uint32_t levels = adc.levels();
  std::vector<double> p(levels);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::uint32_t c = 0; c < levels; ++c) {
    const double lo = c == 0 ? -inf : adc.bin_lower_edge(c) / sigma;
    const double hi = c + 1 == levels ? inf : adc.bin_lower_edge(c + 1) / sigma;
    p[c] = detail::normal_mass(lo, hi);
  }
  return p;
}

/// Worst-case (largest) code probability of the quantized Gaussian.
inline double gaussian_bin_pmax(double sigma, const AdcConfig& adc) {
  const auto p = gaussian_bin_probabilities(sigma, adc);
  return *std::max_element(p.begin(), p.end());
}

inline double min_entropy(double p_max) {
  detail::require(p_max > 0.0 && p_max <= 1.0, "entropy: p_max must lie in (0,1]");
  return -std::log2(p_max);
}

/// Largest histogram frequency over the codes of a block.
inline double empirical_pmax(const SampleBlock& block) {
  detail::require<InsufficientDataError>(!block.codes.empty(), "entropy: empty sample block");
  std::vector<std::uint64_t> hist(std::size_t{1} << 16, 0);
  for (auto c : block.codes) ++hist[c];
  const auto peak = *std::max_element(hist.begin(), hist.end());
  return static_cast<double>(peak) / static_cast<double>(block.codes.size());
}

/// Smallest raw block n with n * h_min / bits_per_sample >= m.
inline std::uint64_t required_raw_block(std::uint64_t m, double h_min, unsigned bits_per_sample) {
  detail::require(m > 0, "entropy: m must be positive");
  detail::require(bits_per_sample > 0, "entropy: bits_per_sample must be positive");
  detail::require(h_min > 0.0 && h_min <= bits_per_sample, "entropy: h_min must lie in (0, bits_per_sample]");
  const double exact = static_cast<double>(m) * bits_per_sample / h_min;
  const double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9 * exact) return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::ceil(exact));
}

/// Full-scale range (mV) for which gaussian_bin_pmax(sigma) equals target.
/// The centre-bin mass grows monotonically with the range, so bisect on that
/// (log space, 1e-12 relative width) and then make sure the centre bin really
/// is the most likely code, i.e. the ends are not saturated.
inline double calibrate_full_scale(double sigma, double target_pmax, unsigned bits, double sample_rate_hz = 1.0e7) {
  detail::require(bits >= 2, "calibration needs a mid-tread converter (bits >= 2)");
  detail::require(sigma > 0.0, "calibration: sigma must be positive");
  detail::require(target_pmax > 0.0 && target_pmax < 1.0, "calibration target must lie in (0,1)");
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  auto centre_mass = [&](double fs) {
    const double half = 0.5 * fs / levels;
    return detail::normal_mass(-half / sigma, half / sigma);
  };
  double lo = sigma * 1e-9, hi = sigma * 1e9;
  while (hi / lo - 1.0 > 1e-12) {
    const double mid = std::sqrt(lo * hi);
    (centre_mass(mid) < target_pmax ? lo : hi) = mid;
  }
  const double fs = std::sqrt(lo * hi);
  const AdcConfig adc{bits, fs, sample_rate_hz};
  detail::require(std::abs(gaussian_bin_pmax(sigma, adc) - target_pmax) <= 1e-9 * target_pmax,
                  "calibration target out of reach: converter saturates before the centre bin holds that mass");
  return fs;
}

struct EntropyReport {
  double sigma_quant_mv = 0;
  double p_max = 0;
  double h_min_bits = 0;
  unsigned bits_per_sample = 0;
  double extraction_ratio_bound = 0;  ///< h_min / bits_per_sample
};

inline EntropyReport entropy_report(const VarianceDecomposition& v, const AdcConfig& adc) {
  EntropyReport r;
  r.sigma_quant_mv = std::sqrt(v.sigma_quant_sq);
  r.p_max = gaussian_bin_pmax(r.sigma_quant_mv, adc);
  r.h_min_bits = min_entropy(r.p_max);
  r.bits_per_sample = adc.bits;
  r.extraction_ratio_bound = r.h_min_bits / adc.bits;
  return r;
}

}  // namespace tbq
