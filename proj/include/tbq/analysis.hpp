#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "tbq/acquisition.hpp"
#include "tbq/bitstream.hpp"
#include "tbq/errors.hpp"
#include "tbq/twinbeam.hpp"

namespace tbq {

/// R(k) for k = 0..k_max.
struct CorrelationProfile {
  std::vector<double> r;
  std::size_t k_max = 0;
  std::size_t n_samples = 0;
  double mean_tail = 0;      ///< average of R(k), k = 1..k_max (signed)
  double mean_abs_tail = 0;  ///< average of |R(k)|, k = 1..k_max
};

namespace detail {

inline void finish_profile(CorrelationProfile& p) {
  if (p.k_max == 0) return;
  double sum = 0, abs_sum = 0;
  for (std::size_t k = 1; k <= p.k_max; ++k) {
    sum += p.r[k];
    abs_sum += std::abs(p.r[k]);
  }
  p.mean_tail = sum / static_cast<double>(p.k_max);
  p.mean_abs_tail = abs_sum / static_cast<double>(p.k_max);
}

inline long double mean_of(std::span<const double> x) {
  long double s = 0;
  for (double v : x) s += v;
  return s / static_cast<long double>(x.size());
}

}  // namespace detail

/// Non-circular self-correlation with one global mean:
///
///   R(k) = sum_{i<N-k} (x_i - mu)(x_{i+k} - mu) / sum_{i<N} (x_i - mu)^2.
inline CorrelationProfile autocorrelation(std::span<const double> x, std::size_t k_max) {
  detail::require<InsufficientDataError>(x.size() > k_max, "autocorrelation: need more samples than k_max");
  const long double mu = detail::mean_of(x);
  std::vector<double> centered(x.size());
  long double denom = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    centered[i] = static_cast<double>(x[i] - mu);
    denom += static_cast<long double>(centered[i]) * centered[i];
  }
  if (denom == 0) throw ZeroVarianceError("autocorrelation: input is constant");
  CorrelationProfile p;
  p.k_max = k_max;
  p.n_samples = x.size();
  p.r.resize(k_max + 1);
  p.r[0] = 1.0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    long double num = 0;
    for (std::size_t i = 0; i + k < x.size(); ++i) num += static_cast<long double>(centered[i]) * centered[i + k];
    p.r[k] = static_cast<double>(num / denom);
  }
  detail::finish_profile(p);
  return p;
}

/// Same estimator on a bit sequence mapped to {0,1}; the lag products are
/// counted with popcount so every sum is an exact integer.
inline CorrelationProfile autocorrelation(const BitStream& bits, std::size_t k_max) {
  const std::size_t n = bits.size();
  detail::require<InsufficientDataError>(n > k_max, "autocorrelation: need more bits than k_max");
  const auto ones = static_cast<long double>(bits.popcount());
  const long double nn = static_cast<long double>(n);
  const long double mu = ones / nn;
  const long double denom = ones * (1.0L - mu);
  if (ones == 0 || ones == nn) throw ZeroVarianceError("autocorrelation: bit sequence is constant");
  CorrelationProfile p;
  p.k_max = k_max;
  p.n_samples = n;
  p.r.assign(k_max + 1, 0.0);
  p.r[0] = 1.0;
  std::size_t head = 0, tail = 0;  // ones among the first / last k bits
  for (std::size_t k = 1; k <= k_max; ++k) {
    head += bits[k - 1];
    tail += bits[n - k];
    std::uint64_t lagged = 0;
    for (std::size_t pos = 0; pos + k < n; pos += 64) lagged += static_cast<std::uint64_t>(std::popcount(bits.load_word(pos) & bits.load_word(pos + k)));
    const long double a = ones - static_cast<long double>(tail);  // sum_{i<N-k} x_i
    const long double b = ones - static_cast<long double>(head);  // sum_{i>=k} x_i
    const long double num = static_cast<long double>(lagged) - mu * (a + b) + static_cast<long double>(n - k) * mu * mu;
    p.r[k] = static_cast<double>(num / denom);
  }
  detail::finish_profile(p);
  return p;
}

inline double variance(std::span<const double> x) {
  detail::require<InsufficientDataError>(!x.empty(), "variance: empty input");
  const long double mu = detail::mean_of(x);
  long double s = 0;
  for (double v : x) s += (v - mu) * (v - mu);
  return static_cast<double>(s / static_cast<long double>(x.size()));
}

inline double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  detail::require<LengthMismatchError>(a.size() == b.size(), "pearson: sequences differ in length");
  detail::require<InsufficientDataError>(a.size() >= 2, "pearson: need at least two samples");
  const long double ma = detail::mean_of(a), mb = detail::mean_of(b);
  long double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0 || sbb == 0) throw ZeroVarianceError("pearson: an input is constant");
  const double r = static_cast<double>(sab / std::sqrt(saa * sbb));
  return std::clamp(r, -1.0, 1.0);
}

/// Pearson coefficient of two equal-length bit sequences as {0,1} values.
inline double bit_cross_correlation(const BitStream& a, const BitStream& b) {
  detail::require<LengthMismatchError>(a.size() == b.size(), "cross-correlation: sequences differ in length");
  detail::require<InsufficientDataError>(a.size() >= 2, "cross-correlation: need at least two bits");
  std::uint64_t both = 0;
  for (std::size_t pos = 0; pos < a.size(); pos += 64) both += static_cast<std::uint64_t>(std::popcount(a.load_word(pos) & b.load_word(pos)));
  const long double n = static_cast<long double>(a.size());
  const long double sa = static_cast<long double>(a.popcount()), sb = static_cast<long double>(b.popcount());
  const long double va = n * sa - sa * sa, vb = n * sb - sb * sb;
  if (va == 0 || vb == 0) throw ZeroVarianceError("cross-correlation: an input is constant");
  return static_cast<double>((n * static_cast<long double>(both) - sa * sb) / std::sqrt(va * vb));
}

struct HistogramFit {
  std::vector<std::uint64_t> counts;  ///< one entry per ADC code
  double mean_mv = 0;                 ///< Gaussian ML mean of dequantized samples
  double sigma_mv = 0;                ///< Gaussian ML standard deviation
  double mean_code = 0;
};

inline HistogramFit histogram_fit(const SampleBlock& block) {
  detail::require<InsufficientDataError>(!block.codes.empty(), "histogram: empty sample block");
  block.adc.validate();
  HistogramFit fit;
  fit.counts.assign(block.adc.levels(), 0);
  for (auto c : block.codes) ++fit.counts.at(c);
  const long double n = static_cast<long double>(block.codes.size());
  long double sum = 0, code_sum = 0;
  for (std::size_t c = 0; c < fit.counts.size(); ++c) {
    sum += fit.counts[c] * static_cast<long double>(dequantize(static_cast<std::uint16_t>(c), block.adc));
    code_sum += fit.counts[c] * static_cast<long double>(c);
  }
  const long double mean = sum / n;
  long double ss = 0;
  for (std::size_t c = 0; c < fit.counts.size(); ++c) {
    const long double d = dequantize(static_cast<std::uint16_t>(c), block.adc) - mean;
    ss += fit.counts[c] * d * d;
  }
  fit.mean_mv = static_cast<double>(mean);
  fit.sigma_mv = static_cast<double>(std::sqrt(ss / n));
  fit.mean_code = static_cast<double>(code_sum / n);
  return fit;
}

/// Floor reported when the difference noise cancels completely.
inline constexpr double kDifferenceNoiseFloorDb = -80.0;

/// 10 log10( Var(a - b) / Var(a_ref - b_ref) ); negative means below the SNL.
inline double difference_noise_db(const AnalogPair& pair, const AnalogPair& snl_ref) {
  detail::require<InsufficientDataError>(pair.size() > 0 && snl_ref.size() > 0, "difference noise: empty input");
  detail::require<LengthMismatchError>(pair.beam_a.size() == pair.beam_b.size() &&
                                           snl_ref.beam_a.size() == snl_ref.beam_b.size(),
                                       "difference noise: beams differ in length");
  auto diff_var = [](const AnalogPair& p) {
    std::vector<double> d(p.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.beam_a[i] - p.beam_b[i];
    return variance(d);
  };
  const double ref = diff_var(snl_ref);
  if (!(ref > 0.0)) throw ZeroVarianceError("difference noise: SNL reference has zero variance");
  const double v = diff_var(pair);
  if (v <= 0.0) return kDifferenceNoiseFloorDb;
  return std::max(kDifferenceNoiseFloorDb, 10.0 * std::log10(v / ref));
}

inline void write_correlation_csv(std::ostream& os, const CorrelationProfile& p) {
  os << "k,r\n";
  for (std::size_t k = 0; k < p.r.size(); ++k) os << k << ',' << p.r[k] << '\n';
}

inline void write_histogram_csv(std::ostream& os, const HistogramFit& fit, const AdcConfig& adc) {
  os << "code,voltage_mv,count\n";
  for (std::size_t c = 0; c < fit.counts.size(); ++c)
    os << c << ',' << dequantize(static_cast<std::uint16_t>(c), adc) << ',' << fit.counts[c] << '\n';
}

}  // namespace tbq
