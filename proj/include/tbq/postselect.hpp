#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <utility>

#if defined(__BMI2__)
#include <immintrin.h>
#endif

#include "tbq/bitstream.hpp"
#include "tbq/errors.hpp"
#include "tbq/toeplitz.hpp"

namespace tbq {

struct SelectionResult {
  BitStream kept;
  double keep_fraction = 0;
  std::size_t input_bits = 0;
};

namespace detail {

// Packs the bits of `value` selected by `mask` (both MSB-first) into the low
// popcount(mask) bits of the result, earliest stream bit highest.
inline std::uint64_t compress_msb_first(std::uint64_t value, std::uint64_t mask) noexcept {
#if defined(__BMI2__)
  return _pext_u64(value, mask);
#else
  std::uint64_t out = 0;
  while (mask) {
    const int top = 63 - std::countl_zero(mask);
    out = (out << 1) | ((value >> top) & 1u);
    mask &= ~(std::uint64_t{1} << top);
  }
  return out;
#endif
}

}  // namespace detail

/// Keeps a[i] wherever a[i] == b[i], in order. Swapping the arguments yields
/// the same kept stream since kept bits are equal in both inputs.
inline SelectionResult select_identical(const BitStream& a, const BitStream& b) {
  detail::require<LengthMismatchError>(a.size() == b.size(), "postselect: streams differ in length (" +
                                                                   std::to_string(a.size()) + " vs " +
                                                                   std::to_string(b.size()) + ")");
  SelectionResult r;
  r.input_bits = a.size();
  r.kept.reserve(a.size());
  {
    BitWriter writer(r.kept);
    for (std::size_t pos = 0; pos < a.size(); pos += 64) {
      const std::uint64_t wa = a.load_word(pos);
      const std::uint64_t wb = b.load_word(pos);
      std::uint64_t agree = ~(wa ^ wb);
      if (a.size() - pos < 64) agree &= ~std::uint64_t{0} << (64 - (a.size() - pos));
      const auto count = static_cast<unsigned>(std::popcount(agree));
      if (count == 64) writer.put(wa, 64);
      else writer.put(detail::compress_msb_first(wa, agree), count);
    }
  }
  r.keep_fraction = r.input_bits ? static_cast<double>(r.kept.size()) / static_cast<double>(r.input_bits) : 0.0;
  return r;
}

struct IdenticalOutput {
  BitStream party_a;
  BitStream party_b;
  double keep_fraction = 0;
  std::size_t selected_bits = 0;
};

/// Both parties post-select against each other's stream and hash their own
/// survivors with the shared seed; the two results must agree bit for bit.
inline IdenticalOutput identical_pipeline(const BitStream& a, const BitStream& b, const ToeplitzSeed& seed,
                                          std::size_t threads = 0) {
  const SelectionResult sel_a = select_identical(a, b);
  const SelectionResult sel_b = select_identical(b, a);
  IdenticalOutput out;
  out.keep_fraction = sel_a.keep_fraction;
  out.selected_bits = sel_a.kept.size();
  out.party_a = extract_stream(sel_a.kept, seed.config, seed, threads);
  out.party_b = extract_stream(sel_b.kept, seed.config, seed, threads);
  if (!(out.party_a == out.party_b)) throw InternalError("postselect: identical streams diverged");
  return out;
}

/// Output rate of raw_rate bits/s after keeping keep_fraction of the bits and
/// hashing n -> m.
inline double expected_rate(double raw_rate, double keep_fraction, const ExtractorConfig& config) {
  config.validate();
  detail::require(raw_rate >= 0.0 && std::isfinite(raw_rate), "rate: raw rate must be non-negative");
  detail::require(keep_fraction >= 0.0 && keep_fraction <= 1.0, "rate: keep fraction must lie in [0,1]");
  return raw_rate * keep_fraction * config.ratio();
}

}  // namespace tbq
