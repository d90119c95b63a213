#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "tbq/bitstream.hpp"
#include "tbq/errors.hpp"
#include "tbq/parallel.hpp"
#include "tbq/rng.hpp"

namespace tbq {

struct ExtractorConfig {
  std::size_t m = 1024;  ///< output bits per block
  std::size_t n = 1360;  ///< input bits per block

  void validate() const {
    detail::require(m > 0 && n > 0, "extractor: m and n must be positive");
    detail::require(m <= n, "extractor: m must not exceed n");
  }
  std::size_t seed_bits() const noexcept { return n + m - 1; }
  double ratio() const noexcept { return static_cast<double>(m) / static_cast<double>(n); }

  friend bool operator==(const ExtractorConfig&, const ExtractorConfig&) = default;
};

/// Default configuration for the identical-stream (post-selected) pipeline.
inline constexpr ExtractorConfig kIdenticalExtractor{1024, 1920};

/// The n + m - 1 seed bits defining the m x n Toeplitz matrix
///
///   T[i][j] = seed[i - j + n - 1],   0 <= i < m, 0 <= j < n,
///
/// so row 0 reads seed[n-1], seed[n-2], ..., seed[0] left to right and each
/// following row is the previous one shifted right by one with the next seed
/// bit entering on the left.
struct ToeplitzSeed {
  ExtractorConfig config;
  BitStream bits;

  bool matrix(std::size_t i, std::size_t j) const noexcept { return bits[i + config.n - 1 - j]; }
};

inline ToeplitzSeed build_seed(const BitStream& source, const ExtractorConfig& config) {
  config.validate();
  if (source.size() < config.seed_bits())
    throw InsufficientDataError("toeplitz seed needs " + std::to_string(config.seed_bits()) + " bits, source has " +
                                std::to_string(source.size()));
  return {config, source.slice(0, config.seed_bits())};
}

/// Documented deterministic seed for reproducible runs: Philox4x32-10 keyed
/// by derive_key(rng_seed, 0), words emitted MSB-first in counter order.
inline BitStream deterministic_bits(std::uint64_t rng_seed, std::size_t bit_count) {
  const Philox4x32 gen(derive_key(rng_seed, 0));
  BitStream out;
  out.reserve(bit_count);
  for (std::uint64_t c = 0; out.size() < bit_count; ++c) {
    const auto word = uniform_word(gen, c);
    const unsigned take = static_cast<unsigned>(std::min<std::size_t>(64, bit_count - out.size()));
    out.append_bits(word >> (64 - take), take);
  }
  return out;
}

inline ToeplitzSeed build_seed(std::uint64_t rng_seed, const ExtractorConfig& config) {
  config.validate();
  return {config, deterministic_bits(rng_seed, config.seed_bits())};
}

/// Word-parallel GF(2) Toeplitz hashing.
///
/// Reversing the seed, u[k] = seed[n + m - 2 - k], turns row i into the
/// contiguous window u[m-1-i .. m-1-i+n), aligned with x in natural order:
///
///   y[i] = parity( sum_j u[m-1-i+j] & x[j] ).
///
/// 64 copies of u, one per bit shift, let every window be read as whole
/// MSB-first words, so a row costs ceil(n/64) AND/XOR steps and a parity.
class ToeplitzExtractor {
 public:
  explicit ToeplitzExtractor(const ToeplitzSeed& seed) : config_(seed.config) {
    config_.validate();
    detail::require<LengthMismatchError>(seed.bits.size() == config_.seed_bits(), "toeplitz: seed length must be n + m - 1");
    words_ = (config_.n + 63) / 64;
    const std::size_t len = config_.seed_bits();
    BitStream reversed(len);
    for (std::size_t k = 0; k < len; ++k) reversed.set(k, seed.bits[len - 1 - k]);
    stride_ = (config_.m - 1) / 64 + words_ + 1;
    shifted_.assign(64 * stride_, 0);
    for (std::size_t s = 0; s < 64; ++s)
      for (std::size_t w = 0; w < stride_; ++w) shifted_[s * stride_ + w] = reversed.load_word(s + 64 * w);
  }

  const ExtractorConfig& config() const noexcept { return config_; }

  /// Hashes the n bits of `raw` starting at bit `pos` and appends m bits to out.
  void extract_into(const BitStream& raw, std::size_t pos, BitStream& out) const {
    std::array<std::uint64_t, kMaxInlineWords> x_small;
    std::vector<std::uint64_t> x_large;
    std::uint64_t* x = x_small.data();
    if (words_ > kMaxInlineWords) {
      x_large.resize(words_);
      x = x_large.data();
    }
    load_block(raw, pos, x);
    std::uint64_t acc_word = 0;
    unsigned acc_bits = 0;
    for (std::size_t i = 0; i < config_.m; ++i) {
      acc_word = (acc_word << 1) | row_parity(i, x);
      if (++acc_bits == 64) {
        out.append_bits(acc_word, 64);
        acc_word = 0;
        acc_bits = 0;
      }
    }
    if (acc_bits) out.append_bits(acc_word, acc_bits);
  }

  /// Writes the m output bits as whole words (MSB-first, last word left
  /// aligned) into dst, which must hold ceil(m/64) words.
  void extract_words(const BitStream& raw, std::size_t pos, std::uint64_t* dst) const {
    std::array<std::uint64_t, kMaxInlineWords> x_small;
    std::vector<std::uint64_t> x_large;
    std::uint64_t* x = x_small.data();
    if (words_ > kMaxInlineWords) {
      x_large.resize(words_);
      x = x_large.data();
    }
    load_block(raw, pos, x);
    const std::size_t m = config_.m;
    for (std::size_t base = 0; base < m; base += 64) {
      const std::size_t rows = std::min<std::size_t>(64, m - base);
      std::uint64_t word = 0;
      for (std::size_t r = 0; r < rows; ++r) word = (word << 1) | row_parity(base + r, x);
      dst[base / 64] = word << (64 - rows);
    }
  }

 private:
  static constexpr std::size_t kMaxInlineWords = 64;

  void load_block(const BitStream& raw, std::size_t pos, std::uint64_t* x) const {
    for (std::size_t w = 0; w < words_; ++w) x[w] = raw.load_word(pos + 64 * w);
    const std::size_t tail = config_.n % 64;
    if (tail) x[words_ - 1] &= ~std::uint64_t{0} << (64 - tail);
  }

  std::uint64_t row_parity(std::size_t i, const std::uint64_t* x) const noexcept {
    const std::size_t offset = config_.m - 1 - i;
    const std::uint64_t* window = shifted_.data() + (offset % 64) * stride_ + offset / 64;
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < words_; ++w) acc ^= window[w] & x[w];
    return static_cast<std::uint64_t>(std::popcount(acc) & 1);
  }

  ExtractorConfig config_;
  std::size_t words_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint64_t> shifted_;
};

/// GF(2) product of the seed's Toeplitz matrix with one n-bit block.
inline BitStream extract_block(const BitStream& raw, const ToeplitzSeed& seed) {
  detail::require<LengthMismatchError>(raw.size() == seed.config.n,
                                       "toeplitz: block has " + std::to_string(raw.size()) + " bits, expected " +
                                           std::to_string(seed.config.n));
  BitStream out;
  out.reserve(seed.config.m);
  ToeplitzExtractor(seed).extract_into(raw, 0, out);
  return out;
}

/// Hashes consecutive n-bit blocks of raw; a trailing partial block is
/// dropped. Blocks are processed in parallel, output order is preserved and
/// the result does not depend on the thread count.
inline BitStream extract_stream(const BitStream& raw, const ExtractorConfig& config, const ToeplitzSeed& seed,
                                std::size_t threads = 0) {
  config.validate();
  detail::require(seed.config == config, "toeplitz: seed was built for a different (m, n)");
  const ToeplitzExtractor ex(seed);
  const std::size_t blocks = raw.size() / config.n;
  const std::size_t m = config.m;
  if (m % 64 == 0) {
    std::vector<std::uint64_t> words(blocks * (m / 64));
    parallel_for(blocks, threads, [&](std::size_t first, std::size_t last) {
      for (std::size_t b = first; b < last; ++b) ex.extract_words(raw, b * config.n, words.data() + b * (m / 64));
    });
    std::vector<std::uint8_t> payload(words.size() * 8);
    for (std::size_t w = 0; w < words.size(); ++w)
      for (int k = 0; k < 8; ++k) payload[8 * w + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(words[w] >> (56 - 8 * k));
    return BitStream(std::move(payload), blocks * m);
  }
  const std::size_t t = std::min(resolve_threads(threads), std::max<std::size_t>(blocks, 1));
  std::vector<BitStream> parts(t);
  const std::size_t step = (blocks + t - 1) / std::max<std::size_t>(t, 1);
  parallel_for(t, t, [&](std::size_t first, std::size_t last) {
    for (std::size_t p = first; p < last; ++p) {
      const std::size_t b0 = p * step, b1 = std::min(blocks, b0 + step);
      for (std::size_t b = b0; b < b1; ++b) ex.extract_into(raw, b * config.n, parts[p]);
    }
  });
  BitStream out;
  out.reserve(blocks * m);
  for (const auto& part : parts) out.append_range(part, 0, part.size());
  return out;
}

struct BenchResult {
  ExtractorConfig config;
  std::size_t input_bits = 0;
  std::size_t output_bits = 0;
  std::size_t blocks = 0;
  double seconds = 0;
  double output_bits_per_second = 0;
  double input_bits_per_second = 0;
  double latency_p50_us = 0, latency_p90_us = 0, latency_p99_us = 0, latency_max_us = 0;
};

/// Times extraction of payload_bits pseudo-random input bits. Throughput is
/// measured over the whole stream; per-block latencies come from timing
/// every block individually.
inline BenchResult throughput_bench(const ExtractorConfig& config, std::size_t payload_bits, std::size_t threads = 0,
                                    std::uint64_t rng_seed = 1) {
  config.validate();
  detail::require<InsufficientDataError>(payload_bits >= config.n, "bench: payload must hold at least one block");
  const BitStream raw = deterministic_bits(rng_seed + 1, payload_bits);
  const ToeplitzSeed seed = build_seed(rng_seed, config);
  const ToeplitzExtractor ex(seed);
  BenchResult r;
  r.config = config;
  r.input_bits = payload_bits;
  r.blocks = payload_bits / config.n;
  r.output_bits = r.blocks * config.m;
  std::vector<float> latency(r.blocks);
  const std::size_t words = (config.m + 63) / 64;
  std::vector<std::uint64_t> sink(r.blocks * words);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  parallel_for(r.blocks, threads, [&](std::size_t first, std::size_t last) {
    auto prev = clock::now();
    for (std::size_t b = first; b < last; ++b) {
      ex.extract_words(raw, b * config.n, sink.data() + b * words);
      const auto now = clock::now();
      latency[b] = std::chrono::duration<float, std::micro>(now - prev).count();
      prev = now;
    }
  });
  r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  r.output_bits_per_second = static_cast<double>(r.output_bits) / r.seconds;
  r.input_bits_per_second = static_cast<double>(r.blocks * config.n) / r.seconds;
  std::sort(latency.begin(), latency.end());
  auto pct = [&](double q) { return static_cast<double>(latency[static_cast<std::size_t>(q * static_cast<double>(latency.size() - 1))]); };
  r.latency_p50_us = pct(0.50);
  r.latency_p90_us = pct(0.90);
  r.latency_p99_us = pct(0.99);
  r.latency_max_us = static_cast<double>(latency.back());
  return r;
}

}  // namespace tbq
