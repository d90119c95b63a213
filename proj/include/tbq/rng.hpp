#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tbq {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
// pure function of (key, counter), which is what lets the simulator generate
// any sample range independently.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit constexpr Philox4x32(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  constexpr Block operator()(std::uint64_t counter_lo, std::uint64_t counter_hi = 0) const noexcept {
    Block ctr{static_cast<std::uint32_t>(counter_lo), static_cast<std::uint32_t>(counter_lo >> 32),
              static_cast<std::uint32_t>(counter_hi), static_cast<std::uint32_t>(counter_hi >> 32)};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  std::array<std::uint32_t, 2> key_;
};

// Mixes a user seed with a stream tag so that independent noise processes
// drawn from one config seed use unrelated Philox keys.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Pair of independent standard normals for one counter value (Box-Muller on
// two 53-bit uniforms; the first uniform is shifted into (0,1]).
inline std::array<double, 2> gaussian_pair(const Philox4x32& gen, std::uint64_t counter) noexcept {
  const auto r = gen(counter);
  const std::uint64_t w0 = (std::uint64_t{r[0]} << 32) | r[1];
  const std::uint64_t w1 = (std::uint64_t{r[2]} << 32) | r[3];
  const double u0 = (static_cast<double>(w0 >> 11) + 1.0) * 0x1.0p-53;
  const double u1 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u0));
  const double angle = 2.0 * std::numbers::pi * u1;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

// Deterministic uniform bits for tests, benches and the documented CI seed.
inline std::uint64_t uniform_word(const Philox4x32& gen, std::uint64_t counter) noexcept {
  const auto r = gen(counter);
  return (std::uint64_t{r[0]} << 32) | r[1];
}

}  // namespace tbq
