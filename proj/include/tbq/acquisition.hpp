#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "tbq/bitstream.hpp"
#include "tbq/errors.hpp"

namespace tbq {

// ===========================================================================
// Demodulation: mixer + cascaded single-pole low-pass.
// ===========================================================================

struct DemodConfig {
  double lo_frequency_hz = 4.0e6;
  double lpf_cutoff_hz = 3.0e5;
  unsigned lpf_order = 2;

  void validate() const {
    detail::require(lpf_cutoff_hz > 0.0 && lpf_cutoff_hz < lo_frequency_hz, "demod: need 0 < lpf_cutoff < lo_frequency");
    detail::require(lpf_order >= 1 && lpf_order <= 16, "demod: lpf_order must be in 1..16");
  }
};

/// Streaming demodulator. Multiplies by cos(2 pi f_lo n / fs) and runs a
/// cascade of first-order low-pass sections discretised with the bilinear
/// transform, prewarped so the -3 dB point of each section sits exactly at
/// lpf_cutoff_hz. Filter and oscillator state carry across process() calls,
/// so feeding a signal in chunks gives the same output as one call.
class Demodulator {
 public:
  Demodulator(DemodConfig config, double sample_rate_hz) : config_(config), fs_(sample_rate_hz) {
    config_.validate();
    detail::require(fs_ > 2.0 * config_.lo_frequency_hz, "demod: sample rate must exceed twice the LO frequency");
    const double k = std::tan(std::numbers::pi * config_.lpf_cutoff_hz / fs_);
    b_ = k / (1.0 + k);
    pole_ = (1.0 - k) / (1.0 + k);
    x_prev_.assign(config_.lpf_order, 0.0);
    y_prev_.assign(config_.lpf_order, 0.0);
  }

  /// Samples after which the start-up transient has decayed below 1e-12 of
  /// the input scale.
  std::size_t warmup_samples() const noexcept {
    const double p = std::abs(pole_);
    if (p == 0.0) return config_.lpf_order;
    return static_cast<std::size_t>(std::ceil(config_.lpf_order * std::log(1e-12) / std::log(p))) + config_.lpf_order;
  }

  double section_pole() const noexcept { return pole_; }
  double section_gain() const noexcept { return b_; }

  void process(std::span<const double> in, std::span<double> out) {
    detail::require<LengthMismatchError>(in.size() == out.size(), "demod: output span size mismatch");
    const double w = 2.0 * std::numbers::pi * config_.lo_frequency_hz / fs_;
    for (std::size_t i = 0; i < in.size(); ++i, ++index_) {
      double v = in[i] * std::cos(w * static_cast<double>(index_));
      for (unsigned s = 0; s < config_.lpf_order; ++s) {
        const double y = b_ * (v + x_prev_[s]) + pole_ * y_prev_[s];
        x_prev_[s] = v;
        y_prev_[s] = y;
        v = y;
      }
      out[i] = v;
    }
  }

 private:
  DemodConfig config_;
  double fs_;
  double b_ = 0, pole_ = 0;
  std::uint64_t index_ = 0;
  std::vector<double> x_prev_, y_prev_;
};

inline std::vector<double> demodulate(std::span<const double> signal, double sample_rate_hz, const DemodConfig& config) {
  Demodulator demod(config, sample_rate_hz);
  std::vector<double> out(signal.size());
  demod.process(signal, out);
  return out;
}

// ===========================================================================
// ADC
// ===========================================================================

/// Full-scale range that makes the most probable 8-bit code of a zero-mean
/// Gaussian with sigma = 69.03 mV carry probability 0.00993296. Solved with
/// calibrate_full_scale() (entropy.hpp); the unit tests re-derive it.
inline constexpr double kCalibratedFullScaleMv = 440.0050670303986;

struct AdcConfig {
  unsigned bits = 8;
  double full_scale_mv = kCalibratedFullScaleMv;  ///< peak-to-peak
  double sample_rate_hz = 1.0e7;

  void validate() const {
    detail::require(bits >= 1 && bits <= 16, "adc: bits must be in 1..16");
    detail::require(full_scale_mv > 0.0 && std::isfinite(full_scale_mv), "adc: full_scale_mv must be positive");
    detail::require(sample_rate_hz > 0.0 && sample_rate_hz <= 4294967295.0, "adc: sample rate must fit in u32 Hz");
  }

  std::uint32_t levels() const noexcept { return std::uint32_t{1} << bits; }
  double step_mv() const noexcept { return full_scale_mv / levels(); }

  /// Offset (in steps) of the lower edge of the zero code's bin relative to
  /// 0 mV. Mid-tread: code 2^(bits-1) is centred on 0. A 1-bit converter is a
  /// comparator at 0 V instead.
  double tread_offset() const noexcept { return bits == 1 ? 0.0 : 0.5; }

  /// Lower edge (mV) of code c's bin, ignoring clamping.
  double bin_lower_edge(std::uint32_t code) const noexcept {
    return (static_cast<double>(code) - static_cast<double>(levels() / 2) - tread_offset()) * step_mv();
  }
};

struct SampleBlock {
  std::vector<std::uint16_t> codes;
  AdcConfig adc;

  std::size_t size() const noexcept { return codes.size(); }
};

inline std::uint16_t quantize_one(double x, const AdcConfig& adc) {
  if (std::isnan(x)) throw DomainError("adc: NaN input");
  const double top = static_cast<double>(adc.levels() - 1);
  double c = std::floor(x / adc.step_mv() + adc.tread_offset()) + static_cast<double>(adc.levels() / 2);
  c = std::clamp(c, 0.0, top);
  return static_cast<std::uint16_t>(c);
}

/// Uniform quantizer over [-FS/2, FS/2) with clamping at the extreme codes.
inline SampleBlock quantize(std::span<const double> signal_mv, const AdcConfig& adc) {
  adc.validate();
  SampleBlock block{std::vector<std::uint16_t>(signal_mv.size()), adc};
  for (std::size_t i = 0; i < signal_mv.size(); ++i) block.codes[i] = quantize_one(signal_mv[i], adc);
  return block;
}

/// Centre of the code's bin in mV.
inline double dequantize(std::uint16_t code, const AdcConfig& adc) noexcept {
  return adc.bin_lower_edge(code) + 0.5 * adc.step_mv();
}

/// Each code emits `bits` bits MSB-first, in sample order.
inline BitStream serialize_bits(const SampleBlock& block) {
  const unsigned bits = block.adc.bits;
  if (bits == 8) {
    std::vector<std::uint8_t> payload(block.codes.begin(), block.codes.end());
    return BitStream(std::move(payload), block.codes.size() * 8);
  }
  BitStream out;
  out.reserve(block.codes.size() * bits);
  for (auto c : block.codes) out.append_bits(c, bits);
  return out;
}

inline SampleBlock deserialize_bits(const BitStream& stream, const AdcConfig& adc) {
  adc.validate();
  detail::require<FormatError>(stream.size() % adc.bits == 0, "bitstream length is not a multiple of the ADC resolution");
  SampleBlock block{std::vector<std::uint16_t>(stream.size() / adc.bits), adc};
  if (adc.bits == 8) {
    std::copy(stream.bytes().begin(), stream.bytes().end(), block.codes.begin());
    return block;
  }
  std::size_t pos = 0;
  for (auto& c : block.codes) {
    std::uint32_t v = 0;
    for (unsigned k = 0; k < adc.bits; ++k) v = (v << 1) | stream[pos++];
    c = static_cast<std::uint16_t>(v);
  }
  return block;
}

// ===========================================================================
// TBQR raw sample file
//
//   "TBQR" | version u8 | channels u8 | bits u8 | reserved u8 |
//   sample_rate_hz u32 | full_scale_mv f64 | samples per channel u64 |
//   channel-interleaved codes (u8 for bits <= 8, u16 LE otherwise)
// ===========================================================================

inline constexpr std::uint8_t kRawFormatVersion = 1;

struct RawSamples {
  AdcConfig adc;
  std::vector<std::vector<std::uint16_t>> channels;

  std::size_t samples_per_channel() const noexcept { return channels.empty() ? 0 : channels.front().size(); }

  SampleBlock channel(std::size_t i) const {
    detail::require<FormatError>(i < channels.size(), "raw file has no channel " + std::to_string(i));
    return SampleBlock{channels[i], adc};
  }
};

inline void write_raw(std::ostream& os, const RawSamples& raw) {
  raw.adc.validate();
  detail::require(!raw.channels.empty() && raw.channels.size() <= 255, "raw file needs 1..255 channels");
  const std::size_t n = raw.samples_per_channel();
  for (const auto& ch : raw.channels) detail::require<LengthMismatchError>(ch.size() == n, "raw channels differ in length");
  os.write("TBQR", 4);
  io::put_le<std::uint8_t>(os, kRawFormatVersion);
  io::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(raw.channels.size()));
  io::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(raw.adc.bits));
  io::put_le<std::uint8_t>(os, 0);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(std::llround(raw.adc.sample_rate_hz)));
  io::put_le<double>(os, raw.adc.full_scale_mv);
  io::put_le<std::uint64_t>(os, n);
  const bool wide = raw.adc.bits > 8;
  std::vector<char> buf;
  buf.reserve(n * raw.channels.size() * (wide ? 2 : 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ch : raw.channels) {
      buf.push_back(static_cast<char>(ch[i] & 0xFF));
      if (wide) buf.push_back(static_cast<char>(ch[i] >> 8));
    }
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("write failed");
}

inline RawSamples read_raw(std::istream& is) {
  io::expect_magic(is, "TBQR");
  const auto version = io::get_le<std::uint8_t>(is, "version");
  if (version != kRawFormatVersion) throw FormatError("unsupported TBQR version " + std::to_string(version));
  RawSamples raw;
  const auto nch = io::get_le<std::uint8_t>(is, "channel count");
  raw.adc.bits = io::get_le<std::uint8_t>(is, "bits");
  io::get_le<std::uint8_t>(is, "reserved");
  raw.adc.sample_rate_hz = io::get_le<std::uint32_t>(is, "sample rate");
  raw.adc.full_scale_mv = io::get_le<double>(is, "full scale");
  const auto n = io::get_le<std::uint64_t>(is, "sample count");
  if (nch == 0) throw FormatError("TBQR file declares zero channels");
  try {
    raw.adc.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("TBQR header: ") + e.what());
  }
  const bool wide = raw.adc.bits > 8;
  const std::size_t width = wide ? 2 : 1;
  std::vector<unsigned char> buf(n * nch * width);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw FormatError("truncated TBQR payload: header declares " + std::to_string(n) + " samples per channel");
  raw.channels.assign(nch, std::vector<std::uint16_t>(n));
  const std::uint32_t limit = raw.adc.levels();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < nch; ++c) {
      std::uint32_t v = buf[pos++];
      if (wide) v |= std::uint32_t{buf[pos++]} << 8;
      if (v >= limit) throw FormatError("TBQR code exceeds the declared bit depth");
      raw.channels[c][i] = static_cast<std::uint16_t>(v);
    }
  }
  return raw;
}

inline void save_raw(const std::filesystem::path& path, const RawSamples& raw) {
  auto os = io::open_out(path);
  write_raw(os, raw);
}

inline RawSamples load_raw(const std::filesystem::path& path) {
  auto is = io::open_in(path);
  return read_raw(is);
}

}  // namespace tbq
