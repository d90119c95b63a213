#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "tbq/acquisition.hpp"
#include "tbq/analysis.hpp"
#include "tbq/entropy.hpp"
#include "tbq/rng.hpp"

using namespace tbq;

namespace {

std::vector<double> tone(std::size_t n, double freq, double fs, double amplitude) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amplitude * std::cos(2.0 * M_PI * freq * static_cast<double>(i) / fs);
  return x;
}

// Amplitude of the `freq` component of x[first..first+count) by projection.
double tone_amplitude(const std::vector<double>& x, std::size_t first, std::size_t count, double freq, double fs) {
  std::complex<double> acc = 0;
  for (std::size_t i = first; i < first + count; ++i)
    acc += x[i] * std::polar(1.0, -2.0 * M_PI * freq * static_cast<double>(i) / fs);
  return 2.0 * std::abs(acc) / static_cast<double>(count);
}

const AdcConfig k440{8, 440.0, 1.0e7};

}  // namespace

TEST(Demodulate, ToneAtLocalOscillatorBecomesDc) {
  const DemodConfig cfg;  // 4 MHz LO, 300 kHz cutoff, order 2
  const double fs = 1.0e8, a = 3.0;
  Demodulator probe(cfg, fs);
  const std::size_t settle = probe.warmup_samples();
  const auto y = demodulate(tone(settle + 20000, cfg.lo_frequency_hz, fs, a), fs, cfg);
  for (std::size_t i = settle; i < y.size(); ++i) ASSERT_NEAR(y[i], a / 2.0, 0.01 * a / 2.0);
}

TEST(Demodulate, OutOfBandToneIsAttenuated) {
  for (unsigned order : {1u, 2u, 3u}) {
    DemodConfig cfg;
    cfg.lpf_order = order;
    const double fs = 1.0e8, a = 2.0;
    const double offset = 10.0 * cfg.lpf_cutoff_hz;
    const std::size_t settle = Demodulator(cfg, fs).warmup_samples();
    const std::size_t window = 100000;  // whole periods of 3 MHz and 11 MHz
    const auto y = demodulate(tone(settle + window, cfg.lo_frequency_hz + offset, fs, a), fs, cfg);
    const double residual = tone_amplitude(y, settle, window, offset, fs);
    const double bound = a / 2.0 * std::pow(1.0 / std::sqrt(1.0 + 100.0), order);
    EXPECT_LT(residual, bound) << "order " << order;
    EXPECT_GT(residual, 0.9 * bound) << "order " << order;
  }
}

TEST(Demodulate, WhiteNoiseVarianceFollowsNoiseBandwidth) {
  const DemodConfig cfg;
  const double fs = 1.0e8, sigma = 5.0;
  const std::size_t n = 2000000;
  const Philox4x32 gen(77);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = sigma * gaussian_pair(gen, i / 2)[i % 2];
  const auto y = demodulate(x, fs, cfg);
  const Demodulator d(cfg, fs);
  const std::vector<double> steady(y.begin() + static_cast<std::ptrdiff_t>(d.warmup_samples()), y.end());
  // Oracle: mixing halves the white variance; the filter keeps
  // (1/pi) * integral_0^pi |H(e^jw)|^2 dw of it (Simpson quadrature).
  const double b = d.section_gain(), p = d.section_pole();
  auto gain2 = [&](double w) {
    const std::complex<double> z = std::polar(1.0, -w);
    const auto h = b * (1.0 + z) / (1.0 - p * z);
    return std::pow(std::norm(h), cfg.lpf_order);
  };
  const int intervals = 200000;
  const double h = M_PI / intervals;
  double integral = gain2(0.0) + gain2(M_PI);
  for (int i = 1; i < intervals; ++i) integral += gain2(i * h) * (i % 2 ? 4.0 : 2.0);
  integral *= h / 3.0;
  const double expected = sigma * sigma / 2.0 * integral / M_PI;
  EXPECT_NEAR(variance(steady) / expected, 1.0, 0.05);
  // Sanity against the analog two-pole noise bandwidth (pi/4) fc.
  EXPECT_NEAR(integral / M_PI, (M_PI / 4.0) * cfg.lpf_cutoff_hz / (fs / 2.0), 0.02 * integral / M_PI);
}

TEST(Demodulate, Linearity) {
  const DemodConfig cfg;
  const double fs = 5.0e7;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> x(20000), y(20000), combo(20000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = g(rng);
    combo[i] = 2.5 * x[i] - 0.75 * y[i];
  }
  const auto dx = demodulate(x, fs, cfg), dy = demodulate(y, fs, cfg), dc = demodulate(combo, fs, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(dc[i], 2.5 * dx[i] - 0.75 * dy[i], 1e-12);
}

TEST(Demodulate, ChunkedStreamingMatchesOneShot) {
  const DemodConfig cfg;
  const double fs = 2.0e7;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> x(50000);
  for (auto& v : x) v = g(rng);
  const auto whole = demodulate(x, fs, cfg);
  Demodulator d(cfg, fs);
  std::vector<double> chunked(x.size());
  std::size_t pos = 0;
  for (std::size_t len : {1u, 999u, 4096u, 12345u}) {
    d.process(std::span(x).subspan(pos, len), std::span(chunked).subspan(pos, len));
    pos += len;
  }
  d.process(std::span(x).subspan(pos), std::span(chunked).subspan(pos));
  EXPECT_EQ(whole, chunked);
}

TEST(Demodulate, RejectsNyquistViolation) {
  const std::vector<double> x(10, 1.0);
  EXPECT_THROW(demodulate(x, 8.0e6, DemodConfig{}), DomainError);
  EXPECT_THROW(demodulate(x, 1.0e8, DemodConfig{4e6, 5e6, 1}), DomainError);
  EXPECT_THROW(demodulate(x, 1.0e8, DemodConfig{4e6, 3e5, 0}), DomainError);
}

TEST(Quantize, MidScaleAndSaturation) {
  const std::vector<double> x = {0.0, 4400.0, -4400.0, -220.0, 219.9, -0.1, 0.85, 0.86};
  const auto block = quantize(x, k440);
  EXPECT_EQ(block.codes[0], 128);
  EXPECT_EQ(block.codes[1], 255);
  EXPECT_EQ(block.codes[2], 0);
  EXPECT_EQ(block.codes[3], 0);
  EXPECT_EQ(block.codes[4], 255);
  EXPECT_EQ(block.codes[5], 128);  // mid-tread: zero bin straddles 0 mV
  EXPECT_EQ(block.codes[6], 128);  // step = 1.71875 mV, bin edge at 0.859375
  EXPECT_EQ(block.codes[7], 129);
  EXPECT_THROW(quantize_one(std::nan(""), k440), DomainError);
}

TEST(Quantize, MonotoneWithBoundedErrorProperty) {
  std::mt19937_64 rng(9);
  for (unsigned bits : {2u, 5u, 8u, 12u, 16u}) {
    const AdcConfig adc{bits, 100.0, 1e7};
    const double step = adc.step_mv();
    std::uniform_real_distribution<double> in_range(-50.0, 50.0 - step / 2.0), any(-200.0, 200.0);
    for (int i = 0; i < 20000; ++i) {
      const double x = in_range(rng);
      ASSERT_LE(std::abs(dequantize(quantize_one(x, adc), adc) - x), step / 2.0 * (1 + 1e-12)) << bits;
      double a = any(rng), b = any(rng);
      if (a > b) std::swap(a, b);
      ASSERT_LE(quantize_one(a, adc), quantize_one(b, adc));
    }
  }
}

TEST(Quantize, OneBitIsComparatorAtZero) {
  const AdcConfig adc{1, 10.0, 1e7};
  EXPECT_EQ(quantize_one(-1e-9, adc), 0);
  EXPECT_EQ(quantize_one(0.0, adc), 1);
  EXPECT_EQ(quantize_one(7.0, adc), 1);
  EXPECT_DOUBLE_EQ(dequantize(0, adc), -2.5);
  EXPECT_DOUBLE_EQ(dequantize(1, adc), 2.5);
}

TEST(Quantize, GaussianMaxBinFrequency) {
  AdcConfig adc;  // calibrated full scale
  const double sigma = 69.03;
  const std::size_t n = 10000000;
  const Philox4x32 gen(2024);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = sigma * gaussian_pair(gen, i / 2)[i % 2];
  const auto block = quantize(x, adc);
  const double p = 0.00993296;
  EXPECT_NEAR(empirical_pmax(block), p, 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)));
}

TEST(Serialize, KnownPatterns) {
  SampleBlock one{{0xA5}, AdcConfig{}};
  EXPECT_EQ(serialize_bits(one).to_string(), "10100101");
  SampleBlock two{{1, 2}, AdcConfig{}};
  EXPECT_EQ(serialize_bits(two).to_string(), "0000000100000010");
  SampleBlock three_bit{{5, 2, 7}, AdcConfig{3, 1.0, 1e7}};
  EXPECT_EQ(serialize_bits(three_bit).to_string(), "101010111");
}

TEST(Serialize, RoundTripAllBitDepths) {
  std::mt19937_64 rng(13);
  for (unsigned bits = 1; bits <= 16; ++bits) {
    const AdcConfig adc{bits, 1.0, 1e7};
    SampleBlock block{std::vector<std::uint16_t>(257), adc};
    for (auto& c : block.codes) c = static_cast<std::uint16_t>(rng() % adc.levels());
    const auto stream = serialize_bits(block);
    ASSERT_EQ(stream.size(), bits * block.codes.size());
    EXPECT_EQ(deserialize_bits(stream, adc).codes, block.codes) << bits;
  }
  EXPECT_THROW(deserialize_bits(BitStream(13), AdcConfig{}), FormatError);
}

TEST(RawFile, RoundTripAndLayout) {
  for (unsigned bits : {8u, 12u}) {
    RawSamples raw;
    raw.adc = AdcConfig{bits, 440.0, 1.0e7};
    raw.channels = {{1, 2, 3}, {250, 0, 7}};
    std::stringstream buf;
    write_raw(buf, raw);
    const std::string bytes = buf.str();
    EXPECT_EQ(bytes.substr(0, 4), "TBQR");
    EXPECT_EQ(bytes.size(), 28u + 6u * (bits > 8 ? 2 : 1));
    if (bits == 8) {
      EXPECT_EQ(static_cast<unsigned char>(bytes[28]), 1);
      EXPECT_EQ(static_cast<unsigned char>(bytes[29]), 250);
    }
    const auto back = read_raw(buf);
    EXPECT_EQ(back.channels, raw.channels);
    EXPECT_EQ(back.adc.bits, bits);
    EXPECT_DOUBLE_EQ(back.adc.full_scale_mv, 440.0);
    EXPECT_DOUBLE_EQ(back.adc.sample_rate_hz, 1.0e7);
  }
}

TEST(RawFile, RejectsBadInput) {
  RawSamples raw;
  raw.channels = {{1, 2, 3}};
  std::stringstream buf;
  write_raw(buf, raw);
  std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_raw(truncated), FormatError);
  bytes[0] = 'X';
  std::stringstream bad_magic(bytes);
  EXPECT_THROW(read_raw(bad_magic), FormatError);
  RawSamples ragged;
  ragged.channels = {{1, 2}, {1}};
  std::stringstream sink;
  EXPECT_THROW(write_raw(sink, ragged), LengthMismatchError);
}
