// Walks one channel through the whole chain in memory: a baseband twin-beam
// sample is put on a 4 MHz carrier, mixed back down, digitised, and hashed.
// Prints a line per stage.

#include <cmath>
#include <cstdio>
#include <numbers>

#include "tbq/tbq.hpp"

int main() {
  using namespace tbq;
  const std::size_t n = 200000;

  // Carrier sampled fast enough to hold 4 MHz +- 300 kHz.
  const double fs = 2.0e8;
  TwinBeamConfig beams;
  beams.sample_rate_hz = fs;
  const AnalogPair pair = simulate_twin_streams(beams, n);
  std::printf("simulate   %zu samples, corr %.3f, var %.1f mV^2\n", n, pearson_correlation(pair.beam_a, pair.beam_b),
              variance(pair.beam_a));

  // 2 x cos so the mixer's 1/2 brings the baseband back at unit gain.
  std::vector<double> passband(n);
  DemodConfig demod;
  for (std::size_t i = 0; i < n; ++i)
    passband[i] = 2.0 * pair.beam_a[i] * std::cos(2.0 * std::numbers::pi * demod.lo_frequency_hz * static_cast<double>(i) / fs);
  const auto base = demodulate(passband, fs, demod);
  std::printf("demod      lpf %.0f kHz order %u, var %.1f mV^2 (3/8 of the input expected: two more poles at the same corner)\n",
              demod.lpf_cutoff_hz / 1e3,
              demod.lpf_order, variance(base));

  const AdcConfig adc;
  const SampleBlock block = quantize(base, adc);
  const auto est = entropy_report(decompose_variance(variance(base), beams.sigma_classical_sq), adc);
  std::printf("adc        %u bits over %.1f mV, model h_min %.2f bits, empirical p_max %.5f\n", adc.bits, adc.full_scale_mv,
              est.h_min_bits, empirical_pmax(block));

  const BitStream raw = serialize_bits(block);
  const ExtractorConfig ex;
  const BitStream out = extract_stream(raw, ex, build_seed(1, ex));
  std::printf("extract    %zu raw bits -> %zu bits (ratio %.4f), ones %.4f\n", raw.size(), out.size(), ex.ratio(),
              static_cast<double>(out.popcount()) / static_cast<double>(out.size()));
  std::printf("tests      frequency p = %.3f, runs p = %.3f\n", run_test(TestId::Frequency, out), run_test(TestId::Runs, out));
}
