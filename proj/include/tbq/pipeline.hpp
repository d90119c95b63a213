#pragma once

// File-to-file pipeline stages behind the command line tool. Each stage reads
// its inputs from disk and writes its outputs to disk; the returned JSON is
// the deterministic part of the stage report.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tbq/acquisition.hpp"
#include "tbq/analysis.hpp"
#include "tbq/entropy.hpp"
#include "tbq/postselect.hpp"
#include "tbq/randtests.hpp"
#include "tbq/report.hpp"
#include "tbq/run_config.hpp"
#include "tbq/toeplitz.hpp"
#include "tbq/twinbeam.hpp"

namespace tbq {

namespace fs = std::filesystem;

/// FNV-1a over the packed payload plus the bit count.
inline std::uint64_t checksum(const BitStream& bits) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ull;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<std::uint8_t>(bits.size() >> (8 * i)));
  for (auto b : bits.bytes()) mix(b);
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

enum class FileKind { Bitstream, Samples };

/// Identifies a TBBS or TBQR file from its magic.
inline FileKind sniff(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4] = {};
  if (!in.read(magic, 4)) throw FormatError(path.string() + ": too short to be a TBBS or TBQR file");
  const std::string m(magic, 4);
  if (m == "TBBS") return FileKind::Bitstream;
  if (m == "TBQR") return FileKind::Samples;
  throw FormatError(path.string() + ": unknown magic '" + m + "'");
}

inline void ensure_parent(const fs::path& p) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
}

inline void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + p.string());
}

/// Extractor seed for a channel: from the seed file when configured,
/// otherwise derived from the global seed.
inline ToeplitzSeed extractor_seed(const RunConfig& c, const ExtractorConfig& ec, std::uint64_t salt) {
  if (!c.seed_file.empty()) {
    const BitStream bits = load_bitstream(c.seed_file);
    const std::size_t need = ec.seed_bits() * (c.distinct_seeds ? 2 : 1);
    if (bits.size() < need)
      throw FormatError("seed file " + c.seed_file + " holds " + std::to_string(bits.size()) + " bits, need " +
                        std::to_string(need));
    return build_seed(bits.slice(salt % 2 == 1 && c.distinct_seeds ? ec.seed_bits() : 0, ec.seed_bits()), ec);
  }
  return build_seed(c.seed ^ (0x9e3779b97f4a7c15ull * (salt + 1)), ec);
}

inline std::vector<double> dequantize_all(const SampleBlock& block) {
  std::vector<double> v(block.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = dequantize(block.codes[i], block.adc);
  return v;
}

inline SampleBlock channel(const RawSamples& raw, std::size_t k) { return {raw.channels.at(k), raw.adc}; }

/// simulate: writes a two-channel TBQR file.
inline nlohmann::json cmd_simulate(const RunConfig& c, std::size_t n_samples, const fs::path& out) {
  c.validate();
  const TwinBeamConfig sim = c.simulator();
  const AnalogPair pair = simulate_twin_streams(sim, n_samples, c.threads);
  RawSamples raw{c.adc, {quantize(pair.beam_a, c.adc).codes, quantize(pair.beam_b, c.adc).codes}};
  ensure_parent(out);
  save_raw(out, raw);
  nlohmann::json j{{"samples_per_channel", n_samples}, {"file", out.string()}, {"model_squeezing_db", sim.squeezing_db()}};
  if (n_samples >= 2) {
    j["variance_a_mv2"] = variance(pair.beam_a);
    j["variance_b_mv2"] = variance(pair.beam_b);
    j["correlation"] = pearson_correlation(pair.beam_a, pair.beam_b);
    const auto qa = dequantize_all(channel(raw, 0)), qb = dequantize_all(channel(raw, 1));
    j["quantized_correlation"] = pearson_correlation(qa, qb);
    j["difference_noise_db"] = difference_noise_db(pair, simulate_snl_reference(sim, n_samples, c.threads));
  }
  return j;
}

struct ExtractPaths {
  fs::path raw, out_a, out_b;
};

/// extract: serialises both channels and hashes each with the Toeplitz
/// extractor.
inline nlohmann::json cmd_extract(const RunConfig& c, const ExtractPaths& p) {
  c.validate();
  const RawSamples raw = load_raw(p.raw);
  if (raw.channels.size() != 2) throw FormatError(p.raw.string() + ": expected 2 channels");
  const ToeplitzSeed seed_a = extractor_seed(c, c.extractor, 0);
  const ToeplitzSeed seed_b = c.distinct_seeds ? extractor_seed(c, c.extractor, 1) : seed_a;
  nlohmann::json j{{"samples_per_channel", raw.samples_per_channel()}, {"extractor", to_json(c.extractor)}};
  const BitStream bits_a = serialize_bits(channel(raw, 0)), bits_b = serialize_bits(channel(raw, 1));
  const BitStream out_a = extract_stream(bits_a, c.extractor, seed_a, c.threads);
  const BitStream out_b = extract_stream(bits_b, c.extractor, seed_b, c.threads);
  ensure_parent(p.out_a);
  ensure_parent(p.out_b);
  save_bitstream(p.out_a, out_a);
  save_bitstream(p.out_b, out_b);

  double total = c.twinbeam.sigma_total_sq();
  if (raw.samples_per_channel() >= 2) {
    total = variance(dequantize_all(channel(raw, 0)));
    j["measured_variance_mv2"] = total;
  } else {
    j["warning"] = "empty input, nothing extracted";
  }
  const auto decomposition = decompose_variance(total, c.twinbeam.sigma_classical_sq);
  j["entropy"] = to_json(entropy_report(decomposition, raw.adc));
  j["raw_bits_per_channel"] = bits_a.size();
  j["output_bits_per_channel"] = out_a.size();
  j["extraction_ratio"] = c.extractor.ratio();
  j["distinct_seeds"] = c.distinct_seeds;
  j["checksum_a"] = hex64(checksum(out_a));
  j["checksum_b"] = hex64(checksum(out_b));
  j["rates"] = rate_summary(c, std::nan(""));
  return j;
}

/// identical: post-selects agreeing bits and extracts them with one seed.
inline nlohmann::json cmd_identical(const RunConfig& c, const ExtractPaths& p) {
  c.validate();
  const RawSamples raw = load_raw(p.raw);
  if (raw.channels.size() != 2) throw FormatError(p.raw.string() + ": expected 2 channels");
  const ToeplitzSeed seed = extractor_seed(c, c.identical_extractor, 2);
  const auto out = identical_pipeline(serialize_bits(channel(raw, 0)), serialize_bits(channel(raw, 1)), seed, c.threads);
  ensure_parent(p.out_a);
  ensure_parent(p.out_b);
  save_bitstream(p.out_a, out.party_a);
  save_bitstream(p.out_b, out.party_b);
  const std::uint64_t ha = checksum(load_bitstream(p.out_a)), hb = checksum(load_bitstream(p.out_b));
  if (ha != hb) throw InternalError("identical outputs differ on disk");
  nlohmann::json j{{"samples_per_channel", raw.samples_per_channel()},
                   {"extractor", to_json(c.identical_extractor)},
                   {"keep_fraction", out.keep_fraction},
                   {"selected_bits", out.selected_bits},
                   {"output_bits", out.party_a.size()},
                   {"checksum_a", hex64(ha)},
                   {"checksum_b", hex64(hb)},
                   {"rates", rate_summary(c, out.keep_fraction)}};
  return j;
}

/// analyze: autocorrelation for bitstreams, histogram fits for sample files.
/// CSV tables go to `csv_prefix`-*.csv when set.
inline nlohmann::json cmd_analyze(const RunConfig& c, const fs::path& input, const std::optional<fs::path>& other,
                                  const std::optional<fs::path>& csv_prefix) {
  c.validate();
  auto csv_path = [&](const std::string& suffix) { return fs::path(csv_prefix->string() + suffix); };
  nlohmann::json j{{"input", input.string()}};
  if (sniff(input) == FileKind::Bitstream) {
    const BitStream bits = load_bitstream(input);
    j["kind"] = "bitstream";
    j["bits"] = bits.size();
    j["ones_fraction"] = bits.empty() ? 0.0 : static_cast<double>(bits.popcount()) / static_cast<double>(bits.size());
    const auto prof = autocorrelation(bits, c.analysis.k_max);
    j["autocorrelation"] = to_json(prof);
    if (csv_prefix) {
      std::ostringstream ss;
      write_correlation_csv(ss, prof);
      write_text(csv_path("-autocorrelation.csv"), ss.str());
    }
    if (other) {
      const BitStream b = load_bitstream(*other);
      const std::size_t n = std::min(bits.size(), b.size());
      const double r = bit_cross_correlation(bits.slice(0, n), b.slice(0, n));
      j["cross_correlation"] = {{"with", other->string()}, {"r", r}, {"bound_3_over_sqrt_n", 3.0 / std::sqrt(static_cast<double>(n))}};
    }
    return j;
  }
  const RawSamples raw = load_raw(input);
  j["kind"] = "samples";
  j["samples_per_channel"] = raw.samples_per_channel();
  nlohmann::json chans = nlohmann::json::array();
  for (std::size_t k = 0; k < raw.channels.size(); ++k) {
    const SampleBlock block = channel(raw, k);
    const auto fit = histogram_fit(block);
    if (fit.sigma_mv == 0.0) throw ZeroVarianceError("channel " + std::to_string(k) + " is constant, nothing to analyse");
    const double pmax = empirical_pmax(block);
    std::vector<double> codes(block.codes.begin(), block.codes.end());
    const auto prof = autocorrelation(codes, c.analysis.k_max);
    chans.push_back({{"histogram", to_json(fit)},
                     {"empirical_p_max", pmax},
                     {"empirical_h_min_bits", min_entropy(pmax)},
                     {"autocorrelation", to_json(prof, false)}});
    if (csv_prefix) {
      std::ostringstream h, r;
      write_histogram_csv(h, fit, raw.adc);
      write_correlation_csv(r, prof);
      write_text(csv_path("-ch" + std::to_string(k) + "-histogram.csv"), h.str());
      write_text(csv_path("-ch" + std::to_string(k) + "-autocorrelation.csv"), r.str());
    }
  }
  j["channels"] = chans;
  if (raw.channels.size() == 2)
    j["correlation"] = pearson_correlation(dequantize_all(channel(raw, 0)), dequantize_all(channel(raw, 1)));
  return j;
}

/// test: runs the randomness suite on the first S x n bits of a bitstream.
inline SuiteReport cmd_test(const RunConfig& c, const fs::path& input) {
  c.validate();
  const BitStream bits = load_bitstream(input);
  SuiteConfig sc = c.suite;
  sc.threads = c.threads;
  const std::size_t need = sc.num_sequences * sc.sequence_bits;
  if (bits.size() < need)
    throw InsufficientDataError(input.string() + " holds " + std::to_string(bits.size()) + " bits but the suite needs " +
                                std::to_string(need) + " (" + std::to_string(sc.num_sequences) + " x " +
                                std::to_string(sc.sequence_bits) + "); lower --sequences/--sequence-bits or supply more data");
  return run_suite(bits, sc);
}

}  // namespace tbq
