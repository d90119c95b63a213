// Acceptance gate. `acceptance N` checks criterion N, `acceptance` checks all.
// Each criterion prints one PASS/FAIL line; the exit status is nonzero when
// any checked criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tbq/tbq.hpp"
#include "test_support.hpp"

using namespace tbq;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records one check; the criterion passes only if all checks do.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
  }
  // Context only, never affects the verdict.
  void note(const std::string& what) { detail << (detail.tellp() > 0 ? "; " : "") << "(" << what << ")"; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

BitStream channel_bits(const std::vector<double>& beam) { return serialize_bits(quantize(beam, AdcConfig{})); }

// Cavity spectrum at the reference operating point.
void criterion1(Outcome& o) {
  const double db = squeezing_db(CavityParams{});
  o.check(std::abs(db - 8.1) <= 0.05, "squeezing " + fmt("%.4f", db) + " dB vs 8.1 +- 0.05");
}

void criterion2(Outcome& o) {
  const auto v = decompose_variance(4768.44, 3.18);
  o.check(std::abs(v.sigma_quant_sq - 4765.26) < 1e-9, "sigma_q^2 " + fmt("%.6f", v.sigma_quant_sq));
  const double pmax = gaussian_bin_pmax(69.03, AdcConfig{});
  o.check(std::abs(pmax - 0.00993296) <= 1e-6, "p_max " + fmt("%.8f", pmax) + " vs 0.00993296 +- 1e-6");
  const double h = min_entropy(pmax);
  o.check(std::abs(h - 6.65) <= 0.01, "h_min " + fmt("%.4f", h) + " vs 6.65 +- 0.01");
  const auto block = required_raw_block(1024, 6.65, 8);
  o.check(block == 1232, "required_raw_block " + std::to_string(block) + " vs 1232");
}

void criterion3(Outcome& o) {
  const double full = expected_rate(80e6, 1.0, ExtractorConfig{1024, 1360}) / 1e6;
  const double ident = expected_rate(80e6, 0.70, kIdenticalExtractor) / 1e6;
  o.check(std::abs(full - 60.2) <= 0.05, "full rate " + fmt("%.3f", full) + " Mb/s vs 60.2");
  o.check(std::abs(ident - 29.87) <= 0.005, "identical rate " + fmt("%.3f", ident) + " Mb/s vs 29.87");
}

void criterion4(Outcome& o) {
  const auto t0 = Clock::now();
  const std::size_t n = 1000000;
  TwinBeamConfig cfg;
  const auto pair = simulate_twin_streams(cfg, n);
  const double r = pearson_correlation(pair.beam_a, pair.beam_b);
  o.check(std::abs(r - 0.75) <= 0.02, "correlation " + fmt("%.4f", r) + " vs 0.75 +- 0.02");
  for (const auto* beam : {&pair.beam_a, &pair.beam_b}) {
    const double var = variance(*beam);
    o.check(std::abs(var / 4768.44 - 1.0) <= 0.02, "variance " + fmt("%.1f", var) + " vs 4768.44 +- 2%");
  }
  TwinBeamConfig squeezed = cfg;
  squeezed.rho = correlation_for_squeezing(6.3, cfg.sigma_quant_sq, cfg.sigma_classical_sq);
  const double db = difference_noise_db(simulate_twin_streams(squeezed, n), simulate_snl_reference(squeezed, n));
  o.check(std::abs(db + 6.3) <= 0.3, "difference noise " + fmt("%.3f", db) + " dB vs -6.3 +- 0.3 (rho " + fmt("%.4f", squeezed.rho) + ")");
  const double t = seconds_since(t0);
  o.check(t < 10.0, "runtime " + fmt("%.2f", t) + " s < 10");
}

void criterion5(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> dim(1, 300);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t n = dim(rng), m = dim(rng);
    if (m > n) std::swap(m, n);
    const ExtractorConfig cfg{m, n};
    const auto seed = build_seed(oracle::random_bits(rng, cfg.seed_bits()), cfg);
    const auto x = oracle::random_bits(rng, n);
    const auto want = oracle::naive_toeplitz(oracle::to_bools(seed.bits), oracle::to_bools(x), m);
    if (oracle::to_bools(extract_block(x, seed)) != want) ++mismatches;
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " of 10000 instances differ from the oracle");

  const ExtractorConfig cfg;
  const auto seed = build_seed(11, cfg);
  std::size_t linear_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto x = oracle::random_bits(rng, cfg.n), y = oracle::random_bits(rng, cfg.n);
    BitStream xy(cfg.n);
    for (std::size_t j = 0; j < cfg.n; ++j) xy.set(j, x[j] != y[j]);
    const auto tx = extract_block(x, seed), ty = extract_block(y, seed), txy = extract_block(xy, seed);
    for (std::size_t i = 0; i < cfg.m; ++i)
      if (txy[i] != (tx[i] != ty[i])) {
        ++linear_fail;
        break;
      }
  }
  o.check(linear_fail == 0, std::to_string(linear_fail) + " of 1000 pairs break linearity");
  const double t = seconds_since(t0);
  o.check(t < 30.0, "runtime " + fmt("%.2f", t) + " s < 30");
}

void criterion6(Outcome& o) {
  const auto t0 = Clock::now();
  const auto r = throughput_bench(ExtractorConfig{}, 1000000000, 1, 6);
  o.check(r.input_bits >= 1000000000 - 1360, std::to_string(r.input_bits) + " input bits");
  o.check(r.output_bits_per_second >= 60e6, "single-thread output " + fmt("%.1f", r.output_bits_per_second / 1e6) + " Mb/s >= 60");
  const double t = seconds_since(t0);
  o.check(t < 180.0, "runtime " + fmt("%.1f", t) + " s < 180");
}

void criterion7(Outcome& o) {
  const auto t0 = Clock::now();
  // 1.25e7 8-bit samples per channel = 1e8 bits per party
  const std::size_t samples = 12500000;
  const auto pair = simulate_twin_streams(TwinBeamConfig{}, samples);
  const auto out = identical_pipeline(channel_bits(pair.beam_a), channel_bits(pair.beam_b), build_seed(7, kIdenticalExtractor));
  const bool same = out.party_a == out.party_b && checksum(out.party_a) == checksum(out.party_b);
  o.check(same && !out.party_a.empty(), "outputs identical, " + std::to_string(out.party_a.size()) + " bits, checksum " +
                                            hex64(checksum(out.party_a)));
  o.check(out.keep_fraction >= 0.60 && out.keep_fraction <= 0.80, "keep_fraction " + fmt("%.4f", out.keep_fraction) + " in [0.60, 0.80]");

  double prev = -1;
  bool monotone = true;
  std::string list;
  for (double rho : {0.5, 0.75, 0.9}) {
    TwinBeamConfig cfg;
    cfg.rho = rho;
    const auto p = simulate_twin_streams(cfg, 2000000);
    const double k = select_identical(channel_bits(p.beam_a), channel_bits(p.beam_b)).keep_fraction;
    monotone = monotone && k > prev;
    prev = k;
    list += (list.empty() ? "" : " ") + fmt("%.4f", k);
  }
  o.check(monotone, "keep vs rho {0.5,0.75,0.9}: " + list + " increasing");
  const double t = seconds_since(t0);
  o.check(t < 120.0, "runtime " + fmt("%.1f", t) + " s < 120");
}

void criterion8(Outcome& o) {
  const auto t0 = Clock::now();
  const std::size_t seqs = 100, len = 1000000;
  const ExtractorConfig ex;
  const std::size_t blocks = (seqs * len + ex.m - 1) / ex.m;
  const std::size_t samples = (blocks * ex.n + 7) / 8;
  const auto pair = simulate_twin_streams(TwinBeamConfig{}, samples);
  const BitStream raw = channel_bits(pair.beam_a);
  const BitStream extracted = extract_stream(raw, ex, build_seed(8, ex));

  SuiteConfig sc;
  sc.num_sequences = seqs;
  sc.sequence_bits = len;
  const auto rep = run_suite(extracted, sc);
  for (const auto& t : rep.tests) {
    bool uniform_ok = true;
    for (const auto& s : t.sub_tests) uniform_ok = uniform_ok && s.uniformity_P >= kUniformityThreshold;
    o.check(t.passed && uniform_ok, std::string(test_name(t.id)) + " P " + fmt("%.4g", t.uniformity_P) + " prop " + fmt("%.2f", t.proportion));
  }

  const auto raw_rep = run_suite(raw, sc);
  std::string raw_failed;
  for (const auto& t : raw_rep.tests) {
    if (t.id == TestId::Frequency)
      o.check(!t.passed, "raw bits monobit P " + fmt("%.3g", t.uniformity_P) + " prop " + fmt("%.2f", t.proportion) + " rejected");
    if (!t.passed) raw_failed += (raw_failed.empty() ? "" : " ") + std::string(test_name(t.id));
  }
  o.note("raw suite rejects: " + (raw_failed.empty() ? std::string("none") : raw_failed));
  const BitStream pooled = raw.slice(0, seqs * len);
  o.note("raw ones fraction " + fmt("%.5f", double(pooled.popcount()) / double(pooled.size())) + ", monobit on all " +
         std::to_string(pooled.size()) + " bits p " + fmt("%.3g", run_test(TestId::Frequency, pooled)));
  const double t = seconds_since(t0);
  o.check(t < 600.0, "runtime " + fmt("%.1f", t) + " s < 600");
}

void criterion9(Outcome& o) {
  const auto t0 = Clock::now();
  const std::size_t want = 80000000;
  const ExtractorConfig ex;
  const std::size_t blocks = (want + ex.m - 1) / ex.m;
  const std::size_t samples = (blocks * ex.n + 7) / 8;
  const auto pair = simulate_twin_streams(TwinBeamConfig{}, samples);
  const double analog = pearson_correlation(pair.beam_a, pair.beam_b);
  o.check(std::abs(analog - 0.75) <= 0.02, "analog correlation " + fmt("%.4f", analog));
  const auto seed = build_seed(9, ex);
  const BitStream a = extract_stream(channel_bits(pair.beam_a), ex, seed).slice(0, want);
  const BitStream b = extract_stream(channel_bits(pair.beam_b), ex, seed).slice(0, want);
  const auto prof = autocorrelation(a, 100);
  o.check(std::abs(prof.mean_tail) < 1e-4, "|mean R(1..100)| " + fmt("%.3g", std::abs(prof.mean_tail)) + " < 1e-4 (mean |R| " +
                                               fmt("%.3g", prof.mean_abs_tail) + ")");
  const double cross = bit_cross_correlation(a, b);
  const double bound = 3.0 / std::sqrt(static_cast<double>(want));
  o.check(std::abs(cross) < bound, "cross-correlation " + fmt("%.3g", cross) + " < " + fmt("%.3g", bound));
  const double t = seconds_since(t0);
  o.check(t < 120.0, "runtime " + fmt("%.1f", t) + " s < 120");
}

void criterion10(Outcome& o) {
  const auto t0 = Clock::now();
  const std::size_t seqs = 10000, len = 10000;
  const BitStream bits = deterministic_bits(10, seqs * len);
  SuiteConfig sc;
  sc.num_sequences = seqs;
  sc.sequence_bits = len;
  const auto rep = run_suite(bits, sc);
  for (const auto& t : rep.tests)
    for (const auto& s : t.sub_tests) {
      const double rate = 1.0 - s.proportion;
      std::string name(test_name(t.id));
      if (!s.name.empty()) name += "/" + s.name;
      o.check(std::abs(rate - 0.01) <= 0.004, name + " " + fmt("%.4f", rate));
    }
  const double t = seconds_since(t0);
  o.check(t < 300.0, "runtime " + fmt("%.1f", t) + " s < 300");
}

const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> kCriteria = {
    {"cavity squeezing", criterion1},      {"min-entropy", criterion2},       {"rate arithmetic", criterion3},
    {"simulation fidelity", criterion4},   {"extractor correctness", criterion5}, {"extractor throughput", criterion6},
    {"post-selection", criterion7},        {"statistical quality", criterion8},   {"autocorrelation", criterion9},
    {"test calibration", criterion10},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) which.push_back(i);
  int failed = 0;
  for (int k : which) {
    if (k < 1 || k > static_cast<int>(kCriteria.size())) {
      std::fprintf(stderr, "no criterion %d\n", k);
      return 2;
    }
    Outcome o;
    const auto t0 = Clock::now();
    try {
      kCriteria[k - 1].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("threw: ") + e.what());
    }
    std::printf("criterion %2d %s  %-22s %s  (%.1f s)\n", k, o.pass ? "PASS" : "FAIL", kCriteria[k - 1].first, o.detail.str().c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
