#pragma once

// Eight tests from the NIST SP 800-22 battery plus its two-level aggregation
// (chi-square uniformity of p-values and pass proportion).

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "tbq/bitstream.hpp"
#include "tbq/errors.hpp"
#include "tbq/parallel.hpp"

namespace tbq {

enum class TestId { Frequency, BlockFrequency, Runs, LongestRun, CumulativeSums, Spectral, ApproximateEntropy, Serial };

inline constexpr std::array<TestId, 8> kAllTests = {TestId::Frequency,      TestId::BlockFrequency, TestId::Runs,
                                                    TestId::LongestRun,     TestId::CumulativeSums, TestId::Spectral,
                                                    TestId::ApproximateEntropy, TestId::Serial};

inline std::string_view test_name(TestId id) {
  switch (id) {
    case TestId::Frequency: return "Frequency";
    case TestId::BlockFrequency: return "BlockFrequency";
    case TestId::Runs: return "Runs";
    case TestId::LongestRun: return "LongestRun";
    case TestId::CumulativeSums: return "CumulativeSums";
    case TestId::Spectral: return "FFT";
    case TestId::ApproximateEntropy: return "ApproximateEntropy";
    case TestId::Serial: return "Serial";
  }
  return "?";
}

inline std::optional<TestId> test_from_name(std::string_view name) {
  for (auto id : kAllTests)
    if (test_name(id) == name) return id;
  return std::nullopt;
}

/// Block sizes. Zero selects the automatic choice: the SP 800-22 defaults
/// for 1 Mbit sequences (ApEn m = 10, serial m = 16), reduced on short
/// sequences to respect the recommended m < log2(n) - 5 (ApEn) and
/// m < log2(n) - 2 (serial) so the chi-square approximations stay valid.
struct TestParams {
  std::size_t block_frequency_m = 128;
  unsigned approximate_entropy_m = 0;
  unsigned serial_m = 0;
};

inline unsigned floor_log2(std::size_t n) { return n ? static_cast<unsigned>(std::bit_width(n) - 1) : 0; }

inline unsigned approximate_entropy_block(std::size_t n, const TestParams& p = {}) {
  if (p.approximate_entropy_m) return p.approximate_entropy_m;
  const int lg = static_cast<int>(floor_log2(n));
  return static_cast<unsigned>(std::clamp(lg - 6, 1, 10));
}

inline unsigned serial_block(std::size_t n, const TestParams& p = {}) {
  if (p.serial_m) return p.serial_m;
  const int lg = static_cast<int>(floor_log2(n));
  return static_cast<unsigned>(std::clamp(lg - 3, 2, 16));
}

/// Shortest sequence each test accepts.
inline std::size_t minimum_length(TestId id, const TestParams& p = {}) {
  switch (id) {
    case TestId::Frequency:
    case TestId::Runs:
    case TestId::CumulativeSums: return 2;
    case TestId::BlockFrequency: return p.block_frequency_m;
    case TestId::LongestRun: return 128;
    case TestId::Spectral: return 64;
    case TestId::ApproximateEntropy:
    case TestId::Serial: return 64;
  }
  return 0;
}

inline std::vector<std::string> sub_test_names(TestId id) {
  switch (id) {
    case TestId::CumulativeSums: return {"forward", "backward"};
    case TestId::Serial: return {"p1", "p2"};
    default: return {""};
  }
}

namespace stats {

/// Upper regularised incomplete gamma Q(a, x) (NIST's igamc).
inline double igamc(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return boost::math::gamma_q(a, x);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double clamp_p(double p) { return std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0); }

}  // namespace stats

namespace detail {

inline void check_length(TestId id, const BitStream& bits, const TestParams& p) {
  const std::size_t need = minimum_length(id, p);
  if (bits.size() < need)
    throw InsufficientDataError(std::string(test_name(id)) + " test needs at least " + std::to_string(need) +
                                " bits, got " + std::to_string(bits.size()));
}

inline double frequency(const BitStream& bits) {
  const double n = static_cast<double>(bits.size());
  const double s = 2.0 * static_cast<double>(bits.popcount()) - n;
  return std::erfc(std::abs(s) / std::sqrt(n) / std::numbers::sqrt2);
}

inline double block_frequency(const BitStream& bits, std::size_t m) {
  const std::size_t blocks = bits.size() / m;
  double chi = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t ones = 0;
    for (std::size_t pos = b * m, end = pos + m; pos < end; pos += 64) {
      std::uint64_t w = bits.load_word(pos);
      if (end - pos < 64) w &= ~std::uint64_t{0} << (64 - (end - pos));
      ones += static_cast<std::size_t>(std::popcount(w));
    }
    const double pi = static_cast<double>(ones) / static_cast<double>(m) - 0.5;
    chi += pi * pi;
  }
  chi *= 4.0 * static_cast<double>(m);
  return stats::igamc(static_cast<double>(blocks) / 2.0, chi / 2.0);
}

inline double runs(const BitStream& bits) {
  const std::size_t n = bits.size();
  const double nn = static_cast<double>(n);
  const double pi = static_cast<double>(bits.popcount()) / nn;
  if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(nn)) return 0.0;
  std::uint64_t changes = 0;
  for (std::size_t pos = 0; pos + 1 < n; pos += 64) {
    std::uint64_t d = bits.load_word(pos) ^ bits.load_word(pos + 1);
    const std::size_t pairs = n - 1 - pos;
    if (pairs < 64) d &= ~std::uint64_t{0} << (64 - pairs);
    changes += static_cast<std::uint64_t>(std::popcount(d));
  }
  const double v = static_cast<double>(changes) + 1.0;
  const double q = pi * (1.0 - pi);
  return std::erfc(std::abs(v - 2.0 * nn * q) / (2.0 * std::sqrt(2.0 * nn) * q));
}

inline double longest_run(const BitStream& bits) {
  const std::size_t n = bits.size();
  std::size_t m;
  unsigned lowest;
  std::vector<double> pi;
  if (n < 6272) {
    m = 8, lowest = 1, pi = {0.2148, 0.3672, 0.2305, 0.1875};
  } else if (n < 750000) {
    m = 128, lowest = 4, pi = {0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124};
  } else {
    m = 10000, lowest = 10, pi = {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727};
  }
  const std::size_t classes = pi.size();
  const std::size_t blocks = n / m;
  std::vector<double> counts(classes, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    unsigned run = 0, best = 0;
    for (std::size_t i = b * m; i < (b + 1) * m; ++i) {
      run = bits[i] ? run + 1 : 0;
      best = std::max(best, run);
    }
    const std::size_t cls = best <= lowest ? 0 : std::min<std::size_t>(best - lowest, classes - 1);
    counts[cls] += 1.0;
  }
  double chi = 0;
  const double nb = static_cast<double>(blocks);
  for (std::size_t i = 0; i < classes; ++i) chi += (counts[i] - nb * pi[i]) * (counts[i] - nb * pi[i]) / (nb * pi[i]);
  return stats::igamc(static_cast<double>(classes - 1) / 2.0, chi / 2.0);
}

inline double cusum_p(long long n, long long z) {
  if (z == 0) return 1.0;
  const double sn = std::sqrt(static_cast<double>(n));
  const double zz = static_cast<double>(z);
  const long long nz = n / z;
  double sum1 = 0, sum2 = 0;
  for (long long k = (-nz + 1) / 4; k <= (nz - 1) / 4; ++k)
    sum1 += stats::normal_cdf((4 * k + 1) * zz / sn) - stats::normal_cdf((4 * k - 1) * zz / sn);
  for (long long k = (-nz - 3) / 4; k <= (nz - 1) / 4; ++k)
    sum2 += stats::normal_cdf((4 * k + 3) * zz / sn) - stats::normal_cdf((4 * k + 1) * zz / sn);
  return 1.0 - sum1 + sum2;
}

inline std::vector<double> cumulative_sums(const BitStream& bits) {
  const auto n = static_cast<long long>(bits.size());
  long long s = 0, max_fwd = 0, max_abs_rev_base = 0;
  long long lo = 0, hi = 0;
  for (long long i = 0; i < n; ++i) {
    s += bits[static_cast<std::size_t>(i)] ? 1 : -1;
    max_fwd = std::max(max_fwd, std::abs(s));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  // Backward partial sums are S_n - S_{k}, k = n-1..0, i.e. total minus every
  // forward prefix (including the empty one).
  max_abs_rev_base = std::max(std::abs(s - lo), std::abs(s - hi));
  max_abs_rev_base = std::max(max_abs_rev_base, std::abs(s));
  return {cusum_p(n, max_fwd), cusum_p(n, max_abs_rev_base)};
}

class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  // fftw_execute_dft_r2c on a cached plan is thread-safe; plan creation is not.
  fftw_plan plan(int n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(static_cast<std::size_t>(n));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(n, p);
    return p;
  }

  ~FftPlanCache() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<int, fftw_plan> plans_;
};

struct FftwDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

inline double spectral(const BitStream& bits) {
  const std::size_t n = bits.size();
  detail::require(n <= static_cast<std::size_t>(std::numeric_limits<int>::max()), "FFT test: sequence too long");
  const fftw_plan plan = FftPlanCache::instance().plan(static_cast<int>(n));
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(n / 2 + 1));
  for (std::size_t i = 0; i < n; ++i) in.get()[i] = bits[i] ? 1.0 : -1.0;
  fftw_execute_dft_r2c(plan, in.get(), out.get());
  const double nn = static_cast<double>(n);
  const double threshold = std::sqrt(std::log(1.0 / 0.05) * nn);
  const std::size_t half = n / 2;
  std::size_t below = 0;
  for (std::size_t j = 0; j < half; ++j) {
    const double re = out.get()[j][0], im = out.get()[j][1];
    if (std::sqrt(re * re + im * im) < threshold) ++below;
  }
  const double expected = 0.95 * nn / 2.0;
  const double d = (static_cast<double>(below) - expected) / std::sqrt(nn * 0.95 * 0.05 / 4.0);
  return std::erfc(std::abs(d) / std::numbers::sqrt2);
}

// Frequencies of all cyclic overlapping `width`-bit patterns (the sequence
// is extended by its first width-1 bits).
inline std::vector<std::uint32_t> cyclic_pattern_counts(const BitStream& bits, unsigned width) {
  std::vector<std::uint32_t> counts(std::size_t{1} << width, 0);
  if (width == 0) {
    counts[0] = static_cast<std::uint32_t>(bits.size());
    return counts;
  }
  const std::size_t n = bits.size();
  const std::uint32_t mask = (std::uint32_t{1} << width) - 1;
  std::uint32_t window = 0;
  for (unsigned k = 0; k + 1 < width; ++k) window = (window << 1) | bits[k % n];
  for (std::size_t i = 0; i < n; ++i) {
    window = ((window << 1) | bits[(i + width - 1) % n]) & mask;
    ++counts[window];
  }
  return counts;
}

// Counts of width-1 patterns from width patterns (cyclic windows nest).
inline std::vector<std::uint32_t> marginal_counts(const std::vector<std::uint32_t>& counts) {
  std::vector<std::uint32_t> out(counts.size() / 2);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = counts[2 * p] + counts[2 * p + 1];
  return out;
}

inline double approximate_entropy(const BitStream& bits, unsigned m) {
  const double n = static_cast<double>(bits.size());
  const auto upper = cyclic_pattern_counts(bits, m + 1);
  const auto lower = marginal_counts(upper);
  auto phi = [n](const std::vector<std::uint32_t>& c) {
    double s = 0;
    for (auto v : c)
      if (v) s += (v / n) * std::log(v / n);
    return s;
  };
  const double apen = phi(lower) - phi(upper);
  const double chi = 2.0 * n * (std::numbers::ln2 - apen);
  return stats::igamc(std::ldexp(1.0, static_cast<int>(m) - 1), chi / 2.0);
}

inline std::vector<double> serial(const BitStream& bits, unsigned m) {
  const double n = static_cast<double>(bits.size());
  auto psi = [n](const std::vector<std::uint32_t>& c) {
    if (c.size() <= 1) return 0.0;
    double s = 0;
    for (auto v : c) s += static_cast<double>(v) * v;
    return s * static_cast<double>(c.size()) / n - n;
  };
  const auto cm = cyclic_pattern_counts(bits, m);
  const auto cm1 = marginal_counts(cm);
  const auto cm2 = marginal_counts(cm1);
  const double p0 = psi(cm), p1 = psi(cm1), p2 = psi(cm2);
  const double del1 = p0 - p1;
  const double del2 = p0 - 2.0 * p1 + p2;
  return {stats::igamc(std::ldexp(1.0, static_cast<int>(m) - 2), del1 / 2.0),
          stats::igamc(std::ldexp(1.0, static_cast<int>(m) - 3), del2 / 2.0)};
}

}  // namespace detail

/// Every p-value the test produces for one sequence (two for cumulative sums
/// and serial, one otherwise).
inline std::vector<double> run_test_all(TestId id, const BitStream& bits, const TestParams& params = {}) {
  detail::check_length(id, bits, params);
  std::vector<double> p;
  switch (id) {
    case TestId::Frequency: p = {detail::frequency(bits)}; break;
    case TestId::BlockFrequency: p = {detail::block_frequency(bits, params.block_frequency_m)}; break;
    case TestId::Runs: p = {detail::runs(bits)}; break;
    case TestId::LongestRun: p = {detail::longest_run(bits)}; break;
    case TestId::CumulativeSums: p = detail::cumulative_sums(bits); break;
    case TestId::Spectral: p = {detail::spectral(bits)}; break;
    case TestId::ApproximateEntropy: p = {detail::approximate_entropy(bits, approximate_entropy_block(bits.size(), params))}; break;
    case TestId::Serial: p = detail::serial(bits, serial_block(bits.size(), params)); break;
  }
  for (auto& v : p) v = stats::clamp_p(v);
  return p;
}

/// Worst (smallest) p-value of the test on one sequence.
inline double run_test(TestId id, const BitStream& bits, const TestParams& params = {}) {
  const auto p = run_test_all(id, bits, params);
  return *std::min_element(p.begin(), p.end());
}

/// Minimum number of p-values for the chi-square uniformity check.
inline constexpr std::size_t kMinUniformitySamples = 55;

/// Chi-square uniformity of p-values over ten equal bins of [0,1].
inline double uniformity_P(const std::vector<double>& p_values) {
  if (p_values.size() < kMinUniformitySamples)
    throw InsufficientDataError("uniformity check needs at least " + std::to_string(kMinUniformitySamples) +
                                " p-values, got " + std::to_string(p_values.size()));
  std::array<double, 10> bins{};
  for (double p : p_values) bins[static_cast<std::size_t>(std::clamp(std::floor(p * 10.0), 0.0, 9.0))] += 1.0;
  const double expected = static_cast<double>(p_values.size()) / 10.0;
  double chi = 0;
  for (double f : bins) chi += (f - expected) * (f - expected) / expected;
  return stats::igamc(4.5, chi / 2.0);
}

struct ProportionBand {
  double low = 0, high = 0;
  bool contains(double x) const noexcept { return x >= low && x <= high; }
};

/// (1 - alpha) +- 3 sqrt(alpha (1 - alpha) / s).
inline ProportionBand proportion_band(double alpha, std::size_t s) {
  detail::require(alpha > 0.0 && alpha < 1.0, "proportion band: alpha must lie in (0,1)");
  detail::require(s > 0, "proportion band: need at least one sequence");
  const double p = 1.0 - alpha;
  const double half = 3.0 * std::sqrt(p * alpha / static_cast<double>(s));
  return {p - half, p + half};
}

/// Minimum threshold on the uniformity P-value for a test to pass.
inline constexpr double kUniformityThreshold = 0.0001;

struct SubTestResult {
  std::string name;
  std::vector<double> p_values;  ///< one per sequence
  double uniformity_P = 0;       ///< NaN when fewer than 55 sequences
  double proportion = 0;
  bool passed = false;
};

struct TestReport {
  TestId id{};
  std::vector<SubTestResult> sub_tests;
  std::vector<double> p_values;  ///< worst sub-test p-value per sequence
  double uniformity_P = 0;       ///< worst over sub-tests
  double proportion = 0;         ///< sub-test proportion farthest from 1 - alpha
  ProportionBand band;
  bool passed = false;
};

struct SuiteConfig {
  double alpha = 0.01;
  std::size_t num_sequences = 1000;
  std::size_t sequence_bits = 1000000;
  std::vector<TestId> tests{kAllTests.begin(), kAllTests.end()};
  TestParams params{};
  std::size_t threads = 0;

  void validate() const {
    detail::require(alpha > 0.0 && alpha < 1.0, "suite: alpha must lie in (0,1)");
    detail::require(num_sequences >= 10, "suite: need at least 10 sequences");
    detail::require(sequence_bits >= 100, "suite: sequences must hold at least 100 bits");
    detail::require(!tests.empty(), "suite: no tests selected");
  }
};

struct SuiteReport {
  SuiteConfig config;
  std::vector<TestReport> tests;

  bool all_passed() const noexcept {
    return std::all_of(tests.begin(), tests.end(), [](const TestReport& t) { return t.passed; });
  }
};

/// Chops `bits` into num_sequences x sequence_bits sequences, runs every
/// selected test on each, then judges each sub-test by its own p-value
/// uniformity and pass proportion. A test passes when all its sub-tests do;
/// the report shows the worst sub-test figures.
inline SuiteReport run_suite(const BitStream& bits, const SuiteConfig& config) {
  config.validate();
  const std::size_t need = config.num_sequences * config.sequence_bits;
  if (bits.size() < need)
    throw InsufficientDataError("suite needs " + std::to_string(need) + " bits (" + std::to_string(config.num_sequences) +
                                " x " + std::to_string(config.sequence_bits) + "), got " + std::to_string(bits.size()));
  for (auto id : config.tests) {
    const std::size_t min_len = minimum_length(id, config.params);
    if (config.sequence_bits < min_len)
      throw InsufficientDataError(std::string(test_name(id)) + " test needs sequences of at least " + std::to_string(min_len) + " bits");
  }
  const std::size_t s = config.num_sequences;
  // raw[t][seq] = all p-values of test t on sequence seq
  std::vector<std::vector<std::vector<double>>> raw(config.tests.size(), std::vector<std::vector<double>>(s));
  parallel_for(s, config.threads, [&](std::size_t first, std::size_t last) {
    for (std::size_t q = first; q < last; ++q) {
      const BitStream seq = bits.slice(q * config.sequence_bits, config.sequence_bits);
      for (std::size_t t = 0; t < config.tests.size(); ++t) raw[t][q] = run_test_all(config.tests[t], seq, config.params);
    }
  });

  SuiteReport report;
  report.config = config;
  const ProportionBand band = proportion_band(config.alpha, s);
  const double target = 1.0 - config.alpha;
  for (std::size_t t = 0; t < config.tests.size(); ++t) {
    TestReport tr;
    tr.id = config.tests[t];
    tr.band = band;
    const auto names = sub_test_names(tr.id);
    tr.p_values.assign(s, 1.0);
    double worst_dev = -1;
    tr.uniformity_P = std::numeric_limits<double>::infinity();
    tr.passed = true;
    for (std::size_t k = 0; k < names.size(); ++k) {
      SubTestResult sub;
      sub.name = names[k];
      sub.p_values.resize(s);
      std::size_t pass = 0;
      for (std::size_t q = 0; q < s; ++q) {
        sub.p_values[q] = raw[t][q].at(k);
        tr.p_values[q] = std::min(tr.p_values[q], sub.p_values[q]);
        if (sub.p_values[q] >= config.alpha) ++pass;
      }
      sub.proportion = static_cast<double>(pass) / static_cast<double>(s);
      const bool uniform_ok = s >= kMinUniformitySamples;
      sub.uniformity_P = uniform_ok ? uniformity_P(sub.p_values) : std::numeric_limits<double>::quiet_NaN();
      sub.passed = band.contains(sub.proportion) && (!uniform_ok || sub.uniformity_P >= kUniformityThreshold);
      if (uniform_ok) tr.uniformity_P = std::min(tr.uniformity_P, sub.uniformity_P);
      const double dev = std::abs(sub.proportion - target);
      if (dev > worst_dev) {
        worst_dev = dev;
        tr.proportion = sub.proportion;
      }
      tr.passed = tr.passed && sub.passed;
      tr.sub_tests.push_back(std::move(sub));
    }
    if (!std::isfinite(tr.uniformity_P)) tr.uniformity_P = std::numeric_limits<double>::quiet_NaN();
    report.tests.push_back(std::move(tr));
  }
  return report;
}

}  // namespace tbq
