#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tbq/analysis.hpp"
#include "tbq/entropy.hpp"
#include "tbq/postselect.hpp"
#include "tbq/randtests.hpp"
#include "tbq/run_config.hpp"
#include "tbq/toeplitz.hpp"

namespace tbq {

namespace detail {

// NaN is not JSON; emit null instead.
inline nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline nlohmann::json to_json(const EntropyReport& e) {
  return {{"sigma_quant_mv", e.sigma_quant_mv},
          {"p_max", e.p_max},
          {"h_min_bits", e.h_min_bits},
          {"bits_per_sample", e.bits_per_sample},
          {"extraction_ratio_bound", e.extraction_ratio_bound}};
}

inline nlohmann::json to_json(const CorrelationProfile& p, bool with_lags = true) {
  nlohmann::json j{{"k_max", p.k_max}, {"n_samples", p.n_samples}, {"mean_tail", p.mean_tail}, {"mean_abs_tail", p.mean_abs_tail}};
  if (with_lags) j["r"] = p.r;
  return j;
}

inline nlohmann::json to_json(const HistogramFit& h) {
  return {{"mean_mv", h.mean_mv}, {"sigma_mv", h.sigma_mv}, {"mean_code", h.mean_code}};
}

inline nlohmann::json to_json(const BenchResult& b) {
  return {{"m", b.config.m},
          {"n", b.config.n},
          {"input_bits", b.input_bits},
          {"output_bits", b.output_bits},
          {"blocks", b.blocks},
          {"seconds", b.seconds},
          {"output_bits_per_second", b.output_bits_per_second},
          {"input_bits_per_second", b.input_bits_per_second},
          {"latency_us", {{"p50", b.latency_p50_us}, {"p90", b.latency_p90_us}, {"p99", b.latency_p99_us}, {"max", b.latency_max_us}}}};
}

inline nlohmann::json to_json(const SuiteReport& r) {
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : r.tests) {
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& s : t.sub_tests)
      subs.push_back({{"name", s.name},
                      {"uniformity_P", detail::number(s.uniformity_P)},
                      {"proportion", s.proportion},
                      {"passed", s.passed}});
    tests.push_back({{"test", std::string(test_name(t.id))},
                     {"uniformity_P", detail::number(t.uniformity_P)},
                     {"proportion", t.proportion},
                     {"band", {t.band.low, t.band.high}},
                     {"passed", t.passed},
                     {"sub_tests", subs}});
  }
  return {{"alpha", r.config.alpha},
          {"num_sequences", r.config.num_sequences},
          {"sequence_bits", r.config.sequence_bits},
          {"all_passed", r.all_passed()},
          {"tests", tests}};
}

/// Human-readable version of a suite report.
inline void write_suite_table(std::ostream& os, const SuiteReport& r) {
  os << std::left << std::setw(20) << "test" << std::setw(10) << "sub" << std::right << std::setw(14) << "uniformity_P"
     << std::setw(12) << "proportion" << "  result\n";
  for (const auto& t : r.tests)
    for (const auto& s : t.sub_tests) {
      std::ostringstream u;
      if (std::isnan(s.uniformity_P))
        u << "n/a";
      else
        u << std::setprecision(6) << s.uniformity_P;
      os << std::left << std::setw(20) << test_name(t.id) << std::setw(10) << s.name << std::right << std::setw(14) << u.str()
         << std::setw(12) << std::fixed << std::setprecision(4) << s.proportion << std::defaultfloat << "  "
         << (s.passed ? "pass" : "FAIL") << "\n";
    }
  const auto& band = r.tests.empty() ? ProportionBand{} : r.tests.front().band;
  os << "proportion band [" << std::fixed << std::setprecision(4) << band.low << ", " << band.high << "], uniformity_P >= "
     << std::defaultfloat << kUniformityThreshold << "\n";
}

inline void write_suite_csv(std::ostream& os, const SuiteReport& r) {
  os << "test,sub_test,uniformity_P,proportion,passed\n";
  for (const auto& t : r.tests)
    for (const auto& s : t.sub_tests)
      os << test_name(t.id) << "," << s.name << "," << std::setprecision(10) << s.uniformity_P << "," << s.proportion << ","
         << (s.passed ? 1 : 0) << "\n";
}

/// Rates for a raw stream of `raw_rate` bits/s.
inline nlohmann::json rate_summary(const RunConfig& c, double keep_fraction) {
  const double raw = c.adc.sample_rate_hz * c.adc.bits;
  nlohmann::json j{{"raw_bits_per_second", raw},
                   {"extracted_bits_per_second", expected_rate(raw, 1.0, c.extractor)},
                   {"extraction_ratio", c.extractor.ratio()}};
  if (!std::isnan(keep_fraction)) {
    j["keep_fraction"] = keep_fraction;
    j["identical_bits_per_second"] = expected_rate(raw, keep_fraction, c.identical_extractor);
  }
  return j;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Skeleton of a run report. Everything outside "run_info" depends only on
/// the config and the inputs.
inline nlohmann::json make_report(const std::string& command, const RunConfig& c) {
  return {{"command", command}, {"version", kVersion}, {"config", to_json(c)}, {"results", nlohmann::json::object()}};
}

inline void stamp_report(nlohmann::json& report, double seconds, std::size_t threads) {
  report["run_info"] = {{"timestamp", utc_timestamp()}, {"seconds", seconds}, {"threads", threads}};
}

}  // namespace tbq
