#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbq/acquisition.hpp"
#include "tbq/errors.hpp"
#include "tbq/randtests.hpp"
#include "tbq/toeplitz.hpp"
#include "tbq/twinbeam.hpp"

namespace tbq {

inline constexpr const char* kVersion = "0.1.0";

/// Environment variable naming the config file used when --config is absent.
inline constexpr const char* kConfigEnvVar = "TBQRNG_CONFIG";

struct AnalysisConfig {
  std::size_t k_max = 100;
  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;         ///< write CSV tables next to the JSON report
  bool text_table = true;  ///< print a human table on stdout
  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

/// Everything a pipeline run needs. `seed` drives the simulator; the
/// deterministic extractor seeds derive from it unless a seed file is given.
struct RunConfig {
  std::uint64_t seed = 20180101;
  std::size_t threads = 0;
  std::string seed_file;      ///< pre-stored random bits for the Toeplitz seed (TBBS)
  bool distinct_seeds = false;  ///< give each channel its own extractor seed
  CavityParams cavity;
  TwinBeamConfig twinbeam;
  DemodConfig demod;
  AdcConfig adc;
  ExtractorConfig extractor;
  ExtractorConfig identical_extractor = kIdenticalExtractor;
  SuiteConfig suite;
  AnalysisConfig analysis;
  OutputConfig output;

  TwinBeamConfig simulator() const {
    TwinBeamConfig t = twinbeam;
    t.rng_seed = seed;
    t.sample_rate_hz = adc.sample_rate_hz;
    return t;
  }

  void validate() const {
    cavity.validate();
    simulator().validate();
    demod.validate();
    adc.validate();
    extractor.validate();
    identical_extractor.validate();
    suite.validate();
    detail::require<ConfigError>(analysis.k_max >= 1, "analysis.k_max must be at least 1");
    detail::require<ConfigError>(!output.dir.empty(), "output.dir must not be empty");
  }
};

namespace detail {

using nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class SectionReader {
 public:
  SectionReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    require<ConfigError>(j.is_object(), "config: section '" + section_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + where(key) + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + where(it.key()) + "'");
  }

 private:
  std::string where(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

template <class F>
void read_section(SectionReader& parent, const char* key, F&& fn) {
  if (const json* c = parent.child(key)) {
    SectionReader r(*c, key);
    fn(r);
    r.finish();
  }
}

}  // namespace detail

inline nlohmann::json to_json(const ExtractorConfig& c) { return {{"m", c.m}, {"n", c.n}}; }

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json tests = nlohmann::json::array();
  for (auto id : c.suite.tests) tests.push_back(std::string(test_name(id)));
  return {
      {"seed", c.seed},
      {"threads", c.threads},
      {"seed_file", c.seed_file},
      {"distinct_seeds", c.distinct_seeds},
      {"cavity", {{"eta", c.cavity.eta}, {"xi", c.cavity.xi}, {"tau_c_us", c.cavity.tau_c_us}, {"omega_mhz", c.cavity.omega_mhz}}},
      {"twinbeam",
       {{"sigma_quant_sq", c.twinbeam.sigma_quant_sq},
        {"sigma_classical_sq", c.twinbeam.sigma_classical_sq},
        {"rho", c.twinbeam.rho},
        {"bandwidth_hz", c.twinbeam.bandwidth_hz}}},
      {"demod", {{"lo_frequency_hz", c.demod.lo_frequency_hz}, {"lpf_cutoff_hz", c.demod.lpf_cutoff_hz}, {"lpf_order", c.demod.lpf_order}}},
      {"adc", {{"bits", c.adc.bits}, {"full_scale_mv", c.adc.full_scale_mv}, {"sample_rate_hz", c.adc.sample_rate_hz}}},
      {"extractor", to_json(c.extractor)},
      {"identical_extractor", to_json(c.identical_extractor)},
      {"suite",
       {{"alpha", c.suite.alpha},
        {"num_sequences", c.suite.num_sequences},
        {"sequence_bits", c.suite.sequence_bits},
        {"tests", tests},
        {"block_frequency_m", c.suite.params.block_frequency_m},
        {"approximate_entropy_m", c.suite.params.approximate_entropy_m},
        {"serial_m", c.suite.params.serial_m}}},
      {"analysis", {{"k_max", c.analysis.k_max}}},
      {"output", {{"dir", c.output.dir}, {"csv", c.output.csv}, {"text_table", c.output.text_table}}},
  };
}

/// Parses a config document on top of the defaults. Missing keys keep their
/// default; unknown keys are an error.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  detail::SectionReader root(j, "");
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  root.get("seed_file", c.seed_file);
  root.get("distinct_seeds", c.distinct_seeds);
  detail::read_section(root, "cavity", [&](auto& r) {
    r.get("eta", c.cavity.eta);
    r.get("xi", c.cavity.xi);
    r.get("tau_c_us", c.cavity.tau_c_us);
    r.get("omega_mhz", c.cavity.omega_mhz);
  });
  detail::read_section(root, "twinbeam", [&](auto& r) {
    r.get("sigma_quant_sq", c.twinbeam.sigma_quant_sq);
    r.get("sigma_classical_sq", c.twinbeam.sigma_classical_sq);
    r.get("rho", c.twinbeam.rho);
    r.get("bandwidth_hz", c.twinbeam.bandwidth_hz);
  });
  detail::read_section(root, "demod", [&](auto& r) {
    r.get("lo_frequency_hz", c.demod.lo_frequency_hz);
    r.get("lpf_cutoff_hz", c.demod.lpf_cutoff_hz);
    r.get("lpf_order", c.demod.lpf_order);
  });
  detail::read_section(root, "adc", [&](auto& r) {
    r.get("bits", c.adc.bits);
    r.get("full_scale_mv", c.adc.full_scale_mv);
    r.get("sample_rate_hz", c.adc.sample_rate_hz);
  });
  detail::read_section(root, "extractor", [&](auto& r) {
    r.get("m", c.extractor.m);
    r.get("n", c.extractor.n);
  });
  detail::read_section(root, "identical_extractor", [&](auto& r) {
    r.get("m", c.identical_extractor.m);
    r.get("n", c.identical_extractor.n);
  });
  detail::read_section(root, "suite", [&](auto& r) {
    r.get("alpha", c.suite.alpha);
    r.get("num_sequences", c.suite.num_sequences);
    r.get("sequence_bits", c.suite.sequence_bits);
    std::vector<std::string> names;
    bool have_tests = false;
    if (const auto* t = r.child("tests")) {
      have_tests = true;
      try {
        names = t->template get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: 'suite.tests' must be a list of test names");
      }
    }
    if (have_tests) {
      c.suite.tests.clear();
      for (const auto& n : names) {
        auto id = test_from_name(n);
        if (!id) throw ConfigError("config: unknown test '" + n + "' in suite.tests");
        c.suite.tests.push_back(*id);
      }
    }
    r.get("block_frequency_m", c.suite.params.block_frequency_m);
    r.get("approximate_entropy_m", c.suite.params.approximate_entropy_m);
    r.get("serial_m", c.suite.params.serial_m);
  });
  detail::read_section(root, "analysis", [&](auto& r) { r.get("k_max", c.analysis.k_max); });
  detail::read_section(root, "output", [&](auto& r) {
    r.get("dir", c.output.dir);
    r.get("csv", c.output.csv);
    r.get("text_table", c.output.text_table);
  });
  root.finish();
  c.suite.threads = c.threads;
  c.validate();
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

inline std::string serialize_run_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline bool operator==(const RunConfig& a, const RunConfig& b) { return to_json(a) == to_json(b); }

}  // namespace tbq
