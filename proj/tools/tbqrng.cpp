// tbqrng: command line front end for the twin-beam random number pipeline.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tbq/tbq.hpp"

namespace {

using namespace tbq;
namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kConfig = 2, kIo = 3, kData = 4, kInternal = 5 };

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ZeroVarianceError*>(&e) || dynamic_cast<const InsufficientDataError*>(&e)) return kData;
  if (dynamic_cast<const DomainError*>(&e)) return kConfig;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kIo;
  return kInternal;
}

int fail(const char* code, int exit, std::string message) {
  for (auto& ch : message)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "error code=" << code << " exit=" << exit << " message=\"" << message << "\"\n";
  return exit;
}

// Flags that override config file values.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> seed_file;
  std::optional<double> rho;
  std::optional<std::size_t> sequences, sequence_bits;
  std::vector<std::string> tests;
  std::optional<std::size_t> k_max;
  bool distinct_seeds = false;
  bool quiet = false;
};

RunConfig effective_config(const Overrides& o) {
  RunConfig c;
  std::string path = o.config_path;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  if (!path.empty()) c = load_run_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.out_dir) c.output.dir = *o.out_dir;
  if (o.seed_file) c.seed_file = *o.seed_file;
  if (o.rho) c.twinbeam.rho = *o.rho;
  if (o.sequences) c.suite.num_sequences = *o.sequences;
  if (o.sequence_bits) c.suite.sequence_bits = *o.sequence_bits;
  if (o.k_max) c.analysis.k_max = *o.k_max;
  if (o.distinct_seeds) c.distinct_seeds = true;
  if (!o.tests.empty()) {
    c.suite.tests.clear();
    for (const auto& n : o.tests) {
      auto id = test_from_name(n);
      if (!id) throw ConfigError("unknown test '" + n + "'");
      c.suite.tests.push_back(*id);
    }
  }
  c.suite.threads = c.threads;
  c.validate();
  return c;
}

fs::path in_out(const RunConfig& c, const std::string& name) { return fs::path(c.output.dir) / name; }

void emit(const RunConfig& c, const std::string& command, nlohmann::json results, double seconds, bool quiet,
          const fs::path& report_path) {
  auto report = make_report(command, c);
  report["results"] = std::move(results);
  stamp_report(report, seconds, resolve_threads(c.threads));
  write_text(report_path, report.dump(2) + "\n");
  if (!quiet) std::cout << report["results"].dump(2) << "\n";
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twin-beam quantum random number pipeline: simulate, extract, post-select, analyse, test."};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(0, 1);

  Overrides o;
  bool dump_config = false;
  app.add_option("-c,--config", o.config_path, std::string("JSON config file (default: $") + kConfigEnvVar + ")");
  app.add_option("--seed", o.seed, "global RNG seed");
  app.add_option("-j,--threads", o.threads, "worker threads, 0 = all cores");
  app.add_option("-o,--out", o.out_dir, "output directory");
  app.add_flag("-q,--quiet", o.quiet, "do not echo results on stdout");
  app.add_flag("--dump-config", dump_config, "print the effective config and exit");

  std::size_t n_samples = 1000000;
  auto* sim = app.add_subcommand("simulate", "simulate the twin beams and write a two-channel sample file");
  sim->add_option("-n,--samples", n_samples, "samples per channel");
  sim->add_option("--rho", o.rho, "quantum-part correlation");

  std::string raw_path, input_path, other_path;
  auto* ext = app.add_subcommand("extract", "hash each channel with the Toeplitz extractor");
  ext->add_option("--raw", raw_path, "sample file (default <out>/raw.tbqr)");
  ext->add_option("--seed-file", o.seed_file, "TBBS file of pre-stored random seed bits");
  ext->add_flag("--distinct-seeds", o.distinct_seeds, "separate extractor seed per channel");

  auto* ident = app.add_subcommand("identical", "post-select agreeing bits and extract two identical streams");
  ident->add_option("--raw", raw_path, "sample file (default <out>/raw.tbqr)");
  ident->add_option("--seed-file", o.seed_file, "TBBS file of pre-stored random seed bits");

  auto* ana = app.add_subcommand("analyze", "autocorrelation, histogram and cross-correlation tables");
  ana->add_option("input", input_path, "TBBS or TBQR file")->required()->check(CLI::ExistingFile);
  ana->add_option("--with", other_path, "second bitstream for cross-correlation")->check(CLI::ExistingFile);
  ana->add_option("--k-max", o.k_max, "largest autocorrelation lag");

  auto* tst = app.add_subcommand("test", "run the statistical test suite on a bitstream");
  tst->add_option("input", input_path, "TBBS file")->required()->check(CLI::ExistingFile);
  tst->add_option("-s,--sequences", o.sequences, "number of sequences");
  tst->add_option("-b,--sequence-bits", o.sequence_bits, "bits per sequence");
  tst->add_option("-t,--tests", o.tests, "subset of tests by name");

  std::size_t bench_bits = 100000000;
  std::size_t bench_threads = 1;
  auto* bench = app.add_subcommand("bench", "measure extractor throughput on random input");
  bench->add_option("--bits", bench_bits, "input bits");
  bench->add_option("--bench-threads", bench_threads, "threads used by the extractor (0 = all)");
  bool bench_identical = false;
  bench->add_flag("--identical", bench_identical, "use the identical-stream extractor shape");

  bool skip_tests = false;
  auto* rep = app.add_subcommand("report", "run every stage end to end and write one combined report");
  rep->add_option("-n,--samples", n_samples, "samples per channel");
  rep->add_option("--rho", o.rho, "quantum-part correlation");
  rep->add_option("-s,--sequences", o.sequences, "number of test sequences");
  rep->add_option("-b,--sequence-bits", o.sequence_bits, "bits per test sequence");
  rep->add_flag("--skip-tests", skip_tests, "skip the statistical test suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("USAGE", kConfig, e.what());
  }
  if (!dump_config && app.get_subcommands().empty()) return fail("USAGE", kConfig, "a subcommand is required (see --help)");

  try {
    const RunConfig c = effective_config(o);
    if (dump_config) {
      std::cout << serialize_run_config(c);
      return kOk;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path raw = raw_path.empty() ? in_out(c, "raw.tbqr") : fs::path(raw_path);

    if (sim->parsed()) {
      auto j = cmd_simulate(c, n_samples, in_out(c, "raw.tbqr"));
      emit(c, "simulate", j, since(t0), o.quiet, in_out(c, "simulate.json"));
    } else if (ext->parsed()) {
      auto j = cmd_extract(c, {raw, in_out(c, "extracted_a.tbbs"), in_out(c, "extracted_b.tbbs")});
      if (j.contains("warning")) std::cerr << "warning: " << j["warning"].get<std::string>() << "\n";
      emit(c, "extract", j, since(t0), o.quiet, in_out(c, "extract.json"));
    } else if (ident->parsed()) {
      auto j = cmd_identical(c, {raw, in_out(c, "identical_a.tbbs"), in_out(c, "identical_b.tbbs")});
      emit(c, "identical", j, since(t0), o.quiet, in_out(c, "identical.json"));
    } else if (ana->parsed()) {
      const fs::path in(input_path);
      std::optional<fs::path> other, prefix;
      if (!other_path.empty()) other = other_path;
      if (c.output.csv) prefix = in_out(c, "analysis-" + in.stem().string());
      auto j = cmd_analyze(c, in, other, prefix);
      emit(c, "analyze", j, since(t0), o.quiet, in_out(c, "analysis-" + in.stem().string() + ".json"));
    } else if (tst->parsed()) {
      const auto report = cmd_test(c, input_path);
      if (c.output.text_table) write_suite_table(std::cout, report);
      if (c.output.csv) {
        std::ostringstream ss;
        write_suite_csv(ss, report);
        write_text(in_out(c, "tests.csv"), ss.str());
      }
      emit(c, "test", to_json(report), since(t0), true, in_out(c, "tests.json"));
      std::cout << (report.all_passed() ? "all tests passed" : "some tests FAILED") << "\n";
    } else if (bench->parsed()) {
      const auto shape = bench_identical ? c.identical_extractor : c.extractor;
      const auto r = throughput_bench(shape, bench_bits, bench_threads, c.seed);
      auto report = make_report("bench", c);
      stamp_report(report, since(t0), resolve_threads(bench_threads));
      report["run_info"]["bench"] = to_json(r);
      write_text(in_out(c, "bench.json"), report.dump(2) + "\n");
      std::cout << "output " << r.output_bits_per_second / 1e6 << " Mb/s, input " << r.input_bits_per_second / 1e6
                << " Mb/s over " << r.input_bits << " bits (" << r.seconds << " s), block p50 " << r.latency_p50_us
                << " us, p99 " << r.latency_p99_us << " us\n";
    } else if (rep->parsed()) {
      nlohmann::json all;
      all["theory"] = {{"cavity_squeezing_db", squeezing_db(c.cavity)},
                       {"model_squeezing_db", c.simulator().squeezing_db()},
                       {"entropy", to_json(entropy_report(decompose_variance(c.twinbeam.sigma_total_sq(), c.twinbeam.sigma_classical_sq), c.adc))}};
      all["simulate"] = cmd_simulate(c, n_samples, raw);
      all["extract"] = cmd_extract(c, {raw, in_out(c, "extracted_a.tbbs"), in_out(c, "extracted_b.tbbs")});
      all["identical"] = cmd_identical(c, {raw, in_out(c, "identical_a.tbbs"), in_out(c, "identical_b.tbbs")});
      std::optional<fs::path> prefix_a, prefix_raw;
      if (c.output.csv) {
        prefix_a = in_out(c, "analysis-extracted_a");
        prefix_raw = in_out(c, "analysis-raw");
      }
      all["analyze_raw"] = cmd_analyze(c, raw, std::nullopt, prefix_raw);
      all["analyze_extracted"] = cmd_analyze(c, in_out(c, "extracted_a.tbbs"), in_out(c, "extracted_b.tbbs"), prefix_a);
      if (!skip_tests) {
        const auto suite = cmd_test(c, in_out(c, "extracted_a.tbbs"));
        if (c.output.text_table && !o.quiet) write_suite_table(std::cout, suite);
        all["test"] = to_json(suite);
      }
      emit(c, "report", all, since(t0), true, in_out(c, "report.json"));
      if (!o.quiet) std::cout << "report written to " << in_out(c, "report.json").string() << "\n";
    }
    return kOk;
  } catch (const Error& e) {
    return fail(e.code(), exit_code_for(e), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail("INTERNAL", kInternal, e.what());
  } catch (const std::bad_alloc&) {
    return fail("INTERNAL", kInternal, "out of memory");
  } catch (const std::exception& e) {
    return fail("INTERNAL", kInternal, e.what());
  }
}
