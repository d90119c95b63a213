#include <gtest/gtest.h>

#include <random>

#include "tbq/toeplitz.hpp"
#include "test_support.hpp"

using namespace tbq;
using tbq::oracle::naive_toeplitz;
using tbq::oracle::random_bits;
using tbq::oracle::to_bools;

TEST(Seed, Lengths) {
  EXPECT_EQ(build_seed(1, ExtractorConfig{1024, 1360}).bits.size(), 2383u);
  EXPECT_EQ(build_seed(1, ExtractorConfig{1024, 1920}).bits.size(), 2943u);
  EXPECT_EQ(build_seed(1, ExtractorConfig{1, 1}).bits.size(), 1u);
}

TEST(Seed, TakesPrefixOfSource) {
  std::mt19937_64 rng(1);
  const auto source = random_bits(rng, 5000);
  const auto seed = build_seed(source, ExtractorConfig{1024, 1360});
  EXPECT_EQ(seed.bits, source.slice(0, 2383));
  EXPECT_THROW(build_seed(source.slice(0, 2382), ExtractorConfig{1024, 1360}), InsufficientDataError);
  EXPECT_THROW(build_seed(source, ExtractorConfig{20, 10}), DomainError);
}

TEST(Seed, MatrixIndexing) {
  // seed s0..s3 = 1011 for m = 2, n = 3
  const ToeplitzSeed seed{{2, 3}, BitStream::from_string("1011")};
  EXPECT_EQ(seed.matrix(0, 0), true);   // s2
  EXPECT_EQ(seed.matrix(0, 1), false);  // s1
  EXPECT_EQ(seed.matrix(0, 2), true);   // s0
  EXPECT_EQ(seed.matrix(1, 0), true);   // s3
  EXPECT_EQ(seed.matrix(1, 2), false);  // s1
}

TEST(ExtractBlock, WorkedExample) {
  const ToeplitzSeed seed{{2, 3}, BitStream::from_string("1011")};
  EXPECT_EQ(extract_block(BitStream::from_string("110"), seed).to_string(), "10");
}

TEST(ExtractBlock, ZeroSeedAndIdentity) {
  std::mt19937_64 rng(2);
  const ToeplitzSeed zero{{64, 100}, BitStream(163)};
  EXPECT_EQ(extract_block(random_bits(rng, 100), zero), BitStream(64));
  const ToeplitzSeed one{{1, 1}, BitStream::from_string("1")};
  EXPECT_EQ(extract_block(BitStream::from_string("0"), one).to_string(), "0");
  EXPECT_EQ(extract_block(BitStream::from_string("1"), one).to_string(), "1");
}

TEST(ExtractBlock, LengthMismatch) {
  const auto seed = build_seed(3, ExtractorConfig{8, 16});
  EXPECT_THROW(extract_block(BitStream(15), seed), LengthMismatchError);
  EXPECT_THROW(ToeplitzExtractor(ToeplitzSeed{{8, 16}, BitStream(22)}), LengthMismatchError);
}

TEST(ExtractBlock, MatchesNaiveOracleOnSmallInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    const std::size_t m = 1 + rng() % std::min<std::size_t>(32, n);
    const auto seed_bits = random_bits(rng, n + m - 1);
    const auto x = random_bits(rng, n);
    const auto got = extract_block(x, ToeplitzSeed{{m, n}, seed_bits});
    ASSERT_EQ(to_bools(got), naive_toeplitz(to_bools(seed_bits), to_bools(x), m)) << "m=" << m << " n=" << n;
  }
}

TEST(ExtractBlock, MatchesNaiveOracleOnProductionSizes) {
  std::mt19937_64 rng(7);
  for (auto cfg : {ExtractorConfig{1024, 1360}, ExtractorConfig{1024, 1920}, ExtractorConfig{100, 130},
                   ExtractorConfig{129, 4097}}) {
    const auto seed_bits = random_bits(rng, cfg.seed_bits());
    for (int trial = 0; trial < 3; ++trial) {
      const auto x = random_bits(rng, cfg.n, trial == 2 ? 0.1 : 0.5);
      EXPECT_EQ(to_bools(extract_block(x, ToeplitzSeed{cfg, seed_bits})),
                naive_toeplitz(to_bools(seed_bits), to_bools(x), cfg.m));
    }
  }
}

TEST(ExtractBlock, LinearOverGf2) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    const std::size_t m = 1 + rng() % n;
    const ToeplitzSeed seed{{m, n}, random_bits(rng, n + m - 1)};
    const auto x = random_bits(rng, n), y = random_bits(rng, n);
    BitStream xy(n);
    for (std::size_t i = 0; i < n; ++i) xy.set(i, x[i] != y[i]);
    const auto ex = extract_block(x, seed), ey = extract_block(y, seed), exy = extract_block(xy, seed);
    for (std::size_t i = 0; i < m; ++i) ASSERT_EQ(exy[i], ex[i] != ey[i]);
  }
}

TEST(ExtractStream, BlockArithmetic) {
  const ExtractorConfig cfg{1024, 1360};
  const auto seed = build_seed(5, cfg);
  std::mt19937_64 rng(5);
  EXPECT_EQ(extract_stream(random_bits(rng, 2720), cfg, seed).size(), 2048u);
  EXPECT_EQ(extract_stream(random_bits(rng, 1359), cfg, seed).size(), 0u);
  EXPECT_EQ(extract_stream(random_bits(rng, 4079), cfg, seed).size(), 2048u);
  EXPECT_THROW(extract_stream(BitStream(2720), ExtractorConfig{1024, 1361}, seed), DomainError);
}

TEST(ExtractStream, EqualsBlockwiseForAnyThreadCount) {
  std::mt19937_64 rng(6);
  for (auto cfg : {ExtractorConfig{1024, 1360}, ExtractorConfig{100, 130}, ExtractorConfig{37, 61}}) {
    const auto seed = build_seed(9, cfg);
    const auto raw = random_bits(rng, cfg.n * 23 + 11);
    BitStream expect;
    for (std::size_t b = 0; b < 23; ++b) {
      const auto out = extract_block(raw.slice(b * cfg.n, cfg.n), seed);
      expect.append_range(out, 0, out.size());
    }
    for (std::size_t threads : {1u, 2u, 3u, 8u}) EXPECT_EQ(extract_stream(raw, cfg, seed, threads), expect);
  }
}

TEST(ExtractStream, OutputIsBalanced) {
  const ExtractorConfig cfg{1024, 1360};
  const auto raw = deterministic_bits(123, 100000000);
  const auto out = extract_stream(raw, cfg, build_seed(456, cfg));
  const double n = static_cast<double>(out.size());
  EXPECT_NEAR(static_cast<double>(out.popcount()) / n, 0.5, 3.0 * 0.5 / std::sqrt(n));
}

TEST(ExtractStream, DeterministicSeedIsStable) {
  // Pins the documented CI seed so files produced by older builds stay
  // reproducible.
  const auto bits = deterministic_bits(20180101, 64);
  EXPECT_EQ(bits.load_word(0), uniform_word(Philox4x32(derive_key(20180101, 0)), 0));
  EXPECT_EQ(deterministic_bits(20180101, 2383), deterministic_bits(20180101, 2383));
  EXPECT_NE(deterministic_bits(1, 2383), deterministic_bits(2, 2383));
}

TEST(Bench, ReportsPositiveThroughputAndLatencies) {
  const auto r = throughput_bench(ExtractorConfig{1024, 1360}, 1360 * 2000, 1);
  EXPECT_EQ(r.blocks, 2000u);
  EXPECT_EQ(r.output_bits, 2000u * 1024u);
  EXPECT_GT(r.output_bits_per_second, 0.0);
  EXPECT_LE(r.latency_p50_us, r.latency_p99_us);
  EXPECT_LE(r.latency_p99_us, r.latency_max_us);
  EXPECT_THROW(throughput_bench(ExtractorConfig{1024, 1360}, 100), InsufficientDataError);
}

TEST(Bench, ThroughputIsSteadyWhenPayloadDoubles) {
  const ExtractorConfig cfg{1024, 1360};
  throughput_bench(cfg, 1360 * 2000, 1);  // warm caches
  // best of three, so a busy neighbour process does not decide the outcome
  auto best = [&](std::size_t blocks) {
    double r = 0;
    for (int i = 0; i < 3; ++i) r = std::max(r, throughput_bench(cfg, 1360 * blocks, 1).output_bits_per_second);
    return r;
  };
  const double a = best(20000), b = best(40000);
  EXPECT_NEAR(b / a, 1.0, 0.2);
}
