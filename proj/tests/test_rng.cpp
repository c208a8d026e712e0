#include "raptor/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

using namespace raptor;

// Published known-answer vectors for Philox4x32-10.
TEST(Philox, KnownAnswerZero) {
    const auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
    const auto out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterRng, IsAPureFunctionOfSeedStreamIndex) {
    const CounterRng a(42, RngStream::Projection), b(42, RngStream::Projection);
    for (std::uint64_t i : {0ull, 1ull, 17ull, 1ull << 40}) {
        EXPECT_EQ(a.words(i), b.words(i));
        EXPECT_EQ(a.normal(i), b.normal(i));
    }
}

TEST(CounterRng, StreamsAndSeedsDiffer) {
    const CounterRng p(7, RngStream::Projection), e(7, RngStream::EncoderWeights), q(8, RngStream::Projection);
    int same_stream = 0, same_seed = 0;
    for (std::uint64_t i = 0; i < 256; ++i) {
        same_stream += p.words(i) == e.words(i);
        same_seed += p.words(i) == q.words(i);
    }
    EXPECT_EQ(same_stream, 0);
    EXPECT_EQ(same_seed, 0);
}

TEST(CounterRng, NormalPairsShareABlock) {
    const CounterRng r(3, RngStream::Test);
    const auto [z0, z1] = r.normal_pair(5);
    EXPECT_EQ(r.normal(10), z0);
    EXPECT_EQ(r.normal(11), z1);
}

TEST(CounterRng, UniformRange) {
    const CounterRng r(1, RngStream::Test);
    for (std::uint64_t i = 0; i < 10000; ++i) {
        const double u = r.uniform(i);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
    EXPECT_EQ(CounterRng::to_unit(0), 0.0);
    EXPECT_GT(CounterRng::to_unit_open(0), 0.0);
    EXPECT_EQ(CounterRng::to_unit_open(~0ull), 1.0);
}

TEST(CounterRng, NormalMomentsWithinFiveSigma) {
    const CounterRng r(11, RngStream::Test);
    const std::size_t n = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const double z = r.normal(i);
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    const double dn = static_cast<double>(n);
    EXPECT_NEAR(s1 / dn, 0.0, 5.0 / std::sqrt(dn));
    EXPECT_NEAR(s2 / dn, 1.0, 5.0 * std::sqrt(2.0 / dn));
    EXPECT_NEAR(s4 / dn, 3.0, 5.0 * std::sqrt(96.0 / dn));
}

TEST(RngSequence, ConsumesBothWordsOfEachBlock) {
    RngSequence seq(5, RngStream::Split);
    const CounterRng r(5, RngStream::Split);
    for (std::uint64_t b = 0; b < 4; ++b) {
        const auto [a, c] = r.words(b);
        EXPECT_EQ(seq.next_u64(), a);
        EXPECT_EQ(seq.next_u64(), c);
    }
}

TEST(RngSequence, BelowStaysInRangeAndCoversIt) {
    RngSequence seq(9, RngStream::Test);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = seq.below(7);
        ASSERT_LT(v, 7u);
        ++hits[v];
    }
    for (int h : hits) EXPECT_NEAR(h, 1000, 5 * std::sqrt(1000.0 * 6 / 7));
}

TEST(RngSequence, ShuffleIsAPermutation) {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    RngSequence(1, RngStream::Test).shuffle(std::span(v));
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
    std::vector<int> again(100);
    std::iota(again.begin(), again.end(), 0);
    RngSequence(1, RngStream::Test).shuffle(std::span(again));
    EXPECT_EQ(v, again);
}

TEST(DeriveSeed, DistinctChildren) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(123, i));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(derive_seed(123, 4), derive_seed(123, 4));
    EXPECT_NE(derive_seed(123, 4), derive_seed(124, 4));
}
