#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace raptor {

/// Identifier stored in embedding headers for the generator below. Bump when
/// the mapping (seed, stream, index) -> value changes in any way.
inline constexpr std::uint16_t kPrngId = 1;
inline constexpr const char* kPrngName = "philox4x32-10+box-muller/v1";

/// Philox4x32 with 10 rounds. A pure
/// function of (counter, key); no hidden state.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter block(Counter ctr, Key key) {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            ctr = round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr Counter round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Stream ids keep unrelated consumers of one user seed independent.
enum class RngStream : std::uint32_t {
    Projection = 0,
    EncoderWeights = 1,
    Split = 2,
    SeedDerivation = 3,
    Simulation = 4,
    MlpInit = 5,
    MlpShuffle = 6,
    Test = 0xFFFF,
};

/// Random access into the (seed, stream) sequence. Element `i` of every
/// derived sequence depends only on (seed, stream, i).
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, RngStream stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(static_cast<std::uint32_t>(stream)) {}

    /// Two 64-bit words of block `i`.
    constexpr std::pair<std::uint64_t, std::uint64_t> words(std::uint64_t i) const {
        const auto out = Philox4x32::block(
            {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), stream_, 0u}, key_);
        return {(std::uint64_t{out[0]} << 32) | out[1], (std::uint64_t{out[2]} << 32) | out[3]};
    }

    /// Uniform on [0, 1) with 53 random bits.
    static constexpr double to_unit(std::uint64_t w) { return static_cast<double>(w >> 11) * 0x1.0p-53; }
    /// Uniform on (0, 1].
    static constexpr double to_unit_open(std::uint64_t w) { return static_cast<double>((w >> 11) + 1) * 0x1.0p-53; }

    /// Box-Muller pair from block `i`.
    std::pair<double, double> normal_pair(std::uint64_t i) const {
        const auto [a, b] = words(i);
        const double r = std::sqrt(-2.0 * std::log(to_unit_open(a)));
        const double theta = 2.0 * std::numbers::pi * to_unit(b);
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    /// Standard normal element `i`: even i takes the cosine branch of block
    /// i/2, odd i the sine branch.
    double normal(std::uint64_t i) const {
        const auto [z0, z1] = normal_pair(i / 2);
        return (i & 1u) ? z1 : z0;
    }

    double uniform(std::uint64_t i) const { return to_unit(words(i).first); }

private:
    Philox4x32::Key key_;
    std::uint32_t stream_;
};

/// Sequential view over a CounterRng for consumers that draw a variable
/// number of values (shuffles, rejection loops).
class RngSequence {
public:
    RngSequence(std::uint64_t seed, RngStream stream) : rng_(seed, stream) {}

    std::uint64_t next_u64() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto [a, b] = rng_.words(counter_++);
        spare_ = b;
        have_spare_ = true;
        return a;
    }

    double uniform() { return CounterRng::to_unit(next_u64()); }

    double normal() {
        const double r = std::sqrt(-2.0 * std::log(CounterRng::to_unit_open(next_u64())));
        const double theta = 2.0 * std::numbers::pi * CounterRng::to_unit(next_u64());
        return r * std::cos(theta);
    }

    /// Unbiased integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

/// Child seed for item `index` of a seeded collection; independent of how
/// items are scheduled across workers.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return CounterRng(seed, RngStream::SeedDerivation).words(index).first;
}

} // namespace raptor
