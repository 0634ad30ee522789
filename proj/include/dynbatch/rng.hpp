#pragma once

#include <cstdint>
#include <string_view>

namespace dynbatch {

// SplitMix64. The whole generator state is one 64-bit word, so it persists
// trivially and streams can be derived from (seed, tag, index) without overlap
// in practice.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state = 0) noexcept : state_(state) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1) built from the top 53 bits.
    /// Independent of the standard library's distribution implementations.
    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double low, double high) noexcept { return low + (high - low) * uniform01(); }

    /// Uniform integer in [0, n); n must be > 0. Uses rejection to stay unbiased.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do {
            r = (*this)();
        } while (r >= limit);
        return r % n;
    }

    std::uint64_t state() const noexcept { return state_; }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// FNV-1a; used to turn stream tags into 64-bit words.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Derived stream for (seed, tag, index), e.g. ("pool", round).
inline SplitMix64 derive_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) noexcept {
    std::uint64_t s = SplitMix64::mix(seed ^ hash_tag(tag));
    s = SplitMix64::mix(s + 0x9E3779B97F4A7C15ULL * (index + 1));
    return SplitMix64(s);
}

}  // namespace dynbatch
