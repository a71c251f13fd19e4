#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace synthal {

/// Seeded generator with platform-independent draws. std::mt19937_64's
/// output sequence is fixed by the standard; the std distributions are
/// not, so the conversions to real/int/normal live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi]; returns lo when the range is degenerate.
    double uniform(double lo, double hi) {
        if (!(hi > lo)) return lo;
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        if (hi <= lo) return lo;
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Rejection keeps the draw unbiased.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return lo + static_cast<int>(v % span);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<int>(n) - 1)); }

    /// Standard normal via Box-Muller (one value per call).
    double normal();

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;

/// Per-item seed from (master seed, item key, index); independent of the
/// order in which items are processed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view key, std::uint64_t index = 0) noexcept;

}  // namespace synthal
