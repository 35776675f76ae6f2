// Copyright (C) 2026 The AVMP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace avmp {

/// PCG32 (XSH-RR, 64-bit state). Streams are fixed by value so results do not
/// depend on the standard library's distribution implementations.
class Pcg32 {
public:
    Pcg32(std::uint64_t seed, std::uint64_t stream) noexcept : m_inc((stream << 1u) | 1u) {
        next_u32();
        m_state += seed;
        next_u32();
    }

    std::uint32_t next_u32() noexcept {
        const std::uint64_t old = m_state;
        m_state = old * 6364136223846793005ULL + m_inc;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform in [0, bound). Lemire's multiply-and-reject.
    std::uint32_t below(std::uint32_t bound) noexcept {
        std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * bound;
        auto low = static_cast<std::uint32_t>(m);
        if (low < bound) {
            const std::uint32_t threshold = (0u - bound) % bound;
            while (low < threshold) {
                m = static_cast<std::uint64_t>(next_u32()) * bound;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

    /// Uniform integer in [lo, hi], inclusive.
    std::uint32_t uniform_int(std::uint32_t lo, std::uint32_t hi) noexcept {
        return lo + below(hi - lo + 1);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Box-Muller, one draw per call (the sine branch is discarded).
    double normal(double mean, double sigma) noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t m_state = 0;
    std::uint64_t m_inc;
};

/// FNV-1a of a purpose tag, used to pick independent streams per consumer.
constexpr std::uint64_t stream_tag(std::string_view tag) noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace avmp
