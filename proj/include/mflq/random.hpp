#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mflq {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (key, counter), so any draw can be regenerated in isolation.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Standard normal pairs addressed by (seed, path, step, channel pair).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    /// Two independent N(0,1) draws for channels 2*pair and 2*pair+1.
    std::array<double, 2> pair(std::uint64_t path, std::uint32_t step, std::uint32_t pair_index) const {
        const auto out = Philox4x32::generate(
            {step, pair_index, static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)}, key_);
        const double u1 = to_unit(out[0], out[1]);
        const double u2 = to_unit(out[2], out[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    /// Fills z[0..d) with the channel draws of (path, step).
    void fill(std::uint64_t path, std::uint32_t step, int d, double* z) const {
        for (int j = 0; j < d; j += 2) {
            const auto p = pair(path, step, static_cast<std::uint32_t>(j / 2));
            z[j] = p[0];
            if (j + 1 < d) z[j + 1] = p[1];
        }
    }

private:
    std::array<std::uint32_t, 2> key_;

    /// Uniform on the open interval (0, 1) with 53 random bits.
    static double to_unit(std::uint32_t lo, std::uint32_t hi) {
        const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }
};

}  // namespace mflq
