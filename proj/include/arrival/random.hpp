#pragma once

// Counter-based random numbers: Philox4x32-10 (Salmon et al., SC'11).
// A stream is identified by (seed, event id, purpose tag); draws within a
// stream advance a 32-bit counter word. Any event's numbers can therefore be
// regenerated without touching other events, which makes ensemble results
// independent of worker count and scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace arrival {

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

/// Sequential view of one counter-based substream.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t tag = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream), tag_(tag) {}

    std::uint32_t next_u32() {
        if (used_ == 4) refill();
        return block_[used_++];
    }

    /// Uniform on (0, 1) with 53 random bits.
    double uniform() {
        const std::uint64_t a = next_u32() >> 5;  // 27 bits
        const std::uint64_t b = next_u32() >> 6;  // 26 bits
        return (static_cast<double>((a << 26) | b) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// Standard normal via Box-Muller; platform independent, unlike
    /// std::normal_distribution.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    void refill() {
        block_ = philox4x32_10({counter_, tag_, static_cast<std::uint32_t>(stream_),
                                static_cast<std::uint32_t>(stream_ >> 32)},
                               key_);
        ++counter_;
        used_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint32_t tag_;
    std::uint32_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Purpose tags keep position, momentum and bootstrap draws uncorrelated.
namespace stream_tag {
inline constexpr std::uint32_t position = 0;
inline constexpr std::uint32_t momentum = 1;
inline constexpr std::uint32_t bootstrap = 2;
inline constexpr std::uint32_t subsample = 3;
}  // namespace stream_tag

}  // namespace arrival
