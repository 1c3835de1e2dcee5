#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace uavcov {

/// Philox4x32-10 counter-based generator.
///
/// A stream is identified by (key, stream id); the n-th output of a stream is a pure
/// function of (key, stream id, n). Monte Carlo episode e draws from stream e, so results
/// do not depend on how episodes are scheduled across threads.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t key, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          stream_(stream) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (lane_ == 2) {
            refill();
        }
        const std::uint64_t lo = block_[2 * lane_];
        const std::uint64_t hi = block_[2 * lane_ + 1];
        ++lane_;
        return (hi << 32) | lo;
    }

    std::uint64_t blocks_consumed() const noexcept { return block_index_; }

    /// Independent generator for auxiliary draws tied to this stream (same stream id, key
    /// perturbed by `tag`).
    CounterRng split(std::uint64_t tag) const noexcept {
        const std::uint64_t key = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
        return CounterRng(key ^ (0x9E3779B97F4A7C15ull * (tag + 1)), stream_);
    }

private:
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    void refill() noexcept {
        std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block_index_),
                                         static_cast<std::uint32_t>(block_index_ >> 32),
                                         static_cast<std::uint32_t>(stream_),
                                         static_cast<std::uint32_t>(stream_ >> 32)};
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        block_ = ctr;
        ++block_index_;
        lane_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_index_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int lane_ = 2;
};

/// Uniform double on (0, 1]; never returns 0, so -log(u) is always finite.
template <class URBG>
double uniform_open01(URBG& rng) {
    static_assert(URBG::max() == std::numeric_limits<std::uint64_t>::max() && URBG::min() == 0,
                  "uniform_open01 expects a full 64-bit generator");
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

/// Uniform double on [0, 1).
template <class URBG>
double uniform01(URBG& rng) {
    static_assert(URBG::max() == std::numeric_limits<std::uint64_t>::max() && URBG::min() == 0,
                  "uniform01 expects a full 64-bit generator");
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace uavcov
