#pragma once

// Independent oracles shared by the test binaries. Nothing here calls into the library's
// numerical code paths.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "uavcov/geometry.hpp"

namespace uavcov::oracle {

/// |B \ A| by uniform sampling inside disk B.
inline double lens_area_by_sampling(const DiskPair& p, std::uint64_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uint64_t outside = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const double r = p.y * std::sqrt(unit(rng));
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        // B centred at (v, 0), A at the origin.
        const double px = p.v + r * std::cos(phi);
        const double py = r * std::sin(phi);
        outside += (px * px + py * py > p.x * p.x) ? 1 : 0;
    }
    return std::numbers::pi * p.y * p.y * static_cast<double>(outside) / static_cast<double>(n);
}

/// Wilson score interval at normal quantile z.
struct Interval {
    double low;
    double high;
    bool contains(double x) const { return x >= low && x <= high; }
};

inline Interval wilson(double p, double n, double z) {
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return {centre - half, centre + half};
}

inline constexpr double kZ99 = 2.5758293035489004;

/// Channel with one effective link type.
inline ChannelParams symmetric_channel() {
    ChannelParams ch;
    ch.alpha_l = ch.alpha_n = 3.0;
    ch.eta_l = ch.eta_n = linear_from_db(-38.0);
    ch.m_l = ch.m_n = 2;
    return ch;
}

}  // namespace uavcov::oracle
