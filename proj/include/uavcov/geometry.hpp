#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "errors.hpp"
#include "model.hpp"

namespace uavcov {

/// Horizontal radius at which a `target`-type GBS delivers exactly the mean power of a
/// `serving`-type GBS at horizontal distance x, both seen from relative height h_bar:
///
///   eta_t (d^2 + h^2)^(-alpha_t/2) = eta_s (x^2 + h^2)^(-alpha_s/2).
///
/// A target-type GBS strictly inside this radius would be the stronger one. When no
/// horizontal distance solves the equation (the equal-power point would lie below the
/// UAV's relative height) the radius is 0.
inline double equal_power_radius(LinkType serving, LinkType target, double x, double h_bar,
                                 const ChannelParams& ch) {
    if (!(x >= 0.0) || !(h_bar > 0.0)) {
        throw InvalidParameter("equal_power_radius: need x >= 0 and h_bar > 0");
    }
    if (serving == target) {
        return x;
    }
    const double log_d2 = (2.0 / ch.alpha(target)) * std::log(ch.eta(target) / ch.eta(serving)) +
                          (ch.alpha(serving) / ch.alpha(target)) * std::log(x * x + h_bar * h_bar);
    const double radicand = std::exp(log_d2) - h_bar * h_bar;
    return radicand > 0.0 ? std::sqrt(radicand) : 0.0;
}

/// Minimum distance of the nearest opposite-type GBS given the serving link type and its
/// distance r0 (rho_{L-N} for LoS serving, rho_{N-L} for NLoS serving).
inline double exclusion_radius(LinkType serving, double r0, double h_bar, const ChannelParams& ch) {
    return equal_power_radius(serving, opposite(serving), r0, h_bar, ch);
}

/// Law-of-cosines distance to the original serving GBS after a horizontal move of length v_h
/// at angle theta from the GBS-to-UAV bearing.
inline double displaced_distance(double r0, double v_h, double theta) {
    const double sq = r0 * r0 + v_h * v_h + 2.0 * r0 * v_h * std::cos(theta);
    return std::sqrt(std::max(sq, 0.0));
}

/// Disk A (radius x) around the pre-move projection, disk B (radius y) around the post-move
/// projection, centres separated by v.
struct DiskPair {
    double x;
    double y;
    double v;
};

/// |B| - |A n B|: the part of disk B not covered by disk A.
inline double lens_complement_area(const DiskPair& p) {
    const double x = p.x;
    const double y = p.y;
    const double v = p.v;
    if (!(x >= 0.0) || !(y >= 0.0) || !(v >= 0.0)) {
        throw InvalidParameter("lens_complement_area: radii and separation must be non-negative");
    }
    constexpr double pi = std::numbers::pi;
    if (v + y <= x) {
        return 0.0;
    }
    if (v >= x + y) {
        return pi * y * y;
    }
    if (v + x <= y) {
        return pi * (y * y - x * x);
    }
    auto clamped_acos = [](double c) { return std::acos(std::clamp(c, -1.0, 1.0)); };
    const double angle_b = clamped_acos((y * y + v * v - x * x) / (2.0 * y * v));
    const double angle_a = clamped_acos((x * x + v * v - y * y) / (2.0 * x * v));
    const double heron = ((x + v) * (x + v) - y * y) * (y * y - (x - v) * (x - v));
    const double area = y * y * (pi - angle_b) - x * x * angle_a + 0.5 * std::sqrt(std::max(heron, 0.0));
    return std::clamp(area, 0.0, pi * y * y);
}

}  // namespace uavcov
