#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include "errors.hpp"
#include "rng.hpp"

namespace uavcov {

// Largest Nakagami shape accepted anywhere in the library. The coverage formula needs
// Laplace-transform derivatives up to order m-1, which are carried in fixed-size arrays.
inline constexpr int kMaxFadingShape = 8;

enum class LinkType { LoS, NLoS };

inline constexpr std::array<LinkType, 2> kLinkTypes{LinkType::LoS, LinkType::NLoS};

constexpr LinkType opposite(LinkType t) noexcept {
    return t == LinkType::LoS ? LinkType::NLoS : LinkType::LoS;
}

constexpr std::size_t index_of(LinkType t) noexcept { return t == LinkType::LoS ? 0 : 1; }

inline const char* to_string(LinkType t) noexcept { return t == LinkType::LoS ? "LoS" : "NLoS"; }

enum class AssociationPolicy { StrongestRss, Nearest };

inline const char* to_string(AssociationPolicy p) noexcept {
    return p == AssociationPolicy::StrongestRss ? "strongest_rss" : "nearest";
}

/// 10^(dB/10).
inline double linear_from_db(double value_db) {
    if (!std::isfinite(value_db)) {
        throw InvalidParameter("linear_from_db: value must be finite");
    }
    return std::pow(10.0, value_db / 10.0);
}

/// dBm to watts.
inline double watts_from_dbm(double value_dbm) {
    if (!std::isfinite(value_dbm)) {
        throw InvalidParameter("watts_from_dbm: value must be finite");
    }
    return std::pow(10.0, (value_dbm - 30.0) / 10.0);
}

struct ChannelParams {
    double alpha_l = 2.09;
    double alpha_n = 3.75;
    double eta_l = linear_from_db(-41.1);
    double eta_n = linear_from_db(-32.9);
    int m_l = 3;
    int m_n = 1;

    double alpha(LinkType t) const noexcept { return t == LinkType::LoS ? alpha_l : alpha_n; }
    double eta(LinkType t) const noexcept { return t == LinkType::LoS ? eta_l : eta_n; }
    int fading_shape(LinkType t) const noexcept { return t == LinkType::LoS ? m_l : m_n; }

    // The ordering constraints (alpha_l < alpha_n, m_l > m_n) are relaxed to allow the
    // symmetric channel used by the policy-equivalence checks.
    void validate() const {
        if (!(alpha_l > 2.0) || !(alpha_n > 2.0)) {
            throw InvalidParameter("alpha_l, alpha_n: path-loss exponents must exceed 2");
        }
        if (!(alpha_l <= alpha_n)) {
            throw InvalidParameter("alpha_l: must not exceed alpha_n");
        }
        if (!(eta_l > 0.0) || !(eta_n > 0.0) || !std::isfinite(eta_l) || !std::isfinite(eta_n)) {
            throw InvalidParameter("eta_l, eta_n: path-loss intercepts must be positive");
        }
        if (m_n < 1 || m_l < m_n) {
            throw InvalidParameter("m_l, m_n: require m_l >= m_n >= 1");
        }
        if (m_l > kMaxFadingShape) {
            throw InvalidParameter("m_l: fading shape above supported maximum of 8");
        }
    }
};

struct EnvironmentParams {
    double a = 9.61;
    double b = 0.16;

    void validate() const {
        if (!(a > 0.0) || !(b > 0.0)) {
            throw InvalidParameter("a, b: environment parameters must be positive");
        }
    }
};

struct Directional {
    double beamwidth_deg = 120.0;
};

/// Omnidirectional reception truncated at r_max so the interference field stays finite.
struct Omni {
    double r_max = 3000.0;
};

using AntennaModel = std::variant<Directional, Omni>;

inline bool is_omni(const AntennaModel& a) noexcept { return std::holds_alternative<Omni>(a); }

inline void validate(const AntennaModel& antenna) {
    if (const auto* d = std::get_if<Directional>(&antenna)) {
        if (!(d->beamwidth_deg > 0.0 && d->beamwidth_deg < 180.0)) {
            throw InvalidParameter("beamwidth_deg: must lie in (0, 180)");
        }
    } else if (!(std::get<Omni>(antenna).r_max > 0.0)) {
        throw InvalidParameter("r_max: must be positive");
    }
}

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Every model scalar in SI units and linear scale. Defaults are the reference scenario.
struct SystemParams {
    double lambda_b = 100e-6;               // GBS per m^2
    double p_t = watts_from_dbm(46.0);      // W
    double g_b = 1.0;                       // GBS sidelobe gain
    double h_b = 30.0;                      // m
    double h_lb = 90.0;                     // m
    double h_ub = 150.0;                    // m
    double mu = 300e-6;                     // per m^2
    double v = 20.0;                        // m/s
    double kappa = 0.3;
    double t_thresh = linear_from_db(-3.8);
    AntennaModel antenna = Directional{};
    ChannelParams channel{};
    EnvironmentParams env{};
    AssociationPolicy policy = AssociationPolicy::StrongestRss;

    void validate() const {
        if (!(lambda_b >= 0.0) || !std::isfinite(lambda_b)) {
            throw InvalidParameter("lambda_b: density must be finite and non-negative");
        }
        if (!(p_t > 0.0) || !(g_b > 0.0)) {
            throw InvalidParameter("p_t, g_b: must be positive");
        }
        if (!(h_b >= 0.0)) {
            throw InvalidParameter("h_b: must be non-negative");
        }
        if (!(h_lb > h_b)) {
            throw InvalidParameter("h_lb: must exceed h_b");
        }
        if (!(h_ub > h_lb)) {
            throw InvalidParameter("h_ub: must exceed h_lb");
        }
        if (!(mu > 0.0)) {
            throw InvalidParameter("mu: must be positive");
        }
        if (!(v >= 0.0)) {
            throw InvalidParameter("v: must be non-negative");
        }
        if (!(kappa >= 0.0 && kappa <= 1.0)) {
            throw InvalidParameter("kappa: must lie in [0, 1]");
        }
        if (!(t_thresh > 0.0)) {
            throw InvalidParameter("t_thresh: must be positive");
        }
        uavcov::validate(antenna);
        channel.validate();
        env.validate();
    }
};

/// Large-scale gain eta * d^-alpha with d the 3D distance.
inline double path_loss(LinkType link, double r, double h_u, const ChannelParams& ch, double h_b) {
    if (!(r >= 0.0)) {
        throw InvalidParameter("path_loss: horizontal distance must be non-negative");
    }
    const double dh = h_u - h_b;
    const double d2 = r * r + dh * dh;
    if (d2 == 0.0) {
        throw InvalidGeometry("path_loss: transmitter and receiver coincide");
    }
    return ch.eta(link) * std::pow(d2, -0.5 * ch.alpha(link));
}

/// Natural log of path_loss; the analytic engine works in log space.
inline double log_path_loss(LinkType link, double r, double h_bar, const ChannelParams& ch) noexcept {
    return std::log(ch.eta(link)) - 0.5 * ch.alpha(link) * std::log(r * r + h_bar * h_bar);
}

/// Elevation-angle LoS probability. r = 0 is the 90 degree limit.
namespace detail {

// a exp(-b (theta - a)), the NLoS-to-LoS odds.
inline double nlos_odds(double r, double h_u, const EnvironmentParams& env, double h_b) {
    if (!(r >= 0.0)) {
        throw InvalidParameter("los_probability: horizontal distance must be non-negative");
    }
    const double elevation_deg = 180.0 / std::numbers::pi * std::atan2(h_u - h_b, r);
    return env.a * std::exp(-env.b * (elevation_deg - env.a));
}

}  // namespace detail

inline double los_probability(double r, double h_u, const EnvironmentParams& env, double h_b) {
    return 1.0 / (1.0 + detail::nlos_odds(r, h_u, env, h_b));
}

/// The NLoS branch is evaluated as odds / (1 + odds), which stays accurate when P_L is near 1.
inline double link_probability(LinkType link, double r, double h_u, const EnvironmentParams& env,
                               double h_b) {
    const double odds = detail::nlos_odds(r, h_u, env, h_b);
    return link == LinkType::LoS ? 1.0 / (1.0 + odds) : odds / (1.0 + odds);
}

/// Main-lobe gain 29000 / phi^2 (phi in degrees); unity for the omni model.
inline double uav_mainlobe_gain(const AntennaModel& antenna) {
    if (const auto* d = std::get_if<Directional>(&antenna)) {
        return 29000.0 / (d->beamwidth_deg * d->beamwidth_deg);
    }
    return 1.0;
}

/// Horizontal radius of the UAV reception footprint at altitude z.
inline double receiving_radius(double z, double h_b, const AntennaModel& antenna) {
    if (!(z > h_b)) {
        throw InvalidGeometry("receiving_radius: UAV altitude must exceed GBS height");
    }
    if (const auto* d = std::get_if<Directional>(&antenna)) {
        return (z - h_b) * std::tan(d->beamwidth_deg * std::numbers::pi / 360.0);
    }
    return std::get<Omni>(antenna).r_max;
}

inline double total_gain(const SystemParams& p) { return p.g_b * uav_mainlobe_gain(p.antenna); }

/// Fading-averaged received power P_t G_b G_u zeta(r, z); zero gain outside the main lobe is
/// reported as OutOfBeam rather than silently returning 0.
inline double mean_rx_power(LinkType link, double r, double z, const SystemParams& params) {
    if (r > receiving_radius(z, params.h_b, params.antenna)) {
        throw OutOfBeam("mean_rx_power: GBS outside the UAV main lobe");
    }
    return params.p_t * total_gain(params) * path_loss(link, r, z, params.channel, params.h_b);
}

/// Nakagami-m power gain, Gamma(m, 1/m). Integer m is drawn as a sum of m unit exponentials.
template <class URBG>
double sample_fading(LinkType link, const ChannelParams& ch, URBG& rng) {
    const int m = ch.fading_shape(link);
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
        sum -= std::log(uniform_open01(rng));
    }
    return sum / m;
}

/// V * rho / sqrt(rho^2 + dz^2); a zero-length move has zero horizontal speed.
inline double horizontal_speed(double v, double rho, double dz) {
    if (!(v >= 0.0) || !(rho >= 0.0)) {
        throw InvalidParameter("horizontal_speed: speed and transition length must be non-negative");
    }
    const double len = std::hypot(rho, dz);
    return len == 0.0 ? 0.0 : v * rho / len;
}

/// Densities of the 3D random-waypoint mobility model.
struct MobilityDensities {
    double mu;
    double h_lb;
    double h_ub;

    /// Rayleigh transition length, 2 pi mu r exp(-pi mu r^2).
    double transition_length(double rho) const noexcept {
        if (rho < 0.0) return 0.0;
        return 2.0 * std::numbers::pi * mu * rho * std::exp(-std::numbers::pi * mu * rho * rho);
    }
    double height(double z) const noexcept {
        return (z >= h_lb && z <= h_ub) ? 1.0 / (h_ub - h_lb) : 0.0;
    }
    double direction(double theta) const noexcept {
        return (theta >= 0.0 && theta <= std::numbers::pi) ? 1.0 / std::numbers::pi : 0.0;
    }
    double mean_transition_length() const noexcept { return 0.5 / std::sqrt(mu); }
};

inline MobilityDensities mobility_pdfs(const SystemParams& p) { return {p.mu, p.h_lb, p.h_ub}; }

}  // namespace uavcov
