#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "quadrature.hpp"

namespace uavcov {

/// Per-altitude view of the LoS/NLoS intensity field seen from height z.
///
/// Holds tables of the cumulative intensities  I_t(r) = int_0^r x P_t(x, z) dx  on an
/// asinh-spaced grid over [0, extent] and interpolates them with cubic Hermite polynomials
/// (the derivative r P_t(r) is known exactly). Both types are tabulated so that the small
/// NLoS integral near the origin keeps its relative accuracy. Beyond `extent` the remainder
/// is integrated directly. Immutable after construction, so safe to share
/// between threads.
class LinkProfile {
public:
    LinkProfile(double z, const SystemParams& params)
        : LinkProfile(z, params, receiving_radius(z, params.h_b, params.antenna)) {}

    LinkProfile(double z, const SystemParams& params, double extent)
        : z_(z),
          h_bar_(z - params.h_b),
          r_m_(receiving_radius(z, params.h_b, params.antenna)),
          lambda_(params.lambda_b),
          h_b_(params.h_b),
          env_(params.env),
          extent_(extent) {
        build_table();
    }

    double z() const noexcept { return z_; }
    double h_bar() const noexcept { return h_bar_; }
    double receiving_radius_m() const noexcept { return r_m_; }
    double lambda() const noexcept { return lambda_; }

    double los(double x) const { return los_probability(x, z_, env_, h_b_); }
    double prob(LinkType t, double x) const { return link_probability(t, x, z_, env_, h_b_); }

    /// int_0^r x P_t(x, z) dx.
    double cumulative(LinkType t, double r) const {
        const auto k = static_cast<std::size_t>(t == LinkType::NLoS);
        if (r <= 0.0) return 0.0;
        if (r > extent_) {
            return table_[k].back() + integrate([&](double x) { return x * prob(t, x); }, extent_, r,
                                                QuadratureSpec{1e-10, 1e-12, 30});
        }
        const double s = std::asinh(r / h_bar_);
        auto i = static_cast<std::size_t>(s / ds_);
        if (i >= nodes_.size() - 1) i = nodes_.size() - 2;
        const double x0 = nodes_[i];
        const double h = nodes_[i + 1] - x0;
        const double u = (r - x0) / h;
        const double u2 = u * u;
        const double u3 = u2 * u;
        const auto& y = table_[k];
        const auto& dy = slope_[k];
        return (2 * u3 - 3 * u2 + 1) * y[i] + (u3 - 2 * u2 + u) * h * dy[i] + (-2 * u3 + 3 * u2) * y[i + 1] +
               (u3 - u2) * h * dy[i + 1];
    }

    /// Same integral by direct adaptive quadrature; reference for the table.
    double cumulative_direct(LinkType t, double r, const QuadratureSpec& spec) const {
        return integrate([&](double x) { return x * prob(t, x); }, 0.0, r, spec);
    }

    /// Density of the distance to the nearest t-type GBS (infinite plane).
    double nearest_type_pdf(LinkType t, double r0) const {
        if (r0 <= 0.0 || lambda_ == 0.0) return 0.0;
        const double two_pi_l = 2.0 * std::numbers::pi * lambda_;
        return two_pi_l * r0 * prob(t, r0) * std::exp(-two_pi_l * cumulative(t, r0));
    }

    /// Probability that no GBS lies within the receiving radius.
    double void_probability() const noexcept {
        return std::exp(-std::numbers::pi * lambda_ * r_m_ * r_m_);
    }

private:
    void build_table() {
        const double s_max = std::asinh(std::max(extent_, 1e-9) / h_bar_);
        const auto n = static_cast<std::size_t>(std::max(8.0, std::ceil(s_max / 0.008)));
        ds_ = s_max / static_cast<double>(n);
        nodes_.resize(n + 1);
        for (std::size_t k = 0; k < 2; ++k) {
            table_[k].assign(n + 1, 0.0);
            slope_[k].resize(n + 1);
        }
        static const GaussLegendreRule gl = gauss_legendre(6);
        for (std::size_t i = 0; i <= n; ++i) {
            nodes_[i] = i == n ? extent_ : h_bar_ * std::sinh(ds_ * static_cast<double>(i));
            slope_[0][i] = nodes_[i] * prob(LinkType::LoS, nodes_[i]);
            slope_[1][i] = nodes_[i] * prob(LinkType::NLoS, nodes_[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double a = nodes_[i];
            const double b = nodes_[i + 1];
            const double c = 0.5 * (a + b);
            const double hw = 0.5 * (b - a);
            double acc_l = 0.0;
            double acc_n = 0.0;
            for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                const double x = c + hw * gl.nodes[k];
                const double odds = detail::nlos_odds(x, z_, env_, h_b_);
                acc_l += gl.weights[k] * x / (1.0 + odds);
                acc_n += gl.weights[k] * x * odds / (1.0 + odds);
            }
            table_[0][i + 1] = table_[0][i] + acc_l * hw;
            table_[1][i + 1] = table_[1][i] + acc_n * hw;
        }
    }

    double z_;
    double h_bar_;
    double r_m_;
    double lambda_;
    double h_b_;
    EnvironmentParams env_;
    double extent_;
    double ds_ = 0.0;
    std::vector<double> nodes_;
    std::array<std::vector<double>, 2> table_;  // LoS, NLoS
    std::array<std::vector<double>, 2> slope_;
};

/// Horizontal radius inside which no opposite-type GBS may lie when a `serving`-type GBS at
/// r0 is the strongest visible one (capped at the receiving radius: GBSs beyond it are
/// invisible to the UAV).
inline double opposite_exclusion_limit(LinkType serving, double r0, const LinkProfile& profile,
                                       const ChannelParams& ch) {
    return std::min(exclusion_radius(serving, r0, profile.h_bar(), ch), profile.receiving_radius_m());
}

/// Joint density that the strongest visible GBS is `link`-type at horizontal distance r0,
/// i.e. A(z) * serving_distance_pdf(r0). Zero outside [0, r_M].
inline double serving_joint_density(LinkType link, double r0, const LinkProfile& profile,
                                    const ChannelParams& ch) {
    if (r0 < 0.0 || r0 > profile.receiving_radius_m()) return 0.0;
    const double f = profile.nearest_type_pdf(link, r0);
    if (f == 0.0) return 0.0;
    const double limit = opposite_exclusion_limit(link, r0, profile, ch);
    return f * std::exp(-2.0 * std::numbers::pi * profile.lambda() *
                        profile.cumulative(opposite(link), limit));
}

inline double nearest_type_pdf(LinkType link, double r0, double z, const SystemParams& params) {
    if (!(r0 >= 0.0)) {
        throw InvalidParameter("nearest_type_pdf: r0 must be non-negative");
    }
    const LinkProfile profile(z, params, std::max(r0, receiving_radius(z, params.h_b, params.antenna)));
    return profile.nearest_type_pdf(link, r0);
}

/// Probability that the UAV at altitude z is served by a `link`-type GBS.
inline double association_probability(LinkType link, const LinkProfile& profile,
                                      const ChannelParams& ch, const QuadratureSpec& spec = {}) {
    if (profile.lambda() == 0.0) return 0.0;
    return integrate([&](double r0) { return serving_joint_density(link, r0, profile, ch); }, 0.0,
                     profile.receiving_radius_m(), spec);
}

inline double association_probability(LinkType link, double z, const SystemParams& params,
                                      const QuadratureSpec& spec = {}) {
    const LinkProfile profile(z, params);
    return association_probability(link, profile, params.channel, spec);
}

/// Serving-distance density conditioned on a `link`-type serving GBS.
inline double serving_distance_pdf(LinkType link, double r0, double z, const SystemParams& params,
                                   const QuadratureSpec& spec = {}) {
    const LinkProfile profile(z, params);
    if (r0 < 0.0 || r0 > profile.receiving_radius_m()) {
        throw InvalidParameter("serving_distance_pdf: r0 outside [0, r_M]");
    }
    const double a = association_probability(link, profile, params.channel, spec);
    if (!(a > 0.0)) {
        throw UndefinedConditional("serving_distance_pdf: association probability is zero");
    }
    return serving_joint_density(link, r0, profile, params.channel) / a;
}

/// Contact-distance density of the GBS process, 2 pi lambda r exp(-pi lambda r^2).
inline double nearest_any_pdf(double r0, const SystemParams& params) {
    if (r0 <= 0.0) return 0.0;
    const double l = params.lambda_b;
    return 2.0 * std::numbers::pi * l * r0 * std::exp(-std::numbers::pi * l * r0 * r0);
}

inline double void_probability(double z, const SystemParams& params) {
    const double r_m = receiving_radius(z, params.h_b, params.antenna);
    return std::exp(-std::numbers::pi * params.lambda_b * r_m * r_m);
}

}  // namespace uavcov
