#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <vector>

#include "association.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "quadrature.hpp"

namespace uavcov {

/// Conditioning of the handover analysis: serving link type, its horizontal distance at
/// the start of the move, and the post-move altitude.
struct HandoverContext {
    LinkType serving;
    double r0;
    double z_t;
};

struct CoverageBreakdown {
    double total = 0.0;                      // handover-discounted coverage
    std::array<double, 2> per_link{};        // contribution of LoS / NLoS serving links to total
    double handover_prob = 0.0;
    double void_prob = 0.0;
    double sir_coverage = 0.0;               // P(SIR > T) with no handover penalty
    double joint_coverage_handover = 0.0;    // P(SIR > T, H) under the model
    std::array<double, 2> association{};     // probability of a LoS / NLoS serving GBS
};

/// Number of conditional-coverage values that had to be clamped back into [0, 1] because
/// numerical drift exceeded 1e-6. Stays at zero in a healthy run.
inline std::atomic<long>& coverage_clamp_events() {
    static std::atomic<long> counter{0};
    return counter;
}

// Per-point probabilities are clamped; drift beyond this is counted.
inline constexpr double kClampSlack = 1e-6;

inline double clamp_probability(double p) {
    if (p < -kClampSlack || p > 1.0 + kClampSlack) {
        coverage_clamp_events().fetch_add(1, std::memory_order_relaxed);
    }
    return std::clamp(p, 0.0, 1.0);
}

namespace detail {

// Tolerance reference for {LoS, NLoS} component pairs: the pair sum, so a rare link type is
// not resolved to full relative precision on its own.
struct PairMagnitude {
    template <std::size_t N>
    double operator()(const std::array<double, N>& v, std::size_t c) const {
        return std::abs(v[c]) + std::abs(v[c ^ 1]);
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------------------
// Handover
// ---------------------------------------------------------------------------------------

/// Expected number of `target`-type GBSs per unit density in disk B minus disk A (see
/// DiskPair), with link types seen from the centre of B:
///   int_{B \ A} P_target(|u - q_B|) du.
/// Circles around the centre of B are fully inside A up to x - v, and cross A's boundary
/// between |x - v| and x + v, where the covered arc has half-angle
/// acos((s^2 + v^2 - x^2) / (2 s v)).
inline double thinned_new_region_area(LinkType target, const DiskPair& p, const LinkProfile& profile) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double y = p.y;
    const double inside = std::min(y, std::max(p.x - p.v, 0.0));
    double area = two_pi * (profile.cumulative(target, y) - profile.cumulative(target, inside));
    const double lo = std::abs(p.x - p.v);
    const double hi = std::min(y, p.x + p.v);
    if (hi > lo && p.v > 0.0) {
        // s = c - h cos(t) smooths the square-root ends of the arc angle.
        static const auto nodes = [] {
            const GaussLegendreRule gl = gauss_legendre(6);
            std::vector<std::pair<double, double>> out;  // cos t, weight * sin t
            for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                const double t = 0.5 * std::numbers::pi * (gl.nodes[k] + 1.0);
                out.emplace_back(std::cos(t), gl.weights[k] * std::sin(t));
            }
            return out;
        }();
        const double c = 0.5 * (lo + hi);
        const double h = 0.5 * (hi - lo);
        const double v2_x2 = p.v * p.v - p.x * p.x;
        double band = 0.0;
        for (const auto& [cos_t, w_sin_t] : nodes) {
            const double sv = c - h * cos_t;
            const double arc = 2.0 * std::acos(std::clamp((sv * sv + v2_x2) / (2.0 * sv * p.v), -1.0, 1.0));
            band += w_sin_t * sv * profile.prob(target, sv) * arc;
        }
        band *= h;
        area -= 0.5 * std::numbers::pi * band;
    }
    return std::max(area, 0.0);
}

/// Correction to thinned_new_region_area for GBSs that change link type during the move.
/// Link states are coupled (one uniform mark per GBS), so a GBS inside the pre-move
/// exclusion disks can switch to `target` type after the move. With x_t, x_o the pre-move
/// exclusion radii for the target and opposite types, the extra mean count per unit density is
///   int_B ([s_a < x_t] - [s_a < x_o]) (P_t(s_b) - P_t(s_a))^+ du,
/// s_a and s_b the distances of u from the pre- and post-move points. The positive part lives
/// on one side of the bisector (nearer to the end point for LoS, farther for NLoS).
inline double switched_target_mass(LinkType target, double x_target, double x_opposite, double y, double v,
                                   const LinkProfile& profile) {
    if (!(v > 0.0) || !(y > 0.0) || x_target == x_opposite) return 0.0;
    const double lo = std::min(x_target, x_opposite);
    const double hi = std::max(x_target, x_opposite);
    const double s_min = std::max(0.0, lo - v);
    const double s_max = std::min(y, hi + v);
    if (!(s_max > s_min)) return 0.0;

    struct Rule {
        std::vector<std::pair<double, double>> outer;  // cos t, weight * sin t
        GaussLegendreRule inner;
    };
    static const Rule rule = [] {
        Rule r;
        const GaussLegendreRule gl = gauss_legendre(4);
        for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
            const double t = 0.5 * std::numbers::pi * (gl.nodes[k] + 1.0);
            r.outer.emplace_back(std::cos(t), gl.weights[k] * std::sin(t));
        }
        r.inner = gauss_legendre(3);
        return r;
    }();

    const bool los_target = target == LinkType::LoS;
    const double v2 = v * v;
    auto angle = [](double cosine) { return std::acos(std::clamp(cosine, -1.0, 1.0)); };
    auto ring = [&](double s) {
        const double two_sv = 2.0 * s * v;
        const double s2v2 = s * s + v2;
        // s_a decreases in psi: s_a < hi for psi > psi_hi, s_a >= lo for psi <= psi_lo.
        const double psi_hi = angle((hi * hi - s2v2) / two_sv);
        const double psi_lo = angle((lo * lo - s2v2) / two_sv);
        const double psi_mid = angle(-v / (2.0 * s));  // s_a = s_b
        const double a = los_target ? psi_hi : std::max(psi_hi, psi_mid);
        const double b = los_target ? std::min(psi_lo, psi_mid) : psi_lo;
        if (!(b > a)) return 0.0;
        const double p_after = profile.prob(target, s);
        const double pc = 0.5 * (a + b);
        const double ph = 0.5 * (b - a);
        double arc = 0.0;
        for (std::size_t k = 0; k < rule.inner.nodes.size(); ++k) {
            const double psi = pc + ph * rule.inner.nodes[k];
            const double s_a = std::sqrt(std::max(s2v2 + two_sv * std::cos(psi), 0.0));
            arc += rule.inner.weights[k] * std::max(p_after - profile.prob(target, s_a), 0.0);
        }
        return s * 2.0 * ph * arc;
    };

    // The arc limits switch branches at these radii; each piece is smooth.
    const double lo_cut = lo > 0.0 ? lo : s_min;  // lo = 0 leaves psi_lo at pi throughout
    std::array<double, 8> cuts{0.5 * v, std::abs(lo_cut - v), lo_cut + v, std::abs(hi - v), hi + v, lo_cut, hi, s_max};
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    double prev = s_min;
    for (double cut : cuts) {
        cut = std::clamp(cut, s_min, s_max);
        if (cut - prev <= 1e-9 * s_max) continue;
        const double c = 0.5 * (prev + cut);
        const double h = 0.5 * (cut - prev);
        double piece = 0.0;
        for (const auto& [cos_t, w_sin_t] : rule.outer) {
            const double s = c - h * cos_t;
            if (s > 0.0) piece += w_sin_t * ring(s);
        }
        acc += 0.5 * std::numbers::pi * h * piece;
        prev = cut;
    }
    const double sign = x_target > x_opposite ? 1.0 : -1.0;
    return sign * acc;
}

/// Probability that some `target`-type GBS out-powers the `serving`-type GBS after one move:
/// `before` holds the pre-move exclusion radii {LoS, NLoS} around the start point, B is the
/// disk of radius min(D(R), r_M) around the end point. Target GBSs are thinned by their link
/// probability, plus those that switch type on the way.
inline double new_gbs_probability(LinkType serving, LinkType target, const std::array<double, 2>& before,
                                  double r0, double v_h, double theta, const LinkProfile& profile,
                                  const ChannelParams& ch) {
    const double r_after = displaced_distance(r0, v_h, theta);
    const double d_after = equal_power_radius(serving, target, r_after, profile.h_bar(), ch);
    const double r_m = profile.receiving_radius_m();
    const double y = d_after <= r_m ? d_after : r_m;
    const double x_t = before[index_of(target)];
    const double mass = thinned_new_region_area(target, {x_t, y, v_h}, profile) +
                        switched_target_mass(target, x_t, before[index_of(opposite(target))], y, v_h, profile);
    return -std::expm1(-profile.lambda() * std::max(mass, 0.0));
}

/// Pre-move exclusion radii {LoS, NLoS} for a `serving`-type GBS at r0, capped at r_M: GBSs
/// beyond it were invisible before the move, so they constrain nothing.
inline std::array<double, 2> exclusion_radii(LinkType serving, double r0, const LinkProfile& profile,
                                             const ChannelParams& ch) {
    const double r_m = profile.receiving_radius_m();
    return {std::min(equal_power_radius(serving, LinkType::LoS, r0, profile.h_bar(), ch), r_m),
            std::min(equal_power_radius(serving, LinkType::NLoS, r0, profile.h_bar(), ch), r_m)};
}

/// Nearest association: any closer GBS in the new region triggers a handover.
inline double closer_gbs_probability(double r0, double v_h, double theta, const LinkProfile& profile) {
    const double r_m = profile.receiving_radius_m();
    const double y = std::min(displaced_distance(r0, v_h, theta), r_m);
    return -std::expm1(-profile.lambda() * lens_complement_area({r0, y, v_h}));
}

/// Rayleigh tail cut-off where the remaining transition-length mass is below 1e-8.
inline double transition_length_cutoff(double mu) {
    return std::sqrt(std::log(1e8) / (std::numbers::pi * mu));
}

/// Probability of handing over from a `ctx.serving`-type GBS to a `target`-type GBS, given
/// r0 and the post-move altitude. Direct nested quadrature over direction, transition length
/// and pre-move altitude.
inline double conditional_handover(const HandoverContext& ctx, LinkType target,
                                   const SystemParams& params, const QuadratureSpec& spec = {}) {
    const double r_m = receiving_radius(ctx.z_t, params.h_b, params.antenna);
    if (!(ctx.r0 >= 0.0 && ctx.r0 <= r_m)) {
        throw InvalidParameter("conditional_handover: r0 outside [0, r_M]");
    }
    if (params.lambda_b == 0.0) return 0.0;
    const ChannelParams& ch = params.channel;
    const LinkProfile profile(ctx.z_t, params);
    const auto before = exclusion_radii(ctx.serving, ctx.r0, profile, ch);
    const double rho_max = transition_length_cutoff(params.mu);
    const MobilityDensities dens = mobility_pdfs(params);
    QuadratureSpec inner = spec.tightened(0.1);
    inner.max_depth = std::max(inner.max_depth, 20);

    auto over_heights = [&](double theta, double rho) {
        return integrate(
            [&](double z_prev) {
                const double v_h = horizontal_speed(params.v, rho, ctx.z_t - z_prev);
                return new_gbs_probability(ctx.serving, target, before, ctx.r0, v_h, theta, profile, ch) *
                       dens.height(z_prev);
            },
            params.h_lb, params.h_ub, inner);
    };
    auto over_lengths = [&](double theta) {
        return integrate([&](double rho) { return over_heights(theta, rho) * dens.transition_length(rho); },
                         0.0, rho_max, inner);
    };
    const double h = integrate(over_lengths, 0.0, std::numbers::pi, spec) / std::numbers::pi;
    return std::clamp(h, 0.0, 1.0);
}

/// Handover to a GBS of either type, composing the two target types as independent.
inline double conditional_handover_any(const HandoverContext& ctx, const SystemParams& params,
                                       const QuadratureSpec& spec = {}) {
    double stay = 1.0;
    for (LinkType target : kLinkTypes) {
        stay *= 1.0 - conditional_handover(ctx, target, params, spec);
    }
    return 1.0 - stay;
}

/// Horizontal-displacement distribution at a fixed post-move altitude, reduced to a
/// quadrature rule.
///
/// The transition length and pre-move altitude enter the handover integrand only through
/// V_h = V rho / sqrt(rho^2 + dz^2). Its CDF has a closed form,
///   P(V_h <= V u) = 1 - (1/H) int exp(-pi mu k^2 w^2) dw,  k = u / sqrt(1 - u^2),
/// with w = z_t - z_prev over the height band, so the double integral over (rho, z_prev)
/// collapses to a weighted sum over displacement quantiles.
class DisplacementRule {
public:
    DisplacementRule(double z_t, const SystemParams& params, int panels = 3, int order = 4)
        : z_t_(z_t), params_(&params) {
        if (params.v == 0.0) {
            displacements_ = {0.0};
            weights_ = {1.0};
            return;
        }
        const GaussLegendreRule gl = gauss_legendre(order);
        for (int p = 0; p < panels; ++p) {
            const double a = static_cast<double>(p) / panels;
            const double b = static_cast<double>(p + 1) / panels;
            for (int k = 0; k < order; ++k) {
                // p = q^2 removes the square-root behaviour of the quantile near zero.
                const double q = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[k];
                const double w = 0.5 * (b - a) * gl.weights[k] * 2.0 * q;
                displacements_.push_back(params.v * quantile_fraction(q * q));
                weights_.push_back(w);
            }
        }
    }

    const std::vector<double>& displacements() const noexcept { return displacements_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// P(V_h <= V u).
    double cdf_fraction(double u) const {
        if (u <= 0.0) return 0.0;
        if (u >= 1.0) return 1.0;
        const SystemParams& p = *params_;
        const double k = u / std::sqrt((1.0 - u) * (1.0 + u));
        const double a = std::numbers::pi * p.mu * k * k;
        const double w1 = z_t_ - p.h_ub;
        const double w2 = z_t_ - p.h_lb;
        const double band = p.h_ub - p.h_lb;
        const double sa = std::sqrt(a);
        double mass;
        if (sa * std::max(std::abs(w1), std::abs(w2)) < 1e-5) {
            mass = band - a * (w2 * w2 * w2 - w1 * w1 * w1) / 3.0;
        } else {
            mass = 0.5 * std::sqrt(std::numbers::pi) / sa * (std::erf(sa * w2) - std::erf(sa * w1));
        }
        return std::clamp(1.0 - mass / band, 0.0, 1.0);
    }

private:
    double quantile_fraction(double prob) const {
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 64; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cdf_fraction(mid) < prob ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    double z_t_;
    const SystemParams* params_;
    std::vector<double> displacements_;
    std::vector<double> weights_;
};

/// Conditional handover probabilities at one post-move altitude, using DisplacementRule for
/// the (rho, z_prev) average and adaptive quadrature over direction.
class HandoverKernel {
public:
    HandoverKernel(const LinkProfile& profile, const SystemParams& params)
        : profile_(&profile), params_(&params), rule_(profile.z(), params) {}

    /// {P(H to LoS), P(H to NLoS)} for a `serving`-type GBS at r0.
    std::array<double, 2> conditional(LinkType serving, double r0, const QuadratureSpec& spec) const {
        if (params_->lambda_b == 0.0) return {0.0, 0.0};
        const auto before = exclusion_radii(serving, r0, *profile_, params_->channel);
        const auto& v = rule_.displacements();
        const auto& w = rule_.weights();
        // One direction integral per displacement: each has only a few kinks in theta, whereas
        // their sum has dozens.
        std::array<double, 2> h{};
        for (std::size_t j = 0; j < v.size(); ++j) {
            const auto hj = integrate_detailed<std::array<double, 2>>(
                                [&](double theta) {
                                    std::array<double, 2> p{};
                                    for (LinkType target : kLinkTypes) {
                                        p[index_of(target)] = new_gbs_probability(
                                            serving, target, before, r0, v[j], theta, *profile_, params_->channel);
                                    }
                                    return p;
                                },
                                0.0, std::numbers::pi, spec, detail::PairMagnitude{})
                                .value;
            h[0] += w[j] * hj[0];
            h[1] += w[j] * hj[1];
        }
        return {std::clamp(h[0] / std::numbers::pi, 0.0, 1.0), std::clamp(h[1] / std::numbers::pi, 0.0, 1.0)};
    }

    /// Nearest association: any GBS closer than the original one after the move.
    double conditional_nearest(double r0, const QuadratureSpec& spec) const {
        if (params_->lambda_b == 0.0) return 0.0;
        const auto& v = rule_.displacements();
        const auto& w = rule_.weights();
        double h = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            h += w[j] * integrate([&](double theta) { return closer_gbs_probability(r0, v[j], theta, *profile_); },
                                  0.0, std::numbers::pi, spec);
        }
        return std::clamp(h / std::numbers::pi, 0.0, 1.0);
    }

    const DisplacementRule& rule() const noexcept { return rule_; }

private:
    const LinkProfile* profile_;
    const SystemParams* params_;
    DisplacementRule rule_;
};

// ---------------------------------------------------------------------------------------
// Interference Laplace transform and conditional coverage
// ---------------------------------------------------------------------------------------

/// Annuli holding the interferers: LoS interferers in [lower[0], upper], NLoS in
/// [lower[1], upper].
struct InterferenceRegion {
    std::array<double, 2> lower{};
    double upper = 0.0;
};

inline InterferenceRegion interference_region(LinkType serving, double r0, const LinkProfile& profile,
                                              const ChannelParams& ch, AssociationPolicy policy) {
    InterferenceRegion region;
    region.upper = profile.receiving_radius_m();
    region.lower[index_of(serving)] = r0;
    region.lower[index_of(opposite(serving))] =
        policy == AssociationPolicy::Nearest ? r0 : opposite_exclusion_limit(serving, r0, profile, ch);
    return region;
}

using DerivativeArray = std::array<double, kMaxFadingShape>;

namespace detail {

// Rising factorial (m)_k.
inline double rising(int m, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= m + i;
    return r;
}

// tau^k * d^k/dtau^k of gamma(s) = 1 - (m/(m+s))^m, with s = tau*c, for k = 0..orders-1.
inline void scaled_gamma_derivatives(double s, int m, int orders, DerivativeArray& out) {
    const double md = m;
    out[0] = -std::expm1(-md * std::log1p(s / md));
    if (orders <= 1) return;
    const double log_s = std::log(s);
    const double log_base = md * std::log(md) - md * std::log(md + s);
    const double log_ratio = log_s - std::log(md + s);
    for (int k = 1; k < orders; ++k) {
        const double sign = (k % 2 == 1) ? 1.0 : -1.0;
        out[k] = sign * rising(m, k) * std::exp(log_base + k * log_ratio);
    }
}

}  // namespace detail

/// tau^k g^(k)(tau) for k < orders, where g is the exponent of the interference Laplace
/// transform and log_tau_gain = ln(tau * P_t * G_tot).
inline DerivativeArray scaled_exponent_derivatives(double log_tau_gain, const InterferenceRegion& region,
                                                   const LinkProfile& profile, const ChannelParams& ch,
                                                   int orders, const QuadratureSpec& spec) {
    DerivativeArray total{};
    if (profile.lambda() == 0.0) return total;
    for (LinkType xi : kLinkTypes) {
        const double lo = region.lower[index_of(xi)];
        if (!(lo < region.upper)) continue;
        const int m = ch.fading_shape(xi);
        auto integrand = [&](double x) {
            DerivativeArray d{};
            const double s = std::exp(log_tau_gain + log_path_loss(xi, x, profile.h_bar(), ch));
            if (s == 0.0) return d;
            detail::scaled_gamma_derivatives(s, m, orders, d);
            const double w = profile.prob(xi, x) * x;
            for (int k = 0; k < orders; ++k) d[k] *= w;
            return d;
        };
        const auto part = integrate_detailed<DerivativeArray>(integrand, lo, region.upper, spec).value;
        for (int k = 0; k < orders; ++k) total[k] += part[k];
    }
    const double scale = -2.0 * std::numbers::pi * profile.lambda();
    for (int k = 0; k < orders; ++k) total[k] *= scale;
    return total;
}

/// Fa di Bruno for L = exp(g): L^(l) = sum_{j<l} C(l-1, j) L^(j) g^(l-j). Works equally on
/// tau-scaled sequences.
inline DerivativeArray exponential_derivatives(const DerivativeArray& g, int orders) {
    DerivativeArray out{};
    out[0] = std::exp(g[0]);
    for (int l = 1; l < orders; ++l) {
        double acc = 0.0;
        double binom = 1.0;  // C(l-1, j)
        for (int j = 0; j < l; ++j) {
            acc += binom * out[j] * g[l - j];
            binom = binom * (l - 1 - j) / (j + 1);
        }
        out[l] = acc;
    }
    return out;
}

/// sum_{l<m} (-tau)^l / l! L^(l)(tau), from tau-scaled derivatives.
inline double coverage_from_scaled(const DerivativeArray& scaled_laplace, int m) {
    double acc = 0.0;
    double fact = 1.0;
    for (int l = 0; l < m; ++l) {
        if (l > 0) fact *= l;
        acc += ((l % 2 == 0) ? 1.0 : -1.0) * scaled_laplace[l] / fact;
    }
    return acc;
}

/// ln(tau_serving * P_t * G_tot) = ln(m T / zeta_serving(r0, z)).
inline double log_coverage_tau_gain(LinkType serving, double r0, const LinkProfile& profile,
                                    const SystemParams& params) {
    const int m = params.channel.fading_shape(serving);
    return std::log(m * params.t_thresh) - log_path_loss(serving, r0, profile.h_bar(), params.channel);
}

inline double conditional_coverage(LinkType serving, double r0, const LinkProfile& profile,
                                   const SystemParams& params, AssociationPolicy policy,
                                   const QuadratureSpec& spec) {
    const int m = params.channel.fading_shape(serving);
    const InterferenceRegion region = interference_region(serving, r0, profile, params.channel, policy);
    const DerivativeArray g = scaled_exponent_derivatives(log_coverage_tau_gain(serving, r0, profile, params),
                                                          region, profile, params.channel, m, spec);
    return clamp_probability(coverage_from_scaled(exponential_derivatives(g, m), m));
}

/// Conditional coverage given a `serving`-type GBS at r0 and UAV altitude z. The interference
/// annuli follow params.policy.
inline double conditional_coverage(LinkType serving, double r0, double z, const SystemParams& params,
                                   const QuadratureSpec& spec = {}) {
    const LinkProfile profile(z, params);
    if (!(r0 >= 0.0 && r0 <= profile.receiving_radius_m())) {
        throw InvalidParameter("conditional_coverage: r0 outside [0, r_M]");
    }
    return conditional_coverage(serving, r0, profile, params, params.policy, spec);
}

/// Laplace transform of the interference at tau (per W).
inline double laplace_interference(double tau, LinkType serving, double r0, double z,
                                   const SystemParams& params, const QuadratureSpec& spec = {}) {
    if (!(tau >= 0.0)) {
        throw InvalidParameter("laplace_interference: tau must be non-negative");
    }
    if (tau == 0.0) return 1.0;
    const LinkProfile profile(z, params);
    const InterferenceRegion region = interference_region(serving, r0, profile, params.channel, params.policy);
    const double log_tau_gain = std::log(tau * params.p_t * total_gain(params));
    return std::exp(scaled_exponent_derivatives(log_tau_gain, region, profile, params.channel, 1, spec)[0]);
}

/// L^(l)(tau) for l = 0..max_order, max_order < m_serving.
inline std::vector<double> laplace_derivatives(double tau, LinkType serving, double r0, double z,
                                               const SystemParams& params, int max_order,
                                               const QuadratureSpec& spec = {}) {
    if (max_order < 0 || max_order > params.channel.fading_shape(serving) - 1) {
        throw InvalidParameter("laplace_derivatives: max_order must lie in [0, m_serving - 1]");
    }
    if (!(tau > 0.0)) {
        throw InvalidParameter("laplace_derivatives: tau must be positive");
    }
    const int orders = max_order + 1;
    const LinkProfile profile(z, params);
    const InterferenceRegion region = interference_region(serving, r0, profile, params.channel, params.policy);
    const double log_tau_gain = std::log(tau * params.p_t * total_gain(params));
    const DerivativeArray g = scaled_exponent_derivatives(log_tau_gain, region, profile, params.channel, orders, spec);
    const DerivativeArray scaled = exponential_derivatives(g, orders);
    std::vector<double> out(orders);
    for (int l = 0; l < orders; ++l) {
        out[l] = scaled[l] / std::pow(tau, l);
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// Marginal probabilities
// ---------------------------------------------------------------------------------------

namespace detail {

enum class Needs { Association, Handover, Coverage };

// Per-height integrand components, indexed [link]:
//   0,1  coverage mass            (weight * Pcov)
//   2,3  coverage-and-handover    (weight * Pcov * P(H))
//   4,5  handover mass            (weight * P(H))
//   6,7  association mass         (weight)
using HeightTerms = std::array<double, 8>;

inline HeightTerms integrate_at_height(double z, const SystemParams& params, AssociationPolicy policy,
                                       Needs needs, const QuadratureSpec& spec) {
    HeightTerms zero{};
    if (params.lambda_b == 0.0) return zero;
    const LinkProfile profile(z, params);
    const HandoverKernel kernel(profile, params);
    const ChannelParams& ch = params.channel;
    const QuadratureSpec inner = spec.tightened(0.5);
    // Kinks of the lens area in theta need deeper bisection than the outer integrals.
    QuadratureSpec innermost = spec.tightened(0.3);
    innermost.max_depth = std::max(spec.max_depth, 20);

    auto integrand = [&](double r0) {
        HeightTerms t{};
        std::array<double, 2> weight{};
        std::array<double, 2> handover{};
        if (policy == AssociationPolicy::StrongestRss) {
            for (LinkType s : kLinkTypes) {
                weight[index_of(s)] = serving_joint_density(s, r0, profile, ch);
            }
            if (needs != Needs::Association) {
                for (LinkType s : kLinkTypes) {
                    if (weight[index_of(s)] == 0.0) continue;
                    const auto h = kernel.conditional(s, r0, innermost);
                    handover[index_of(s)] = 1.0 - (1.0 - h[0]) * (1.0 - h[1]);
                }
            }
        } else {
            const double f = nearest_any_pdf(r0, params);
            weight = {profile.prob(LinkType::LoS, r0) * f, profile.prob(LinkType::NLoS, r0) * f};
            if (needs != Needs::Association && f > 0.0) {
                const double h = kernel.conditional_nearest(r0, innermost);
                handover = {h, h};
            }
        }
        for (LinkType s : kLinkTypes) {
            const std::size_t i = index_of(s);
            const double w = weight[i];
            if (w == 0.0) continue;
            double pcov = 0.0;
            if (needs == Needs::Coverage) {
                pcov = conditional_coverage(s, r0, profile, params, policy, innermost);
            }
            t[i] = w * pcov;
            t[2 + i] = w * pcov * handover[i];
            t[4 + i] = w * handover[i];
            t[6 + i] = w;
        }
        return t;
    };
    return integrate_detailed<HeightTerms>(integrand, 0.0, profile.receiving_radius_m(), inner, PairMagnitude{})
        .value;
}

inline HeightTerms integrate_over_heights(const SystemParams& params, AssociationPolicy policy, Needs needs,
                                          const QuadratureSpec& spec) {
    params.validate();
    spec.validate();
    const double band = params.h_ub - params.h_lb;
    HeightTerms out = integrate_detailed<HeightTerms>(
                          [&](double z) { return integrate_at_height(z, params, policy, needs, spec); },
                          params.h_lb, params.h_ub, spec, PairMagnitude{})
                          .value;
    for (double& v : out) v /= band;
    return out;
}

inline double marginal_void(const SystemParams& params, const QuadratureSpec& spec) {
    return integrate([&](double z) { return void_probability(z, params); }, params.h_lb, params.h_ub, spec) /
           (params.h_ub - params.h_lb);
}

inline CoverageBreakdown assemble(const HeightTerms& t, const SystemParams& params, const QuadratureSpec& spec) {
    CoverageBreakdown b;
    for (std::size_t i = 0; i < 2; ++i) {
        b.per_link[i] = t[i] - params.kappa * t[2 + i];
        b.association[i] = t[6 + i];
    }
    b.sir_coverage = t[0] + t[1];
    b.joint_coverage_handover = t[2] + t[3];
    b.total = std::clamp(b.per_link[0] + b.per_link[1], 0.0, 1.0);
    b.handover_prob = std::clamp(t[4] + t[5], 0.0, 1.0);
    b.void_prob = marginal_void(params, spec);
    return b;
}

}  // namespace detail

/// Coverage under strongest-average-RSS association, with handover-induced connection
/// failures discounted by kappa.
inline CoverageBreakdown coverage_probability(const SystemParams& params, const QuadratureSpec& spec = {}) {
    const auto t = detail::integrate_over_heights(params, AssociationPolicy::StrongestRss,
                                                  detail::Needs::Coverage, spec);
    return detail::assemble(t, params, spec);
}

/// Coverage under nearest-GBS association.
inline CoverageBreakdown coverage_probability_nearest(const SystemParams& params,
                                                      const QuadratureSpec& spec = {}) {
    const auto t = detail::integrate_over_heights(params, AssociationPolicy::Nearest,
                                                  detail::Needs::Coverage, spec);
    return detail::assemble(t, params, spec);
}

inline CoverageBreakdown coverage_for_policy(const SystemParams& params, const QuadratureSpec& spec = {}) {
    return params.policy == AssociationPolicy::StrongestRss ? coverage_probability(params, spec)
                                                            : coverage_probability_nearest(params, spec);
}

/// Marginal handover probability for params.policy; a void start contributes no handover.
inline double handover_probability(const SystemParams& params, const QuadratureSpec& spec = {}) {
    const auto t = detail::integrate_over_heights(params, params.policy, detail::Needs::Handover, spec);
    return std::clamp(t[4] + t[5], 0.0, 1.0);
}

/// Height-averaged {LoS, NLoS} serving probabilities for params.policy.
inline std::array<double, 2> association_probabilities(const SystemParams& params,
                                                       const QuadratureSpec& spec = {}) {
    const auto t = detail::integrate_over_heights(params, params.policy, detail::Needs::Association, spec);
    return {t[6], t[7]};
}

inline double void_probability_marginal(const SystemParams& params, const QuadratureSpec& spec = {}) {
    return detail::marginal_void(params, spec);
}

}  // namespace uavcov
