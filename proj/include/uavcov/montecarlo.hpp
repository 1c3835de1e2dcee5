#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace uavcov {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// GBS positions on a disc around the origin. Each GBS also carries one uniform mark per
/// episode; its link to a receiver at any site is LoS iff mark < P_L(site). Marginally this
/// is the Bernoulli(P_L) draw per site, but the same GBS cannot flip type between two sites
/// where its LoS probability is unchanged.
struct GbsField {
    double radius = 0.0;
    std::vector<Point2> positions;
    std::vector<double> link_marks;

    std::size_t size() const noexcept { return positions.size(); }
};

template <class URBG>
GbsField sample_ppp(double lambda_b, double r_field, URBG& rng) {
    if (!(lambda_b >= 0.0) || !(r_field > 0.0)) {
        throw InvalidParameter("sample_ppp: need lambda_b >= 0 and r_field > 0");
    }
    GbsField field;
    field.radius = r_field;
    const double mean = lambda_b * std::numbers::pi * r_field * r_field;
    if (mean == 0.0) return field;
    std::poisson_distribution<long> count_dist(mean);
    const long count = count_dist(rng);
    field.positions.reserve(count);
    field.link_marks.reserve(count);
    for (long i = 0; i < count; ++i) {
        const double r = r_field * std::sqrt(uniform01(rng));
        const double phi = 2.0 * std::numbers::pi * uniform01(rng);
        field.positions.push_back({r * std::cos(phi), r * std::sin(phi)});
        field.link_marks.push_back(uniform01(rng));
    }
    return field;
}

inline LinkType link_type_at(const GbsField& field, std::size_t i, const Waypoint& uav, double h_b,
                             const EnvironmentParams& env) {
    const double r = std::hypot(field.positions[i].x - uav.x, field.positions[i].y - uav.y);
    return field.link_marks[i] < los_probability(r, uav.z, env, h_b) ? LinkType::LoS : LinkType::NLoS;
}

inline std::vector<LinkType> classify_links(const GbsField& field, const Waypoint& uav, double h_b,
                                            const EnvironmentParams& env) {
    std::vector<LinkType> types(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        types[i] = link_type_at(field, i, uav, h_b, env);
    }
    return types;
}

struct Association {
    std::size_t id;
    LinkType link;
    double r;
};

/// Serving GBS among those within the receiving radius; ties go to the lowest id.
inline std::optional<Association> associate(const GbsField& field, const std::vector<LinkType>& types,
                                            const Waypoint& uav, AssociationPolicy policy,
                                            const SystemParams& params) {
    const double r_m = receiving_radius(uav.z, params.h_b, params.antenna);
    const double h_bar = uav.z - params.h_b;
    std::optional<Association> best;
    double best_score = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double r = std::hypot(field.positions[i].x - uav.x, field.positions[i].y - uav.y);
        if (r > r_m) continue;
        // Larger score wins.
        const double score = policy == AssociationPolicy::StrongestRss
                                 ? log_path_loss(types[i], r, h_bar, params.channel)
                                 : -r;
        if (!best || score > best_score) {
            best = Association{i, types[i], r};
            best_score = score;
        }
    }
    return best;
}

struct EpisodeOutcome {
    std::optional<Association> associated_pre;
    std::optional<Association> associated_post;
    bool handover = false;
    bool void_pre = true;
    bool void_post = true;
    std::optional<double> sir;
    bool covered = false;
};

/// Radius of the simulated disc: both receiving discs plus the largest horizontal step.
inline double field_radius(const SystemParams& params) {
    return receiving_radius(params.h_ub, params.h_b, params.antenna) + params.v + 50.0;
}

namespace detail {

struct EpisodeScratch {
    std::vector<LinkType> types;
};

// Received power (common factor P_t G_tot dropped) summed over in-range GBSs other than
// `serving`, with fresh fading.
template <class URBG>
double interference(const GbsField& field, const std::vector<LinkType>& types, const Waypoint& uav,
                    std::size_t serving, const SystemParams& params, URBG& rng) {
    const double r_m = receiving_radius(uav.z, params.h_b, params.antenna);
    const double h_bar = uav.z - params.h_b;
    double total = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (i == serving) continue;
        const double r = std::hypot(field.positions[i].x - uav.x, field.positions[i].y - uav.y);
        if (r > r_m) continue;
        total += sample_fading(types[i], params.channel, rng) *
                 std::exp(log_path_loss(types[i], r, h_bar, params.channel));
    }
    return total;
}

inline void fill_types(const GbsField& field, const Waypoint& uav, const SystemParams& params,
                       std::vector<LinkType>& types) {
    types.resize(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        types[i] = link_type_at(field, i, uav, params.h_b, params.env);
    }
}

// Adds the PPP restricted to the annulus [field.radius, outer] drawn from `rng`.
template <class URBG>
void extend_field(GbsField& field, double lambda_b, double outer, URBG& rng) {
    const double inner = field.radius;
    const double mean = lambda_b * std::numbers::pi * (outer * outer - inner * inner);
    field.radius = outer;
    if (mean <= 0.0) return;
    std::poisson_distribution<long> count_dist(mean);
    const long count = count_dist(rng);
    for (long i = 0; i < count; ++i) {
        const double r = std::sqrt(inner * inner + (outer * outer - inner * inner) * uniform01(rng));
        const double phi = 2.0 * std::numbers::pi * uniform01(rng);
        field.positions.push_back({r * std::cos(phi), r * std::sin(phi)});
        field.link_marks.push_back(uniform01(rng));
    }
}

// field_scale > 1 enlarges the simulated disc; the extra annulus comes from a split stream so
// the base disc is unchanged.
template <class URBG>
EpisodeOutcome simulate_episode(const SystemParams& params, URBG& rng, EpisodeScratch& scratch,
                                double field_scale = 1.0) {
    EpisodeOutcome out;
    const double band = params.h_ub - params.h_lb;
    const double z_prev = params.h_lb + band * uniform01(rng);
    const double z_t = params.h_lb + band * uniform01(rng);
    // Rayleigh(mu) transition length by inversion.
    const double rho = std::sqrt(-std::log(uniform_open01(rng)) / (std::numbers::pi * params.mu));
    const double theta = std::numbers::pi * uniform01(rng);
    const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    const double free_heading = 2.0 * std::numbers::pi * uniform01(rng);
    const bool connection_ok = uniform01(rng) >= params.kappa;

    GbsField field = sample_ppp(params.lambda_b, field_radius(params), rng);
    if (field_scale > 1.0) {
        if constexpr (requires { rng.split(1); }) {
            auto outer_rng = rng.split(1);
            extend_field(field, params.lambda_b, field.radius * field_scale, outer_rng);
        } else {
            extend_field(field, params.lambda_b, field.radius * field_scale, rng);
        }
    }

    const Waypoint before{0.0, 0.0, z_prev};
    fill_types(field, before, params, scratch.types);
    out.associated_pre = associate(field, scratch.types, before, params.policy, params);
    out.void_pre = !out.associated_pre;

    double heading = free_heading;
    if (out.associated_pre) {
        const Point2 g = field.positions[out.associated_pre->id];
        heading = std::atan2(-g.y, -g.x) + side * theta;
    }
    const double v_h = horizontal_speed(params.v, rho, z_t - z_prev);
    const Waypoint after{v_h * std::cos(heading), v_h * std::sin(heading), z_t};
    fill_types(field, after, params, scratch.types);
    out.associated_post = associate(field, scratch.types, after, params.policy, params);
    out.void_post = !out.associated_post;
    out.handover = out.associated_pre && out.associated_post && out.associated_pre->id != out.associated_post->id;

    if (out.associated_post) {
        const Association& s = *out.associated_post;
        const double signal = sample_fading(s.link, params.channel, rng) *
                              std::exp(log_path_loss(s.link, s.r, z_t - params.h_b, params.channel));
        const double interf = interference(field, scratch.types, after, s.id, params, rng);
        out.sir = interf > 0.0 ? signal / interf : std::numeric_limits<double>::infinity();
        out.covered = *out.sir > params.t_thresh && (!out.handover || connection_ok);
    }
    return out;
}

}  // namespace detail

/// One UAV movement in a freshly sampled network.
template <class URBG>
EpisodeOutcome simulate_episode(const SystemParams& params, URBG& rng) {
    detail::EpisodeScratch scratch;
    return detail::simulate_episode(params, rng, scratch);
}

struct McEstimate {
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;

    double half_width() const noexcept { return 0.5 * (ci_high - ci_low); }
};

inline constexpr double kZ95 = 1.959963984540054;

/// 95% Wilson score interval for `successes` out of n.
inline McEstimate wilson_estimate(std::uint64_t successes, std::uint64_t n, std::uint64_t seed) {
    if (n == 0) {
        throw InvalidParameter("wilson_estimate: n must be positive");
    }
    const double nd = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nd;
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / nd;
    const double center = (p + z2 / (2.0 * nd)) / denom;
    const double half = kZ95 / denom * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd));
    McEstimate e;
    e.mean = p;
    e.ci_low = std::clamp(std::min(center - half, p), 0.0, 1.0);
    e.ci_high = std::clamp(std::max(center + half, p), 0.0, 1.0);
    e.n = n;
    e.seed = seed;
    return e;
}

/// Normal-approximation 95% interval for a sample mean.
inline McEstimate mean_estimate(double sum, double sum_sq, std::uint64_t n, std::uint64_t seed) {
    const double nd = static_cast<double>(n);
    const double mean = sum / nd;
    const double var = n > 1 ? std::max(0.0, (sum_sq - nd * mean * mean) / (nd - 1.0)) : 0.0;
    const double half = kZ95 * std::sqrt(var / nd);
    return {mean, mean - half, mean + half, n, seed};
}

namespace detail {

inline constexpr std::uint64_t kBlockSize = 1024;

// Runs body(block_index, first, last) over fixed episode blocks on `threads` workers. Block
// results are stored by index, so reduction order never depends on scheduling.
template <class Body>
void for_each_block(std::uint64_t n, unsigned threads, Body&& body) {
    const std::uint64_t blocks = (n + kBlockSize - 1) / kBlockSize;
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(blocks, 1)));
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= blocks) return;
            try {
                body(b, b * kBlockSize, std::min(n, (b + 1) * kBlockSize));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(blocks);
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Proportion of n episodes for which metric(outcome) holds. Episode e uses stream e of the
/// generator keyed by `seed`.
inline McEstimate estimate(const std::function<bool(const EpisodeOutcome&)>& metric, std::uint64_t n,
                           std::uint64_t seed, const SystemParams& params, unsigned threads = 0) {
    if (n < 100) {
        throw InvalidParameter("estimate: need at least 100 trials");
    }
    params.validate();
    const std::uint64_t blocks = (n + detail::kBlockSize - 1) / detail::kBlockSize;
    std::vector<std::uint64_t> hits(blocks, 0);
    detail::for_each_block(n, threads, [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
        detail::EpisodeScratch scratch;
        std::uint64_t h = 0;
        for (std::uint64_t e = first; e < last; ++e) {
            CounterRng rng(seed, e);
            h += metric(detail::simulate_episode(params, rng, scratch)) ? 1 : 0;
        }
        hits[b] = h;
    });
    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    return wilson_estimate(total, n, seed);
}

/// Every marginal metric from one batch of episodes under params.policy. Association and void
/// frequencies refer to the pre-move position.
struct McSummary {
    McEstimate association_los;
    McEstimate association_nlos;
    McEstimate void_prob;
    McEstimate handover;
    McEstimate coverage;
};

inline McSummary simulate_summary(const SystemParams& params, std::uint64_t n, std::uint64_t seed,
                                  unsigned threads = 0, double field_scale = 1.0) {
    if (n < 100) {
        throw InvalidParameter("simulate_summary: need at least 100 trials");
    }
    params.validate();
    struct Counts {
        std::uint64_t los = 0, nlos = 0, empty = 0, handover = 0, covered = 0;
    };
    const std::uint64_t blocks = (n + detail::kBlockSize - 1) / detail::kBlockSize;
    std::vector<Counts> per_block(blocks);
    detail::for_each_block(n, threads, [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
        detail::EpisodeScratch scratch;
        Counts c;
        for (std::uint64_t e = first; e < last; ++e) {
            CounterRng rng(seed, e);
            const EpisodeOutcome o = detail::simulate_episode(params, rng, scratch, field_scale);
            if (o.associated_pre) {
                (o.associated_pre->link == LinkType::LoS ? c.los : c.nlos) += 1;
            } else {
                c.empty += 1;
            }
            c.handover += o.handover;
            c.covered += o.covered;
        }
        per_block[b] = c;
    });
    Counts total;
    for (const Counts& c : per_block) {
        total.los += c.los;
        total.nlos += c.nlos;
        total.empty += c.empty;
        total.handover += c.handover;
        total.covered += c.covered;
    }
    return {wilson_estimate(total.los, n, seed), wilson_estimate(total.nlos, n, seed),
            wilson_estimate(total.empty, n, seed), wilson_estimate(total.handover, n, seed),
            wilson_estimate(total.covered, n, seed)};
}

/// Frequencies observed with the serving GBS pinned at distance r0.
struct ConditionedOracles {
    McEstimate handover_any;
    std::array<McEstimate, 2> handover_to;  // new serving GBS is LoS / NLoS
    McEstimate coverage;                    // SIR > T at the pre-move position
    std::optional<McEstimate> laplace;      // E[exp(-tau I)] when requested
    double acceptance_rate = 0.0;
};

namespace detail {

inline constexpr double kMinAcceptance = 1e-4;

struct ConditionedTally {
    std::uint64_t any = 0;
    std::array<std::uint64_t, 2> to{};
    std::uint64_t covered = 0;
    std::uint64_t attempts = 0;
    double laplace_sum = 0.0;
    double laplace_sq = 0.0;
};

}  // namespace detail

/// Strongest-RSS episodes conditioned on a `serving`-type GBS at horizontal distance r0, UAV at
/// altitude z_t before and after the move. The rest of the field is a PPP, rejected whenever
/// it contains a GBS that would out-power the pinned one. tau (per W) > 0 additionally
/// estimates the interference Laplace transform at the pre-move position.
inline ConditionedOracles conditioned_oracles(const SystemParams& params, double r0, double z_t,
                                              LinkType serving, std::uint64_t n, std::uint64_t seed,
                                              double tau = 0.0, unsigned threads = 0) {
    params.validate();
    const double r_m = receiving_radius(z_t, params.h_b, params.antenna);
    if (!(r0 > 0.0 && r0 < r_m)) {
        throw InvalidParameter("conditioned_oracles: r0 must lie in (0, r_M(z_t))");
    }
    if (n < 100) {
        throw InvalidParameter("conditioned_oracles: need at least 100 trials");
    }
    const double h_bar = z_t - params.h_b;
    const double r_field = r_m + params.v + 50.0;
    const double pinned_score = log_path_loss(serving, r0, h_bar, params.channel);
    const double gain = params.p_t * total_gain(params);
    // Enough attempts that an acceptance rate at the feasibility floor still fills n trials.
    const std::uint64_t max_attempts_per_trial = static_cast<std::uint64_t>(10.0 / detail::kMinAcceptance);

    const std::uint64_t blocks = (n + detail::kBlockSize - 1) / detail::kBlockSize;
    std::vector<detail::ConditionedTally> per_block(blocks);
    detail::for_each_block(n, threads, [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
        detail::ConditionedTally tally;
        std::vector<LinkType> types;
        for (std::uint64_t e = first; e < last; ++e) {
            CounterRng rng(seed, e);
            const Waypoint before{0.0, 0.0, z_t};
            GbsField field;
            bool accepted = false;
            for (std::uint64_t attempt = 0; attempt < max_attempts_per_trial; ++attempt) {
                ++tally.attempts;
                field = sample_ppp(params.lambda_b, r_field, rng);
                detail::fill_types(field, before, params, types);
                bool blocked = false;
                for (std::size_t i = 0; i < field.size() && !blocked; ++i) {
                    const double r = std::hypot(field.positions[i].x, field.positions[i].y);
                    blocked = r <= r_m && log_path_loss(types[i], r, h_bar, params.channel) >= pinned_score;
                }
                if (!blocked) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                const double rate = static_cast<double>(e - first) / static_cast<double>(tally.attempts);
                std::ostringstream msg;
                msg << "conditioned_oracles: rejection acceptance rate " << rate << " below " << detail::kMinAcceptance;
                throw ConditioningInfeasible(msg.str(), rate);
            }
            // Pinned GBS appended last so the rest keep their ids; its type stays forced.
            const double bearing = 2.0 * std::numbers::pi * uniform01(rng);
            field.positions.push_back({r0 * std::cos(bearing), r0 * std::sin(bearing)});
            field.link_marks.push_back(serving == LinkType::LoS ? -1.0 : 2.0);
            const std::size_t pinned = field.size() - 1;
            types.push_back(serving);

            // Coverage and Laplace functional at the pre-move position.
            const double signal = sample_fading(serving, params.channel, rng) * std::exp(pinned_score);
            const double interf = detail::interference(field, types, before, pinned, params, rng);
            tally.covered += (interf == 0.0 || signal / interf > params.t_thresh) ? 1 : 0;
            if (tau > 0.0) {
                const double l = std::exp(-tau * gain * interf);
                tally.laplace_sum += l;
                tally.laplace_sq += l * l;
            }

            // Movement with the altitude held at z_t; only the horizontal step depends on z_prev.
            const double z_prev = params.h_lb + (params.h_ub - params.h_lb) * uniform01(rng);
            const double rho = std::sqrt(-std::log(uniform_open01(rng)) / (std::numbers::pi * params.mu));
            const double theta = std::numbers::pi * uniform01(rng);
            const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
            const double v_h = horizontal_speed(params.v, rho, z_t - z_prev);
            const Point2 g = field.positions[pinned];
            const double heading = std::atan2(-g.y, -g.x) + side * theta;
            const Waypoint after{v_h * std::cos(heading), v_h * std::sin(heading), z_t};
            detail::fill_types(field, after, params, types);
            types[pinned] = serving;
            const auto post = associate(field, types, after, AssociationPolicy::StrongestRss, params);
            if (post && post->id != pinned) {
                tally.any += 1;
                tally.to[index_of(post->link)] += 1;
            }
        }
        per_block[b] = tally;
    });

    detail::ConditionedTally total;
    for (const auto& t : per_block) {
        total.any += t.any;
        total.to[0] += t.to[0];
        total.to[1] += t.to[1];
        total.covered += t.covered;
        total.attempts += t.attempts;
        total.laplace_sum += t.laplace_sum;
        total.laplace_sq += t.laplace_sq;
    }
    ConditionedOracles out;
    out.acceptance_rate = static_cast<double>(n) / static_cast<double>(total.attempts);
    if (out.acceptance_rate < detail::kMinAcceptance) {
        std::ostringstream msg;
        msg << "conditioned_oracles: rejection acceptance rate " << out.acceptance_rate << " below "
            << detail::kMinAcceptance;
        throw ConditioningInfeasible(msg.str(), out.acceptance_rate);
    }
    out.handover_any = wilson_estimate(total.any, n, seed);
    out.handover_to = {wilson_estimate(total.to[0], n, seed), wilson_estimate(total.to[1], n, seed)};
    out.coverage = wilson_estimate(total.covered, n, seed);
    if (tau > 0.0) {
        out.laplace = mean_estimate(total.laplace_sum, total.laplace_sq, n, seed);
    }
    return out;
}

}  // namespace uavcov
