#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "uavcov/montecarlo.hpp"

using namespace uavcov;

namespace {

GbsField ring_field(std::size_t n, double r, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    GbsField f;
    f.radius = r + 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = 2.0 * std::numbers::pi * uniform01(rng);
        f.positions.push_back({r * std::cos(phi), r * std::sin(phi)});
        f.link_marks.push_back(uniform01(rng));
    }
    return f;
}

double los_fraction(const std::vector<LinkType>& types) {
    double n = 0.0;
    for (LinkType t : types) n += t == LinkType::LoS ? 1.0 : 0.0;
    return n / static_cast<double>(types.size());
}

}  // namespace

// ---- network sampling -----------------------------------------------------------------------

TEST(SamplePpp, CountMomentsAndSpread) {
    const double lambda = 100e-6;
    const double radius = 1000.0;
    const double mean = lambda * std::numbers::pi * radius * radius;
    EXPECT_NEAR(mean, 314.16, 0.01);
    CounterRng rng(1, 0);
    const int fields = 10'000;
    double sum = 0.0;
    double sq = 0.0;
    double r2 = 0.0;
    double points = 0.0;
    for (int i = 0; i < fields; ++i) {
        const GbsField f = sample_ppp(lambda, radius, rng);
        ASSERT_EQ(f.positions.size(), f.link_marks.size());
        const double n = static_cast<double>(f.size());
        sum += n;
        sq += n * n;
        for (const Point2& p : f.positions) {
            ASSERT_LE(std::hypot(p.x, p.y), radius);
            r2 += p.x * p.x + p.y * p.y;
        }
        points += n;
    }
    const double m = sum / fields;
    EXPECT_NEAR(m, mean, 0.01 * mean);
    EXPECT_NEAR(sq / fields - m * m, mean, 0.05 * mean);
    // Uniform on the disc: E[r^2] = R^2 / 2.
    EXPECT_NEAR(r2 / points, 0.5 * radius * radius, 0.005 * radius * radius);
}

TEST(SamplePpp, EmptyWithoutDensityAndRejectsBadInput) {
    CounterRng rng(2, 0);
    EXPECT_EQ(sample_ppp(0.0, 500.0, rng).size(), 0u);
    EXPECT_THROW(sample_ppp(-1.0, 500.0, rng), InvalidParameter);
    EXPECT_THROW(sample_ppp(1e-4, 0.0, rng), InvalidParameter);
}

TEST(ClassifyLinks, LosFractionMatchesProbability) {
    const EnvironmentParams env;
    const std::size_t n = 100'000;
    const GbsField f = ring_field(n, 90.0, 3);
    const double p = los_probability(90.0, 120.0, env, 30.0);
    EXPECT_NEAR(p, 0.968, 5e-4);
    const double frac = los_fraction(classify_links(f, Waypoint{0.0, 0.0, 120.0}, 30.0, env));
    EXPECT_NEAR(frac, p, 3.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST(ClassifyLinks, LowAltitudeLimit) {
    // At grazing elevation P_L tends to 1 / (1 + a exp(a b)).
    const EnvironmentParams env;
    const std::size_t n = 100'000;
    const GbsField f = ring_field(n, 1000.0, 4);
    const double limit = 1.0 / (1.0 + env.a * std::exp(env.a * env.b));
    const double p = los_probability(1000.0, 30.001, env, 30.0);
    EXPECT_NEAR(p, limit, 1e-5);
    const double frac = los_fraction(classify_links(f, Waypoint{0.0, 0.0, 30.001}, 30.0, env));
    EXPECT_NEAR(frac, p, 3.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST(ClassifyLinks, DeterministicGivenMarks) {
    const EnvironmentParams env;
    const GbsField f = ring_field(1000, 300.0, 5);
    const Waypoint uav{10.0, -20.0, 110.0};
    EXPECT_EQ(classify_links(f, uav, 30.0, env), classify_links(f, uav, 30.0, env));
}

// ---- association ----------------------------------------------------------------------------

TEST(Associate, SingleVisibleGbs) {
    const SystemParams p;
    GbsField f;
    f.radius = 500.0;
    f.positions = {{40.0, 0.0}, {400.0, 0.0}};
    f.link_marks = {0.5, 0.5};
    const Waypoint uav{0.0, 0.0, 120.0};
    const auto types = classify_links(f, uav, p.h_b, p.env);
    for (AssociationPolicy policy : {AssociationPolicy::StrongestRss, AssociationPolicy::Nearest}) {
        const auto a = associate(f, types, uav, policy, p);
        ASSERT_TRUE(a.has_value());
        EXPECT_EQ(a->id, 0u);
        EXPECT_NEAR(a->r, 40.0, 1e-12);
    }
}

TEST(Associate, NoneOutsideReceivingRadius) {
    const SystemParams p;
    GbsField f;
    f.radius = 500.0;
    f.positions = {{200.0, 0.0}};
    f.link_marks = {0.0};
    const Waypoint uav{0.0, 0.0, 120.0};
    EXPECT_FALSE(associate(f, classify_links(f, uav, p.h_b, p.env), uav, AssociationPolicy::Nearest, p));
}

TEST(Associate, StrongestMayBeFartherThanNearest) {
    const SystemParams p;
    GbsField f;
    f.radius = 500.0;
    f.positions = {{30.0, 0.0}, {0.0, 60.0}};
    const Waypoint uav{0.0, 0.0, 120.0};
    const std::vector<LinkType> types{LinkType::NLoS, LinkType::LoS};
    f.link_marks = {1.0, 0.0};
    ASSERT_GT(log_path_loss(LinkType::LoS, 60.0, 90.0, p.channel), log_path_loss(LinkType::NLoS, 30.0, 90.0, p.channel));
    EXPECT_EQ(associate(f, types, uav, AssociationPolicy::StrongestRss, p)->id, 1u);
    EXPECT_EQ(associate(f, types, uav, AssociationPolicy::Nearest, p)->id, 0u);
}

TEST(Associate, TiesGoToLowestId) {
    const SystemParams p;
    GbsField f;
    f.radius = 500.0;
    f.positions = {{0.0, 50.0}, {50.0, 0.0}, {-50.0, 0.0}};
    f.link_marks = {0.0, 0.0, 0.0};
    const Waypoint uav{0.0, 0.0, 120.0};
    const std::vector<LinkType> types(3, LinkType::LoS);
    for (AssociationPolicy policy : {AssociationPolicy::StrongestRss, AssociationPolicy::Nearest}) {
        EXPECT_EQ(associate(f, types, uav, policy, p)->id, 0u);
    }
}

TEST(Associate, PoliciesAgreeForSymmetricChannel) {
    SystemParams p;
    p.channel = oracle::symmetric_channel();
    CounterRng rng(6, 0);
    for (int i = 0; i < 2000; ++i) {
        const GbsField f = sample_ppp(p.lambda_b, 300.0, rng);
        const Waypoint uav{0.0, 0.0, 100.0 + 40.0 * uniform01(rng)};
        const auto types = classify_links(f, uav, p.h_b, p.env);
        const auto s = associate(f, types, uav, AssociationPolicy::StrongestRss, p);
        const auto n = associate(f, types, uav, AssociationPolicy::Nearest, p);
        ASSERT_EQ(s.has_value(), n.has_value());
        if (s) {
            ASSERT_EQ(s->id, n->id);
        }
    }
}

// ---- episodes -------------------------------------------------------------------------------

TEST(Episode, FullFailurePenaltyNeverCoversAHandover) {
    SystemParams p;
    p.kappa = 1.0;
    detail::EpisodeScratch scratch;
    int handovers = 0;
    for (std::uint64_t e = 0; e < 5000; ++e) {
        CounterRng rng(7, e);
        const auto o = detail::simulate_episode(p, rng, scratch);
        if (o.handover) {
            ++handovers;
            EXPECT_FALSE(o.covered);
        }
    }
    EXPECT_GT(handovers, 0);
}

TEST(Episode, EmptyNetwork) {
    SystemParams p;
    p.lambda_b = 0.0;
    for (std::uint64_t e = 0; e < 100; ++e) {
        CounterRng rng(8, e);
        const auto o = simulate_episode(p, rng);
        EXPECT_TRUE(o.void_pre);
        EXPECT_TRUE(o.void_post);
        EXPECT_FALSE(o.handover);
        EXPECT_FALSE(o.covered);
        EXPECT_FALSE(o.sir.has_value());
    }
}

TEST(Episode, HoveringRarelyHandsOver) {
    // Only the altitude wiggle inside a 1 m band can change the serving GBS.
    SystemParams p;
    p.v = 0.0;
    p.h_lb = 119.5;
    p.h_ub = 120.5;
    const auto est = estimate([](const EpisodeOutcome& o) { return o.handover; }, 20'000, 9, p, 1);
    EXPECT_LT(est.mean, 0.005);
}

TEST(Episode, InvariantToCommonGainScaling) {
    const SystemParams p;
    SystemParams scaled = p;
    scaled.p_t *= 10.0;
    scaled.g_b *= 100.0;
    for (std::uint64_t e = 0; e < 2000; ++e) {
        CounterRng a(10, e);
        CounterRng b(10, e);
        const auto oa = simulate_episode(p, a);
        const auto ob = simulate_episode(scaled, b);
        ASSERT_EQ(oa.covered, ob.covered);
        ASSERT_EQ(oa.handover, ob.handover);
        ASSERT_EQ(oa.associated_post.has_value(), ob.associated_post.has_value());
        if (oa.associated_post) {
            ASSERT_EQ(oa.associated_post->id, ob.associated_post->id);
        }
    }
}

TEST(Episode, PoliciesAgreeForSymmetricChannel) {
    SystemParams s;
    s.channel = oracle::symmetric_channel();
    SystemParams n = s;
    n.policy = AssociationPolicy::Nearest;
    for (std::uint64_t e = 0; e < 2000; ++e) {
        CounterRng a(11, e);
        CounterRng b(11, e);
        const auto os = simulate_episode(s, a);
        const auto on = simulate_episode(n, b);
        ASSERT_EQ(os.handover, on.handover);
        ASSERT_EQ(os.covered, on.covered);
    }
}

// ---- estimation -----------------------------------------------------------------------------

TEST(Estimate, ConstantMetric) {
    const SystemParams p;
    const auto est = estimate([](const EpisodeOutcome&) { return true; }, 1000, 12, p, 1);
    EXPECT_EQ(est.mean, 1.0);
    EXPECT_NEAR(est.ci_high, 1.0, 1e-12);
    EXPECT_LT(est.ci_low, 1.0);
    EXPECT_EQ(est.n, 1000u);
    EXPECT_EQ(est.seed, 12u);
    EXPECT_THROW(estimate([](const EpisodeOutcome&) { return true; }, 10, 12, p), InvalidParameter);
}

TEST(Estimate, ReproducibleAndThreadIndependent) {
    const SystemParams p;
    auto covered = [](const EpisodeOutcome& o) { return o.covered; };
    const auto a = estimate(covered, 5000, 13, p, 1);
    const auto b = estimate(covered, 5000, 13, p, 1);
    const auto c = estimate(covered, 5000, 13, p, 3);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.mean, c.mean);
    EXPECT_EQ(a.ci_low, c.ci_low);
    const auto s1 = simulate_summary(p, 5000, 13, 1);
    const auto s3 = simulate_summary(p, 5000, 13, 3);
    EXPECT_EQ(s1.coverage.mean, a.mean);
    EXPECT_EQ(s1.handover.mean, s3.handover.mean);
    EXPECT_EQ(s1.association_los.mean, s3.association_los.mean);
}

TEST(Estimate, IntervalNarrowsToTarget) {
    const auto s = simulate_summary(SystemParams{}, 100'000, 14);
    EXPECT_LT(s.coverage.ci_high - s.coverage.ci_low, 0.01);
    EXPECT_LE(s.coverage.ci_low, s.coverage.mean);
    EXPECT_GE(s.coverage.ci_high, s.coverage.mean);
}

TEST(Estimate, WilsonMatchesIndependentFormula) {
    const auto w = wilson_estimate(300, 1000, 0);
    const auto ref = oracle::wilson(0.3, 1000.0, kZ95);
    EXPECT_NEAR(w.ci_low, ref.low, 1e-12);
    EXPECT_NEAR(w.ci_high, ref.high, 1e-12);
    EXPECT_THROW(wilson_estimate(1, 0, 0), InvalidParameter);
}

TEST(Estimate, LargerFieldLeavesEstimatesUnchanged) {
    // The simulated disc already covers every receiving disc the UAV can reach.
    const SystemParams p;
    const auto base = simulate_summary(p, 10'000, 15, 1, 1.0);
    const auto wide = simulate_summary(p, 10'000, 15, 1, 2.0);
    EXPECT_LT(std::abs(wide.coverage.mean - base.coverage.mean), base.coverage.half_width());
    EXPECT_LT(std::abs(wide.handover.mean - base.handover.mean), base.handover.half_width());
    EXPECT_EQ(wide.coverage.mean, base.coverage.mean);
}

TEST(Estimate, HandoverGrowsWithDensityAndSpeed) {
    auto handover = [](const SystemParams& p) { return simulate_summary(p, 20'000, 16, 1).handover.mean; };
    double prev = -1.0;
    for (double lambda : {10e-6, 100e-6, 500e-6}) {
        SystemParams p;
        p.lambda_b = lambda;
        const double h = handover(p);
        EXPECT_GT(h, prev) << lambda;
        prev = h;
    }
    prev = -1.0;
    for (double v : {5.0, 20.0, 40.0}) {
        SystemParams p;
        p.v = v;
        const double h = handover(p);
        EXPECT_GT(h, prev) << v;
        prev = h;
    }
}

// ---- conditioned oracles ----------------------------------------------------------------------

TEST(ConditionedOracles, IsolatedServingGbs) {
    SystemParams p;
    p.lambda_b = 1e-12;
    const auto o = conditioned_oracles(p, 50.0, 120.0, LinkType::LoS, 1000, 17, 1e-3);
    EXPECT_EQ(o.handover_any.mean, 0.0);
    EXPECT_EQ(o.coverage.mean, 1.0);
    ASSERT_TRUE(o.laplace.has_value());
    EXPECT_EQ(o.laplace->mean, 1.0);
    EXPECT_NEAR(o.acceptance_rate, 1.0, 1e-12);
}

TEST(ConditionedOracles, InfeasibleConditioningIsReported) {
    SystemParams p;
    p.lambda_b = 5e-3;
    try {
        conditioned_oracles(p, 150.0, 120.0, LinkType::LoS, 100, 18);
        FAIL() << "expected ConditioningInfeasible";
    } catch (const ConditioningInfeasible& e) {
        EXPECT_LT(e.acceptance_rate, 1e-4);
    }
}

TEST(ConditionedOracles, RejectsServingDistanceOutsideBeam) {
    const SystemParams p;
    EXPECT_THROW(conditioned_oracles(p, 0.0, 120.0, LinkType::LoS, 100, 19), InvalidParameter);
    EXPECT_THROW(conditioned_oracles(p, 200.0, 120.0, LinkType::LoS, 100, 19), InvalidParameter);
}
