#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "analytic.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "montecarlo.hpp"
#include "quadrature.hpp"

namespace uavcov {

enum class Engine { Analytic, MonteCarlo, Both };
enum class Metric { Coverage, Handover, Association, Void };
enum class AntennaKind { Directional, Omni };

inline const char* to_string(Engine e) noexcept {
    return e == Engine::Analytic ? "analytic" : e == Engine::MonteCarlo ? "mc" : "both";
}
inline const char* to_string(Metric m) noexcept {
    switch (m) {
        case Metric::Coverage: return "coverage";
        case Metric::Handover: return "handover";
        case Metric::Association: return "association";
        case Metric::Void: return "void";
    }
    return "";
}
inline const char* to_string(AntennaKind a) noexcept {
    return a == AntennaKind::Directional ? "directional" : "omni";
}

inline Engine parse_engine(std::string_view s) {
    if (s == "analytic") return Engine::Analytic;
    if (s == "mc") return Engine::MonteCarlo;
    if (s == "both") return Engine::Both;
    throw InvalidParameter("engine: expected analytic, mc or both, got '" + std::string(s) + "'");
}
inline Metric parse_metric(std::string_view s) {
    for (Metric m : {Metric::Coverage, Metric::Handover, Metric::Association, Metric::Void}) {
        if (s == to_string(m)) return m;
    }
    throw InvalidParameter("metrics: unknown metric '" + std::string(s) + "'");
}
inline AssociationPolicy parse_policy(std::string_view s) {
    if (s == "strongest_rss") return AssociationPolicy::StrongestRss;
    if (s == "nearest") return AssociationPolicy::Nearest;
    throw InvalidParameter("policies: unknown policy '" + std::string(s) + "'");
}
inline AntennaKind parse_antenna(std::string_view s) {
    if (s == "directional") return AntennaKind::Directional;
    if (s == "omni") return AntennaKind::Omni;
    throw InvalidParameter("antennas: unknown antenna '" + std::string(s) + "'");
}

/// Fixed config overrides applied to every point of one curve, e.g. {"lambda_b", "50"}.
struct SweepSeries {
    std::vector<std::pair<std::string, std::string>> settings;

    std::string label() const {
        std::string out;
        for (const auto& [k, v] : settings) {
            out += "|" + k + "=" + v;
        }
        return out;
    }
};

inline constexpr std::string_view kSweepAxes[] = {"lambda_b", "beamwidth_deg", "v", "kappa", "height_band", "t_thresh"};

/// Axis values use config units. A height_band value is the band's lower edge; the band keeps
/// the width of the base configuration.
struct SweepSpec {
    std::string axis = "lambda_b";
    std::vector<double> values;
    std::vector<Metric> metrics{Metric::Coverage};
    std::vector<AssociationPolicy> policies{AssociationPolicy::StrongestRss};
    std::vector<AntennaKind> antennas{AntennaKind::Directional};
    Engine engine = Engine::Analytic;
    std::uint64_t trials = 10000;
    std::uint64_t seed = 1;
    std::vector<SweepSeries> series;
    QuadratureSpec quad{};
    unsigned threads = 0;

    void validate() const {
        if (std::find(std::begin(kSweepAxes), std::end(kSweepAxes), axis) == std::end(kSweepAxes)) {
            throw InvalidParameter("axis: unknown sweep axis '" + axis + "'");
        }
        if (values.empty() || metrics.empty() || policies.empty() || antennas.empty()) {
            throw InvalidParameter("sweep: values, metrics, policies and antennas must be non-empty");
        }
        if (engine != Engine::Analytic && trials < 100) {
            throw InvalidParameter("trials: at least 100 required when the Monte Carlo engine is used");
        }
        quad.validate();
    }
};

struct ResultRow {
    std::string axis;
    std::optional<double> value;
    std::string metric;
    AssociationPolicy policy = AssociationPolicy::StrongestRss;
    AntennaKind antenna = AntennaKind::Directional;
    std::optional<double> analytic;
    std::optional<McEstimate> mc;
    std::uint64_t seed = 0;
    std::string error;
};

namespace detail {

struct SweepPoint {
    std::size_t series;
    std::optional<double> value;   // absent: axis does not apply (beamwidth with omni)
    AssociationPolicy policy;
    AntennaKind antenna;
};

inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

inline void apply_axis(SystemParams& p, const std::string& axis, double value) {
    if (axis == "height_band") {
        const double width = p.h_ub - p.h_lb;
        p.h_lb = value;
        p.h_ub = value + width;
    } else {
        apply_setting(p, axis, format_number(value));
    }
}

inline SystemParams point_params(const SystemParams& base, const SweepSpec& spec, const SweepPoint& pt) {
    SystemParams p = base;
    if (pt.antenna == AntennaKind::Omni && !is_omni(p.antenna)) p.antenna = Omni{};
    if (pt.antenna == AntennaKind::Directional && is_omni(p.antenna)) p.antenna = Directional{};
    if (!spec.series.empty()) {
        for (const auto& [k, v] : spec.series[pt.series].settings) apply_setting(p, k, v);
    }
    if (pt.value) apply_axis(p, spec.axis, *pt.value);
    p.policy = pt.policy;
    p.validate();
    return p;
}

struct PointResult {
    // Indexed like kRowMetrics.
    std::array<std::optional<double>, 5> analytic{};
    std::array<std::optional<McEstimate>, 5> mc{};
    std::string error;
};

inline constexpr std::array<const char*, 5> kRowMetrics{"coverage", "handover", "association_los",
                                                        "association_nlos", "void"};

inline bool wants(const SweepSpec& spec, Metric m) {
    return std::find(spec.metrics.begin(), spec.metrics.end(), m) != spec.metrics.end();
}

inline PointResult evaluate_point(const SystemParams& base, const SweepSpec& spec, const SweepPoint& pt) {
    PointResult r;
    try {
        const SystemParams p = point_params(base, spec, pt);
        if (spec.engine != Engine::MonteCarlo) {
            if (wants(spec, Metric::Coverage)) {
                const CoverageBreakdown b = coverage_for_policy(p, spec.quad);
                r.analytic = {b.total, b.handover_prob, b.association[0], b.association[1], b.void_prob};
            } else {
                if (wants(spec, Metric::Handover)) r.analytic[1] = handover_probability(p, spec.quad);
                if (wants(spec, Metric::Association)) {
                    const auto a = association_probabilities(p, spec.quad);
                    r.analytic[2] = a[0];
                    r.analytic[3] = a[1];
                }
                if (wants(spec, Metric::Void)) r.analytic[4] = void_probability_marginal(p, spec.quad);
            }
        }
        if (spec.engine != Engine::Analytic) {
            const McSummary s = simulate_summary(p, spec.trials, spec.seed, 1);
            r.mc = {s.coverage, s.handover, s.association_los, s.association_nlos, s.void_prob};
        }
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

}  // namespace detail

/// Evaluates every (series, antenna, policy, value) point, concurrently when threads != 1,
/// and returns rows ordered by series, antenna, policy, value, metric.
inline std::vector<ResultRow> run_sweep(const SweepSpec& spec, const SystemParams& base) {
    spec.validate();
    const std::size_t n_series = std::max<std::size_t>(spec.series.size(), 1);
    std::vector<detail::SweepPoint> points;
    for (std::size_t s = 0; s < n_series; ++s) {
        for (AntennaKind ant : spec.antennas) {
            for (AssociationPolicy pol : spec.policies) {
                if (spec.axis == "beamwidth_deg" && ant == AntennaKind::Omni) {
                    points.push_back({s, std::nullopt, pol, ant});
                    continue;
                }
                for (double v : spec.values) points.push_back({s, v, pol, ant});
            }
        }
    }

    std::vector<detail::PointResult> results(points.size());
    unsigned threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, points.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1)) {
            results[i] = detail::evaluate_point(base, spec, points[i]);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    std::vector<ResultRow> rows;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        const auto& res = results[i];
        const std::string axis_label =
            spec.axis + (spec.series.empty() ? std::string() : spec.series[pt.series].label());
        for (Metric m : spec.metrics) {
            std::vector<std::size_t> slots;
            switch (m) {
                case Metric::Coverage: slots = {0}; break;
                case Metric::Handover: slots = {1}; break;
                case Metric::Association: slots = {2, 3}; break;
                case Metric::Void: slots = {4}; break;
            }
            for (std::size_t slot : slots) {
                ResultRow row;
                row.axis = axis_label;
                row.value = pt.value;
                row.metric = detail::kRowMetrics[slot];
                row.policy = pt.policy;
                row.antenna = pt.antenna;
                row.analytic = res.analytic[slot];
                row.mc = res.mc[slot];
                row.seed = spec.seed;
                row.error = res.error;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

inline constexpr std::string_view kCsvHeader =
    "axis,value,metric,policy,antenna,analytic,mc_mean,mc_ci_low,mc_ci_high,n,seed,error";

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else if (c == '\n' || c == '\r') out += ' ';
        else out += c;
    }
    return out + "\"";
}

inline std::string optional_number(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string();
}

}  // namespace detail

inline void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kCsvHeader << '\n';
    for (const ResultRow& r : rows) {
        out << detail::csv_field(r.axis) << ',' << detail::optional_number(r.value) << ',' << r.metric << ','
            << to_string(r.policy) << ',' << to_string(r.antenna) << ',' << detail::optional_number(r.analytic)
            << ',';
        if (r.mc) {
            out << detail::format_number(r.mc->mean) << ',' << detail::format_number(r.mc->ci_low) << ','
                << detail::format_number(r.mc->ci_high) << ',' << r.mc->n;
        } else {
            out << ",,,";
        }
        out << ',' << r.seed << ',' << detail::csv_field(r.error) << '\n';
    }
}

/// Sweeps behind the four published figures. Trends only; the published curves are not
/// tabulated, so the axis ranges are choices.
inline SweepSpec figure_preset(std::string_view id) {
    SweepSpec s;
    s.engine = Engine::Both;
    const std::vector<double> densities{10, 20, 50, 100, 200, 500, 1000};
    std::vector<double> beamwidths;
    for (double bw = 20; bw <= 170; bw += 10) beamwidths.push_back(bw);
    beamwidths.push_back(179);

    if (id == "fig2a") {
        s.axis = "lambda_b";
        s.values = densities;
        s.metrics = {Metric::Coverage, Metric::Handover};
        s.antennas = {AntennaKind::Directional, AntennaKind::Omni};
        s.series = {SweepSeries{{{"h_lb", "90"}, {"h_ub", "150"}}}, SweepSeries{{{"h_ub", "210"}, {"h_lb", "150"}}}};
    } else if (id == "fig2b") {
        s.axis = "lambda_b";
        s.values = densities;
        s.metrics = {Metric::Coverage};
        s.policies = {AssociationPolicy::StrongestRss, AssociationPolicy::Nearest};
        s.antennas = {AntennaKind::Directional, AntennaKind::Omni};
    } else if (id == "fig3a") {
        s.axis = "beamwidth_deg";
        s.values = beamwidths;
        s.metrics = {Metric::Handover};
        s.antennas = {AntennaKind::Directional, AntennaKind::Omni};
        for (const char* l : {"50", "100", "500"}) s.series.push_back(SweepSeries{{{"lambda_b", l}}});
    } else if (id == "fig3b") {
        s.axis = "beamwidth_deg";
        s.values = beamwidths;
        s.metrics = {Metric::Coverage};
        s.antennas = {AntennaKind::Directional, AntennaKind::Omni};
        for (const char* l : {"50", "100", "500"}) {
            for (const char* k : {"0.1", "0.3", "0.5"}) {
                s.series.push_back(SweepSeries{{{"lambda_b", l}, {"kappa", k}}});
            }
        }
    } else {
        throw InvalidParameter("figure: unknown preset '" + std::string(id) + "' (expected fig2a, fig2b, fig3a, fig3b)");
    }
    return s;
}

// ---------------------------------------------------------------------------------------
// Analytic vs Monte Carlo validation
// ---------------------------------------------------------------------------------------

struct ValidationEntry {
    std::string metric;
    std::optional<double> analytic;
    std::optional<McEstimate> mc;
    double gap = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string error;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;

    bool passed() const {
        return std::all_of(entries.begin(), entries.end(), [](const ValidationEntry& e) { return e.pass; });
    }
};

/// Gap threshold max(0.02, 3 CI half-widths).
inline double agreement_threshold(const McEstimate& e) { return std::max(0.02, 3.0 * e.half_width()); }

/// Association, void and handover under params.policy; coverage under both policies.
inline ValidationReport validate_engines(const SystemParams& params, std::uint64_t trials, std::uint64_t seed,
                                         const QuadratureSpec& quad = {}, unsigned threads = 0) {
    if (trials < 10000) {
        throw InvalidParameter("validate: at least 10^4 trials required");
    }
    params.validate();
    SystemParams strongest = params;
    strongest.policy = AssociationPolicy::StrongestRss;
    SystemParams nearest = params;
    nearest.policy = AssociationPolicy::Nearest;

    std::array<std::optional<CoverageBreakdown>, 2> analytic;
    std::array<std::string, 2> analytic_error;
    std::array<std::optional<McSummary>, 2> mc;
    std::array<std::string, 2> mc_error;
    const std::array<const SystemParams*, 2> by_policy{&strongest, &nearest};
    for (std::size_t i = 0; i < 2; ++i) {
        try {
            analytic[i] = coverage_for_policy(*by_policy[i], quad);
        } catch (const std::exception& e) {
            analytic_error[i] = e.what();
        }
        try {
            mc[i] = simulate_summary(*by_policy[i], trials, seed, threads);
        } catch (const std::exception& e) {
            mc_error[i] = e.what();
        }
    }

    ValidationReport report;
    auto add = [&](std::string name, std::size_t policy_index, auto analytic_of, auto mc_of) {
        ValidationEntry e;
        e.metric = std::move(name);
        if (analytic[policy_index]) e.analytic = analytic_of(*analytic[policy_index]);
        if (mc[policy_index]) e.mc = mc_of(*mc[policy_index]);
        e.error = analytic_error[policy_index].empty() ? mc_error[policy_index] : analytic_error[policy_index];
        if (e.analytic && e.mc) {
            e.gap = std::abs(*e.analytic - e.mc->mean);
            e.threshold = agreement_threshold(*e.mc);
            e.pass = e.gap <= e.threshold;
        }
        report.entries.push_back(std::move(e));
    };
    const std::size_t own = params.policy == AssociationPolicy::StrongestRss ? 0 : 1;
    add("association_los", own, [](const CoverageBreakdown& b) { return b.association[0]; },
        [](const McSummary& s) { return s.association_los; });
    add("association_nlos", own, [](const CoverageBreakdown& b) { return b.association[1]; },
        [](const McSummary& s) { return s.association_nlos; });
    add("void", own, [](const CoverageBreakdown& b) { return b.void_prob; },
        [](const McSummary& s) { return s.void_prob; });
    add("handover", own, [](const CoverageBreakdown& b) { return b.handover_prob; },
        [](const McSummary& s) { return s.handover; });
    add("coverage_strongest_rss", 0, [](const CoverageBreakdown& b) { return b.total; },
        [](const McSummary& s) { return s.coverage; });
    add("coverage_nearest", 1, [](const CoverageBreakdown& b) { return b.total; },
        [](const McSummary& s) { return s.coverage; });
    return report;
}

inline void write_report(std::ostream& out, const ValidationReport& report) {
    out << "metric,analytic,mc_mean,mc_ci_low,mc_ci_high,gap,threshold,status,error\n";
    for (const ValidationEntry& e : report.entries) {
        out << e.metric << ',' << detail::optional_number(e.analytic) << ',';
        if (e.mc) {
            out << detail::format_number(e.mc->mean) << ',' << detail::format_number(e.mc->ci_low) << ','
                << detail::format_number(e.mc->ci_high);
        } else {
            out << ",,";
        }
        out << ',' << detail::format_number(e.gap) << ',' << detail::format_number(e.threshold) << ','
            << (e.pass ? "pass" : "FAIL") << ',' << detail::csv_field(e.error) << '\n';
    }
}

}  // namespace uavcov
