#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace uavcov {

struct QuadratureSpec {
    double rel_tol = 1e-4;
    double abs_tol = 1e-8;
    int max_depth = 12;

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || max_depth < 1) {
            throw InvalidParameter("QuadratureSpec: tolerances must be positive and max_depth >= 1");
        }
    }

    /// Same spec with the relative tolerance scaled, used for integrals nested inside others.
    QuadratureSpec tightened(double factor) const {
        QuadratureSpec s = *this;
        s.rel_tol *= factor;
        s.abs_tol *= factor;
        return s;
    }
};

template <class V>
struct QuadratureResult {
    V value;
    double error;   // largest component error estimate
    int evaluations;
};

namespace detail {

// Value-type plumbing so one adaptive driver handles scalars and fixed-size vectors.
template <class V>
struct Components;

template <>
struct Components<double> {
    static constexpr std::size_t size = 1;
    static double& at(double& v, std::size_t) { return v; }
    static double at(const double& v, std::size_t) { return v; }
    static double zero() { return 0.0; }
};

template <std::size_t N>
struct Components<std::array<double, N>> {
    static constexpr std::size_t size = N;
    static double& at(std::array<double, N>& v, std::size_t i) { return v[i]; }
    static double at(const std::array<double, N>& v, std::size_t i) { return v[i]; }
    static std::array<double, N> zero() { return {}; }
};

// Gauss-Kronrod 7/15 abscissae (positive half) and weights.
inline constexpr std::array<double, 8> kXgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class V>
struct Panel {
    double a;
    double b;
    int depth;
    V value;
    std::array<double, Components<V>::size> err;
};

template <class V, class F>
Panel<V> gk15(F& fn, double a, double b, int depth) {
    using C = Components<V>;
    constexpr std::size_t n = C::size;
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);

    std::array<V, 15> f;
    f[7] = fn(center);
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        f[j] = fn(center - dx);
        f[14 - j] = fn(center + dx);
    }

    Panel<V> p{a, b, depth, C::zero(), {}};
    for (std::size_t c = 0; c < n; ++c) {
        const double fc = C::at(f[7], c);
        double k15 = kWgk[7] * fc;
        double g7 = kWg[3] * fc;
        double abs_k = std::abs(k15);
        for (int j = 0; j < 7; ++j) {
            const double s = C::at(f[j], c) + C::at(f[14 - j], c);
            k15 += kWgk[j] * s;
            abs_k += kWgk[j] * (std::abs(C::at(f[j], c)) + std::abs(C::at(f[14 - j], c)));
            if (j % 2 == 1) {
                g7 += kWg[j / 2] * s;
            }
        }
        const double mean = 0.5 * k15;
        double asc = kWgk[7] * std::abs(fc - mean);
        for (int j = 0; j < 7; ++j) {
            asc += kWgk[j] * (std::abs(C::at(f[j], c) - mean) + std::abs(C::at(f[14 - j], c) - mean));
        }
        double e = std::abs((k15 - g7) * half);
        asc *= std::abs(half);
        if (asc != 0.0 && e != 0.0) {
            e = asc * std::min(1.0, std::pow(200.0 * e / asc, 1.5));
        }
        const double roundoff = 50.0 * std::numeric_limits<double>::epsilon() * abs_k * std::abs(half);
        if (roundoff > e) {
            e = roundoff;
        }
        C::at(p.value, c) = k15 * half;
        p.err[c] = e;
    }
    return p;
}

// Magnitude each component's relative tolerance refers to: its own absolute value.
struct OwnMagnitude {
    template <class V>
    double operator()(const V& value, std::size_t c) const {
        return std::abs(Components<V>::at(value, c));
    }
};

template <class V, class F, class Scale>
QuadratureResult<V> adaptive(F& fn, double lo, double hi, const QuadratureSpec& spec, const Scale& scale) {
    using C = Components<V>;
    constexpr std::size_t n = C::size;

    std::vector<Panel<V>> panels;
    panels.push_back(gk15<V>(fn, lo, hi, 0));
    int evaluations = 15;
    std::vector<bool> frozen(1, false);

    auto totals = [&](V& value, std::array<double, n>& err) {
        value = C::zero();
        err.fill(0.0);
        for (const auto& p : panels) {
            for (std::size_t c = 0; c < n; ++c) {
                C::at(value, c) += C::at(p.value, c);
                err[c] += p.err[c];
            }
        }
    };

    V value;
    std::array<double, n> err;
    for (;;) {
        totals(value, err);
        std::array<double, n> tol;
        bool converged = true;
        for (std::size_t c = 0; c < n; ++c) {
            tol[c] = std::max(spec.rel_tol * scale(value, c), spec.abs_tol);
            converged = converged && err[c] <= tol[c];
        }
        if (converged) {
            break;
        }
        // Split the panel contributing the largest share of any unconverged component.
        std::size_t worst = panels.size();
        double worst_score = -1.0;
        for (std::size_t i = 0; i < panels.size(); ++i) {
            if (frozen[i]) continue;
            double score = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                if (err[c] > tol[c]) {
                    score = std::max(score, panels[i].err[c] / tol[c]);
                }
            }
            if (score > worst_score) {
                worst_score = score;
                worst = i;
            }
        }
        if (worst == panels.size() || worst_score <= 0.0) {
            double e = *std::max_element(err.begin(), err.end());
            std::ostringstream msg;
            msg << "integrate: subdivision cap (depth " << spec.max_depth << ") reached on ["
                << lo << ", " << hi << "], error estimate " << e;
            throw NumericalFailure(msg.str(), C::at(value, 0), e);
        }
        const Panel<V> p = panels[worst];
        const double mid = 0.5 * (p.a + p.b);
        panels[worst] = gk15<V>(fn, p.a, mid, p.depth + 1);
        panels.push_back(gk15<V>(fn, mid, p.b, p.depth + 1));
        evaluations += 30;
        const bool at_cap = p.depth + 1 >= spec.max_depth;
        frozen[worst] = at_cap;
        frozen.push_back(at_cap);
    }
    return {value, *std::max_element(err.begin(), err.end()), evaluations};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) integration with global bisection.
///
/// Converges when every component satisfies err <= max(rel_tol * scale(I, c), abs_tol), where
/// scale defaults to |I_c|. Panels may be bisected at most `max_depth` times; exhausting all
/// splittable panels throws NumericalFailure carrying the best estimate. An infinite upper
/// limit is mapped onto [0, 1) through x = lo + t/(1-t).
template <class V, class F, class Scale = detail::OwnMagnitude>
QuadratureResult<V> integrate_detailed(F&& fn, double lo, double hi, const QuadratureSpec& spec = {},
                                       const Scale& scale = {}) {
    spec.validate();
    if (!(lo <= hi)) {
        throw InvalidParameter("integrate: lower limit exceeds upper limit");
    }
    if (lo == hi) {
        return {detail::Components<V>::zero(), 0.0, 0};
    }
    if (std::isinf(hi)) {
        auto mapped = [&](double t) -> V {
            const double s = 1.0 - t;
            V y = fn(lo + t / s);
            const double jac = 1.0 / (s * s);
            for (std::size_t c = 0; c < detail::Components<V>::size; ++c) {
                detail::Components<V>::at(y, c) *= jac;
            }
            return y;
        };
        return detail::adaptive<V>(mapped, 0.0, 1.0, spec, scale);
    }
    return detail::adaptive<V>(fn, lo, hi, spec, scale);
}

template <class F>
double integrate(F&& fn, double lo, double hi, const QuadratureSpec& spec = {}) {
    return integrate_detailed<double>(std::forward<F>(fn), lo, hi, spec).value;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussLegendreRule gauss_legendre(int n) {
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace uavcov
