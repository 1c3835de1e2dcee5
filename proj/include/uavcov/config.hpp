#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

#include "errors.hpp"
#include "model.hpp"

namespace uavcov {

/// Malformed configuration text (bad line, unknown key, unparsable number).
class ConfigError : public InvalidParameter {
public:
    using InvalidParameter::InvalidParameter;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_number(std::string_view key, std::string_view text) {
    double value = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw ConfigError(std::string(key) + ": expected a finite number, got '" + std::string(text) + "'");
    }
    return value;
}

inline int parse_shape(std::string_view key, std::string_view text) {
    const double v = parse_number(key, text);
    if (v != std::floor(v) || v < 1 || v > kMaxFadingShape) {
        throw ConfigError(std::string(key) + ": fading shape must be an integer in [1, 8]");
    }
    return static_cast<int>(v);
}

}  // namespace detail

/// Applies one `key = value` setting in boundary units:
///   lambda_b, mu           per km^2
///   beamwidth_deg          degrees
///   p_t                    dBm
///   g_b, t_thresh, eta_*   dB
///   h_b, h_lb, h_ub, r_max m
///   v                      m/s
///   antenna                directional | omni
///   policy                 strongest_rss | nearest
/// Does not validate cross-field invariants; call SystemParams::validate() afterwards.
inline void apply_setting(SystemParams& p, std::string_view key, std::string_view value) {
    using detail::parse_number;
    if (key == "lambda_b") {
        p.lambda_b = parse_number(key, value) * 1e-6;
    } else if (key == "mu") {
        p.mu = parse_number(key, value) * 1e-6;
    } else if (key == "p_t") {
        p.p_t = watts_from_dbm(parse_number(key, value));
    } else if (key == "g_b") {
        p.g_b = linear_from_db(parse_number(key, value));
    } else if (key == "t_thresh") {
        p.t_thresh = linear_from_db(parse_number(key, value));
    } else if (key == "h_b") {
        p.h_b = parse_number(key, value);
    } else if (key == "h_lb") {
        p.h_lb = parse_number(key, value);
    } else if (key == "h_ub") {
        p.h_ub = parse_number(key, value);
    } else if (key == "v") {
        p.v = parse_number(key, value);
    } else if (key == "kappa") {
        p.kappa = parse_number(key, value);
    } else if (key == "antenna") {
        if (value == "directional") {
            if (!std::holds_alternative<Directional>(p.antenna)) p.antenna = Directional{};
        } else if (value == "omni") {
            if (!std::holds_alternative<Omni>(p.antenna)) p.antenna = Omni{};
        } else {
            throw ConfigError("antenna: expected 'directional' or 'omni'");
        }
    } else if (key == "beamwidth_deg") {
        const double bw = parse_number(key, value);
        if (auto* d = std::get_if<Directional>(&p.antenna)) {
            d->beamwidth_deg = bw;
        } else {
            p.antenna = Directional{bw};
        }
    } else if (key == "r_max") {
        const double r = parse_number(key, value);
        if (auto* o = std::get_if<Omni>(&p.antenna)) {
            o->r_max = r;
        } else {
            p.antenna = Omni{r};
        }
    } else if (key == "alpha_l") {
        p.channel.alpha_l = parse_number(key, value);
    } else if (key == "alpha_n") {
        p.channel.alpha_n = parse_number(key, value);
    } else if (key == "eta_l") {
        p.channel.eta_l = linear_from_db(parse_number(key, value));
    } else if (key == "eta_n") {
        p.channel.eta_n = linear_from_db(parse_number(key, value));
    } else if (key == "m_l") {
        p.channel.m_l = detail::parse_shape(key, value);
    } else if (key == "m_n") {
        p.channel.m_n = detail::parse_shape(key, value);
    } else if (key == "a") {
        p.env.a = parse_number(key, value);
    } else if (key == "b") {
        p.env.b = parse_number(key, value);
    } else if (key == "policy") {
        if (value == "strongest_rss") {
            p.policy = AssociationPolicy::StrongestRss;
        } else if (value == "nearest") {
            p.policy = AssociationPolicy::Nearest;
        } else {
            throw ConfigError("policy: expected 'strongest_rss' or 'nearest'");
        }
    } else {
        throw ConfigError("unknown key '" + std::string(key) + "'");
    }
}

/// Defaults overridden by a flat `key = value` document. '#' starts a comment. Later
/// `antenna`, `beamwidth_deg` and `r_max` lines may switch the antenna variant.
inline SystemParams parse_config(std::string_view text) {
    SystemParams p;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
        }
        try {
            apply_setting(p, key, value);
        } catch (const InvalidParameter& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    p.validate();
    return p;
}

inline SystemParams load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace uavcov
