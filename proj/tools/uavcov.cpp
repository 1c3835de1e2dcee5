// Command-line front end: analytic evaluation, simulation, sweeps, figure presets and
// analytic-vs-simulation validation. All tabular output is CSV.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "uavcov/uavcov.hpp"

namespace {

struct CommonOptions {
    std::string config;
    std::string output;
    std::uint64_t seed = 1;
    std::uint64_t trials = 0;  // 0: subcommand default
    double rel_tol = 1e-4;
    unsigned threads = 0;
    std::vector<std::string> overrides;
};

uavcov::SystemParams base_params(const CommonOptions& opt) {
    uavcov::SystemParams p = opt.config.empty() ? uavcov::SystemParams{} : uavcov::load_config(opt.config);
    for (const std::string& kv : opt.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw uavcov::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        uavcov::apply_setting(p, uavcov::detail::trim(std::string_view(kv).substr(0, eq)),
                              uavcov::detail::trim(std::string_view(kv).substr(eq + 1)));
    }
    p.validate();
    return p;
}

uavcov::QuadratureSpec quadrature(const CommonOptions& opt) {
    uavcov::QuadratureSpec q;
    q.rel_tol = opt.rel_tol;
    q.validate();
    return q;
}

// Writes to --output when given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw std::runtime_error("cannot open output file '" + path + "'");
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = uavcov::detail::trim(item);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

void run_analytic(const CommonOptions& opt) {
    const auto p = base_params(opt);
    const auto b = uavcov::coverage_for_policy(p, quadrature(opt));
    Sink sink(opt.output);
    auto& out = sink.stream();
    using uavcov::detail::format_number;
    out << "metric,value\n";
    out << "coverage," << format_number(b.total) << '\n';
    out << "coverage_los_serving," << format_number(b.per_link[0]) << '\n';
    out << "coverage_nlos_serving," << format_number(b.per_link[1]) << '\n';
    out << "sir_coverage," << format_number(b.sir_coverage) << '\n';
    out << "handover," << format_number(b.handover_prob) << '\n';
    out << "association_los," << format_number(b.association[0]) << '\n';
    out << "association_nlos," << format_number(b.association[1]) << '\n';
    out << "void," << format_number(b.void_prob) << '\n';
    if (const long clamps = uavcov::coverage_clamp_events().load(); clamps != 0) {
        std::cerr << "warning: " << clamps << " conditional coverage values clamped into [0, 1]\n";
    }
}

void run_simulate(const CommonOptions& opt) {
    const auto p = base_params(opt);
    const std::uint64_t n = opt.trials ? opt.trials : 100000;
    const auto s = uavcov::simulate_summary(p, n, opt.seed, opt.threads);
    Sink sink(opt.output);
    auto& out = sink.stream();
    using uavcov::detail::format_number;
    out << "metric,mean,ci_low,ci_high,n,seed\n";
    auto row = [&](const char* name, const uavcov::McEstimate& e) {
        out << name << ',' << format_number(e.mean) << ',' << format_number(e.ci_low) << ','
            << format_number(e.ci_high) << ',' << e.n << ',' << e.seed << '\n';
    };
    row("coverage", s.coverage);
    row("handover", s.handover);
    row("association_los", s.association_los);
    row("association_nlos", s.association_nlos);
    row("void", s.void_prob);
}

void emit_sweep(const CommonOptions& opt, uavcov::SweepSpec spec) {
    const auto p = base_params(opt);
    spec.seed = opt.seed;
    if (opt.trials) spec.trials = opt.trials;
    spec.quad = quadrature(opt);
    spec.threads = opt.threads;
    const auto rows = uavcov::run_sweep(spec, p);
    Sink sink(opt.output);
    uavcov::write_csv(sink.stream(), rows);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Handover and coverage probability of a mobile UAV user in a Poisson cellular network"};
    app.require_subcommand(1);
    app.fallthrough();

    CommonOptions opt;
    app.add_option("--config", opt.config, "Flat key = value parameter file (boundary units)");
    app.add_option("--set", opt.overrides, "Extra key=value override, applied after --config");
    app.add_option("--output", opt.output, "Output path (default stdout)");
    app.add_option("--seed", opt.seed, "Monte Carlo seed");
    app.add_option("--trials", opt.trials, "Monte Carlo episodes per point");
    app.add_option("--rel-tol", opt.rel_tol, "Relative tolerance of the outer quadrature")->check(CLI::PositiveNumber);
    app.add_option("--threads", opt.threads, "Worker threads (0: hardware concurrency)");

    auto* analytic = app.add_subcommand("analytic", "Evaluate the analytic expressions");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates with 95% intervals");

    auto* sweep = app.add_subcommand("sweep", "Sweep one parameter axis");
    std::string axis = "lambda_b", values, metrics = "coverage", policies = "strongest_rss",
                antennas = "directional", engine = "analytic";
    sweep->add_option("--axis", axis, "lambda_b | beamwidth_deg | v | kappa | height_band | t_thresh");
    sweep->add_option("--values", values, "Comma-separated axis values in config units")->required();
    sweep->add_option("--metrics", metrics, "Subset of coverage,handover,association,void");
    sweep->add_option("--policies", policies, "Subset of strongest_rss,nearest");
    sweep->add_option("--antennas", antennas, "Subset of directional,omni");
    sweep->add_option("--engine", engine, "analytic | mc | both");

    auto* figure = app.add_subcommand("figure", "Run a figure preset (fig2a, fig2b, fig3a, fig3b)");
    std::string figure_id;
    figure->add_option("id", figure_id, "Preset id")->required();

    auto* validate = app.add_subcommand("validate", "Compare analytic and Monte Carlo results");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analytic->parsed()) {
            run_analytic(opt);
        } else if (simulate->parsed()) {
            run_simulate(opt);
        } else if (sweep->parsed()) {
            uavcov::SweepSpec spec;
            spec.axis = axis;
            for (const auto& v : split_list(values)) spec.values.push_back(uavcov::detail::parse_number("values", v));
            spec.metrics.clear();
            for (const auto& m : split_list(metrics)) spec.metrics.push_back(uavcov::parse_metric(m));
            spec.policies.clear();
            for (const auto& p : split_list(policies)) spec.policies.push_back(uavcov::parse_policy(p));
            spec.antennas.clear();
            for (const auto& a : split_list(antennas)) spec.antennas.push_back(uavcov::parse_antenna(a));
            spec.engine = uavcov::parse_engine(engine);
            emit_sweep(opt, spec);
        } else if (figure->parsed()) {
            emit_sweep(opt, uavcov::figure_preset(figure_id));
        } else if (validate->parsed()) {
            const auto p = base_params(opt);
            const std::uint64_t n = opt.trials ? opt.trials : 100000;
            const auto report = uavcov::validate_engines(p, n, opt.seed, quadrature(opt), opt.threads);
            Sink sink(opt.output);
            uavcov::write_report(sink.stream(), report);
            return report.passed() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
