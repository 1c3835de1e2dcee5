#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "uavcov/config.hpp"
#include "uavcov/sweep.hpp"

using namespace uavcov;

namespace {

const std::string kCli = UAVCOV_CLI_PATH;
const std::string kConfigs = UAVCOV_CONFIG_DIR;

std::string csv_of(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    write_csv(out, rows);
    return out.str();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::filesystem::path scratch(const std::string& name) {
    return std::filesystem::path(::testing::TempDir()) / ("uavcov_" + name);
}

int run(const std::string& args) {
    const int status = std::system((kCli + " " + args).c_str());
#ifdef WEXITSTATUS
    return WEXITSTATUS(status);
#else
    return status;
#endif
}

std::size_t line_count(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n' ? 1 : 0;
    return n;
}

}  // namespace

// ---- configuration ----------------------------------------------------------------------------

TEST(Config, EmptyDocumentGivesDefaults) {
    const SystemParams p = parse_config("");
    const SystemParams d;
    EXPECT_EQ(p.lambda_b, d.lambda_b);
    EXPECT_EQ(p.p_t, d.p_t);
    EXPECT_EQ(p.h_lb, d.h_lb);
    EXPECT_EQ(p.kappa, d.kappa);
    EXPECT_EQ(p.channel.m_l, d.channel.m_l);
    EXPECT_TRUE(std::holds_alternative<Directional>(p.antenna));
}

TEST(Config, UnitsConvertedAtBoundary) {
    const SystemParams p = parse_config("lambda_b = 50\nmu = 100\nt_thresh = 0\np_t = 30\n");
    EXPECT_DOUBLE_EQ(p.lambda_b, 50e-6);
    EXPECT_DOUBLE_EQ(p.mu, 100e-6);
    EXPECT_DOUBLE_EQ(p.t_thresh, 1.0);
    EXPECT_NEAR(p.p_t, 1.0, 1e-12);
}

TEST(Config, CommentsAndWhitespace) {
    const SystemParams p = parse_config("# header\n\n   v = 35   # fast\n\tkappa=0.5\n");
    EXPECT_EQ(p.v, 35.0);
    EXPECT_EQ(p.kappa, 0.5);
}

TEST(Config, AntennaVariantSwitches) {
    const SystemParams omni = parse_config("antenna = omni\nr_max = 4000\n");
    ASSERT_TRUE(std::holds_alternative<Omni>(omni.antenna));
    EXPECT_EQ(std::get<Omni>(omni.antenna).r_max, 4000.0);
    const SystemParams narrow = parse_config("beamwidth_deg = 60\n");
    EXPECT_EQ(std::get<Directional>(narrow.antenna).beamwidth_deg, 60.0);
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config("h_lb = 200\n"), InvalidParameter);
    EXPECT_THROW(parse_config("speed = 3\n"), ConfigError);
    EXPECT_THROW(parse_config("v = fast\n"), ConfigError);
    EXPECT_THROW(parse_config("v 20\n"), ConfigError);
    EXPECT_THROW(parse_config("m_l = 2.5\n"), ConfigError);
    EXPECT_THROW(parse_config("antenna = dish\n"), ConfigError);
    try {
        parse_config("v = 1\nbogus = 2\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(Config, ShippedFilesLoad) {
    for (const char* name : {"defaults.cfg", "symmetric.cfg", "omni.cfg"}) {
        EXPECT_NO_THROW(load_config(kConfigs + "/" + name)) << name;
    }
    EXPECT_THROW(load_config(kConfigs + "/missing.cfg"), ConfigError);
}

// ---- sweeps -----------------------------------------------------------------------------------

TEST(Sweep, RowCardinalityAndOrder) {
    SweepSpec spec;
    spec.axis = "v";
    spec.values = {5, 10, 20};
    spec.metrics = {Metric::Coverage, Metric::Association};
    spec.policies = {AssociationPolicy::StrongestRss, AssociationPolicy::Nearest};
    spec.engine = Engine::MonteCarlo;
    spec.trials = 500;
    spec.threads = 1;
    const auto rows = run_sweep(spec, SystemParams{});
    ASSERT_EQ(rows.size(), 3u * 3u * 2u);
    EXPECT_EQ(rows[0].metric, "coverage");
    EXPECT_EQ(rows[1].metric, "association_los");
    EXPECT_EQ(rows[2].metric, "association_nlos");
    EXPECT_EQ(*rows[0].value, 5.0);
    EXPECT_EQ(*rows[3].value, 10.0);
    EXPECT_EQ(rows[9].policy, AssociationPolicy::Nearest);
    for (const auto& r : rows) {
        EXPECT_FALSE(r.analytic.has_value());
        ASSERT_TRUE(r.mc.has_value());
        EXPECT_EQ(r.mc->n, 500u);
        EXPECT_TRUE(r.error.empty());
    }
}

TEST(Sweep, SinglePointBothEngines) {
    SweepSpec spec;
    spec.axis = "lambda_b";
    spec.values = {100};
    spec.metrics = {Metric::Coverage, Metric::Handover};
    spec.engine = Engine::Both;
    spec.trials = 20'000;
    spec.quad.rel_tol = 1e-3;
    spec.threads = 1;
    const auto rows = run_sweep(spec, SystemParams{});
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        ASSERT_TRUE(r.analytic.has_value());
        ASSERT_TRUE(r.mc.has_value());
        EXPECT_NEAR(*r.analytic, r.mc->mean, agreement_threshold(*r.mc)) << r.metric;
    }
}

TEST(Sweep, OmniHasNoBeamwidthValue) {
    SweepSpec spec;
    spec.axis = "beamwidth_deg";
    spec.values = {60, 120};
    spec.metrics = {Metric::Void};
    spec.antennas = {AntennaKind::Directional, AntennaKind::Omni};
    spec.engine = Engine::Analytic;
    spec.threads = 1;
    const auto rows = run_sweep(spec, SystemParams{});
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_FALSE(rows[2].value.has_value());
    EXPECT_EQ(rows[2].antenna, AntennaKind::Omni);
    EXPECT_GT(*rows[0].analytic, *rows[1].analytic);
}

TEST(Sweep, McCsvIsByteIdenticalAcrossRunsAndThreads) {
    SweepSpec spec;
    spec.axis = "lambda_b";
    spec.values = {20, 100, 500};
    spec.metrics = {Metric::Coverage, Metric::Handover, Metric::Void};
    spec.engine = Engine::MonteCarlo;
    spec.trials = 3000;
    spec.seed = 99;
    spec.threads = 1;
    const std::string a = csv_of(run_sweep(spec, SystemParams{}));
    const std::string b = csv_of(run_sweep(spec, SystemParams{}));
    spec.threads = 3;
    const std::string c = csv_of(run_sweep(spec, SystemParams{}));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Sweep, CsvLayout) {
    ResultRow r;
    r.axis = "lambda_b";
    r.value = 100.0;
    r.metric = "coverage";
    r.analytic = 0.25;
    r.seed = 7;
    r.error = "bad, \"worse\"";
    const std::string csv = csv_of({r});
    std::istringstream in(csv);
    std::string header;
    std::string line;
    std::getline(in, header);
    std::getline(in, line);
    EXPECT_EQ(header, kCsvHeader);
    EXPECT_EQ(line, "lambda_b,100,coverage,strongest_rss,directional,0.25,,,,,7,\"bad, \"\"worse\"\"\"");
}

TEST(Sweep, RejectsBadSpecs) {
    SweepSpec spec;
    spec.values = {1};
    spec.axis = "height";
    EXPECT_THROW(run_sweep(spec, SystemParams{}), InvalidParameter);
    spec.axis = "v";
    spec.values.clear();
    EXPECT_THROW(run_sweep(spec, SystemParams{}), InvalidParameter);
    spec.values = {1};
    spec.engine = Engine::MonteCarlo;
    spec.trials = 10;
    EXPECT_THROW(run_sweep(spec, SystemParams{}), InvalidParameter);
}

TEST(Presets, Contents) {
    const auto a = figure_preset("fig2a");
    EXPECT_EQ(a.axis, "lambda_b");
    EXPECT_EQ(a.series.size(), 2u);
    EXPECT_EQ(a.antennas.size(), 2u);
    EXPECT_EQ(figure_preset("fig2b").policies.size(), 2u);
    const auto b = figure_preset("fig3a");
    EXPECT_EQ(b.axis, "beamwidth_deg");
    EXPECT_EQ(b.values.front(), 20.0);
    EXPECT_EQ(b.values.back(), 179.0);
    EXPECT_EQ(b.series.size(), 3u);
    EXPECT_EQ(figure_preset("fig3b").series.size(), 9u);
    for (const char* id : {"fig2a", "fig2b", "fig3a", "fig3b"}) EXPECT_NO_THROW(figure_preset(id).validate());
    EXPECT_THROW(figure_preset("fig9"), InvalidParameter);
}

// ---- analytic vs simulation ---------------------------------------------------------------------

TEST(Validate, SymmetricChannel) {
    const SystemParams p = load_config(kConfigs + "/symmetric.cfg");
    const auto report = validate_engines(p, 20'000, 5, QuadratureSpec{1e-3, 1e-8, 12}, 1);
    EXPECT_EQ(report.entries.size(), 6u);
    for (const auto& e : report.entries) {
        EXPECT_TRUE(e.pass) << e.metric << " gap " << e.gap << " threshold " << e.threshold << " " << e.error;
    }
    EXPECT_TRUE(report.passed());
}

TEST(Validate, NoHandoverPenalty) {
    SystemParams p;
    p.kappa = 0.0;
    const auto report = validate_engines(p, 20'000, 6, QuadratureSpec{1e-3, 1e-8, 12}, 1);
    for (const auto& e : report.entries) EXPECT_TRUE(e.pass) << e.metric << " gap " << e.gap;
}

TEST(Validate, RequiresEnoughTrials) {
    EXPECT_THROW(validate_engines(SystemParams{}, 9999, 1), InvalidParameter);
}

// ---- executable -------------------------------------------------------------------------------

TEST(Executable, SimulateIsReproducible) {
    const auto a = scratch("sim_a.csv");
    const auto b = scratch("sim_b.csv");
    const auto c = scratch("sim_c.csv");
    const std::string common = "simulate --trials 3000 --seed 4 --set lambda_b=50 --config " + kConfigs + "/defaults.cfg";
    ASSERT_EQ(run(common + " --threads 1 --output " + a.string()), 0);
    ASSERT_EQ(run(common + " --threads 1 --output " + b.string()), 0);
    ASSERT_EQ(run(common + " --threads 2 --output " + c.string()), 0);
    const std::string sa = slurp(a);
    EXPECT_EQ(sa.rfind("metric,mean,ci_low,ci_high,n,seed\n", 0), 0u);
    EXPECT_EQ(line_count(sa), 6u);
    EXPECT_EQ(sa, slurp(b));
    EXPECT_EQ(sa, slurp(c));
}

TEST(Executable, AnalyticReport) {
    const auto out = scratch("analytic.csv");
    ASSERT_EQ(run("analytic --rel-tol 1e-3 --set antenna=directional --output " + out.string()), 0);
    const std::string s = slurp(out);
    EXPECT_EQ(s.rfind("metric,value\ncoverage,", 0), 0u);
    EXPECT_EQ(line_count(s), 9u);
}

TEST(Executable, SweepWritesCsv) {
    const auto out = scratch("sweep.csv");
    ASSERT_EQ(run("sweep --axis kappa --values 0,0.5 --metrics void --engine analytic --output " + out.string()), 0);
    const std::string s = slurp(out);
    EXPECT_EQ(s.rfind(std::string(kCsvHeader) + "\n", 0), 0u);
    EXPECT_EQ(line_count(s), 3u);
}

TEST(Executable, ErrorsGiveNonZeroStatus) {
    const auto sink = scratch("err.txt").string();
    EXPECT_EQ(run("analytic --set h_lb=200 >" + sink + " 2>&1"), 2);
    EXPECT_EQ(run("analytic --config " + kConfigs + "/missing.cfg >" + sink + " 2>&1"), 2);
    EXPECT_EQ(run("figure fig9 >" + sink + " 2>&1"), 2);
    EXPECT_NE(run(">" + sink + " 2>&1"), 0);
}
