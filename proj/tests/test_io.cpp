#include "relarb/config.hpp"
#include "relarb/csv_io.hpp"
#include "relarb/ensemble.hpp"
#include "relarb/errors.hpp"
#include "relarb/portfolio.hpp"
#include "relarb/report.hpp"
#include "relarb/strategy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace relarb;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("relarb_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(ParseConfig, MinimalVsmGetsDefaults) {
    const auto cfg = parse_config("model.kind = vsm\nmodel.n = 5\nmodel.alpha = 0.5\nT = 1\n");
    EXPECT_EQ(cfg.model.kind, ModelKind::VolatilityStabilized);
    EXPECT_EQ(cfg.model.n, 5u);
    EXPECT_EQ(cfg.model.d, 5u);
    EXPECT_EQ(cfg.model.alpha, 0.5);
    EXPECT_EQ(cfg.ensemble.dt, 1e-3);
    EXPECT_EQ(cfg.ensemble.n_paths, 1000u);
    EXPECT_EQ(cfg.ensemble.pilot_paths, 200u);
    EXPECT_EQ(cfg.ensemble.master_seed, 42u);
    EXPECT_FALSE(cfg.strategy.epsilon.has_value());
    EXPECT_FALSE(cfg.strategy.delta.has_value());
    EXPECT_EQ(cfg.strategy.margin, 0.01);
    EXPECT_EQ(cfg.covariance_window, 20u);
    EXPECT_EQ(cfg.report_format, ReportFormat::Json);
}

TEST(ParseConfig, StepNotBelowHorizon) {
    const auto msg = error_of([] { parse_config("model.kind = vsm\nmodel.n = 3\nT = 1\ndt = 1\n"); });
    EXPECT_EQ(msg.rfind("dt:", 0), 0u) << msg;
}

TEST(ParseConfig, MisspelledKeySuggestsCorrection) {
    const auto msg = error_of([] { parse_config("model.kind = vsm\nmodle.n = 3\nT = 1\n"); });
    EXPECT_NE(msg.find("modle.n"), std::string::npos);
    EXPECT_NE(msg.find("did you mean 'model.n'"), std::string::npos) << msg;
}

TEST(ParseConfig, MissingRequiredKeys) {
    EXPECT_NE(error_of([] { parse_config("model.n = 3\nT = 1\n"); }).find("model.kind"), std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nT = 1\n"); }).find("model.n"), std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nmodel.n = 3\n"); }).find("T:"), std::string::npos);
}

TEST(ParseConfig, TypeAndRangeErrorsNameTheKey) {
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nmodel.n = five\nT = 1\n"); }).find("model.n"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nmodel.n = 3\nT = 1\nmodel.alpha = -1\n"); })
                  .find("model.alpha"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nmodel.n = 3\nT = 1\ntol_as = 0\n"); }).find("tol_as"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nmodel.n = 3\nT = 1\nn_paths = 0\n"); }).find("n_paths"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nmodel.n = 3\nT = 1\nmodel.xi = 1,0;0,1\n"); })
                  .find("model.xi"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = custom\nmodel.n = 3\nT = 1\n"); }).find("model.kind"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse_config("model.kind = vsm\nmodel.n = 3\nT = 1\noutput.format = xml\n"); })
                  .find("output.format"),
              std::string::npos);
}

TEST(ParseConfig, MalformedLineNamesLine) {
    EXPECT_NE(error_of([] { parse_config("# comment\nmodel.kind = vsm\nnonsense\n"); }).find("line 3"),
              std::string::npos);
}

TEST(ParseConfig, ConstantModelWithMatrices) {
    const auto cfg = parse_config(
        "model.kind = constant\nmodel.n = 2\nmodel.d = 3\nmodel.gamma = 0.1, -0.2\n"
        "model.xi = 0.3,0,0.1 ; 0,0.2,0\nmodel.initial_caps = 2,3\nT = 0.5\ndt = 0.01\n"
        "epsilon = 0.2\ndelta = auto\nc_offset = 0.05\n");
    EXPECT_EQ(cfg.model.kind, ModelKind::ConstantCoefficient);
    EXPECT_EQ(cfg.model.xi.rows(), 2);
    EXPECT_EQ(cfg.model.xi.cols(), 3);
    EXPECT_EQ(cfg.model.xi(0, 2), 0.1);
    EXPECT_EQ(cfg.model.gamma[1], -0.2);
    EXPECT_EQ(cfg.model.initial_caps[1], 3.0);
    EXPECT_EQ(cfg.strategy.epsilon, 0.2);
    EXPECT_FALSE(cfg.strategy.delta.has_value());
    EXPECT_EQ(cfg.strategy.c_offset, 0.05);
}

TEST(ParseConfig, ConstantModelDefaults) {
    const auto cfg = parse_config("model.kind = constant\nmodel.n = 3\nT = 1\n");
    EXPECT_EQ(cfg.model.gamma, Eigen::VectorXd::Zero(3));
    EXPECT_EQ(cfg.model.xi, Eigen::MatrixXd::Identity(3, 3));
}

TEST(ParseConfig, OverridesReplaceValues) {
    auto doc = ConfigDocument::parse("model.kind = vsm\nmodel.n = 3\nT = 1\nn_paths = 10\n");
    doc.set("n_paths=25");
    doc.set("epsilon = measured");
    const auto cfg = build_config(doc);
    EXPECT_EQ(cfg.ensemble.n_paths, 25u);
    EXPECT_FALSE(cfg.strategy.epsilon.has_value());
    EXPECT_THROW(doc.set("no equals sign"), ConfigError);
    EXPECT_THROW(doc.set("n_paths="), ConfigError);
}

TEST(ParseConfig, BacktestModeNeedsNoModel) {
    const auto cfg = parse_config("covariance_window = 30\n", ConfigMode::Backtest);
    EXPECT_EQ(cfg.covariance_window, 30u);
    EXPECT_THROW(parse_config("model.n = 3\n", ConfigMode::Backtest), ConfigError);
}

TEST(ParseConfig, EveryKeyIsAccepted) {
    const std::string text =
        "model.kind = vsm\nmodel.n = 3\nmodel.d = 3\nmodel.alpha = 0.5\nmodel.initial_caps = 1,2,3\n"
        "model.weight_floor = 1e-12\nmodel.max_halvings = 40\nT = 2\ndt = 0.01\nn_paths = 5\npilot_paths = 4\n"
        "master_seed = 9\nthreads = 2\nepsilon = 0.5\nepsilon_safety = 0.8\ndelta = 0.1\nc_offset = 0.2\n"
        "tol_as = 0.05\ntolerance_master = 0.3\nlevel_tol = 1e-8\nmargin = 0.02\nmargin_pos = 0.001\n"
        "diversity_delta = 0.05\nnondiverse_floor = 1e-4\ncovariance_window = 10\noutput.report = r.json\n"
        "output.format = csv-summary\noutput.plot_dir = plots\n";
    const auto cfg = parse_config(text);
    EXPECT_EQ(cfg.model.weight_floor, 1e-12);
    EXPECT_EQ(cfg.model.max_halvings, 40);
    EXPECT_EQ(cfg.ensemble.threads, 2u);
    EXPECT_EQ(cfg.strategy.margin_pos, 0.001);
    EXPECT_EQ(cfg.strategy.nondiverse_floor, 1e-4);
    EXPECT_EQ(cfg.report_format, ReportFormat::CsvSummary);
    EXPECT_EQ(cfg.plot_dir, "plots");
}

TEST(CsvIngest, RoundTripReproducesCapsAndWealth) {
    const auto path = simulate_path(ModelSpec::volatility_stabilized(4, 0.5), 1.0, 1e-3, 31);
    std::stringstream caps, sigma;
    write_caps_csv(caps, path);
    write_sigma_csv(sigma, path);
    const auto back = ingest_caps_csv(caps, sigma);
    EXPECT_EQ(back.times, path.times);
    EXPECT_TRUE(back.caps == path.caps);
    EXPECT_TRUE(back.dlogX == path.dlogX);
    for (std::size_t k = 0; k < path.steps(); ++k) EXPECT_TRUE(back.sigma[k] == path.sigma[k]);
    EXPECT_FALSE(back.seed.has_value());

    auto entropy_weights = [](const MarketPath& p) {
        return [&p](std::size_t k) { return entropy_portfolio(p.weights_at(k), 0.1); };
    };
    const auto a = accumulate_wealth(path, entropy_weights(path));
    const auto b = accumulate_wealth(back, entropy_weights(back));
    for (std::size_t k = 0; k < a.rel.size(); ++k) EXPECT_NEAR(a.rel[k], b.rel[k], 1e-12);
}

TEST(CsvIngest, FileRoundTripUsesCompanion) {
    const auto dir = scratch_dir("companion");
    const auto path = simulate_path(ModelSpec::volatility_stabilized(3, 0.5), 1.0, 1e-2, 8);
    export_path(path, dir / "p.csv");
    EXPECT_TRUE(fs::exists(dir / "p.sigma.csv"));
    EXPECT_EQ(companion_path(dir / "p.csv"), dir / "p.sigma.csv");
    IngestOptions io;
    io.sigma_file = companion_path(dir / "p.csv");
    const auto back = ingest_caps_csv(dir / "p.csv", io);
    EXPECT_TRUE(back.caps == path.caps);
    EXPECT_TRUE(back.sigma.back() == path.sigma.back());
    fs::remove_all(dir);
}

TEST(CsvIngest, TwoRowsIsTooShortForWindow) {
    std::istringstream in("time,X1,X2\n0,1,2\n1,1.1,2.1\n");
    try {
        ingest_caps_csv(in, 20);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("insufficient rows for covariance window"), std::string::npos);
    }
}

TEST(CsvIngest, ConstantCapsGiveZeroCovariance) {
    std::ostringstream csv;
    csv << "time,X1,X2,X3\n";
    for (int k = 0; k <= 30; ++k) csv << k * 0.01 << ",1,2,3\n";
    std::istringstream in(csv.str());
    const auto p = ingest_caps_csv(in, 5);
    for (const auto& s : p.sigma) EXPECT_EQ(s.cwiseAbs().maxCoeff(), 0.0);
    const auto e = entropy_trajectory(p);
    for (double v : e.values) EXPECT_EQ(v, e.values.front());
}

TEST(CsvIngest, RejectsBadData) {
    auto ingest = [](const std::string& text) {
        std::istringstream in(text);
        return ingest_caps_csv(in, 1);
    };
    EXPECT_THROW(ingest("time,X1,X2\n0,1,2\n0,1,2\n"), DataError);       // non-monotone
    EXPECT_THROW(ingest("time,X1,X2\n0,1,2\n1,0,2\n"), DataError);       // zero cap
    EXPECT_THROW(ingest("time,X1,X2\n0,1,2\n1,-1,2\n"), DataError);      // negative cap
    EXPECT_THROW(ingest("time,X1,X2\n0,1,2\n1,1\n"), DataError);         // ragged
    EXPECT_THROW(ingest("date,X1,X2\n0,1,2\n1,1,2\n"), DataError);       // header
    EXPECT_THROW(ingest("time,X1,X2\n0,1,2\n1,abc,2\n"), DataError);     // not a number
    EXPECT_NO_THROW(ingest("time,X1,X2\n5,1,2\n6,1.5,2\n"));
    EXPECT_EQ(ingest("time,X1,X2\n5,1,2\n6,1.5,2\n").times.front(), 0.0);
}

TEST(RealizedCovariance, TrailingWindowEstimate) {
    const std::vector<double> times{0.0, 0.5, 1.0, 1.5, 2.0};
    Eigen::MatrixXd d(4, 2);
    d << 0.1, 0.0, -0.1, 0.2, 0.3, 0.1, 0.0, -0.2;
    const auto s = rolling_realized_covariance(times, d, 2);
    ASSERT_EQ(s.size(), 4u);
    // Steps 0 and 1 use the first window, step k >= 2 uses steps k-2, k-1.
    EXPECT_NEAR(s[0](0, 0), (0.01 + 0.01) / 1.0, 1e-15);
    EXPECT_NEAR(s[1](0, 1), (0.0 - 0.02) / 1.0, 1e-15);
    EXPECT_NEAR(s[2](1, 1), (0.0 + 0.04) / 1.0, 1e-15);
    EXPECT_NEAR(s[3](0, 1), (-0.1 * 0.2 + 0.3 * 0.1) / 1.0, 1e-15);
    EXPECT_EQ(s[3], s[3].transpose());
}

TEST(Report, JsonRoundTripFieldByField) {
    const auto res = run_ensemble(ModelSpec::volatility_stabilized(3, 0.5), {}, [] {
        EnsembleOptions o;
        o.n_paths = 30;
        o.pilot_paths = 20;
        o.dt = 1e-2;
        return o;
    }());
    const std::string json = report_to_json(res.report);
    EXPECT_EQ(json.find("{\n  \"schema\": 1,"), 0u);
    EXPECT_EQ(parse_report_json(json), res.report);
    const std::string csv = report_to_csv_summary(res.report);
    EXPECT_EQ(count_lines(csv), 2);
    EXPECT_EQ(csv.rfind("schema,", 0), 0u);
    EXPECT_EQ(parse_report_csv_summary(csv), res.report);
}

TEST(Report, NoStrictGainMeansNoArbitrage) {
    ArbitrageReport r;
    r.frac_strict = 0.0;
    r.frac_nonnegative = 1.0;
    r.arbitrage = false;
    const auto json = report_to_json(r);
    EXPECT_NE(json.find("\"arbitrage\": false"), std::string::npos);
    EXPECT_NE(json.find("\"frac_strict_given_triggered\": null"), std::string::npos);
}

TEST(Report, SeventeenSignificantDigits) {
    ArbitrageReport r;
    r.mean_rel = 0.1;
    r.min_rel = std::numeric_limits<double>::quiet_NaN();
    const auto json = report_to_json(r);
    EXPECT_NE(json.find("\"mean_rel\": 0.10000000000000001"), std::string::npos);
    EXPECT_NE(json.find("\"min_rel\": null"), std::string::npos);
}

TEST(Report, KeyOrderIsFixed) {
    const auto json = report_to_json(ArbitrageReport{});
    const char* keys[] = {"\"schema\"", "\"n_paths\"", "\"frac_nonnegative\"", "\"A\"", "\"delta\"", "\"epsilon\"",
                          "\"condition_zero\"", "\"diversity\"", "\"residual_count\"", "\"dt\"", "\"T\"", "\"seed\""};
    std::size_t last = 0;
    for (const char* k : keys) {
        const auto at = json.find(k);
        ASSERT_NE(at, std::string::npos) << k;
        EXPECT_GE(at, last) << k;
        last = at;
    }
}

TEST(Report, RejectsUnknownSchema) {
    EXPECT_THROW(parse_report_json("{\"schema\": 2}"), DataError);
    EXPECT_THROW(parse_report_json("not json"), DataError);
    EXPECT_THROW(parse_report_csv_summary("schema\n"), DataError);
}

TEST(Report, WritesFiles) {
    const auto dir = scratch_dir("report");
    ArbitrageReport r;
    r.n_paths = 3;
    emit_report(r, ReportFormat::Json, dir / "r.json");
    std::ifstream in(dir / "r.json");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(parse_report_json(ss.str()), r);
    fs::remove_all(dir);
}

TEST(PlotData, ShapesAndLabels) {
    EnsembleOptions o;
    o.n_paths = 3;
    o.pilot_paths = 10;
    o.dt = 0.05;
    const auto res = run_ensemble(ModelSpec::volatility_stabilized(3, 0.5), {}, o);
    std::ostringstream entropy, rel, floor;
    emit_plot_data(std::span(res.records).first(1), PlotKind::EntropyCurves, entropy);
    EXPECT_EQ(count_lines(entropy.str()), 1 + 21);
    emit_plot_data(res.records, PlotKind::RelWealth, rel);
    std::istringstream rows(rel.str());
    std::string line;
    std::getline(rows, line);
    EXPECT_EQ(line, "path_id,time,value");
    while (std::getline(rows, line)) {
        if (line.find(",0,") != std::string::npos) EXPECT_EQ(line.substr(line.rfind(',') + 1), "0");
    }
    emit_plot_data(res.records, PlotKind::FloorCurve, floor);
    std::istringstream frows(floor.str());
    std::getline(frows, line);
    int count = 0;
    while (std::getline(frows, line)) {
        EXPECT_EQ(line.rfind("ensemble,", 0), 0u);
        ++count;
    }
    EXPECT_EQ(count, 21);
    EXPECT_THROW(parse_plot_kind("histogram"), ConfigError);
}
