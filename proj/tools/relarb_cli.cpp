// relarb: ensemble runs, CSV backtests and residual studies for the entropy
// switching strategy.
#include "relarb/config.hpp"
#include "relarb/csv_io.hpp"
#include "relarb/ensemble.hpp"
#include "relarb/errors.hpp"
#include "relarb/report.hpp"
#include "relarb/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace relarb;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kHypothesis = 4 };

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<double> dt;
    std::optional<std::string> output;
    std::optional<std::string> format;
    std::optional<std::string> plot_dir;
    std::optional<std::size_t> covariance_window;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_output = true) {
    cmd->add_option("--config", a.config_file, "key = value configuration file");
    cmd->add_option("--set", a.sets, "override one key, e.g. --set model.n=4")->allow_extra_args(false);
    cmd->add_option("--paths", a.paths, "n_paths");
    cmd->add_option("--seed", a.seed, "master_seed");
    cmd->add_option("--threads", a.threads, "worker threads");
    cmd->add_option("--dt", a.dt, "time step");
    if (with_output) {
        cmd->add_option("-o,--output", a.output, "report file (default: standard output)");
        cmd->add_option("--format", a.format, "json or csv-summary");
        cmd->add_option("--plot-dir", a.plot_dir, "directory for entropy, wealth and floor plot data");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig load_config(const CommonArgs& a, ConfigMode mode) {
    ConfigDocument doc = a.config_file.empty() ? ConfigDocument{} : ConfigDocument::parse(read_file(a.config_file));
    for (const auto& s : a.sets) doc.set(s);
    auto put = [&](const char* key, const auto& value) {
        if (!value) return;
        std::ostringstream ss;
        ss.precision(17);
        ss << *value;
        doc.set(key, ss.str());
    };
    put("n_paths", a.paths);
    put("master_seed", a.seed);
    put("threads", a.threads);
    put("dt", a.dt);
    put("output.report", a.output);
    put("output.format", a.format);
    put("output.plot_dir", a.plot_dir);
    put("covariance_window", a.covariance_window);
    return build_config(doc, mode);
}

void write_report(const ArbitrageReport& report, const RunConfig& cfg) {
    if (cfg.report_path.empty())
        emit_report(report, cfg.report_format, std::cout);
    else
        emit_report(report, cfg.report_format, fs::path(cfg.report_path));
}

void write_plots(const EnsembleResult& result, const std::string& dir) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    for (const char* name : {"entropy_curves", "rel_wealth", "floor_curve"}) {
        std::ofstream out(fs::path(dir) / (std::string(name) + ".csv"));
        if (!out) throw DataError("cannot write plot data to '" + dir + "'");
        emit_plot_data(result.records, parse_plot_kind(name), out);
    }
}

std::string numbered(const char* stem, std::size_t i) {
    std::ostringstream ss;
    ss << stem << '_';
    ss.width(5);
    ss.fill('0');
    ss << i << ".csv";
    return ss.str();
}

// Re-simulates the ensemble paths (same seeds as run_ensemble) and writes them
// with their covariance companions.
void export_paths(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    const auto& e = cfg.ensemble;
    for (std::size_t i = 0; i < e.pilot_paths + e.n_paths; ++i) {
        const MarketPath path = simulate_path(cfg.model, e.T, e.dt, path_seed(e.master_seed, i));
        const bool pilot = i < e.pilot_paths;
        export_path(path, fs::path(dir) / numbered(pilot ? "pilot" : "path", pilot ? i : i - e.pilot_paths));
    }
}

int cmd_simulate(const CommonArgs& a, const std::string& export_dir) {
    const RunConfig cfg = load_config(a, ConfigMode::Simulation);
    EnsembleOptions opts = cfg.ensemble;
    opts.keep_trajectories = !cfg.plot_dir.empty();
    const EnsembleResult result = run_ensemble(cfg.model, cfg.strategy, opts);
    write_report(result.report, cfg);
    write_plots(result, cfg.plot_dir);
    if (!export_dir.empty()) export_paths(cfg, export_dir);
    return kOk;
}

bool is_companion(const std::string& f) {
    const std::string suffix = ".sigma.csv";
    return f.size() >= suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Companion covariance files named on the command line (e.g. via a glob) are skipped.
std::vector<MarketPath> ingest_all(const std::vector<std::string>& files, std::size_t window, bool realized) {
    std::vector<MarketPath> out;
    out.reserve(files.size());
    for (const auto& f : files) {
        if (is_companion(f)) continue;
        IngestOptions io;
        io.covariance_window = window;
        const fs::path companion = companion_path(f);
        if (!realized && fs::exists(companion)) io.sigma_file = companion;
        out.push_back(ingest_caps_csv(fs::path(f), io));
    }
    return out;
}

int cmd_backtest(const CommonArgs& a, const std::vector<std::string>& files, const std::vector<std::string>& pilot_files,
                 bool realized) {
    const RunConfig cfg = load_config(a, ConfigMode::Backtest);
    const std::vector<MarketPath> scored = ingest_all(files, cfg.covariance_window, realized);
    const std::vector<MarketPath> pilot =
        pilot_files.empty() ? scored : ingest_all(pilot_files, cfg.covariance_window, realized);
    const bool estimated = realized || std::any_of(files.begin(), files.end(), [](const std::string& f) {
                               return !is_companion(f) && !fs::exists(companion_path(f));
                           });
    RunInfo info;
    info.master_seed = cfg.ensemble.master_seed;
    info.covariance_window = estimated ? cfg.covariance_window : 0;
    const EnsembleResult result =
        score_paths(pilot, scored, cfg.strategy, info, !cfg.plot_dir.empty(), cfg.ensemble.threads);
    write_report(result.report, cfg);
    write_plots(result, cfg.plot_dir);
    return kOk;
}

double offset_or(const RunConfig& cfg, std::optional<double> c) {
    if (c) return *c;
    return cfg.strategy.c_offset.value_or(0.1);
}

int cmd_residual(const CommonArgs& a, std::optional<double> c_arg) {
    const RunConfig cfg = load_config(a, ConfigMode::Simulation);
    const double c = offset_or(cfg, c_arg);
    const auto& e = cfg.ensemble;
    std::cout << "path_id,seed,residual\n";
    double worst = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < e.n_paths; ++i) {
        const std::uint64_t seed = path_seed(e.master_seed, i);
        const double r = master_equation_residual(simulate_path(cfg.model, e.T, e.dt, seed), c);
        worst = std::max(worst, r);
        sum += r;
        std::cout << i << ',' << seed << ',' << format_number(r) << '\n';
    }
    std::cerr << "mean " << format_number(sum / static_cast<double>(e.n_paths)) << " max " << format_number(worst)
              << '\n';
    return kOk;
}

int cmd_convergence(const CommonArgs& a, std::vector<double> dts, std::optional<double> c_arg) {
    const RunConfig cfg = load_config(a, ConfigMode::Simulation);
    if (dts.empty()) dts = {4 * cfg.ensemble.dt, cfg.ensemble.dt, cfg.ensemble.dt / 4};
    const ConvergenceTable table = convergence_study(cfg.model, offset_or(cfg, c_arg), dts, cfg.ensemble.T,
                                                     cfg.ensemble.master_seed, cfg.ensemble.n_paths);
    std::cout << "dt,residual\n";
    for (const auto& row : table.rows) std::cout << format_number(row.dt) << ',' << format_number(row.residual) << '\n';
    std::cout << "# verdict " << to_string(table.verdict) << '\n';
    return kOk;
}

int cmd_floor(const CommonArgs& a) {
    const RunConfig cfg = load_config(a, ConfigMode::Simulation);
    const auto& e = cfg.ensemble;
    std::vector<EntropyTrajectory> ensemble;
    ensemble.reserve(e.n_paths);
    for (std::size_t i = 0; i < e.n_paths; ++i)
        ensemble.push_back(entropy_trajectory(simulate_path(cfg.model, e.T, e.dt, path_seed(e.master_seed, i))));
    const FloorCurve curve = entropy_floor_curve(ensemble);

    std::ofstream file;
    if (!cfg.report_path.empty()) {
        file.open(cfg.report_path);
        if (!file) throw DataError("cannot write '" + cfg.report_path + "'");
    }
    std::ostream& out = cfg.report_path.empty() ? std::cout : file;
    out << "time,floor\n";
    for (std::size_t k = 0; k < curve.times.size(); ++k)
        out << format_number(curve.times[k]) << ',' << format_number(curve.values[k]) << '\n';
    std::cerr << "longest nondecreasing run [" << format_number(curve.nondecreasing_begin) << ", "
              << format_number(curve.nondecreasing_end) << "]\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropy-portfolio relative arbitrage: simulation, backtests and residual studies"};
    app.require_subcommand(1);

    CommonArgs sim_args, bt_args, res_args, conv_args, floor_args;
    std::string export_dir;
    std::vector<std::string> files, pilot_files;
    bool realized = false;
    std::optional<double> res_c, conv_c;
    std::vector<double> dts;

    auto* sim = app.add_subcommand("simulate", "simulate an ensemble and report the strategy's performance");
    add_common(sim, sim_args);
    sim->add_option("--export-dir", export_dir, "also write every pilot and scored path as CSV");

    auto* bt = app.add_subcommand("backtest", "score the strategy on capitalization CSV files");
    add_common(bt, bt_args);
    bt->add_option("files", files, "caps files (time,X1,...,Xn)")->required()->check(CLI::ExistingFile);
    bt->add_option("--pilot", pilot_files, "pilot files for the floor and epsilon (default: the scored files)")
        ->check(CLI::ExistingFile);
    bt->add_flag("--realized", realized, "estimate covariances even when a .sigma.csv companion exists");
    bt->add_option("--covariance-window", bt_args.covariance_window, "steps in the realized covariance window");

    auto* res = app.add_subcommand("residual", "master-equation residual of the entropy portfolio per path");
    add_common(res, res_args, false);
    res->add_option("--c", res_c, "generator offset (default c_offset, else 0.1)");

    auto* conv = app.add_subcommand("convergence", "residual under coupled time-step refinement");
    add_common(conv, conv_args, false);
    conv->add_option("--dts", dts, "decreasing nested steps (default 4dt, dt, dt/4)")->delimiter(',');
    conv->add_option("--c", conv_c, "generator offset (default c_offset, else 0.1)");

    auto* fl = app.add_subcommand("floor", "pointwise ensemble minimum of the market entropy");
    add_common(fl, floor_args, false);
    fl->add_option("-o,--output", floor_args.output, "CSV file (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*sim) return cmd_simulate(sim_args, export_dir);
        if (*bt) return cmd_backtest(bt_args, files, pilot_files, realized);
        if (*res) return cmd_residual(res_args, res_c);
        if (*conv) return cmd_convergence(conv_args, dts, conv_c);
        if (*fl) return cmd_floor(floor_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kConfig;
    } catch (const HypothesisError& e) {
        std::cerr << "hypothesis error: " << e.what() << '\n';
        return kHypothesis;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
