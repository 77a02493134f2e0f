#include "relarb/config.hpp"
#include "relarb/csv_io.hpp"
#include "relarb/ensemble.hpp"
#include "relarb/errors.hpp"
#include "relarb/market_sim.hpp"
#include "relarb/portfolio.hpp"
#include "relarb/report.hpp"
#include "relarb/strategy.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace relarb;

namespace {

PortfolioWeights weights(const Eigen::VectorXd& w) { return PortfolioWeights(w); }

StrategyConfig strategy_config(std::optional<double> epsilon, std::optional<double> delta,
                               std::optional<double> c_offset) {
    StrategyConfig cfg;
    cfg.epsilon = epsilon;
    cfg.delta = delta;
    cfg.c_offset = c_offset;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_relarb, m) {
    m.doc() = "Entropy-weighted relative arbitrage: simulation, strategy and ensemble verdicts.";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
    py::register_exception<SimplexError>(m, "SimplexError", numerical.ptr());
    py::register_exception<HypothesisError>(m, "HypothesisError", error.ptr());
    py::register_exception<DataError>(m, "DataError", error.ptr());

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_static("volatility_stabilized", &ModelSpec::volatility_stabilized, py::arg("n"), py::arg("alpha"),
                    py::arg("initial_caps") = std::nullopt)
        .def_static("constant", &ModelSpec::constant, py::arg("gamma"), py::arg("xi"), py::arg("initial_caps"))
        .def_readonly("n", &ModelSpec::n)
        .def_readonly("d", &ModelSpec::d)
        .def_readonly("alpha", &ModelSpec::alpha)
        .def_readonly("initial_caps", &ModelSpec::initial_caps);

    py::class_<MarketPath>(m, "MarketPath")
        .def_readonly("times", &MarketPath::times)
        .def_readonly("caps", &MarketPath::caps)
        .def_readonly("dlogX", &MarketPath::dlogX)
        .def_readonly("sigma", &MarketPath::sigma)
        .def_readonly("seed", &MarketPath::seed)
        .def_property_readonly("steps", &MarketPath::steps)
        .def("weights_at", [](const MarketPath& p, std::size_t k) { return p.weights_at(k).values(); });

    m.def("simulate_path", &simulate_path, py::arg("spec"), py::arg("T"), py::arg("dt"), py::arg("seed"));

    m.def("market_weights", [](const Eigen::VectorXd& caps) { return market_weights(caps).values(); },
          py::arg("caps"));
    m.def("entropy", py::overload_cast<const Eigen::VectorXd&>(&entropy), py::arg("x"));
    m.def("entropy_portfolio",
          [](const Eigen::VectorXd& mu, double c) { return entropy_portfolio(weights(mu), c).values(); },
          py::arg("mu"), py::arg("c"));
    m.def("excess_growth_rate",
          [](const Eigen::VectorXd& pi, const Eigen::MatrixXd& sigma) {
              return excess_growth_rate(weights(pi), sigma);
          },
          py::arg("pi"), py::arg("sigma"));

    m.def("select_delta", [](double A, double epsilon, double T, std::size_t n) {
        const auto s = select_delta_detailed(A, epsilon, T, n);
        return py::make_tuple(s.delta, to_string(s.branch));
    }, py::arg("A"), py::arg("epsilon"), py::arg("T"), py::arg("n"));

    m.def("master_equation_residual", py::overload_cast<const MarketPath&, double>(&master_equation_residual),
          py::arg("path"), py::arg("c"));

    m.def("convergence_study",
          [](const ModelSpec& spec, double c, const std::vector<double>& dts, double T, std::uint64_t seed,
             std::size_t n_paths) {
              const auto table = convergence_study(spec, c, dts, T, seed, n_paths);
              py::list rows;
              for (const auto& r : table.rows) rows.append(py::make_tuple(r.dt, r.residual));
              return py::make_tuple(rows, to_string(table.verdict));
          },
          py::arg("spec"), py::arg("c"), py::arg("dts"), py::arg("T") = 1.0, py::arg("seed") = 42,
          py::arg("n_paths") = 1);

    m.def("run_ensemble",
          [](const ModelSpec& spec, std::size_t n_paths, std::size_t pilot_paths, double T, double dt,
             std::uint64_t seed, unsigned threads, std::optional<double> epsilon, std::optional<double> delta,
             std::optional<double> c_offset) {
              EnsembleOptions o;
              o.n_paths = n_paths;
              o.pilot_paths = pilot_paths;
              o.T = T;
              o.dt = dt;
              o.master_seed = seed;
              o.threads = threads;
              o.keep_trajectories = false;
              py::gil_scoped_release release;
              return report_to_json(run_ensemble(spec, strategy_config(epsilon, delta, c_offset), o).report);
          },
          py::arg("spec"), py::arg("n_paths") = 1000, py::arg("pilot_paths") = 200, py::arg("T") = 1.0,
          py::arg("dt") = 1e-3, py::arg("seed") = 42, py::arg("threads") = 1, py::arg("epsilon") = std::nullopt,
          py::arg("delta") = std::nullopt, py::arg("c_offset") = std::nullopt);

    m.def("simulate_config",
          [](const std::string& text) {
              const RunConfig cfg = parse_config(text);
              EnsembleOptions o = cfg.ensemble;
              o.keep_trajectories = false;
              py::gil_scoped_release release;
              return report_to_json(run_ensemble(cfg.model, cfg.strategy, o).report);
          },
          py::arg("text"));

    m.def("backtest",
          [](const std::vector<std::filesystem::path>& files, std::size_t covariance_window, bool use_companions,
             std::optional<double> epsilon) {
              std::vector<MarketPath> paths;
              bool estimated = false;
              for (const auto& f : files) {
                  IngestOptions io;
                  io.covariance_window = covariance_window;
                  if (use_companions && std::filesystem::exists(companion_path(f))) io.sigma_file = companion_path(f);
                  else estimated = true;
                  paths.push_back(ingest_caps_csv(f, io));
              }
              RunInfo info;
              info.covariance_window = estimated ? covariance_window : 0;
              return report_to_json(score_paths(paths, paths, strategy_config(epsilon, {}, {}), info).report);
          },
          py::arg("files"), py::arg("covariance_window") = 20, py::arg("use_companions") = true,
          py::arg("epsilon") = std::nullopt);

    py::class_<IngestOptions>(m, "IngestOptions")
        .def(py::init<>())
        .def_readwrite("covariance_window", &IngestOptions::covariance_window)
        .def_readwrite("sigma_file", &IngestOptions::sigma_file);

    m.def("export_path", &export_path, py::arg("path"), py::arg("caps_file"));
    m.def("ingest_caps_csv", py::overload_cast<const std::filesystem::path&, const IngestOptions&>(&ingest_caps_csv),
          py::arg("caps_file"), py::arg("options") = IngestOptions{});

}
