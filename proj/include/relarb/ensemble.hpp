#pragma once

#include "relarb/market_sim.hpp"
#include "relarb/strategy.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace relarb {

/// Strategy knobs. Unset optionals resolve to their documented defaults.
struct StrategyConfig {
    std::optional<double> epsilon;           // measured from the pilot when unset
    std::optional<double> delta;             // select_delta when unset
    std::optional<double> c_offset;          // generator offset, delta when unset
    std::optional<double> tol_as;            // 10 dt
    std::optional<double> tolerance_master;  // 50 dt
    double level_tol = kLevelTolerance;
    double margin = 0.01;
    std::optional<double> margin_pos;
    double diversity_delta = 0.01;
    double epsilon_safety = 0.9;  // measured epsilon = safety * min gamma*_mu
    // A non-diverse pilot market has entropy floor 0; an estimated floor below
    // this value is then replaced by 0.
    double nondiverse_floor = 1e-3;
};

struct EnsembleOptions {
    std::size_t n_paths = 1000;
    std::size_t pilot_paths = 200;
    double T = 1.0;
    double dt = 1e-3;
    std::uint64_t master_seed = 42;
    unsigned threads = 1;
    bool keep_trajectories = true;
};

/// Run metadata that is not derivable from the paths themselves.
struct RunInfo {
    std::uint64_t master_seed = 0;
    std::size_t covariance_window = 0;  // 0: covariances taken from the model or a companion file
};

struct PathRecord {
    std::size_t path_id = 0;
    std::optional<std::uint64_t> seed;
    GridTime tau1;
    GridTime tau2;
    bool triggered = false;
    double rel_T = 0.0;
    bool diverse = true;               // on [0, T/2]
    double max_weight_first_half = 0.0;
    std::optional<double> residual;    // master-equation residual over [tau1, tau2], triggered paths only
    std::vector<double> times;         // kept when EnsembleOptions::keep_trajectories
    std::vector<double> entropy;
    std::vector<double> rel;
};

struct ArbitrageReport {
    std::size_t n_paths = 0;
    std::size_t pilot_paths = 0;
    double frac_nonnegative = 0.0;
    double frac_strict = 0.0;
    double frac_triggered = 0.0;
    std::optional<double> frac_strict_given_triggered;
    double mean_rel = 0.0;
    double min_rel = 0.0;
    double max_rel = 0.0;
    bool arbitrage = false;
    bool strong = false;
    double A = 0.0;            // floor used by the strategy
    double A_estimated = 0.0;  // ensemble minimum of S(mu) over [0, T/2] on the pilot
    bool nondiverse_zero_floor = false;
    double delta = 0.0;
    std::string delta_branch;    // "zero_floor", "positive_floor" or "supplied"
    double epsilon = 0.0;
    std::string epsilon_source;  // "supplied" or "measured"
    double gamma_star_min = 0.0;
    bool epsilon_hypothesis = false;
    bool condition_zero = false;
    double floor_first_half = 0.0;
    double floor_second_half = 0.0;
    bool pilot_diversity = false;
    bool diversity = false;  // scored ensemble
    double diversity_delta = 0.0;
    double max_weight_first_half = 0.0;
    std::size_t residual_count = 0;
    std::optional<double> residual_mean;
    std::optional<double> residual_max;
    bool residual_within_tolerance = true;
    double tol_as = 0.0;
    double tolerance_master = 0.0;
    double level_tol = 0.0;
    double c_offset = 0.0;
    double dt = 0.0;
    double T = 0.0;
    std::uint64_t seed = 0;
    std::size_t covariance_window = 0;

    friend bool operator==(const ArbitrageReport&, const ArbitrageReport&) = default;
};

struct EnsembleResult {
    ArbitrageReport report;
    std::vector<PathRecord> records;
    FloorCurve floor_curve;  // over the scored ensemble; empty unless trajectories are kept
};

/// Simulates a pilot ensemble (paths 0..pilot-1) for A, epsilon and delta, then
/// scores eta on a disjoint ensemble (paths pilot..pilot+n-1). Deterministic in
/// master_seed for any thread count.
EnsembleResult run_ensemble(const ModelSpec& spec, const StrategyConfig& config, const EnsembleOptions& options);

/// Same pipeline on given paths (e.g. ingested from CSV). All paths must share
/// one time grid; dt is T / M on a uniform grid and the largest step otherwise.
EnsembleResult score_paths(std::span<const MarketPath> pilot, std::span<const MarketPath> scored,
                           const StrategyConfig& config, const RunInfo& info, bool keep_trajectories = true,
                           unsigned threads = 1);

struct Verdict {
    bool weak_dominance = false;  // every rel >= -tol_as
    bool strict_gain = false;     // some rel > +tol_as
    bool arbitrage = false;
    bool strong = false;          // every rel > +tol_as
};

Verdict verify_relative_arbitrage(std::span<const double> rels, double tol_as);

/// |relative-wealth increment of the S_c portfolio - master-equation right-hand side|
/// over grid steps [k_begin, k_end).
double master_equation_residual(const MarketPath& path, double c, std::size_t k_begin, std::size_t k_end);
double master_equation_residual(const MarketPath& path, double c);

enum class ConvergenceVerdict { Decreasing, NotDecreasing, NoVerdict, VacuousPass };

struct ConvergenceRow {
    double dt = 0.0;
    double residual = 0.0;  // mean over paths
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    ConvergenceVerdict verdict = ConvergenceVerdict::NoVerdict;
};

/// Master-equation residuals on coupled paths: every dt in `dts` (decreasing,
/// each a multiple of the finest) is driven by the finest Brownian increments
/// summed up to its own grid.
ConvergenceTable convergence_study(const ModelSpec& spec, double c, const std::vector<double>& dts, double T,
                                   std::uint64_t seed, std::size_t n_paths = 1);

std::string to_string(ConvergenceVerdict verdict);
std::string to_string(DeltaBranch branch);

}  // namespace relarb
