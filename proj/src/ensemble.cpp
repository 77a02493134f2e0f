#include "relarb/ensemble.hpp"

#include "relarb/errors.hpp"
#include "relarb/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace relarb {

namespace {

// Runs fn(0..count-1) on up to `threads` workers. Results must be written to
// per-index slots; the lowest-index failure is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    const unsigned n_workers = std::min<unsigned>(threads, static_cast<unsigned>(count));
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    pool.clear();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

[[noreturn]] void rethrow_for_path(const char* label, std::size_t id, std::optional<std::uint64_t> seed) {
    std::ostringstream where;
    where << label << ' ' << id;
    if (seed) where << " (seed " << *seed << ")";
    try {
        throw;
    } catch (const NumericalError& e) {
        throw NumericalError(where.str() + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(where.str() + ": " + e.what());
    }
}

double min_market_excess_growth(const MarketPath& path) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.steps(); ++k)
        lo = std::min(lo, excess_growth_rate(path.weights_at(k), path.sigma[k]));
    return lo;
}

struct PilotData {
    std::vector<EntropyTrajectory> trajectories;
    std::vector<double> gamma_min;
    std::vector<double> max_weight;  // over [0, T/2]

    explicit PilotData(std::size_t count) : trajectories(count), gamma_min(count), max_weight(count) {}

    void add(std::size_t i, const MarketPath& path) {
        trajectories[i] = entropy_trajectory(path);
        gamma_min[i] = min_market_excess_growth(path);
        max_weight[i] = max_market_weight(path, {0.0, 0.5 * path.horizon()});
    }
};

struct Params {
    std::size_t n = 0;
    double T = 0.0;
    double dt = 0.0;
    double A = 0.0;
    double A_estimated = 0.0;
    bool nondiverse_zero = false;
    bool pilot_diverse = true;
    double delta = 0.0;
    DeltaBranch branch = DeltaBranch::Supplied;
    double epsilon = 0.0;
    bool epsilon_supplied = false;
    double gamma_min = 0.0;
    ConditionZero cz;
    double c_offset = 0.0;
    double tol_as = 0.0;
    double tolerance_master = 0.0;
};

Params resolve(const PilotData& pilot, std::size_t n, double T, double dt, const StrategyConfig& config) {
    Params p;
    p.n = n;
    p.T = T;
    p.dt = dt;
    p.gamma_min = *std::min_element(pilot.gamma_min.begin(), pilot.gamma_min.end());
    if (!(p.gamma_min > 1e-14)) {
        std::ostringstream msg;
        msg << "epsilon hypothesis unsatisfiable: minimum measured gamma*_mu is " << p.gamma_min;
        throw HypothesisError(msg.str());
    }
    p.epsilon_supplied = config.epsilon.has_value();
    p.epsilon = config.epsilon.value_or(config.epsilon_safety * p.gamma_min);
    if (!(p.epsilon > 0.0)) throw HypothesisError("epsilon hypothesis unsatisfiable: epsilon must be positive");

    p.cz = condition_zero(std::span<const EntropyTrajectory>(pilot.trajectories), T);
    p.A_estimated = p.cz.first_half;
    p.pilot_diverse = *std::max_element(pilot.max_weight.begin(), pilot.max_weight.end()) < 1.0 - config.diversity_delta;
    p.nondiverse_zero = !p.pilot_diverse && p.A_estimated < config.nondiverse_floor;
    p.A = p.nondiverse_zero ? 0.0 : p.A_estimated;
    const double log_n = std::log(static_cast<double>(n));
    if (!(p.A < log_n)) throw HypothesisError("entropy floor reaches log n: market weights never leave uniform");

    if (config.delta) {
        p.delta = *config.delta;
        p.branch = DeltaBranch::Supplied;
        if (!(p.delta > 0.0 && p.A + 2.0 * p.delta < log_n))
            throw ConfigError("delta: supplied value violates 0 < delta and A + 2 delta < log n");
    } else {
        DeltaOptions opts;
        opts.margin = config.margin;
        opts.margin_pos = config.margin_pos;
        const DeltaSelection sel = select_delta_detailed(p.A, p.epsilon, T, n, opts);
        p.delta = sel.delta;
        p.branch = sel.branch;
    }
    p.c_offset = config.c_offset.value_or(p.delta);
    p.tol_as = config.tol_as.value_or(10.0 * dt);
    p.tolerance_master = config.tolerance_master.value_or(50.0 * dt);
    return p;
}

MarketPath slice(const MarketPath& path, std::size_t k_begin, std::size_t k_end) {
    MarketPath out;
    out.times.assign(path.times.begin() + static_cast<std::ptrdiff_t>(k_begin),
                     path.times.begin() + static_cast<std::ptrdiff_t>(k_end) + 1);
    const auto rows = static_cast<Eigen::Index>(k_end - k_begin);
    out.caps = path.caps.middleRows(static_cast<Eigen::Index>(k_begin), rows + 1);
    out.dlogX = path.dlogX.middleRows(static_cast<Eigen::Index>(k_begin), rows);
    out.sigma.assign(path.sigma.begin() + static_cast<std::ptrdiff_t>(k_begin),
                     path.sigma.begin() + static_cast<std::ptrdiff_t>(k_end));
    return out;
}

PathRecord score_one(const MarketPath& path, std::size_t id, const Params& p, const StrategyConfig& config,
                     bool keep) {
    PathRecord rec;
    rec.path_id = id;
    rec.seed = path.seed;
    EntropyTrajectory traj = entropy_trajectory(path);
    const StrategyState state =
        make_strategy_state(traj, p.n, p.A, p.delta, p.epsilon, p.T, config.level_tol, p.c_offset);
    const WealthLedger ledger = eta_wealth(path, state);
    rec.tau1 = state.tau1;
    rec.tau2 = state.tau2;
    rec.triggered = state.triggered();
    rec.rel_T = ledger.rel.back();
    const Window first_half{0.0, 0.5 * p.T};
    rec.max_weight_first_half = max_market_weight(path, first_half);
    rec.diverse = is_diverse(path, config.diversity_delta, first_half);
    if (rec.triggered && state.tau2.index > state.tau1.index)
        rec.residual = master_equation_residual(path, p.c_offset, state.tau1.index, state.tau2.index);
    if (keep) {
        rec.times = std::move(traj.times);
        rec.entropy = std::move(traj.values);
        rec.rel = ledger.rel;
    }
    return rec;
}

EnsembleResult finish(std::vector<PathRecord> records, const Params& p, const StrategyConfig& config,
                      const RunInfo& info, std::size_t pilot_paths) {
    EnsembleResult out;
    ArbitrageReport& r = out.report;
    const std::size_t count = records.size();
    std::vector<double> rels(count);
    std::size_t nonneg = 0, strict = 0, triggered = 0, triggered_strict = 0;
    double sum = 0.0, residual_sum = 0.0, residual_max = 0.0;
    r.min_rel = std::numeric_limits<double>::infinity();
    r.max_rel = -std::numeric_limits<double>::infinity();
    r.diversity = true;
    for (std::size_t j = 0; j < count; ++j) {
        const PathRecord& rec = records[j];
        rels[j] = rec.rel_T;
        nonneg += rec.rel_T >= -p.tol_as;
        strict += rec.rel_T > p.tol_as;
        triggered += rec.triggered;
        triggered_strict += rec.triggered && rec.rel_T > p.tol_as;
        sum += rec.rel_T;
        r.min_rel = std::min(r.min_rel, rec.rel_T);
        r.max_rel = std::max(r.max_rel, rec.rel_T);
        r.diversity = r.diversity && rec.diverse;
        r.max_weight_first_half = std::max(r.max_weight_first_half, rec.max_weight_first_half);
        if (rec.residual) {
            ++r.residual_count;
            residual_sum += *rec.residual;
            residual_max = std::max(residual_max, *rec.residual);
        }
    }
    const auto total = static_cast<double>(count);
    r.n_paths = count;
    r.pilot_paths = pilot_paths;
    r.frac_nonnegative = static_cast<double>(nonneg) / total;
    r.frac_strict = static_cast<double>(strict) / total;
    r.frac_triggered = static_cast<double>(triggered) / total;
    if (triggered > 0) r.frac_strict_given_triggered = static_cast<double>(triggered_strict) / static_cast<double>(triggered);
    r.mean_rel = sum / total;
    const Verdict verdict = verify_relative_arbitrage(rels, p.tol_as);
    r.arbitrage = verdict.arbitrage;
    r.strong = verdict.strong;
    r.A = p.A;
    r.A_estimated = p.A_estimated;
    r.nondiverse_zero_floor = p.nondiverse_zero;
    r.delta = p.delta;
    r.delta_branch = to_string(p.branch);
    r.epsilon = p.epsilon;
    r.epsilon_source = p.epsilon_supplied ? "supplied" : "measured";
    r.gamma_star_min = p.gamma_min;
    r.epsilon_hypothesis = p.gamma_min > p.epsilon;
    r.condition_zero = p.cz.holds;
    r.floor_first_half = p.cz.first_half;
    r.floor_second_half = p.cz.second_half;
    r.pilot_diversity = p.pilot_diverse;
    r.diversity_delta = config.diversity_delta;
    if (r.residual_count > 0) {
        r.residual_mean = residual_sum / static_cast<double>(r.residual_count);
        r.residual_max = residual_max;
        r.residual_within_tolerance = residual_max <= p.tolerance_master;
    }
    r.tol_as = p.tol_as;
    r.tolerance_master = p.tolerance_master;
    r.level_tol = config.level_tol;
    r.c_offset = p.c_offset;
    r.dt = p.dt;
    r.T = p.T;
    r.seed = info.master_seed;
    r.covariance_window = info.covariance_window;

    if (!records.empty() && !records.front().entropy.empty()) {
        std::vector<EntropyTrajectory> trajs;
        trajs.reserve(count);
        for (const auto& rec : records) trajs.push_back({rec.times, rec.entropy});
        out.floor_curve = entropy_floor_curve(trajs);
    }
    out.records = std::move(records);
    return out;
}

// Nominal step of a grid: T / M when the grid is uniform up to rounding,
// otherwise the largest step.
double grid_step(const std::vector<double>& times) {
    const std::size_t m = times.size() - 1;
    const double nominal = (times.back() - times.front()) / static_cast<double>(m);
    double h = 0.0;
    for (std::size_t k = 0; k < m; ++k) h = std::max(h, times[k + 1] - times[k]);
    return h - nominal <= 1e-9 * nominal ? nominal : h;
}

void validate_config(const StrategyConfig& config) {
    if (!(config.level_tol > 0.0)) throw ConfigError("level_tol: must be positive");
    if (config.tol_as && !(*config.tol_as > 0.0)) throw ConfigError("tol_as: must be positive");
    if (config.tolerance_master && !(*config.tolerance_master > 0.0))
        throw ConfigError("tolerance_master: must be positive");
    if (!(config.diversity_delta > 0.0 && config.diversity_delta < 1.0))
        throw ConfigError("diversity_delta: must lie in (0, 1)");
    if (!(config.epsilon_safety > 0.0 && config.epsilon_safety <= 1.0))
        throw ConfigError("epsilon_safety: must lie in (0, 1]");
    if (!(config.nondiverse_floor >= 0.0)) throw ConfigError("nondiverse_floor: must be nonnegative");
}

}  // namespace

EnsembleResult run_ensemble(const ModelSpec& spec, const StrategyConfig& config, const EnsembleOptions& options) {
    spec.validate();
    validate_config(config);
    if (options.n_paths == 0) throw ConfigError("n_paths: must be at least 1");
    if (options.pilot_paths == 0) throw ConfigError("pilot_paths: must be at least 1");
    const std::vector<double> grid = make_grid(options.T, options.dt);

    PilotData pilot(options.pilot_paths);
    parallel_for(options.pilot_paths, options.threads, [&](std::size_t i) {
        const std::uint64_t seed = path_seed(options.master_seed, i);
        try {
            pilot.add(i, simulate_path(spec, options.T, options.dt, seed));
        } catch (...) {
            rethrow_for_path("pilot path", i, seed);
        }
    });
    const Params params = resolve(pilot, spec.n, options.T, grid_step(grid), config);

    std::vector<PathRecord> records(options.n_paths);
    parallel_for(options.n_paths, options.threads, [&](std::size_t j) {
        const std::size_t index = options.pilot_paths + j;
        const std::uint64_t seed = path_seed(options.master_seed, index);
        try {
            const MarketPath path = simulate_path(spec, options.T, options.dt, seed);
            records[j] = score_one(path, j, params, config, options.keep_trajectories);
        } catch (...) {
            rethrow_for_path("path", index, seed);
        }
    });
    return finish(std::move(records), params, config, {options.master_seed, 0}, options.pilot_paths);
}

EnsembleResult score_paths(std::span<const MarketPath> pilot, std::span<const MarketPath> scored,
                           const StrategyConfig& config, const RunInfo& info, bool keep_trajectories,
                           unsigned threads) {
    validate_config(config);
    if (pilot.empty() || scored.empty()) throw std::invalid_argument("score_paths needs pilot and scored paths");
    const MarketPath& reference = scored.front();
    auto check_grid = [&](const MarketPath& path) {
        if (path.times != reference.times || path.n() != reference.n())
            throw DataError("all paths must share one time grid and stock count");
    };
    for (const auto& path : pilot) check_grid(path);
    for (const auto& path : scored) check_grid(path);

    PilotData data(pilot.size());
    parallel_for(pilot.size(), threads, [&](std::size_t i) { data.add(i, pilot[i]); });
    const Params params = resolve(data, reference.n(), reference.horizon(), grid_step(reference.times), config);

    std::vector<PathRecord> records(scored.size());
    parallel_for(scored.size(), threads, [&](std::size_t j) {
        try {
            records[j] = score_one(scored[j], j, params, config, keep_trajectories);
        } catch (...) {
            rethrow_for_path("path", j, scored[j].seed);
        }
    });
    return finish(std::move(records), params, config, info, pilot.size());
}

Verdict verify_relative_arbitrage(std::span<const double> rels, double tol_as) {
    if (rels.empty()) throw std::invalid_argument("verify_relative_arbitrage needs at least one path");
    Verdict v;
    v.weak_dominance = std::all_of(rels.begin(), rels.end(), [&](double r) { return r >= -tol_as; });
    v.strict_gain = std::any_of(rels.begin(), rels.end(), [&](double r) { return r > tol_as; });
    v.arbitrage = v.weak_dominance && v.strict_gain;
    v.strong = std::all_of(rels.begin(), rels.end(), [&](double r) { return r > tol_as; });
    return v;
}

double master_equation_residual(const MarketPath& path, double c, std::size_t k_begin, std::size_t k_end) {
    if (k_begin > k_end || k_end > path.steps()) throw std::invalid_argument("segment outside the path grid");
    if (k_begin == k_end) return 0.0;
    const MarketPath segment = slice(path, k_begin, k_end);
    const WealthLedger ledger =
        accumulate_wealth(segment, [&](std::size_t k) { return entropy_portfolio(segment.weights_at(k), c); });
    const double lhs = ledger.rel.back() - ledger.rel.front();
    return std::abs(lhs - master_equation_rhs(path, c, k_begin, k_end));
}

double master_equation_residual(const MarketPath& path, double c) {
    return master_equation_residual(path, c, 0, path.steps());
}

ConvergenceTable convergence_study(const ModelSpec& spec, double c, const std::vector<double>& dts, double T,
                                   std::uint64_t seed, std::size_t n_paths) {
    spec.validate();
    if (dts.empty()) throw std::invalid_argument("convergence study needs at least one dt");
    if (n_paths == 0) throw std::invalid_argument("convergence study needs at least one path");
    for (std::size_t i = 1; i < dts.size(); ++i) {
        if (!(dts[i] < dts[i - 1])) throw std::invalid_argument("dts must be strictly decreasing");
    }
    const double finest = dts.back();
    const std::vector<double> fine_grid = make_grid(T, finest);
    std::vector<std::size_t> factors;
    for (double dt : dts) {
        const double ratio = dt / finest;
        const auto f = static_cast<std::size_t>(std::llround(ratio));
        const std::size_t fine_steps = fine_grid.size() - 1;
        if (std::abs(ratio - static_cast<double>(f)) > 1e-9 * ratio || fine_steps % f != 0 ||
            std::abs(static_cast<double>(fine_steps) * finest - T) > 1e-9 * T)
            throw std::invalid_argument("dts are not nested refinements of one grid over [0, T]");
        factors.push_back(f);
    }

    ConvergenceTable table;
    table.rows.reserve(dts.size());
    std::vector<double> totals(dts.size(), 0.0);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const std::uint64_t s = path_seed(seed, p);
        const Eigen::MatrixXd fine = brownian_increments(fine_grid, spec.d, s);
        for (std::size_t i = 0; i < dts.size(); ++i) {
            const std::vector<double> grid = make_grid(T, dts[i]);
            const MarketPath path = simulate_path_with_increments(spec, grid, coarsen_increments(fine, factors[i]),
                                                                  bridge_seed(s));
            totals[i] += master_equation_residual(path, c);
        }
    }
    bool all_tiny = true, decreasing = true;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        table.rows.push_back({dts[i], totals[i] / static_cast<double>(n_paths)});
        all_tiny = all_tiny && table.rows[i].residual < 1e-12;
        if (i > 0) decreasing = decreasing && table.rows[i].residual < table.rows[i - 1].residual;
    }
    if (dts.size() == 1)
        table.verdict = ConvergenceVerdict::NoVerdict;
    else if (all_tiny)
        table.verdict = ConvergenceVerdict::VacuousPass;
    else
        table.verdict = decreasing ? ConvergenceVerdict::Decreasing : ConvergenceVerdict::NotDecreasing;
    return table;
}

std::string to_string(ConvergenceVerdict verdict) {
    switch (verdict) {
    case ConvergenceVerdict::Decreasing: return "decreasing";
    case ConvergenceVerdict::NotDecreasing: return "not_decreasing";
    case ConvergenceVerdict::NoVerdict: return "no_verdict";
    case ConvergenceVerdict::VacuousPass: return "vacuous_pass";
    }
    return "unknown";
}

std::string to_string(DeltaBranch branch) {
    switch (branch) {
    case DeltaBranch::ZeroFloor: return "zero_floor";
    case DeltaBranch::PositiveFloor: return "positive_floor";
    case DeltaBranch::Supplied: return "supplied";
    }
    return "unknown";
}

}  // namespace relarb
