#include "relarb/strategy.hpp"

#include "relarb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace relarb {

namespace {

constexpr int kMaxHalvings = 60;

bool in_window(double t, Window w) {
    const double tol = 1e-9 * std::max(1.0, std::abs(w.end));
    return t >= w.begin - tol && t <= w.end + tol;
}

std::size_t checked_grid_index(double t, const std::vector<double>& times) {
    const double tol = 1e-12 * std::max(1.0, times.back());
    if (!(t >= times.front() - tol && t <= times.back() + tol))
        throw std::invalid_argument("time outside the path horizon");
    auto it = std::upper_bound(times.begin(), times.end(), t + tol);
    return static_cast<std::size_t>(std::distance(times.begin(), it)) - 1;
}

}  // namespace

EntropyTrajectory entropy_trajectory(const MarketPath& path) {
    EntropyTrajectory out;
    out.times = path.times;
    out.values.resize(path.times.size());
    for (std::size_t k = 0; k < path.times.size(); ++k) out.values[k] = entropy(path.weights_at(k));
    return out;
}

double estimate_entropy_floor(std::span<const EntropyTrajectory> ensemble, Window window) {
    if (ensemble.empty()) throw std::invalid_argument("entropy floor needs a nonempty ensemble");
    double floor = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& traj : ensemble) {
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            if (!in_window(traj.times[k], window)) continue;
            floor = std::min(floor, traj.values[k]);
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("window contains no grid points");
    return floor;
}

double estimate_entropy_floor(std::span<const MarketPath> ensemble, Window window) {
    std::vector<EntropyTrajectory> trajectories;
    trajectories.reserve(ensemble.size());
    for (const auto& path : ensemble) trajectories.push_back(entropy_trajectory(path));
    return estimate_entropy_floor(std::span<const EntropyTrajectory>(trajectories), window);
}

ConditionZero condition_zero(std::span<const EntropyTrajectory> ensemble, double T) {
    ConditionZero out;
    out.first_half = estimate_entropy_floor(ensemble, {0.0, 0.5 * T});
    out.second_half = estimate_entropy_floor(ensemble, {0.5 * T, T});
    out.holds = out.first_half <= out.second_half;
    return out;
}

bool check_condition_zero(std::span<const EntropyTrajectory> ensemble, double T) {
    return condition_zero(ensemble, T).holds;
}

bool check_condition_zero(std::span<const MarketPath> ensemble, double T) {
    std::vector<EntropyTrajectory> trajectories;
    for (const auto& path : ensemble) trajectories.push_back(entropy_trajectory(path));
    return check_condition_zero(std::span<const EntropyTrajectory>(trajectories), T);
}

double positive_floor_bound(double A, double delta, double epsilon, double T) {
    return std::log((A + delta) / (A + 2.0 * delta)) + epsilon * T / (2.0 * (A + 3.0 * delta));
}

DeltaSelection select_delta_detailed(double A, double epsilon, double T, std::size_t n,
                                     const DeltaOptions& options) {
    const double log_n = std::log(static_cast<double>(n));
    if (n < 2) throw std::invalid_argument("select_delta: n must be at least 2");
    if (!(epsilon > 0.0)) throw std::invalid_argument("select_delta: epsilon must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("select_delta: T must be positive");
    if (!(A >= 0.0 && A < log_n)) throw std::invalid_argument("select_delta: A must lie in [0, log n)");
    if (!(options.margin > 0.0 && options.margin < 1.0))
        throw std::invalid_argument("select_delta: margin must lie in (0, 1)");

    const double cap = 0.5 * (log_n - A) * (1.0 - options.margin);
    const double zero_floor_delta = epsilon * T / (6.0 * std::numbers::ln2);
    DeltaSelection out;
    out.delta = std::min(zero_floor_delta, cap);
    if (A <= options.zero_tolerance) {
        out.branch = DeltaBranch::ZeroFloor;
        return out;
    }

    out.branch = DeltaBranch::PositiveFloor;
    out.margin_pos = options.margin_pos.value_or(0.01 * epsilon * T / (2.0 * (A + 3.0 * out.delta)));
    while (positive_floor_bound(A, out.delta, epsilon, T) < out.margin_pos) {
        if (out.halvings == kMaxHalvings) {
            std::ostringstream msg;
            msg << "select_delta: no delta after " << kMaxHalvings << " halvings (A=" << A
                << ", margin_pos=" << out.margin_pos << ")";
            throw NumericalError(msg.str());
        }
        out.delta *= 0.5;
        ++out.halvings;
    }
    return out;
}

double select_delta(double A, double epsilon, double T, std::size_t n, const DeltaOptions& options) {
    return select_delta_detailed(A, epsilon, T, n, options).delta;
}

GridTime stopping_time_tau1(const EntropyTrajectory& entropy, double A, double delta, double T,
                            double level_tol) {
    const double level = A + delta + level_tol;
    const Window first_half{0.0, 0.5 * T};
    for (std::size_t k = 0; k < entropy.times.size(); ++k) {
        if (!in_window(entropy.times[k], first_half)) break;
        if (entropy.values[k] <= level) return {entropy.times[k], k};
    }
    return {T, entropy.times.size() - 1};
}

GridTime stopping_time_tau2(const EntropyTrajectory& entropy, GridTime tau1, double A, double delta, double T,
                            double level_tol) {
    const std::size_t last = entropy.times.size() - 1;
    if (tau1.index >= last) return {T, last};
    const double level = A + 2.0 * delta - level_tol;
    // Starting below the level, the first grid point at or above it is the
    // first crossing from below.
    for (std::size_t k = tau1.index; k <= last; ++k) {
        if (entropy.values[k] >= level) return {entropy.times[k], k};
    }
    return {T, last};
}

Phase StrategyState::phase_at_step(std::size_t k) const {
    if (k < tau1.index) return Phase::MarketBefore;
    if (k < tau2.index) return Phase::Entropy;
    return Phase::MarketAfter;
}

Phase StrategyState::phase_at(double t) const {
    if (t < tau1.time) return Phase::MarketBefore;
    if (t < tau2.time) return Phase::Entropy;
    return Phase::MarketAfter;
}

StrategyState make_strategy_state(const EntropyTrajectory& entropy, std::size_t n, double A, double delta,
                                  double epsilon, double T, double level_tol, std::optional<double> c_offset) {
    const double log_n = std::log(static_cast<double>(n));
    if (!(A >= 0.0 && A < log_n)) throw std::invalid_argument("strategy: A must lie in [0, log n)");
    if (!(delta > 0.0) || !(A + 2.0 * delta < log_n))
        throw std::invalid_argument("strategy: delta must be positive with A + 2 delta < log n");
    StrategyState s;
    s.A = A;
    s.delta = delta;
    s.epsilon = epsilon;
    s.T = T;
    s.tau1 = stopping_time_tau1(entropy, A, delta, T, level_tol);
    s.tau2 = stopping_time_tau2(entropy, s.tau1, A, delta, T, level_tol);
    s.c_offset = c_offset.value_or(delta);
    if (!(s.c_offset >= 0.0)) throw std::invalid_argument("strategy: c_offset must be nonnegative");
    return s;
}

PortfolioWeights eta_weights_at_step(std::size_t k, const MarketPath& path, const StrategyState& state) {
    if (k > path.steps()) throw std::invalid_argument("grid index outside the path");
    PortfolioWeights mu = path.weights_at(k);
    if (state.phase_at_step(k) != Phase::Entropy) return mu;
    return entropy_portfolio(mu, state.c_offset);
}

PortfolioWeights eta_weights(double t, const MarketPath& path, const StrategyState& state) {
    if (!(t >= 0.0 && t <= state.T * (1.0 + 1e-12))) throw std::invalid_argument("eta_weights: t outside [0, T]");
    return eta_weights_at_step(checked_grid_index(t, path.times), path, state);
}

WealthLedger eta_wealth(const MarketPath& path, const StrategyState& state) {
    const std::size_t m = path.steps();
    WealthLedger ledger;
    ledger.logZ_mu.resize(m + 1);
    ledger.logZ_pi.resize(m + 1);
    ledger.rel.assign(m + 1, 0.0);
    for (std::size_t k = 0; k <= m; ++k) ledger.logZ_mu[k] = path.log_total(k);
    for (std::size_t k = 0; k < m; ++k) {
        double step = 0.0;
        if (state.phase_at_step(k) == Phase::Entropy) {
            const auto row = static_cast<Eigen::Index>(k);
            const PortfolioWeights pi = entropy_portfolio(path.weights_at(k), state.c_offset);
            step = wealth_step(pi, path.dlogX.row(row).transpose(), path.sigma[k], path.step_size(k)) -
                   (ledger.logZ_mu[k + 1] - ledger.logZ_mu[k]);
        }
        ledger.rel[k + 1] = ledger.rel[k] + step;
    }
    for (std::size_t k = 0; k <= m; ++k) ledger.logZ_pi[k] = ledger.logZ_mu[k] + ledger.rel[k];
    return ledger;
}

double max_market_weight(const MarketPath& path, Window window) {
    double peak = 0.0;
    bool any = false;
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        if (!in_window(path.times[k], window)) continue;
        peak = std::max(peak, path.weights_at(k).values().maxCoeff());
        any = true;
    }
    if (!any) throw std::invalid_argument("window contains no grid points");
    return peak;
}

bool is_diverse(const MarketPath& path, double delta_div, Window window) {
    if (!(delta_div > 0.0 && delta_div < 1.0)) throw std::invalid_argument("diversity delta must lie in (0, 1)");
    return max_market_weight(path, window) < 1.0 - delta_div;
}

FloorCurve entropy_floor_curve(std::span<const EntropyTrajectory> ensemble) {
    if (ensemble.empty()) throw std::invalid_argument("floor curve needs a nonempty ensemble");
    FloorCurve curve;
    curve.times = ensemble.front().times;
    curve.values = ensemble.front().values;
    for (const auto& traj : ensemble.subspan(1)) {
        if (traj.times != curve.times) throw DataError("entropy trajectories do not share a grid");
        for (std::size_t k = 0; k < curve.values.size(); ++k)
            curve.values[k] = std::min(curve.values[k], traj.values[k]);
    }
    std::size_t best_begin = 0, best_end = 0, run_begin = 0;
    for (std::size_t k = 1; k < curve.values.size(); ++k) {
        if (curve.values[k] < curve.values[k - 1]) {
            run_begin = k;
            continue;
        }
        if (curve.times[k] - curve.times[run_begin] > curve.times[best_end] - curve.times[best_begin]) {
            best_begin = run_begin;
            best_end = k;
        }
    }
    curve.nondecreasing_begin = curve.times[best_begin];
    curve.nondecreasing_end = curve.times[best_end];
    return curve;
}

}  // namespace relarb
