#pragma once

#include "relarb/market_sim.hpp"
#include "relarb/portfolio.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace relarb {

/// Default tolerance for level comparisons of entropy along a grid.
inline constexpr double kLevelTolerance = 1e-9;
/// Floors at or below this value take the A = 0 branch of delta selection.
inline constexpr double kZeroFloorTolerance = 1e-9;

/// A grid time together with its index on the path grid.
struct GridTime {
    double time = 0.0;
    std::size_t index = 0;

    friend bool operator==(const GridTime&, const GridTime&) = default;
};

/// Closed time window [begin, end].
struct Window {
    double begin = 0.0;
    double end = 0.0;
};

/// S(mu(t_k)) along a path grid.
struct EntropyTrajectory {
    std::vector<double> times;
    std::vector<double> values;
};

EntropyTrajectory entropy_trajectory(const MarketPath& path);

/// Minimum of S(mu(t_k)) over all trajectories and all grid times inside the
/// window: the Monte Carlo stand-in for the essential infimum.
double estimate_entropy_floor(std::span<const EntropyTrajectory> ensemble, Window window);
double estimate_entropy_floor(std::span<const MarketPath> ensemble, Window window);

struct ConditionZero {
    double first_half = 0.0;   // floor over [0, T/2]
    double second_half = 0.0;  // floor over [T/2, T]
    bool holds = false;        // first_half <= second_half
};

ConditionZero condition_zero(std::span<const EntropyTrajectory> ensemble, double T);
bool check_condition_zero(std::span<const EntropyTrajectory> ensemble, double T);
bool check_condition_zero(std::span<const MarketPath> ensemble, double T);

enum class DeltaBranch { ZeroFloor, PositiveFloor, Supplied };

struct DeltaOptions {
    double margin = 0.01;               // slack on the cap A + 2 delta < log n
    std::optional<double> margin_pos;   // defaults to 0.01 eps T / (2 (A + 3 delta0))
    double zero_tolerance = kZeroFloorTolerance;
};

struct DeltaSelection {
    double delta = 0.0;
    DeltaBranch branch = DeltaBranch::ZeroFloor;
    double margin_pos = 0.0;  // acceptance margin used on the positive-floor branch
    int halvings = 0;
};

/// log((A + delta) / (A + 2 delta)) + eps T / (2 (A + 3 delta)): lower bound on the
/// relative log gain when the entropy phase runs to the horizon.
double positive_floor_bound(double A, double delta, double epsilon, double T);

DeltaSelection select_delta_detailed(double A, double epsilon, double T, std::size_t n,
                                     const DeltaOptions& options = {});
double select_delta(double A, double epsilon, double T, std::size_t n, const DeltaOptions& options = {});

/// First grid time in [0, T/2] with S <= A + delta (+ level_tol); T when none.
GridTime stopping_time_tau1(const EntropyTrajectory& entropy, double A, double delta, double T,
                            double level_tol = kLevelTolerance);

/// First grid time at or after tau1 at which S has climbed to A + 2 delta
/// (within level_tol); T when it never does.
GridTime stopping_time_tau2(const EntropyTrajectory& entropy, GridTime tau1, double A, double delta, double T,
                            double level_tol = kLevelTolerance);

enum class Phase { MarketBefore, Entropy, MarketAfter };

struct StrategyState {
    double A = 0.0;
    double delta = 0.0;
    double epsilon = 0.0;
    double T = 0.0;
    GridTime tau1;
    GridTime tau2;
    double c_offset = 0.0;  // generator offset of the entropy phase; delta unless overridden

    Phase phase_at_step(std::size_t k) const;
    Phase phase_at(double t) const;
    /// tau1 fired inside [0, T/2].
    bool triggered() const { return tau1.time < T; }
};

/// Computes both stopping times for `entropy` and checks the state invariants
/// (0 <= A < log n, A + 2 delta < log n, tau1 <= tau2 <= T).
StrategyState make_strategy_state(const EntropyTrajectory& entropy, std::size_t n, double A, double delta,
                                  double epsilon, double T, double level_tol = kLevelTolerance,
                                  std::optional<double> c_offset = std::nullopt);

/// eta: market weights outside [tau1, tau2), S_c-generated weights inside.
PortfolioWeights eta_weights_at_step(std::size_t k, const MarketPath& path, const StrategyState& state);
PortfolioWeights eta_weights(double t, const MarketPath& path, const StrategyState& state);

/// Value of eta against the market. While eta holds the market its relative
/// value is unchanged (the market portfolio replicates X exactly); during the
/// entropy phase each step adds wealth_step(pi) - (log X(t_{k+1}) - log X(t_k)).
WealthLedger eta_wealth(const MarketPath& path, const StrategyState& state);

double max_market_weight(const MarketPath& path, Window window);

/// True iff every market weight on grid points in the window stays below 1 - delta_div.
bool is_diverse(const MarketPath& path, double delta_div, Window window);

struct FloorCurve {
    std::vector<double> times;
    std::vector<double> values;
    // Longest run of consecutive grid points on which the curve is nondecreasing.
    double nondecreasing_begin = 0.0;
    double nondecreasing_end = 0.0;
};

/// Pointwise minimum of S(mu(t_k)) across trajectories sharing one grid.
FloorCurve entropy_floor_curve(std::span<const EntropyTrajectory> ensemble);

}  // namespace relarb
