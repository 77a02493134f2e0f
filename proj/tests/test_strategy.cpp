#include "oracles.hpp"

#include "relarb/errors.hpp"
#include "relarb/market_sim.hpp"
#include "relarb/portfolio.hpp"
#include "relarb/rng.hpp"
#include "relarb/strategy.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace relarb;
using oracle::Big;

namespace {

EntropyTrajectory trajectory(double dt, int steps, const std::function<double(double)>& f) {
    EntropyTrajectory e;
    for (int k = 0; k <= steps; ++k) {
        e.times.push_back(k * dt);
        e.values.push_back(f(k * dt));
    }
    return e;
}

// Path with the given market weights at every grid point and zero covariance.
MarketPath weights_path(const std::vector<Eigen::VectorXd>& weights, double T) {
    MarketPath p;
    const auto m = weights.size() - 1;
    const auto n = weights.front().size();
    p.caps.resize(static_cast<Eigen::Index>(m + 1), n);
    for (std::size_t k = 0; k <= m; ++k) {
        p.times.push_back(T * static_cast<double>(k) / static_cast<double>(m));
        p.caps.row(static_cast<Eigen::Index>(k)) = weights[k].transpose();
    }
    p.sigma.assign(m, Eigen::MatrixXd::Zero(n, n));
    p.finalize();
    return p;
}

std::vector<MarketPath> vsm_ensemble(std::size_t n, std::size_t count, std::uint64_t master, double dt = 1e-2) {
    std::vector<MarketPath> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(simulate_path(ModelSpec::volatility_stabilized(n, 0.5), 1.0, dt, path_seed(master, i)));
    return out;
}

}  // namespace

TEST(EntropyFloor, ConstantUniformPath) {
    const std::vector<Eigen::VectorXd> w(11, Eigen::VectorXd::Constant(4, 0.25));
    const std::vector<MarketPath> ens{weights_path(w, 1.0)};
    EXPECT_NEAR(estimate_entropy_floor(ens, {0.0, 0.5}), std::log(4.0), 1e-15);
}

TEST(EntropyFloor, MinimumOfKnownCurves) {
    const std::vector<EntropyTrajectory> ens{
        trajectory(0.1, 10, [](double t) { return 0.41 + std::abs(t - 0.2); }),
        trajectory(0.1, 10, [](double t) { return 0.37 + std::abs(t - 0.4); })};
    EXPECT_NEAR(estimate_entropy_floor(ens, {0.0, 0.5}), 0.37, 1e-15);
}

TEST(EntropyFloor, MatchesBruteForce) {
    const auto ens = vsm_ensemble(4, 30, 5);
    double brute = 1e300;
    for (const auto& p : ens)
        for (std::size_t k = 0; k < p.times.size(); ++k)
            if (p.times[k] <= 0.5 + 1e-12) brute = std::min(brute, oracle::entropy(p.weights_at(k).values()));
    EXPECT_NEAR(estimate_entropy_floor(ens, {0.0, 0.5}), brute, 1e-14);
}

TEST(EntropyFloor, RejectsEmptyInputs) {
    const std::vector<EntropyTrajectory> none;
    EXPECT_THROW(estimate_entropy_floor(none, {0.0, 0.5}), std::invalid_argument);
    const std::vector<EntropyTrajectory> one{trajectory(0.1, 10, [](double) { return 0.5; })};
    EXPECT_THROW(estimate_entropy_floor(one, {2.0, 3.0}), std::invalid_argument);
}

TEST(ConditionZero, FloorComparison) {
    auto halves = [](double first, double second) {
        return std::vector<EntropyTrajectory>{
            trajectory(0.1, 10, [=](double t) { return t < 0.45 ? first : (t > 0.55 ? second : 1.0); })};
    };
    EXPECT_TRUE(check_condition_zero(halves(0.3, 0.5), 1.0));
    EXPECT_FALSE(check_condition_zero(halves(0.5, 0.3), 1.0));
    EXPECT_TRUE(check_condition_zero(halves(0.4, 0.4), 1.0));
    const auto cz = condition_zero(halves(0.3, 0.5), 1.0);
    EXPECT_EQ(cz.first_half, 0.3);
    EXPECT_EQ(cz.second_half, 0.5);
}

TEST(SelectDelta, ZeroFloorFormula) {
    const auto sel = select_delta_detailed(0.0, 0.5, 1.0, 10);
    EXPECT_EQ(sel.branch, DeltaBranch::ZeroFloor);
    EXPECT_NEAR(sel.delta, 0.5 / (6.0 * std::numbers::ln2), 1e-15);
    EXPECT_NEAR(sel.delta, 0.1202245, 1e-7);
}

TEST(SelectDelta, CapKeepsTwoDeltaBelowLogN) {
    const double d = select_delta(0.0, 10.0, 1.0, 2);
    EXPECT_LT(2 * d, std::log(2.0));
    EXPECT_NEAR(d, 0.5 * std::log(2.0) * 0.99, 1e-15);
}

TEST(SelectDelta, PositiveFloorAcceptsFirstCandidate) {
    const auto sel = select_delta_detailed(0.5, 0.5, 1.0, 10);
    EXPECT_EQ(sel.branch, DeltaBranch::PositiveFloor);
    EXPECT_EQ(sel.halvings, 0);
    EXPECT_NEAR(sel.delta, 0.5 / (6.0 * std::numbers::ln2), 1e-15);
    EXPECT_GE(positive_floor_bound(0.5, sel.delta, 0.5, 1.0), sel.margin_pos);
    EXPECT_NEAR(positive_floor_bound(0.5, 0.1, 0.5, 1.0), std::log(0.6 / 0.7) + 0.25 / 0.8, 1e-15);
    EXPECT_NEAR(positive_floor_bound(0.5, 0.1, 0.5, 1.0), 0.1583, 1e-4);
}

TEST(SelectDelta, ContractsOverParameterGrid) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 14;
        const double log_n = std::log(static_cast<double>(n));
        const double A = trial % 5 == 0 ? 0.0 : 0.95 * log_n * u(rng);
        const double eps = 0.01 + 5.0 * u(rng);
        const double T = 0.05 + 2.0 * u(rng);
        const auto sel = select_delta_detailed(A, eps, T, n);
        EXPECT_GT(sel.delta, 0.0);
        EXPECT_LT(A + 2 * sel.delta, log_n);
        if (A > 0.0) {
            EXPECT_GT(sel.margin_pos, 0.0);
            EXPECT_GE(positive_floor_bound(A, sel.delta, eps, T), sel.margin_pos);
        } else {
            EXPECT_EQ(sel.delta, std::min(eps * T / (6 * std::numbers::ln2), 0.5 * log_n * 0.99));
        }
    }
}

TEST(SelectDelta, ZeroToleranceRoutesSmallFloors) {
    EXPECT_EQ(select_delta_detailed(5e-10, 0.5, 1.0, 4).branch, DeltaBranch::ZeroFloor);
    EXPECT_EQ(select_delta_detailed(1e-6, 0.5, 1.0, 4).branch, DeltaBranch::PositiveFloor);
    DeltaOptions loose;
    loose.zero_tolerance = 1e-3;
    EXPECT_EQ(select_delta_detailed(1e-6, 0.5, 1.0, 4, loose).branch, DeltaBranch::ZeroFloor);
}

TEST(SelectDelta, Errors) {
    EXPECT_THROW(select_delta(0.0, 0.0, 1.0, 3), std::invalid_argument);
    EXPECT_THROW(select_delta(0.0, 0.5, 0.0, 3), std::invalid_argument);
    EXPECT_THROW(select_delta(std::log(3.0), 0.5, 1.0, 3), std::invalid_argument);
    DeltaOptions impossible;
    impossible.margin_pos = 10.0;  // above the small-delta limit eps T / (2A) = 0.5
    EXPECT_THROW(select_delta(0.5, 0.5, 1.0, 10, impossible), NumericalError);
}

TEST(StoppingTimes, LinearDecline) {
    const auto e = trajectory(0.01, 100, [](double t) { return 0.8 - 0.6 * t; });
    const auto tau1 = stopping_time_tau1(e, 0.4, 0.1, 1.0);
    EXPECT_NEAR(tau1.time, 0.5, 1e-15);
    EXPECT_EQ(tau1.index, 50u);
    // Entropy keeps falling, so the level A + 2 delta is never regained.
    const auto tau2 = stopping_time_tau2(e, tau1, 0.4, 0.1, 1.0);
    EXPECT_EQ(tau2.time, 1.0);
    EXPECT_EQ(tau2.index, 100u);
}

TEST(StoppingTimes, NoTriggerGivesHorizon) {
    const auto e = trajectory(0.01, 100, [](double t) { return 0.9 - 0.2 * t; });
    const auto tau1 = stopping_time_tau1(e, 0.4, 0.1, 1.0);
    EXPECT_EQ(tau1.time, 1.0);
    EXPECT_EQ(stopping_time_tau2(e, tau1, 0.4, 0.1, 1.0).time, 1.0);
}

TEST(StoppingTimes, LateDipIgnored) {
    // Dips below A + delta only after T/2.
    const auto e = trajectory(0.01, 100, [](double t) { return t < 0.6 ? 0.9 : 0.45; });
    EXPECT_EQ(stopping_time_tau1(e, 0.4, 0.1, 1.0).time, 1.0);
}

TEST(StoppingTimes, ImmediateTrigger) {
    const auto e = trajectory(0.01, 100, [](double) { return 0.45; });
    const auto tau1 = stopping_time_tau1(e, 0.4, 0.1, 1.0);
    EXPECT_EQ(tau1.time, 0.0);
    EXPECT_EQ(tau1.index, 0u);
}

TEST(StoppingTimes, CrossingFromBelow) {
    EntropyTrajectory e;
    e.times = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    e.values = {0.9, 0.8, 0.7, 0.6, 0.5, 0.5 + 1.0 / 30, 0.5 + 2.0 / 30, 0.6, 0.62, 0.64, 0.66};
    const auto tau1 = stopping_time_tau1(e, 0.4, 0.1, 0.5 * 2);
    EXPECT_EQ(tau1.time, 0.2);
    const auto tau2 = stopping_time_tau2(e, tau1, 0.4, 0.1, 1.0);
    EXPECT_EQ(tau2.time, 0.35);
    EXPECT_EQ(tau2.index, 7u);
}

TEST(StoppingTimes, DegenerateStartAboveUpperLevel) {
    const auto e = trajectory(0.1, 10, [](double) { return 0.7; });
    const auto tau2 = stopping_time_tau2(e, GridTime{0.0, 0}, 0.4, 0.1, 1.0);
    EXPECT_EQ(tau2.time, 0.0);
}

TEST(StoppingTimes, OrderedOnSimulatedPaths) {
    const auto ens = vsm_ensemble(3, 40, 9, 1e-3);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& p : ens) {
        const auto e = entropy_trajectory(p);
        const double A = 0.5 * u(rng);
        const double delta = 0.01 + (std::log(3.0) - A) * 0.45 * u(rng);
        const auto s = make_strategy_state(e, 3, A, delta, 0.9, 1.0);
        EXPECT_LE(s.tau1.time, s.tau2.time);
        EXPECT_LE(s.tau2.time, 1.0);
        EXPECT_TRUE(s.tau1.time <= 0.5 + 1e-12 || s.tau1.time == 1.0);
        if (s.triggered() && s.tau2.time < 1.0) {
            const double at1 = e.values[s.tau1.index], at2 = e.values[s.tau2.index];
            EXPECT_LE(at1, A + delta + kLevelTolerance);
            EXPECT_GE(at2, A + 2 * delta - kLevelTolerance);
            EXPECT_GE(std::log(at2 + delta) - std::log(at1 + delta),
                      std::log((A + 3 * delta - kLevelTolerance) / (A + 2 * delta + kLevelTolerance)));
        }
    }
}

TEST(StrategyState, RejectsInfeasibleParameters) {
    const auto e = trajectory(0.1, 10, [](double) { return 0.6; });
    EXPECT_THROW(make_strategy_state(e, 2, std::log(2.0), 0.1, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(make_strategy_state(e, 2, 0.2, 0.3, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(make_strategy_state(e, 2, 0.2, 0.0, 1.0, 1.0), std::invalid_argument);
}

TEST(EtaWeights, NoTriggerHoldsMarket) {
    const auto p = simulate_path(ModelSpec::volatility_stabilized(3, 0.5), 1.0, 1e-3, 88);
    const auto e = entropy_trajectory(p);
    double lowest = 1e300;
    for (double v : e.values) lowest = std::min(lowest, v);
    // A + delta below the path's entropy minimum: tau1 never fires.
    const auto s = make_strategy_state(e, 3, 0.5 * lowest, 0.25 * lowest, 1.0, 1.0);
    ASSERT_FALSE(s.triggered());
    for (std::size_t k = 0; k <= p.steps(); k += 97) EXPECT_TRUE(eta_weights_at_step(k, p, s) == p.weights_at(k));
    const auto ledger = eta_wealth(p, s);
    EXPECT_EQ(ledger.rel.back(), 0.0);
}

TEST(EtaWeights, UniformMarketInEntropyPhase) {
    const std::vector<Eigen::VectorXd> w(5, Eigen::VectorXd::Constant(3, 1.0 / 3));
    const auto p = weights_path(w, 1.0);
    StrategyState s;
    s.A = 0.1;
    s.delta = 0.2;
    s.c_offset = 0.2;
    s.T = 1.0;
    s.tau1 = {0.0, 0};
    s.tau2 = {1.0, 4};
    const auto eta = eta_weights(0.5, p, s);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(eta[i], 1.0 / 3, 1e-15);
}

TEST(EtaWeights, EntropyPhaseUsesDeltaGenerator) {
    const std::vector<Eigen::VectorXd> w(3, Eigen::Vector2d(0.8, 0.2));
    const auto p = weights_path(w, 1.0);
    StrategyState s;
    s.A = 0.0;
    s.delta = 0.1;
    s.c_offset = 0.1;
    s.T = 1.0;
    s.tau1 = {0.0, 0};
    s.tau2 = {1.0, 2};
    const auto ref = oracle::big_entropy_weights({Big("0.8"), Big("0.2")}, Big("0.1"));
    const auto eta = eta_weights(0.5, p, s);
    EXPECT_NEAR(eta[0], ref[0].convert_to<double>(), 1e-15);
    EXPECT_NEAR(eta[1], ref[1].convert_to<double>(), 1e-15);
    EXPECT_NEAR(eta[0], 0.43057, 1e-5);
    // At tau2 the strategy is back in the market.
    EXPECT_TRUE(eta_weights(1.0, p, s) == p.weights_at(2));
    EXPECT_THROW(eta_weights(1.5, p, s), std::invalid_argument);
    EXPECT_THROW(eta_weights(-0.1, p, s), std::invalid_argument);
}

TEST(EtaWeights, MarketOutsideEntropyWindow) {
    const auto p = simulate_path(ModelSpec::volatility_stabilized(4, 0.5), 1.0, 1e-3, 2);
    const auto e = entropy_trajectory(p);
    const double m = *std::min_element(e.values.begin(), e.values.begin() + 501);
    ASSERT_LT(1.3 * m, std::log(4.0));
    const auto s = make_strategy_state(e, 4, 0.9 * m, 0.2 * m, 1.8, 1.0);
    std::size_t entropy_steps = 0, market_steps = 0;
    for (std::size_t k = 0; k < p.steps(); ++k) {
        if (s.phase_at_step(k) != Phase::Entropy) {
            ++market_steps;
            EXPECT_TRUE(eta_weights_at_step(k, p, s) == p.weights_at(k));
        } else {
            ++entropy_steps;
            EXPECT_TRUE(eta_weights_at_step(k, p, s) == entropy_portfolio(p.weights_at(k), s.delta));
        }
    }
    EXPECT_GT(entropy_steps, 0u);
    EXPECT_GT(market_steps, 0u);
}

TEST(EtaWealth, MatchesGenericAccumulationDuringEntropyPhase) {
    const auto p = simulate_path(ModelSpec::volatility_stabilized(3, 0.5), 1.0, 1e-3, 606);
    const auto e = entropy_trajectory(p);
    const auto s = make_strategy_state(e, 3, 0.0, 0.45 * e.values.front(), 0.9, 1.0);
    const auto eta = eta_wealth(p, s);
    const auto generic = accumulate_wealth(p, [&](std::size_t k) { return eta_weights_at_step(k, p, s); });
    // The generic ledger also carries the market's discretization error outside the entropy phase.
    double market_drift = 0.0;
    const auto market = accumulate_wealth(p, [&](std::size_t k) { return p.weights_at(k); });
    for (std::size_t k = 0; k < p.steps(); ++k)
        if (s.phase_at_step(k) != Phase::Entropy) market_drift += market.rel[k + 1] - market.rel[k];
    EXPECT_NEAR(eta.rel.back(), generic.rel.back() - market_drift, 1e-10);
}

TEST(Diversity, Examples) {
    auto path_with_peak = [](double peak) {
        std::vector<Eigen::VectorXd> w(5, Eigen::Vector3d(0.4, 0.3, 0.3));
        w[2] = Eigen::Vector3d(peak, (1 - peak) / 2, (1 - peak) / 2);
        return weights_path(w, 1.0);
    };
    EXPECT_TRUE(is_diverse(path_with_peak(0.7), 0.2, {0.0, 1.0}));
    EXPECT_FALSE(is_diverse(path_with_peak(0.85), 0.2, {0.0, 1.0}));
    const std::vector<Eigen::VectorXd> pinned(5, Eigen::Vector2d(0.5, 0.5));
    EXPECT_TRUE(is_diverse(weights_path(pinned, 1.0), 0.49, {0.0, 0.5}));
    EXPECT_THROW(is_diverse(weights_path(pinned, 1.0), 0.0, {0.0, 0.5}), std::invalid_argument);
    EXPECT_THROW(is_diverse(weights_path(pinned, 1.0), 1.0, {0.0, 0.5}), std::invalid_argument);
    // The peak at t = 0.5 is outside [0, 0.25].
    EXPECT_TRUE(is_diverse(path_with_peak(0.85), 0.2, {0.0, 0.25}));
}

TEST(FloorCurve, SinglePathIsItsTrajectory) {
    const auto e = trajectory(0.1, 10, [](double t) { return 0.5 + 0.1 * std::sin(7 * t); });
    const std::vector<EntropyTrajectory> ens{e};
    EXPECT_EQ(entropy_floor_curve(ens).values, e.values);
}

TEST(FloorCurve, PointwiseMinimum) {
    const auto f = trajectory(0.1, 10, [](double t) { return 0.5 + 0.2 * t; });
    const auto g = trajectory(0.1, 10, [](double t) { return 0.7 - 0.2 * t; });
    const std::vector<EntropyTrajectory> ens{f, g};
    const auto curve = entropy_floor_curve(ens);
    for (std::size_t k = 0; k < curve.values.size(); ++k) EXPECT_EQ(curve.values[k], std::min(f.values[k], g.values[k]));
    // Rising on [0, 0.5], falling after.
    EXPECT_EQ(curve.nondecreasing_begin, 0.0);
    EXPECT_NEAR(curve.nondecreasing_end, 0.5, 1e-15);
}

TEST(FloorCurve, MatchesBruteForceColumnMinimum) {
    const auto paths = vsm_ensemble(5, 25, 12);
    std::vector<EntropyTrajectory> ens;
    for (const auto& p : paths) ens.push_back(entropy_trajectory(p));
    const auto curve = entropy_floor_curve(ens);
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
        double m = 1e300;
        for (const auto& p : paths) m = std::min(m, oracle::entropy(p.weights_at(k).values()));
        EXPECT_NEAR(curve.values[k], m, 1e-14);
    }
}

TEST(FloorCurve, RejectsGridMismatch) {
    const std::vector<EntropyTrajectory> ens{trajectory(0.1, 10, [](double) { return 0.5; }),
                                             trajectory(0.05, 20, [](double) { return 0.5; })};
    EXPECT_THROW(entropy_floor_curve(ens), DataError);
}
