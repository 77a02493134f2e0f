#pragma once

#include "relarb/market_sim.hpp"
#include "relarb/weights.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace relarb {

/// Below this S_c(mu) the entropy generator is treated as vanishing.
inline constexpr double kGeneratorPositivity = 1e-12;

/// mu_i = X_i / sum_j X_j. Throws SimplexError on a non-positive capitalization.
PortfolioWeights market_weights(const Eigen::VectorXd& caps);

/// S(x) = -sum x_i log x_i with 0 log 0 = 0; x must lie on the closed simplex.
double entropy(const Eigen::VectorXd& x);
double entropy(const PortfolioWeights& x);

/// S_c(x) = S(x) + c for c >= 0.
double generalized_entropy(const Eigen::VectorXd& x, double c);
double generalized_entropy(const PortfolioWeights& x, double c);

/// Portfolio generated by S_c: pi_i = (c - log mu_i) mu_i / S_c(mu).
///
/// Requires strictly positive mu and S_c(mu) > kGeneratorPositivity; the latter
/// rules out corners when c = 0.
PortfolioWeights entropy_portfolio(const PortfolioWeights& mu, double c);

/// gamma*_pi = (sum pi_i sigma_ii - pi' sigma pi) / 2.
double excess_growth_rate(const PortfolioWeights& pi, const Eigen::MatrixXd& sigma);

/// Discrete log-value increment sum pi_i dlogX_i + gamma*_pi dt.
double wealth_step(const PortfolioWeights& pi, const Eigen::VectorXd& dlogX, const Eigen::MatrixXd& sigma,
                   double dt);

struct WealthLedger {
    std::vector<double> logZ_pi;
    std::vector<double> logZ_mu;
    std::vector<double> rel;  // logZ_pi - logZ_mu
};

/// Weights held over step k (decided at grid point t_k).
using WeightSchedule = std::function<PortfolioWeights(std::size_t k)>;

/// Both value processes started at log X(0). The market ledger is log X(t_k)
/// exactly; the portfolio ledger accumulates wealth_step with left-endpoint
/// weights and covariances.
WealthLedger accumulate_wealth(const MarketPath& path, const WeightSchedule& weights_at);

/// Right-hand side of the entropy master equation over a segment:
/// log S_c(mu_end) - log S_c(mu_start) + sum_k gamma*_mu(t_k) / S_c(mu(t_k)) * dt.
///
/// `mu_path` has one more entry than `sigma_path`; step k uses mu_path[k] and sigma_path[k].
double master_equation_rhs(std::span<const PortfolioWeights> mu_path, std::span<const Eigen::MatrixXd> sigma_path,
                           double c, double dt);

/// Same quantity over grid steps [k_begin, k_end) of `path`, with the path's own step sizes.
double master_equation_rhs(const MarketPath& path, double c, std::size_t k_begin, std::size_t k_end);

}  // namespace relarb
