#include "relarb/portfolio.hpp"

#include "relarb/errors.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace relarb {

namespace {

constexpr double kOutputDrift = 1e-12;

void check_simplex(const Eigen::VectorXd& x) {
    if (x.size() == 0 || !x.allFinite()) throw SimplexError("simplex point must be finite and nonempty");
    if ((x.array() < 0.0).any()) throw SimplexError("simplex point has a negative component");
    if (std::abs(x.sum() - 1.0) > kSimplexTolerance) {
        std::ostringstream msg;
        msg << "simplex point sums to " << x.sum();
        throw SimplexError(msg.str());
    }
}

double checked_symmetric(const Eigen::MatrixXd& sigma, Eigen::Index n) {
    if (sigma.rows() != n || sigma.cols() != n) throw std::invalid_argument("covariance must be n x n");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) throw std::invalid_argument("covariance matrix is not symmetric");
    return scale;
}

}  // namespace

PortfolioWeights::PortfolioWeights(Eigen::VectorXd w) : w_(std::move(w)) {
    if (w_.size() == 0 || !w_.allFinite()) throw SimplexError("weights must be finite and nonempty");
    if (std::abs(w_.sum() - 1.0) > kSimplexTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "weights sum to " << w_.sum() << ", not 1";
        throw SimplexError(msg.str());
    }
}

PortfolioWeights PortfolioWeights::unit(std::size_t n, std::size_t i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    e[static_cast<Eigen::Index>(i)] = 1.0;
    return PortfolioWeights(std::move(e));
}

PortfolioWeights PortfolioWeights::uniform(std::size_t n) {
    return PortfolioWeights(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

PortfolioWeights market_weights(const Eigen::VectorXd& caps) {
    if (caps.size() == 0 || !caps.allFinite() || (caps.array() <= 0.0).any())
        throw SimplexError("capitalizations must be finite and strictly positive");
    return PortfolioWeights(caps / caps.sum());
}

double entropy(const Eigen::VectorXd& x) {
    check_simplex(x);
    double s = 0.0;
    for (double xi : x) {
        if (xi > 0.0) s -= xi * std::log(xi);
    }
    return s;
}

double entropy(const PortfolioWeights& x) { return entropy(x.values()); }

double generalized_entropy(const Eigen::VectorXd& x, double c) {
    if (!(c >= 0.0)) throw std::invalid_argument("entropy offset c must be nonnegative");
    return entropy(x) + c;
}

double generalized_entropy(const PortfolioWeights& x, double c) { return generalized_entropy(x.values(), c); }

PortfolioWeights entropy_portfolio(const PortfolioWeights& mu, double c) {
    if (!mu.strictly_positive()) throw SimplexError("entropy portfolio needs strictly positive market weights");
    const double s_c = generalized_entropy(mu, c);
    if (!(s_c > kGeneratorPositivity)) {
        std::ostringstream msg;
        msg << "generalized entropy " << s_c << " is not positive";
        throw NumericalError(msg.str());
    }
    const Eigen::VectorXd& m = mu.values();
    Eigen::VectorXd pi = (c - m.array().log()) * m.array() / s_c;
    // The identity sum (c - log mu_i) mu_i = S_c(mu) only holds when mu sums to
    // one exactly; input drift (up to kSimplexTolerance) is removed here.
    const double total = pi.sum();
    if (std::abs(total - 1.0) > kOutputDrift) pi /= total;
    return PortfolioWeights(std::move(pi));
}

double excess_growth_rate(const PortfolioWeights& pi, const Eigen::MatrixXd& sigma) {
    const Eigen::VectorXd& w = pi.values();
    checked_symmetric(sigma, w.size());
    return 0.5 * (w.dot(sigma.diagonal()) - w.dot(sigma * w));
}

double wealth_step(const PortfolioWeights& pi, const Eigen::VectorXd& dlogX, const Eigen::MatrixXd& sigma,
                   double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (dlogX.size() != static_cast<Eigen::Index>(pi.size()))
        throw std::invalid_argument("weights and log-increments differ in dimension");
    return pi.values().dot(dlogX) + excess_growth_rate(pi, sigma) * dt;
}

WealthLedger accumulate_wealth(const MarketPath& path, const WeightSchedule& weights_at) {
    const std::size_t m = path.steps();
    WealthLedger ledger;
    ledger.logZ_pi.resize(m + 1);
    ledger.logZ_mu.resize(m + 1);
    ledger.rel.resize(m + 1);
    for (std::size_t k = 0; k <= m; ++k) ledger.logZ_mu[k] = path.log_total(k);
    ledger.logZ_pi[0] = ledger.logZ_mu[0];
    for (std::size_t k = 0; k < m; ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        ledger.logZ_pi[k + 1] = ledger.logZ_pi[k] + wealth_step(weights_at(k), path.dlogX.row(row).transpose(),
                                                                path.sigma[k], path.step_size(k));
    }
    for (std::size_t k = 0; k <= m; ++k) ledger.rel[k] = ledger.logZ_pi[k] - ledger.logZ_mu[k];
    return ledger;
}

double master_equation_rhs(std::span<const PortfolioWeights> mu_path, std::span<const Eigen::MatrixXd> sigma_path,
                           double c, double dt) {
    if (mu_path.empty() || mu_path.size() != sigma_path.size() + 1)
        throw std::invalid_argument("mu_path must have one more entry than sigma_path");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    auto checked_generator = [c](const PortfolioWeights& mu) {
        const double s = generalized_entropy(mu, c);
        if (!(s > kGeneratorPositivity)) throw NumericalError("generalized entropy vanishes along the segment");
        return s;
    };
    double drift = 0.0;
    for (std::size_t k = 0; k < sigma_path.size(); ++k) {
        drift += excess_growth_rate(mu_path[k], sigma_path[k]) / checked_generator(mu_path[k]) * dt;
    }
    return std::log(checked_generator(mu_path.back())) - std::log(checked_generator(mu_path.front())) + drift;
}

double master_equation_rhs(const MarketPath& path, double c, std::size_t k_begin, std::size_t k_end) {
    if (k_begin > k_end || k_end > path.steps()) throw std::invalid_argument("segment outside the path grid");
    auto generator = [&](std::size_t k) {
        const double s = generalized_entropy(path.weights_at(k), c);
        if (!(s > kGeneratorPositivity)) throw NumericalError("generalized entropy vanishes along the segment");
        return s;
    };
    double drift = 0.0;
    for (std::size_t k = k_begin; k < k_end; ++k) {
        drift += excess_growth_rate(path.weights_at(k), path.sigma[k]) / generator(k) * path.step_size(k);
    }
    return std::log(generator(k_end)) - std::log(generator(k_begin)) + drift;
}

}  // namespace relarb
