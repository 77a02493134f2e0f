#pragma once

#include "relarb/weights.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace relarb {

enum class ModelKind { ConstantCoefficient, VolatilityStabilized, Custom };

/// Drift and volatility loadings of d log X in force at one instant.
struct Coefficients {
    Eigen::VectorXd drift;     // gamma_i, per year
    Eigen::MatrixXd loadings;  // xi_{i nu}, n x d, per sqrt-year
};

/// State-dependent coefficients for ModelKind::Custom: (t, caps) -> coefficients.
using CoefficientFn = std::function<Coefficients(double t, const Eigen::VectorXd& caps)>;

struct ModelSpec {
    std::size_t n = 2;
    std::size_t d = 2;
    ModelKind kind = ModelKind::ConstantCoefficient;
    Eigen::VectorXd gamma;  // ConstantCoefficient
    Eigen::MatrixXd xi;     // ConstantCoefficient, n x d
    double alpha = 0.0;     // VolatilityStabilized
    Eigen::VectorXd initial_caps;
    // VolatilityStabilized only: a (sub)step longer than 0.05 * min(mu), or
    // ending with a weight at or below weight_floor, is halved along a
    // Brownian bridge, at most max_halvings times before failing.
    double weight_floor = 1e-20;
    int max_halvings = 64;
    CoefficientFn custom;

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;

    static ModelSpec constant(Eigen::VectorXd gamma, Eigen::MatrixXd xi, Eigen::VectorXd initial_caps);
    /// VSM with d = n; equal initial capitalizations unless given.
    static ModelSpec volatility_stabilized(std::size_t n, double alpha,
                                           std::optional<Eigen::VectorXd> initial_caps = std::nullopt);
};

/// One simulated or ingested trajectory on the grid t_0 = 0 < ... < t_M = T.
///
/// Row k of `caps` holds X(t_k); row k of `dlogX` and `sigma[k]` describe the
/// step t_k -> t_{k+1}. `dlogX` is always recomputed from the stored caps so
/// that it equals log(caps[k+1]) - log(caps[k]) exactly.
struct MarketPath {
    std::vector<double> times;
    Eigen::MatrixXd caps;   // (M+1) x n
    Eigen::MatrixXd dlogX;  // M x n
    std::vector<Eigen::MatrixXd> sigma;  // M matrices n x n
    std::optional<std::uint64_t> seed;

    std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
    std::size_t n() const noexcept { return static_cast<std::size_t>(caps.cols()); }
    double horizon() const { return times.back(); }
    double step_size(std::size_t k) const { return times[k + 1] - times[k]; }
    Eigen::VectorXd caps_at(std::size_t k) const { return caps.row(static_cast<Eigen::Index>(k)).transpose(); }
    PortfolioWeights weights_at(std::size_t k) const;
    /// log X(t_k), the log of total capitalization.
    double log_total(std::size_t k) const;

    /// Fills dlogX from caps and checks the MarketPath invariants.
    void finalize();
};

/// Grid 0, dt, 2dt, ..., T. A final short step is appended when T is not a
/// multiple of dt.
std::vector<double> make_grid(double T, double dt);

/// Brownian increments for `times`, scaled by sqrt(step); row k holds the
/// d increments of step k, drawn in row-major order from NormalStream(seed).
Eigen::MatrixXd brownian_increments(const std::vector<double>& times, std::size_t d, std::uint64_t seed);

/// Sums groups of `factor` consecutive rows. Used to couple a coarse path to a fine one.
Eigen::MatrixXd coarsen_increments(const Eigen::MatrixXd& increments, std::size_t factor);

/// Euler-Maruyama on log-capitalizations, seeded from `seed`.
MarketPath simulate_path(const ModelSpec& spec, double T, double dt, std::uint64_t seed);

/// Same recursion driven by caller-supplied Brownian increments.
/// `refinement_seed` feeds the Brownian-bridge draws used when a VSM step has
/// to be subdivided to respect the weight floor.
MarketPath simulate_path_with_increments(const ModelSpec& spec, const std::vector<double>& times,
                                         const Eigen::MatrixXd& increments,
                                         std::uint64_t refinement_seed);

struct VsmCoefficients {
    Eigen::VectorXd drift;       // alpha / (2 mu_i)
    Eigen::MatrixXd covariance;  // diag(1 / mu_i)
};

/// Coefficients of the volatility-stabilized market at market weights `mu`.
/// Throws SimplexError when any weight is at or below `floor`.
VsmCoefficients vsm_coefficients(const PortfolioWeights& mu, double alpha, double floor = 1e-20);

/// sigma_ij = sum_nu xi_{i nu} xi_{j nu}.
double covariance_of_loadings(const Eigen::VectorXd& xi_row_i, const Eigen::VectorXd& xi_row_j);

/// Coefficients in force for `spec` at time t and capitalizations caps.
Coefficients coefficients_at(const ModelSpec& spec, double t, const Eigen::VectorXd& caps);

}  // namespace relarb
