#include "relarb/market_sim.hpp"

#include "relarb/errors.hpp"
#include "relarb/portfolio.hpp"
#include "relarb/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace relarb {

namespace {

// Largest accepted h / min(mu) in one VSM (sub)step, i.e. the variance of the
// smallest stock's log move. The test looks only at the state at the start of
// the step; refining on the realized move instead keeps steps whose drift and
// noise happen to cancel and drags small weights towards zero.
constexpr double kMaxClockStep = 0.05;

Eigen::VectorXd weights_from_log_caps(const Eigen::VectorXd& log_caps) {
    // Shift by the max before exponentiating; the ratio is unchanged.
    const Eigen::VectorXd e = (log_caps.array() - log_caps.maxCoeff()).exp();
    return e / e.sum();
}

class Stepper {
public:
    Stepper(const ModelSpec& spec, std::uint64_t refinement_seed)
        : spec_(spec), refinement_seed_(refinement_seed) {}

    // Advances log-caps over [t, t + h] with Brownian increment dW.
    void advance(Eigen::VectorXd& log_caps, double t, double h, const Eigen::VectorXd& dW,
                 std::size_t step, int depth) {
        const Eigen::VectorXd caps = log_caps.array().exp();
        const Coefficients c = coefficients_at(spec_, t, caps);
        Eigen::VectorXd next = log_caps + c.drift * h + c.loadings * dW;
        const bool finite = next.allFinite() && next.array().exp().allFinite() && (next.array().exp() > 0.0).all();
        const bool vsm = spec_.kind == ModelKind::VolatilityStabilized;
        if (!finite && !vsm) {
            std::ostringstream msg;
            msg << "non-finite state at step " << step << " (t=" << t << ")";
            throw NumericalError(msg.str());
        }
        if (vsm && (!finite || weights_from_log_caps(next).minCoeff() <= spec_.weight_floor ||
                    h > kMaxClockStep * weights_from_log_caps(log_caps).minCoeff())) {
            if (depth >= spec_.max_halvings) {
                std::ostringstream msg;
                msg << "weight floor " << spec_.weight_floor << " or step bound violated at step " << step
                    << " after " << spec_.max_halvings << " halvings";
                throw SimplexError(msg.str());
            }
            // Brownian bridge split of dW into two half-step increments.
            NormalStream& normals = bridge();
            Eigen::VectorXd first(dW.size());
            const double half_sd = 0.5 * std::sqrt(h);
            for (Eigen::Index nu = 0; nu < dW.size(); ++nu) first[nu] = 0.5 * dW[nu] + half_sd * normals();
            const Eigen::VectorXd second = dW - first;
            advance(log_caps, t, 0.5 * h, first, step, depth + 1);
            advance(log_caps, t + 0.5 * h, 0.5 * h, second, step, depth + 1);
            return;
        }
        log_caps = std::move(next);
    }

private:
    NormalStream& bridge() {
        if (!bridge_) bridge_.emplace(refinement_seed_);
        return *bridge_;
    }

    const ModelSpec& spec_;
    std::uint64_t refinement_seed_;
    std::optional<NormalStream> bridge_;
};

}  // namespace

void ModelSpec::validate() const {
    if (n < 2) throw std::invalid_argument("model: n must be at least 2");
    if (d < n) throw std::invalid_argument("model: d must be at least n");
    if (static_cast<std::size_t>(initial_caps.size()) != n)
        throw std::invalid_argument("model: initial_caps must have n entries");
    if (!initial_caps.allFinite() || (initial_caps.array() <= 0.0).any())
        throw std::invalid_argument("model: initial_caps must be strictly positive");
    switch (kind) {
    case ModelKind::ConstantCoefficient:
        if (static_cast<std::size_t>(gamma.size()) != n)
            throw std::invalid_argument("model: gamma must have n entries");
        if (static_cast<std::size_t>(xi.rows()) != n || static_cast<std::size_t>(xi.cols()) != d)
            throw std::invalid_argument("model: xi must be n x d");
        if (!gamma.allFinite() || !xi.allFinite())
            throw std::invalid_argument("model: gamma and xi must be finite");
        break;
    case ModelKind::VolatilityStabilized:
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("model: alpha must be nonnegative");
        if (!(weight_floor > 0.0 && weight_floor < 1.0 / static_cast<double>(n)))
            throw std::invalid_argument("model: weight_floor must lie in (0, 1/n)");
        if (max_halvings < 0 || max_halvings > 2000)
            throw std::invalid_argument("model: max_halvings must lie in [0, 2000]");
        break;
    case ModelKind::Custom:
        if (!custom) throw std::invalid_argument("model: custom kind requires a coefficient function");
        break;
    }
}

ModelSpec ModelSpec::constant(Eigen::VectorXd gamma, Eigen::MatrixXd xi, Eigen::VectorXd initial_caps) {
    ModelSpec spec;
    spec.kind = ModelKind::ConstantCoefficient;
    spec.n = static_cast<std::size_t>(xi.rows());
    spec.d = static_cast<std::size_t>(xi.cols());
    spec.gamma = std::move(gamma);
    spec.xi = std::move(xi);
    spec.initial_caps = std::move(initial_caps);
    spec.validate();
    return spec;
}

ModelSpec ModelSpec::volatility_stabilized(std::size_t n, double alpha,
                                           std::optional<Eigen::VectorXd> initial_caps) {
    ModelSpec spec;
    spec.kind = ModelKind::VolatilityStabilized;
    spec.n = n;
    spec.d = n;
    spec.alpha = alpha;
    spec.initial_caps = initial_caps ? std::move(*initial_caps)
                                     : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    spec.validate();
    return spec;
}

PortfolioWeights MarketPath::weights_at(std::size_t k) const { return market_weights(caps_at(k)); }

double MarketPath::log_total(std::size_t k) const {
    return std::log(caps.row(static_cast<Eigen::Index>(k)).sum());
}

void MarketPath::finalize() {
    if (times.size() < 2) throw DataError("market path needs at least two grid points");
    const auto m = static_cast<Eigen::Index>(times.size() - 1);
    if (caps.rows() != m + 1) throw DataError("caps rows do not match the time grid");
    if (caps.cols() < 2) throw DataError("market path needs at least two stocks");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1]))
            throw DataError("time grid not strictly increasing at index " + std::to_string(k));
    }
    if (!caps.allFinite() || (caps.array() <= 0.0).any())
        throw DataError("capitalizations must be finite and strictly positive");
    if (sigma.size() != static_cast<std::size_t>(m)) throw DataError("one covariance matrix per step required");
    const auto n = caps.cols();
    for (const auto& s : sigma) {
        if (s.rows() != n || s.cols() != n) throw DataError("covariance matrices must be n x n");
    }
    dlogX.resize(m, n);
    for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index i = 0; i < n; ++i) dlogX(k, i) = std::log(caps(k + 1, i)) - std::log(caps(k, i));
    }
}

std::vector<double> make_grid(double T, double dt) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive");
    if (!(dt > 0.0) || !(dt <= T)) throw std::invalid_argument("dt must satisfy 0 < dt <= T");
    const double ratio = T / dt;
    auto m = static_cast<std::size_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio) m = static_cast<std::size_t>(std::ceil(ratio));
    std::vector<double> times(m + 1);
    for (std::size_t k = 0; k < m; ++k) times[k] = static_cast<double>(k) * dt;
    times[m] = T;
    return times;
}

Eigen::MatrixXd brownian_increments(const std::vector<double>& times, std::size_t d, std::uint64_t seed) {
    const auto m = static_cast<Eigen::Index>(times.size() - 1);
    Eigen::MatrixXd dW(m, static_cast<Eigen::Index>(d));
    NormalStream normals(seed);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double scale = std::sqrt(times[k + 1] - times[k]);
        for (Eigen::Index nu = 0; nu < dW.cols(); ++nu) dW(k, nu) = scale * normals();
    }
    return dW;
}

Eigen::MatrixXd coarsen_increments(const Eigen::MatrixXd& increments, std::size_t factor) {
    if (factor == 0 || increments.rows() % static_cast<Eigen::Index>(factor) != 0)
        throw std::invalid_argument("coarsening factor must divide the number of steps");
    const auto f = static_cast<Eigen::Index>(factor);
    Eigen::MatrixXd out(increments.rows() / f, increments.cols());
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        out.row(k) = increments.middleRows(k * f, f).colwise().sum();
    }
    return out;
}

Coefficients coefficients_at(const ModelSpec& spec, double t, const Eigen::VectorXd& caps) {
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto d = static_cast<Eigen::Index>(spec.d);
    switch (spec.kind) {
    case ModelKind::ConstantCoefficient:
        return {spec.gamma, spec.xi};
    case ModelKind::VolatilityStabilized: {
        const VsmCoefficients v = vsm_coefficients(market_weights(caps), spec.alpha, spec.weight_floor);
        Eigen::MatrixXd loadings = Eigen::MatrixXd::Zero(n, d);
        loadings.leftCols(n).diagonal() = v.covariance.diagonal().array().sqrt();
        return {v.drift, std::move(loadings)};
    }
    case ModelKind::Custom: {
        Coefficients c = spec.custom(t, caps);
        if (c.drift.size() != n || c.loadings.rows() != n || c.loadings.cols() != d)
            throw std::invalid_argument("custom coefficients have the wrong shape");
        return c;
    }
    }
    throw std::logic_error("unknown model kind");
}

MarketPath simulate_path_with_increments(const ModelSpec& spec, const std::vector<double>& times,
                                         const Eigen::MatrixXd& increments,
                                         std::uint64_t refinement_seed) {
    spec.validate();
    const auto m = times.size() - 1;
    if (times.size() < 2 || increments.rows() != static_cast<Eigen::Index>(m) ||
        increments.cols() != static_cast<Eigen::Index>(spec.d))
        throw std::invalid_argument("increments must be M x d for the given grid");

    const auto n = static_cast<Eigen::Index>(spec.n);
    MarketPath path;
    path.times = times;
    path.caps.resize(static_cast<Eigen::Index>(m + 1), n);
    path.sigma.reserve(m);

    Eigen::VectorXd log_caps = spec.initial_caps.array().log();
    path.caps.row(0) = spec.initial_caps.transpose();
    Stepper stepper(spec, refinement_seed);
    for (std::size_t k = 0; k < m; ++k) {
        // Coefficients at the left endpoint define sigma(t_k) for this step.
        const Eigen::VectorXd caps = path.caps_at(k);
        if (spec.kind == ModelKind::VolatilityStabilized) {
            path.sigma.push_back(vsm_coefficients(market_weights(caps), spec.alpha, spec.weight_floor).covariance);
        } else {
            const Coefficients c = coefficients_at(spec, times[k], caps);
            path.sigma.push_back(c.loadings * c.loadings.transpose());
        }
        const Eigen::VectorXd before = log_caps;
        stepper.advance(log_caps, times[k], times[k + 1] - times[k],
                        increments.row(static_cast<Eigen::Index>(k)).transpose(), k, 0);
        path.caps.row(static_cast<Eigen::Index>(k + 1)) =
            caps.array() * (log_caps - before).array().exp();
    }
    path.finalize();
    return path;
}

MarketPath simulate_path(const ModelSpec& spec, double T, double dt, std::uint64_t seed) {
    spec.validate();
    const auto times = make_grid(T, dt);
    MarketPath path = simulate_path_with_increments(spec, times, brownian_increments(times, spec.d, seed),
                                                    bridge_seed(seed));
    path.seed = seed;
    return path;
}

VsmCoefficients vsm_coefficients(const PortfolioWeights& mu, double alpha, double floor) {
    if (!(floor >= 0.0)) throw std::invalid_argument("weight floor must be nonnegative");
    const Eigen::VectorXd& w = mu.values();
    if (w.minCoeff() <= floor) {
        std::ostringstream msg;
        msg << "market weight " << w.minCoeff() << " at or below floor " << floor;
        throw SimplexError(msg.str());
    }
    VsmCoefficients out;
    out.drift = (alpha / 2.0) * w.array().inverse();
    out.covariance = w.array().inverse().matrix().asDiagonal();
    return out;
}

double covariance_of_loadings(const Eigen::VectorXd& xi_row_i, const Eigen::VectorXd& xi_row_j) {
    if (xi_row_i.size() != xi_row_j.size())
        throw std::invalid_argument("loading rows must have equal length");
    return xi_row_i.dot(xi_row_j);
}

}  // namespace relarb
