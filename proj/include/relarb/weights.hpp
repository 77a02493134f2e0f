#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace relarb {

/// Sum-to-one tolerance accepted on input weight vectors.
inline constexpr double kSimplexTolerance = 1e-9;

/// A point-in-time portfolio weight vector. Components add up to one
/// (within kSimplexTolerance); individual weights may be negative for
/// general portfolios, but market and entropy-generated weights are
/// strictly positive.
class PortfolioWeights {
public:
    /// Throws SimplexError when the vector is empty, non-finite, or does
    /// not sum to one within kSimplexTolerance.
    explicit PortfolioWeights(Eigen::VectorXd w);

    const Eigen::VectorXd& values() const noexcept { return w_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(w_.size()); }
    double operator[](std::size_t i) const { return w_[static_cast<Eigen::Index>(i)]; }

    bool strictly_positive() const noexcept { return (w_.array() > 0.0).all(); }

    /// Unit vector e_i in dimension n.
    static PortfolioWeights unit(std::size_t n, std::size_t i);
    static PortfolioWeights uniform(std::size_t n);

    friend bool operator==(const PortfolioWeights& a, const PortfolioWeights& b) {
        return a.w_.size() == b.w_.size() && (a.w_.array() == b.w_.array()).all();
    }

private:
    Eigen::VectorXd w_;
};

}  // namespace relarb
