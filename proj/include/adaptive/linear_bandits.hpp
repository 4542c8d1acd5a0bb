#pragma once

#include <cstdint>
#include <vector>

#include <adaptive/common.hpp>

namespace adaptive {

/// Ridge sufficient statistics of one arm: A = ridge*I + sum x x^T, b = sum r x.
struct RidgeArm {
    Matrix precision;
    Vector response;
    std::uint64_t count = 0;
};

/// Disjoint LinUCB state, one ridge model per arm.
struct LinearBanditState {
    std::size_t dim = 0;
    double ridge = 1.0;
    double alpha = 1.0;
    std::vector<RidgeArm> arms;

    LinearBanditState() = default;
    LinearBanditState(std::size_t n_arms, std::size_t dim, double ridge = 1.0, double alpha = 1.0);

    std::size_t n_arms() const { return arms.size(); }
    /// theta_hat_k = A_k^{-1} b_k
    Vector estimate(std::size_t k) const;
    /// sqrt(x^T A_k^{-1} x)
    double confidence_width(std::size_t k, const ContextVector & x) const;
};

struct UcbDecision {
    std::size_t action = 0;
    Vector scores;
};

UcbDecision linucb_select(const LinearBanditState & state, const ContextVector & x);
void linucb_update(LinearBanditState & state, const ContextVector & x, std::size_t action, double reward);

/// Gaussian belief over one arm's coefficients, stored in information form:
/// precision = Sigma^{-1}, shift = Sigma^{-1} m. Updates are plain sums, so
/// the order of observations does not matter.
struct GaussianArm {
    Matrix precision;
    Vector shift;
};

struct PosteriorBelief {
    std::size_t dim = 0;
    double noise_variance = 1.0;
    double prior_scale = 1.0;  // prior N(0, prior_scale * I)
    std::vector<GaussianArm> arms;

    PosteriorBelief() = default;
    PosteriorBelief(std::size_t n_arms, std::size_t dim, double noise_variance = 1.0, double prior_scale = 1.0);

    std::size_t n_arms() const { return arms.size(); }
    Vector mean(std::size_t k) const;
    Matrix covariance(std::size_t k) const;
    /// Replace arm k's belief by N(mean, covariance); covariance must be SPD.
    void set_arm(std::size_t k, const Vector & mean, const Matrix & covariance);
};

void ts_update(PosteriorBelief & belief, const ContextVector & x, std::size_t action, double reward);

/// One draw theta_k ~ N(m_k, Sigma_k) per arm, argmax of x^T theta_k.
std::size_t ts_select(const PosteriorBelief & belief, const ContextVector & x, Rng & rng);

/// Monte Carlo estimate of P(arm k is the Thompson choice); sums to 1.
Vector action_propensity(const PosteriorBelief & belief, const ContextVector & x, std::size_t n_samples,
                         Rng & rng);

inline constexpr std::size_t kDefaultPropensitySamples = 1000;

} // namespace adaptive
