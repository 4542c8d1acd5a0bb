#include <adaptive/linear_bandits.hpp>

#include <cmath>

namespace adaptive {

namespace {

void check_dim(std::size_t dim, const ContextVector & x) {
    if (static_cast<std::size_t>(x.size()) != dim)
        throw Error("dimension", "context has dimension " + std::to_string(x.size()) + ", policy expects " +
                                     std::to_string(dim));
}

void check_arm(std::size_t n_arms, std::size_t action) {
    if (action >= n_arms)
        throw Error("input", "action index " + std::to_string(action) + " out of range");
}

Eigen::LLT<Matrix> factor(const Matrix & spd) {
    Eigen::LLT<Matrix> llt(spd);
    if (llt.info() != Eigen::Success)
        throw Error("internal", "matrix lost positive definiteness");
    return llt;
}

} // namespace

LinearBanditState::LinearBanditState(std::size_t n_arms, std::size_t d, double ridge_, double alpha_)
    : dim(d), ridge(ridge_), alpha(alpha_) {
    if (n_arms == 0)
        throw Error("input", "bandit needs at least one arm");
    if (!(ridge > 0.0))
        throw Error("input", "ridge must be positive");
    const auto n = static_cast<Eigen::Index>(d);
    arms.assign(n_arms, RidgeArm{ridge * Matrix::Identity(n, n), Vector::Zero(n), 0});
}

Vector LinearBanditState::estimate(std::size_t k) const {
    return factor(arms.at(k).precision).solve(arms.at(k).response);
}

double LinearBanditState::confidence_width(std::size_t k, const ContextVector & x) const {
    check_dim(dim, x);
    const double q = x.dot(factor(arms.at(k).precision).solve(x));
    return std::sqrt(std::max(q, 0.0));
}

UcbDecision linucb_select(const LinearBanditState & state, const ContextVector & x) {
    check_dim(state.dim, x);
    UcbDecision out;
    out.scores.resize(static_cast<Eigen::Index>(state.n_arms()));
    for (std::size_t k = 0; k < state.n_arms(); ++k) {
        const auto llt = factor(state.arms[k].precision);
        const double mean = x.dot(llt.solve(state.arms[k].response));
        const double width = std::sqrt(std::max(x.dot(llt.solve(x)), 0.0));
        out.scores[static_cast<Eigen::Index>(k)] = mean + state.alpha * width;
    }
    out.action = argmax_lowest(out.scores);
    return out;
}

void linucb_update(LinearBanditState & state, const ContextVector & x, std::size_t action, double reward) {
    check_dim(state.dim, x);
    check_arm(state.n_arms(), action);
    require_finite(x, "context");
    require_finite(reward, "reward");
    auto & arm = state.arms[action];
    arm.precision.noalias() += x * x.transpose();
    arm.response += reward * x;
    ++arm.count;
}

PosteriorBelief::PosteriorBelief(std::size_t n_arms, std::size_t d, double noise, double prior)
    : dim(d), noise_variance(noise), prior_scale(prior) {
    if (n_arms == 0)
        throw Error("input", "bandit needs at least one arm");
    if (!(noise_variance > 0.0) || !(prior_scale > 0.0))
        throw Error("input", "noise variance and prior scale must be positive");
    const auto n = static_cast<Eigen::Index>(d);
    arms.assign(n_arms, GaussianArm{Matrix::Identity(n, n) / prior_scale, Vector::Zero(n)});
}

Vector PosteriorBelief::mean(std::size_t k) const {
    return factor(arms.at(k).precision).solve(arms.at(k).shift);
}

Matrix PosteriorBelief::covariance(std::size_t k) const {
    const auto n = static_cast<Eigen::Index>(dim);
    return factor(arms.at(k).precision).solve(Matrix::Identity(n, n));
}

void PosteriorBelief::set_arm(std::size_t k, const Vector & m, const Matrix & covariance) {
    check_arm(n_arms(), k);
    check_dim(dim, m);
    const auto n = static_cast<Eigen::Index>(dim);
    Matrix precision = factor(covariance).solve(Matrix::Identity(n, n));
    precision = 0.5 * (precision + precision.transpose()).eval();
    arms[k].shift = precision * m;
    arms[k].precision = std::move(precision);
}

void ts_update(PosteriorBelief & belief, const ContextVector & x, std::size_t action, double reward) {
    check_dim(belief.dim, x);
    check_arm(belief.n_arms(), action);
    require_finite(x, "context");
    require_finite(reward, "reward");
    auto & arm = belief.arms[action];
    arm.precision.noalias() += x * x.transpose() / belief.noise_variance;
    arm.shift += reward * x / belief.noise_variance;
}

namespace {

struct ArmSampler {
    Vector mean;
    Eigen::LLT<Matrix> llt;
};

std::vector<ArmSampler> make_samplers(const PosteriorBelief & belief) {
    std::vector<ArmSampler> out;
    out.reserve(belief.n_arms());
    for (const auto & arm : belief.arms) {
        auto llt = factor(arm.precision);
        Vector m = llt.solve(arm.shift);
        out.push_back({std::move(m), std::move(llt)});
    }
    return out;
}

std::size_t draw_choice(const std::vector<ArmSampler> & samplers, const ContextVector & x, Rng & rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector values(static_cast<Eigen::Index>(samplers.size()));
    Vector z(x.size());
    for (std::size_t k = 0; k < samplers.size(); ++k) {
        for (Eigen::Index i = 0; i < z.size(); ++i)
            z[i] = normal(rng);
        // precision = L L^T  =>  L^{-T} z ~ N(0, precision^{-1})
        const Vector noise = samplers[k].llt.matrixU().solve(z);
        values[static_cast<Eigen::Index>(k)] = x.dot(samplers[k].mean + noise);
    }
    return argmax_lowest(values);
}

} // namespace

std::size_t ts_select(const PosteriorBelief & belief, const ContextVector & x, Rng & rng) {
    check_dim(belief.dim, x);
    return draw_choice(make_samplers(belief), x, rng);
}

Vector action_propensity(const PosteriorBelief & belief, const ContextVector & x, std::size_t n_samples,
                         Rng & rng) {
    check_dim(belief.dim, x);
    if (n_samples == 0)
        throw Error("input", "n_samples must be at least 1");
    const auto samplers = make_samplers(belief);
    Vector freq = Vector::Zero(static_cast<Eigen::Index>(belief.n_arms()));
    for (std::size_t i = 0; i < n_samples; ++i)
        freq[static_cast<Eigen::Index>(draw_choice(samplers, x, rng))] += 1.0;
    return freq / static_cast<double>(n_samples);
}

} // namespace adaptive
