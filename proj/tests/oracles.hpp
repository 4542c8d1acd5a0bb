#pragma once

// Reference computations the tests compare against. Each is written
// independently of the code under test (batch instead of sequential, brute
// force instead of index heuristics, plain gradient descent instead of Newton).

#include <adaptive/rmab.hpp>
#include <adaptive/survival.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using adaptive::Matrix;
using adaptive::Vector;

struct Gaussian {
    Vector mean;
    Matrix covariance;
};

// Posterior of y = X theta + N(0, noise_var), theta ~ N(0, prior_var I),
// computed in one shot from the stacked design.
inline Gaussian batch_linear_regression(const Matrix & X, const Vector & y, double prior_var, double noise_var) {
    const auto d = X.cols();
    const Matrix precision = Matrix::Identity(d, d) / prior_var + X.transpose() * X / noise_var;
    const Matrix cov = precision.fullPivLu().inverse();
    return {cov * X.transpose() * y / noise_var, cov};
}

struct Nig {
    Vector mean;
    Matrix precision;
    double shape;
    double rate;
};

// Normal-inverse-Gamma posterior from the whole batch.
inline Nig batch_nig(const Matrix & Phi, const Vector & r, const Vector & m0, const Matrix & P0, double a0, double b0) {
    const Matrix Pn = P0 + Phi.transpose() * Phi;
    const Vector mn = Pn.fullPivLu().solve(P0 * m0 + Phi.transpose() * r);
    const double an = a0 + 0.5 * static_cast<double>(r.size());
    const double bn = b0 + 0.5 * (r.squaredNorm() + m0.dot(P0 * m0) - mn.dot(Pn * mn));
    return {mn, Pn, an, bn};
}

// Smallest subsidy on a grid at which rest is weakly optimal at `state`.
// A coarse pass locates the switch, then the preceding cell is scanned at `step`.
inline double grid_scan_index(const adaptive::TwoStateMdp & mdp, int state, double step = 1e-4) {
    const double half = 2.0 * std::max({1.0, std::abs(mdp.reward[0]), std::abs(mdp.reward[1])}) / (1.0 - mdp.discount);
    auto passive = [&](double lambda) {
        const auto sol = adaptive::value_iteration(mdp, lambda, 1e-12);
        return sol.q_passive[state] - sol.q_active[state] >= -1e-9;
    };
    const double coarse = 1e-2;
    double lo = -half;
    while (lo < half && !passive(lo + coarse))
        lo += coarse;
    for (double l = lo; l <= lo + coarse + step; l += step)
        if (passive(l))
            return l;
    return half;
}

// Finite-horizon joint DP over two arms, one action per round. Reward per
// round is the number of arms in state 1 after transition.
struct TinyInstance {
    std::array<adaptive::TwoStateMdp, 2> arms;
    int horizon = 3;
};

using JointPolicy = std::function<int(int s0, int s1)>;  // which arm to act on

inline double joint_value(const TinyInstance & inst, int s0, int s1, int steps, const JointPolicy * policy) {
    if (steps == 0)
        return 0.0;
    double best = -1e300;
    for (int act = 0; act < 2; ++act) {
        if (policy && (*policy)(s0, s1) != act)
            continue;
        const int a0 = act == 0 ? 1 : 0;
        const int a1 = act == 1 ? 1 : 0;
        double v = 0.0;
        for (int n0 = 0; n0 < 2; ++n0)
            for (int n1 = 0; n1 < 2; ++n1) {
                const double p = inst.arms[0].transition[a0][s0][n0] * inst.arms[1].transition[a1][s1][n1];
                if (p == 0.0)
                    continue;
                v += p * (inst.arms[0].reward[n0] + inst.arms[1].reward[n1] +
                          joint_value(inst, n0, n1, steps - 1, policy));
            }
        best = std::max(best, v);
    }
    return best;
}

// Expected number of good arms summed over `rounds` rounds of a passive chain.
inline double passive_expected_reward(const adaptive::TwoStateMdp & mdp, int initial_state, int rounds) {
    double p1 = initial_state == 1 ? 1.0 : 0.0;
    double total = 0.0;
    for (int t = 0; t < rounds; ++t) {
        p1 = (1.0 - p1) * mdp.good_prob(adaptive::kPassive, 0) + p1 * mdp.good_prob(adaptive::kPassive, 1);
        total += p1;
    }
    return total;
}

inline double stationary_good(const adaptive::TwoStateMdp & mdp, int action) {
    const double up = mdp.good_prob(action, 0);
    const double down = 1.0 - mdp.good_prob(action, 1);
    return up / (up + down);
}

// Person-period rows built directly from the record definition.
struct Rows {
    std::vector<Vector> z;
    std::vector<double> y;
};

inline Rows expand(const std::vector<adaptive::SurvivalRecord> & recs, std::size_t periods, double period) {
    Rows rows;
    for (const auto & r : recs) {
        const auto d = r.x.size();
        std::size_t last;
        if (r.censored)
            last = static_cast<std::size_t>(std::floor(r.t / period + 1e-12));
        else
            last = static_cast<std::size_t>(std::ceil(r.t / period - 1e-12));
        last = std::min(last, periods);
        for (std::size_t h = 0; h < last; ++h) {
            Vector z = Vector::Zero(d + static_cast<Eigen::Index>(periods));
            z.head(d) = r.x;
            z(d + static_cast<Eigen::Index>(h)) = 1.0;
            rows.z.push_back(z);
            rows.y.push_back(!r.censored && h + 1 == last ? 1.0 : 0.0);
        }
    }
    return rows;
}

// Penalized logistic regression by plain gradient descent.
inline Vector logistic_gd(const Rows & rows, double l2, int iterations, double step) {
    const auto p = rows.z.front().size();
    Vector w = Vector::Zero(p);
    for (int it = 0; it < iterations; ++it) {
        Vector g = l2 * w;
        for (std::size_t i = 0; i < rows.z.size(); ++i) {
            const double mu = 1.0 / (1.0 + std::exp(-rows.z[i].dot(w)));
            g += (mu - rows.y[i]) * rows.z[i];
        }
        w -= step * g;
    }
    return w;
}

inline Vector central_difference(const std::function<double(const Vector &)> & f, const Vector & at, double h) {
    Vector g(at.size());
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        Vector plus = at, minus = at;
        plus(i) += h;
        minus(i) -= h;
        g(i) = (f(plus) - f(minus)) / (2.0 * h);
    }
    return g;
}

inline double relative_error(const Vector & a, const Vector & b) {
    return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

} // namespace oracle
