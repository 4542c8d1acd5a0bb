#include <adaptive/rmab.hpp>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace adaptive {

TwoStateMdp TwoStateMdp::from_good_probs(double p0_0, double p0_1, double p1_0, double p1_1, double discount) {
    TwoStateMdp m;
    const std::array<std::array<double, 2>, 2> good{{{p0_0, p0_1}, {p1_0, p1_1}}};
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 2; ++s)
            m.transition[a][s] = {1.0 - good[a][s], good[a][s]};
    m.discount = discount;
    m.validate();
    return m;
}

void TwoStateMdp::validate() const {
    if (!(discount > 0.0 && discount < 1.0))
        throw Error("input", "discount must lie in (0, 1)");
    for (const auto & per_action : transition)
        for (const auto & row : per_action) {
            if (row[0] < 0.0 || row[0] > 1.0 || row[1] < 0.0 || row[1] > 1.0 ||
                std::abs(row[0] + row[1] - 1.0) > 1e-12)
                throw Error("input", "transition row is not a probability distribution");
        }
    if (!std::isfinite(reward[0]) || !std::isfinite(reward[1]))
        throw Error("input", "non-finite reward");
}

namespace {

void fill_q(const TwoStateMdp & mdp, double subsidy, const std::array<double, 2> & v, SubsidySolution & out) {
    for (int s = 0; s < 2; ++s) {
        const auto & p0 = mdp.transition[kPassive][s];
        const auto & p1 = mdp.transition[kActive][s];
        out.q_passive[s] = mdp.reward[s] + subsidy + mdp.discount * (p0[0] * v[0] + p0[1] * v[1]);
        out.q_active[s] = mdp.reward[s] + mdp.discount * (p1[0] * v[0] + p1[1] * v[1]);
    }
}

void finish(SubsidySolution & out, const std::array<double, 2> & v) {
    out.residual = 0.0;
    for (int s = 0; s < 2; ++s) {
        out.value[s] = std::max(out.q_passive[s], out.q_active[s]);
        out.passive_optimal[s] = out.q_passive[s] - out.q_active[s] >= -kPassiveMargin;
        out.residual = std::max(out.residual, std::abs(out.value[s] - v[s]));
    }
}

} // namespace

SubsidySolution value_iteration(const TwoStateMdp & mdp, double subsidy, double tolerance) {
    mdp.validate();
    SubsidySolution out;
    std::array<double, 2> v{0.0, 0.0};
    // ||V_{n+1} - V_n|| < tol (1 - b) / b bounds the distance to the fixed point by tol.
    const double stop = tolerance * (1.0 - mdp.discount) / mdp.discount;
    for (int it = 1; it <= 1000000; ++it) {
        fill_q(mdp, subsidy, v, out);
        std::array<double, 2> next{std::max(out.q_passive[0], out.q_active[0]),
                                   std::max(out.q_passive[1], out.q_active[1])};
        const double delta = std::max(std::abs(next[0] - v[0]), std::abs(next[1] - v[1]));
        v = next;
        out.iterations = it;
        if (delta < stop)
            break;
    }
    fill_q(mdp, subsidy, v, out);
    finish(out, v);
    return out;
}

SubsidySolution solve_subsidy_mdp(const TwoStateMdp & mdp, double subsidy) {
    SubsidySolution out;
    std::array<int, 2> policy{kPassive, kPassive};
    std::array<double, 2> v{};
    const double b = mdp.discount;
    for (int it = 1; it <= 16; ++it) {
        // (I - b P_pi) v = r_pi
        const auto & row0 = mdp.transition[policy[0]][0];
        const auto & row1 = mdp.transition[policy[1]][1];
        const double r0 = mdp.reward[0] + (policy[0] == kPassive ? subsidy : 0.0);
        const double r1 = mdp.reward[1] + (policy[1] == kPassive ? subsidy : 0.0);
        const double a00 = 1.0 - b * row0[0], a01 = -b * row0[1];
        const double a10 = -b * row1[0], a11 = 1.0 - b * row1[1];
        const double det = a00 * a11 - a01 * a10;
        v = {(r0 * a11 - a01 * r1) / det, (a00 * r1 - a10 * r0) / det};

        fill_q(mdp, subsidy, v, out);
        out.iterations = it;
        bool stable = true;
        for (int s = 0; s < 2; ++s) {
            const double gain = policy[s] == kPassive ? out.q_active[s] - out.q_passive[s]
                                                      : out.q_passive[s] - out.q_active[s];
            if (gain > 1e-12 * (1.0 + std::abs(v[s]))) {
                policy[s] = 1 - policy[s];
                stable = false;
            }
        }
        if (stable)
            break;
    }
    finish(out, v);
    return out;
}

double subsidy_bracket(const TwoStateMdp & mdp) {
    const double scale = std::max({1.0, std::abs(mdp.reward[0]), std::abs(mdp.reward[1])});
    return 2.0 * scale / (1.0 - mdp.discount);
}

namespace {

double passive_margin(const TwoStateMdp & mdp, double subsidy, int state) {
    const auto sol = solve_subsidy_mdp(mdp, subsidy);
    return sol.q_passive[state] - sol.q_active[state];
}

} // namespace

double whittle_index(const TwoStateMdp & mdp, int state) {
    mdp.validate();
    if (state != 0 && state != 1)
        throw Error("input", "state must be 0 or 1");
    const double bound = subsidy_bracket(mdp);
    double lo = -bound, hi = bound;
    if (passive_margin(mdp, lo, state) >= 0.0 || passive_margin(mdp, hi, state) < 0.0)
        throw Error("numeric", "bracket exhausted");
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (passive_margin(mdp, mid, state) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

bool check_indexability(const TwoStateMdp & mdp, double resolution) {
    mdp.validate();
    const double bound = subsidy_bracket(mdp);
    if (!(resolution > 0.0) || resolution >= 2.0 * bound)
        throw Error("input", "resolution too coarse");
    const auto steps = static_cast<long>(std::ceil(2.0 * bound / resolution));
    std::array<bool, 2> prev{false, false};
    for (long i = 0; i <= steps; ++i) {
        const double subsidy = std::min(-bound + static_cast<double>(i) * resolution, bound);
        const auto flags = solve_subsidy_mdp(mdp, subsidy).passive_optimal;
        for (int s = 0; s < 2; ++s)
            if (i > 0 && prev[s] && !flags[s])
                return false;
        prev = flags;
    }
    return true;
}

double DynamicsBelief::mean(int action, int state) const {
    return alpha[action][state] / (alpha[action][state] + beta[action][state]);
}

TwoStateMdp DynamicsBelief::sample(Rng & rng) const {
    std::array<double, 4> p{};
    int i = 0;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 2; ++s) {
            std::gamma_distribution<double> ga(alpha[a][s], 1.0);
            std::gamma_distribution<double> gb(beta[a][s], 1.0);
            const double x = ga(rng);
            const double y = gb(rng);
            p[i++] = x + y > 0.0 ? x / (x + y) : 0.5;
        }
    TwoStateMdp m = TwoStateMdp::from_good_probs(p[0], p[1], p[2], p[3], discount);
    m.reward = reward;
    return m;
}

TwoStateMdp DynamicsBelief::posterior_mean() const {
    TwoStateMdp m = TwoStateMdp::from_good_probs(mean(0, 0), mean(0, 1), mean(1, 0), mean(1, 1), discount);
    m.reward = reward;
    return m;
}

void update_dynamics(DynamicsBelief & belief, int action, int state, int next_state) {
    if ((action != 0 && action != 1) || (state != 0 && state != 1) || (next_state != 0 && next_state != 1))
        throw Error("input", "dynamics update needs binary action and states");
    if (next_state == 1)
        belief.alpha[action][state] += 1.0;
    else
        belief.beta[action][state] += 1.0;
}

namespace {

// Memo for known-dynamics arms. Keys are the exact MDP parameters.
struct MdpKey {
    std::array<double, 12> values{};
    bool operator<(const MdpKey & o) const { return values < o.values; }
};

MdpKey key_of(const TwoStateMdp & m, double extra) {
    MdpKey k;
    int i = 0;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 2; ++t)
                k.values[i++] = m.transition[a][s][t];
    k.values[i++] = m.reward[0];
    k.values[i++] = m.reward[1];
    k.values[i++] = m.discount;
    k.values[i] = extra;
    return k;
}

class KnownArmMemo {
    public:
        double index(const TwoStateMdp & m, int state) {
            const auto key = key_of(m, state);
            {
                std::lock_guard lock(mutex_);
                if (auto it = index_.find(key); it != index_.end())
                    return it->second;
            }
            const double v = whittle_index(m, state);
            std::lock_guard lock(mutex_);
            index_.emplace(key, v);
            return v;
        }

        bool indexable(const TwoStateMdp & m, double resolution) {
            const auto key = key_of(m, resolution);
            {
                std::lock_guard lock(mutex_);
                if (auto it = indexable_.find(key); it != indexable_.end())
                    return it->second;
            }
            const bool v = check_indexability(m, resolution);
            std::lock_guard lock(mutex_);
            indexable_.emplace(key, v);
            return v;
        }

    private:
        std::mutex mutex_;
        std::map<MdpKey, double> index_;
        std::map<MdpKey, bool> indexable_;
};

KnownArmMemo & memo() {
    static KnownArmMemo instance;
    return instance;
}

std::vector<std::size_t> ranked(const std::vector<RmabArm> & arms, const std::vector<double> & indices) {
    std::vector<std::size_t> order(arms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (indices[a] != indices[b])
            return indices[a] > indices[b];
        return arms[a].id < arms[b].id;
    });
    return order;
}

Allocation finish_allocation(const std::vector<RmabArm> & arms, std::vector<double> indices,
                             std::vector<std::size_t> acted, bool indexable) {
    Allocation out;
    std::sort(acted.begin(), acted.end());
    out.acted = std::move(acted);
    for (const auto pos : out.acted) {
        out.acted_ids.push_back(arms[pos].id);
    }
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        auto & [sum, n] = sums[arms[i].group];
        sum += indices[i];
        ++n;
        out.group_counts.emplace(arms[i].group, 0);
    }
    for (const auto pos : out.acted)
        ++out.group_counts[arms[pos].group];
    for (const auto & [group, sn] : sums)
        out.group_mean_index[group] = sn.first / static_cast<double>(sn.second);
    out.indices = std::move(indices);
    out.indexable = indexable;
    return out;
}

} // namespace

std::vector<double> arm_indices(const std::vector<RmabArm> & arms, Rng & rng, const AllocateOptions & options,
                                bool & indexable) {
    std::vector<double> indices;
    indices.reserve(arms.size());
    indexable = true;
    for (const auto & arm : arms) {
        if (arm.state != 0 && arm.state != 1)
            throw Error("input", "arm state must be binary: " + arm.id);
        if (const auto * known = std::get_if<TwoStateMdp>(&arm.dynamics)) {
            indices.push_back(memo().index(*known, arm.state));
            if (options.check_indexability && !memo().indexable(*known, options.indexability_resolution))
                indexable = false;
        } else {
            const auto sampled = std::get<DynamicsBelief>(arm.dynamics).sample(rng);
            indices.push_back(whittle_index(sampled, arm.state));
        }
    }
    return indices;
}

Allocation allocate(const std::vector<RmabArm> & arms, std::size_t budget, Rng & rng,
                    const AllocateOptions & options) {
    bool indexable = true;
    auto indices = arm_indices(arms, rng, options, indexable);
    const auto order = ranked(arms, indices);
    std::vector<std::size_t> acted(order.begin(),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(budget, arms.size())));
    return finish_allocation(arms, std::move(indices), std::move(acted), indexable);
}

Allocation equitable_allocate(const std::vector<RmabArm> & arms, std::size_t budget,
                              const EquityConstraint & equity, Rng & rng, const AllocateOptions & options) {
    std::map<std::string, std::size_t> group_sizes;
    for (const auto & arm : arms)
        ++group_sizes[arm.group];

    std::map<std::string, std::size_t> floors;
    std::size_t total = 0;
    for (const auto & [group, size] : group_sizes) {
        const auto it = equity.group_fraction.find(group);
        const double f = it != equity.group_fraction.end() ? it->second : equity.min_fraction;
        if (f < 0.0 || f > 1.0)
            throw Error("input", "equity fraction must lie in [0, 1]");
        const auto floor = static_cast<std::size_t>(std::floor(f * static_cast<double>(budget) + 1e-9));
        if (floor > size)
            throw Error("infeasible", "group '" + group + "' has fewer arms than its floor");
        floors[group] = floor;
        total += floor;
    }
    if (total > budget)
        throw Error("infeasible", "group floors exceed the budget");

    bool indexable = true;
    auto indices = arm_indices(arms, rng, options, indexable);
    const auto order = ranked(arms, indices);

    std::vector<bool> taken(arms.size(), false);
    std::vector<std::size_t> acted;
    for (const auto pos : order) {
        auto & left = floors[arms[pos].group];
        if (left > 0) {
            --left;
            taken[pos] = true;
            acted.push_back(pos);
        }
    }
    const std::size_t target = std::min(budget, arms.size());
    for (const auto pos : order) {
        if (acted.size() >= target)
            break;
        if (!taken[pos]) {
            taken[pos] = true;
            acted.push_back(pos);
        }
    }
    return finish_allocation(arms, std::move(indices), std::move(acted), indexable);
}

} // namespace adaptive
