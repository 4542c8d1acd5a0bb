#include <adaptive/simulator.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace adaptive {

ContextDistribution parse_context_distribution(const std::string & name) {
    if (name == "standard_normal")
        return ContextDistribution::standard_normal;
    if (name == "uniform_cube")
        return ContextDistribution::uniform_cube;
    if (name == "constant_ones")
        return ContextDistribution::constant_ones;
    throw Error("config", "unknown context distribution: " + name);
}

void LinearEnvSpec::validate() const {
    if (n_arms == 0 || dim == 0)
        throw Error("config", "environment needs at least one arm and one dimension");
    if (theta.size() != n_arms)
        throw Error("config", "theta must list one coefficient vector per arm");
    for (const auto & t : theta) {
        if (static_cast<std::size_t>(t.size()) != dim)
            throw Error("config", "theta vector has the wrong dimension");
        require_finite(t, "theta");
    }
    if (!(noise_sd >= 0.0))
        throw Error("config", "noise_sd must be non-negative");
}

std::size_t UniformRandomPolicy::select(const ContextVector &, Rng & rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n_arms_ - 1);
    return pick(rng);
}

std::size_t OraclePolicy::select(const ContextVector & x, Rng &) {
    Vector means(static_cast<Eigen::Index>(theta_.size()));
    for (std::size_t k = 0; k < theta_.size(); ++k)
        means[static_cast<Eigen::Index>(k)] = x.dot(theta_[k]);
    return argmax_lowest(means);
}

BanditEpisode::BanditEpisode(LinearEnvSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)),
      env_rng_(make_stream(seed, kEnvironmentStream)),
      policy_rng_(make_stream(seed, kPolicyStream)) {
    spec_.validate();
    result_.kind = EpisodeKind::bandit;
}

BanditEpisode BanditEpisode::resume(LinearEnvSpec spec, std::size_t round, Rng environment, Rng policy) {
    BanditEpisode episode(std::move(spec), 0);
    if (round > episode.spec_.horizon)
        throw Error("checkpoint", "resume round lies beyond the horizon");
    episode.round_ = round;
    episode.env_rng_ = environment;
    episode.policy_rng_ = policy;
    return episode;
}

void BanditEpisode::step(BanditPolicy & policy) {
    if (done())
        throw Error("input", "episode already finished");
    const auto d = static_cast<Eigen::Index>(spec_.dim);
    ContextVector x(d);
    switch (spec_.contexts) {
        case ContextDistribution::standard_normal: {
            std::normal_distribution<double> normal(0.0, 1.0);
            for (Eigen::Index i = 0; i < d; ++i)
                x[i] = normal(env_rng_);
            break;
        }
        case ContextDistribution::uniform_cube: {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (Eigen::Index i = 0; i < d; ++i)
                x[i] = u(env_rng_);
            break;
        }
        case ContextDistribution::constant_ones:
            x.setOnes();
            break;
    }
    // Noise is drawn every round whatever the action, keeping runs coupled.
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise = spec_.noise_sd * normal(env_rng_);

    const std::size_t action = policy.select(x, policy_rng_);
    if (action >= spec_.n_arms)
        throw Error("dimension", "policy returned an out-of-range action");

    double best = -std::numeric_limits<double>::infinity();
    for (const auto & t : spec_.theta)
        best = std::max(best, x.dot(t));
    const double mean = x.dot(spec_.theta[action]);
    const double reward = mean + noise;
    policy.update(x, action, reward);

    const double gap = std::max(best - mean, 0.0);
    result_.actions.push_back(action);
    result_.rewards.push_back(reward);
    result_.regret.push_back(gap);
    result_.cumulative_regret.push_back((result_.cumulative_regret.empty() ? 0.0 : result_.cumulative_regret.back()) +
                                        gap);
    ++round_;
}

EpisodeResult run_bandit_episode(const LinearEnvSpec & spec, BanditPolicy & policy, std::uint64_t seed) {
    BanditEpisode episode(spec, seed);
    while (!episode.done())
        episode.step(policy);
    return episode.result();
}

double uniform_regret_per_round(const std::vector<Vector> & theta) {
    const double root_2pi = std::sqrt(2.0 * std::numbers::pi);
    if (theta.size() == 2)
        return (theta[0] - theta[1]).norm() / root_2pi;
    if (theta.size() == 3) {
        // max - min = half the sum of pairwise gaps; E[max] = -E[min] by symmetry.
        const double pairwise =
            (theta[0] - theta[1]).norm() + (theta[0] - theta[2]).norm() + (theta[1] - theta[2]).norm();
        return pairwise / (2.0 * root_2pi);
    }
    throw Error("input", "closed-form uniform regret is available for 2 or 3 arms");
}

void RmabEnvSpec::validate() const {
    for (const auto & m : mdps)
        m.validate();
    if (!groups.empty() && groups.size() != mdps.size())
        throw Error("config", "groups must list one label per arm");
    if (!ids.empty() && ids.size() != mdps.size())
        throw Error("config", "ids must list one id per arm");
    if (!initial_states.empty() && initial_states.size() != mdps.size())
        throw Error("config", "initial_states must list one state per arm");
    for (const int s : initial_states)
        if (s != 0 && s != 1)
            throw Error("config", "initial states must be 0 or 1");
    if (budget > mdps.size())
        throw Error("config", "budget exceeds the number of arms");
}

Allocation RandomAllocator::allocate(const std::vector<RmabArm> & arms, std::size_t budget, Rng & rng) {
    std::vector<std::size_t> order(arms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates.
    const std::size_t k = std::min(budget, arms.size());
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    Allocation out;
    out.acted.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.acted.begin(), out.acted.end());
    for (const auto pos : out.acted)
        out.acted_ids.push_back(arms[pos].id);
    out.indices.assign(arms.size(), 0.0);
    for (const auto & arm : arms) {
        out.group_counts.emplace(arm.group, 0);
        out.group_mean_index.emplace(arm.group, 0.0);
    }
    for (const auto pos : out.acted)
        ++out.group_counts[arms[pos].group];
    return out;
}

EpisodeResult run_rmab_episode(const RmabEnvSpec & spec, Allocator & allocator, std::uint64_t seed) {
    spec.validate();
    Rng env_rng = make_stream(seed, kEnvironmentStream);
    Rng policy_rng = make_stream(seed, kPolicyStream);

    const std::size_t n = spec.n_arms();
    const std::size_t width = std::to_string(n == 0 ? 0 : n - 1).size();
    std::vector<RmabArm> arms(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto & arm = arms[i];
        if (spec.ids.empty()) {
            std::string num = std::to_string(i);
            arm.id = "arm" + std::string(width - num.size(), '0') + num;
        } else {
            arm.id = spec.ids[i];
        }
        arm.group = spec.groups.empty() ? "all" : spec.groups[i];
        arm.state = spec.initial_states.empty() ? 1 : spec.initial_states[i];
        if (spec.learn_dynamics) {
            DynamicsBelief belief;
            belief.reward = spec.mdps[i].reward;
            belief.discount = spec.mdps[i].discount;
            arm.dynamics = belief;
        } else {
            arm.dynamics = spec.mdps[i];
        }
    }

    EpisodeResult result;
    result.kind = EpisodeKind::rmab;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<int> action(n);
    for (std::size_t t = 0; t < spec.horizon; ++t) {
        Allocation alloc = allocator.allocate(arms, spec.budget, policy_rng);
        alloc.round = t;
        std::fill(action.begin(), action.end(), kPassive);
        for (const auto pos : alloc.acted)
            action[pos] = kActive;

        double total = 0.0;
        std::map<std::string, std::pair<double, std::size_t>> by_group;
        for (std::size_t i = 0; i < n; ++i) {
            auto & arm = arms[i];
            const double u = unit(env_rng);
            const int next = u < spec.mdps[i].good_prob(action[i], arm.state) ? 1 : 0;
            if (auto * belief = std::get_if<DynamicsBelief>(&arm.dynamics))
                update_dynamics(*belief, action[i], arm.state, next);
            arm.state = next;
            const double r = spec.mdps[i].reward[next];
            total += r;
            auto & [sum, count] = by_group[arm.group];
            sum += r;
            ++count;
        }
        std::map<std::string, double> means;
        for (const auto & [g, sc] : by_group)
            means[g] = sc.first / static_cast<double>(sc.second);
        result.total_reward.push_back(total);
        result.group_reward_mean.push_back(std::move(means));
        result.allocations.push_back(std::move(alloc));
    }
    return result;
}

double MetricsTable::aggregate(const std::string & metric) const {
    for (const auto & row : rows)
        if (row.round == "aggregate" && row.metric == metric)
            return row.value;
    throw Error("input", "no aggregate metric named " + metric);
}

std::vector<double> MetricsTable::finals(const std::string & metric) const {
    std::vector<double> out;
    for (const auto & row : rows)
        if (row.round == "final" && row.metric == metric)
            out.push_back(row.value);
    return out;
}

std::vector<std::pair<std::string, double>> episode_metrics(const EpisodeResult & result) {
    std::vector<std::pair<std::string, double>> out;
    if (result.kind == EpisodeKind::bandit) {
        const double cum = result.cumulative_regret.empty() ? 0.0 : result.cumulative_regret.back();
        const double reward = std::accumulate(result.rewards.begin(), result.rewards.end(), 0.0);
        out.emplace_back("cumulative_regret", cum);
        out.emplace_back("total_reward", reward);
        out.emplace_back("rounds", static_cast<double>(result.rewards.size()));
        return out;
    }
    const double total = std::accumulate(result.total_reward.begin(), result.total_reward.end(), 0.0);
    out.emplace_back("total_reward", total);
    out.emplace_back("rounds", static_cast<double>(result.total_reward.size()));
    std::map<std::string, double> group_sum;
    for (const auto & per_round : result.group_reward_mean)
        for (const auto & [g, v] : per_round)
            group_sum[g] += v;
    if (!group_sum.empty()) {
        const auto rounds = static_cast<double>(result.group_reward_mean.size());
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto & [g, s] : group_sum) {
            out.emplace_back("group_reward_mean:" + g, s / rounds);
            lo = std::min(lo, s / rounds);
            hi = std::max(hi, s / rounds);
        }
        out.emplace_back("group_reward_gap", hi - lo);
    }
    std::map<std::string, double> acted;
    for (const auto & a : result.allocations)
        for (const auto & [g, c] : a.group_counts)
            acted[g] += static_cast<double>(c);
    for (const auto & [g, c] : acted)
        out.emplace_back("group_actions:" + g, c);
    return out;
}

MetricsTable replicate(const Scenario & scenario, std::size_t n_reps, std::uint64_t base_seed) {
    if (n_reps == 0)
        throw Error("input", "n_reps must be at least 1");
    MetricsTable table;
    std::vector<std::string> names;
    std::map<std::string, std::vector<double>> finals;
    for (std::size_t rep = 0; rep < n_reps; ++rep) {
        const EpisodeResult result = scenario.run(base_seed + rep);
        const std::string rep_id = std::to_string(rep);
        if (scenario.log_every > 0) {
            const bool bandit = result.kind == EpisodeKind::bandit;
            const auto & series = bandit ? result.cumulative_regret : result.total_reward;
            const std::string metric = bandit ? "cumulative_regret" : "total_reward";
            for (std::size_t t = 0; t < series.size(); ++t)
                if ((t + 1) % scenario.log_every == 0 || t + 1 == series.size())
                    table.rows.push_back({scenario.name, rep_id, std::to_string(t), metric, series[t]});
        }
        for (const auto & [metric, value] : episode_metrics(result)) {
            table.rows.push_back({scenario.name, rep_id, "final", metric, value});
            if (!finals.count(metric))
                names.push_back(metric);
            finals[metric].push_back(value);
        }
    }
    for (const auto & metric : names) {
        const auto & v = finals[metric];
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (const double x : v)
            ss += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        table.rows.push_back({scenario.name, "all", "aggregate", metric + ".mean", mean});
        table.rows.push_back({scenario.name, "all", "aggregate", metric + ".sd", sd});
    }
    return table;
}

std::vector<SurvivalRecord> make_survival_cohort(const SurvivalCohortSpec & spec, std::uint64_t seed) {
    const std::size_t H = spec.layout.periods();
    if (spec.baseline.size() != H)
        throw Error("config", "baseline must list one intercept per period");
    if (!(spec.censoring_rate >= 0.0 && spec.censoring_rate < 1.0))
        throw Error("config", "censoring rate must lie in [0, 1)");
    Rng rng = make_stream(seed, kEnvironmentStream);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t width = std::to_string(spec.n == 0 ? 0 : spec.n - 1).size();
    std::vector<SurvivalRecord> out;
    out.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        SurvivalRecord r;
        const std::string num = std::to_string(i);
        r.subject_id = "s" + std::string(width - num.size(), '0') + num;
        r.x.resize(spec.weights.size());
        for (Eigen::Index j = 0; j < r.x.size(); ++j)
            r.x[j] = normal(rng);
        const double lin = spec.weights.dot(r.x);

        double event_time = std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < H; ++h) {
            const double hazard = 1.0 / (1.0 + std::exp(-(lin + spec.baseline[h])));
            if (unit(rng) < hazard) {
                event_time = std::min(static_cast<double>(h + 1) * spec.layout.period, spec.layout.max_followup);
                break;
            }
        }
        // Draw both uniforms every time so the stream layout does not depend on outcomes.
        const bool censor = unit(rng) < spec.censoring_rate;
        const double censor_time = spec.layout.max_followup * (1.0 - unit(rng));  // (0, M]
        double t = std::min(event_time, spec.layout.max_followup);
        bool censored = !std::isfinite(event_time);
        if (censor && censor_time < t) {
            t = censor_time;
            censored = true;
        }
        r.t = t;
        r.censored = censored;
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace adaptive
