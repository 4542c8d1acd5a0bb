#include <doctest.h>

#include "oracles.hpp"

#include <adaptive/simulator.hpp>

#include <numeric>
#include <random>

using namespace adaptive;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double a : v)
        x(i++) = a;
    return x;
}

LinearEnvSpec small_env(std::size_t horizon = 300) {
    LinearEnvSpec s;
    s.n_arms = 3;
    s.dim = 2;
    s.theta = {vec({1, 0}), vec({0, 1}), vec({-0.5, -0.5})};
    s.noise_sd = 0.3;
    s.horizon = horizon;
    return s;
}

RmabEnvSpec monotone_cohort(std::size_t n, std::size_t budget, std::size_t horizon) {
    RmabEnvSpec s;
    const auto a = TwoStateMdp::from_good_probs(0.1, 0.6, 0.5, 0.9);
    const auto b = TwoStateMdp::from_good_probs(0.2, 0.5, 0.4, 0.8);
    for (std::size_t i = 0; i < n; ++i) {
        s.mdps.push_back(i % 2 ? a : b);
        s.groups.push_back(i % 2 ? "odd" : "even");
    }
    s.budget = budget;
    s.horizon = horizon;
    return s;
}

} // namespace

TEST_SUITE("simulator") {

TEST_CASE("oracle policy has zero regret") {
    const auto env = small_env();
    OraclePolicy oracle(env.theta);
    const auto r = run_bandit_episode(env, oracle, 3);
    CHECK(r.cumulative_regret.back() == 0.0);
    CHECK(r.actions.size() == env.horizon);
}

TEST_CASE("identical arms give zero regret for any policy") {
    auto env = small_env();
    env.theta = {vec({0.3, -1}), vec({0.3, -1}), vec({0.3, -1})};
    UniformRandomPolicy uniform(3);
    CHECK(run_bandit_episode(env, uniform, 1).cumulative_regret.back() == 0.0);
}

TEST_CASE("cumulative regret is non-decreasing with horizon-length records") {
    const auto env = small_env();
    LinUcbPolicy p(LinearBanditState(3, 2));
    const auto r = run_bandit_episode(env, p, 5);
    CHECK(r.rewards.size() == env.horizon);
    CHECK(r.regret.size() == env.horizon);
    CHECK(r.cumulative_regret.size() == env.horizon);
    for (std::size_t t = 1; t < r.cumulative_regret.size(); ++t)
        CHECK(r.cumulative_regret[t] >= r.cumulative_regret[t - 1]);
}

TEST_CASE("uniform play on a two-arm constant-context problem") {
    LinearEnvSpec env;
    env.n_arms = 2;
    env.dim = 1;
    env.theta = {vec({1}), vec({-1})};
    env.noise_sd = 1.0;
    env.contexts = ContextDistribution::constant_ones;
    env.horizon = 1000;
    Scenario s{"uniform", [&](std::uint64_t seed) {
                   UniformRandomPolicy p(2);
                   return run_bandit_episode(env, p, seed);
               }};
    const auto table = replicate(s, 20, 100);
    CHECK(std::abs(table.aggregate("cumulative_regret.mean") - 1000.0) <= 100.0);
}

TEST_CASE("closed-form uniform regret agrees with Monte Carlo") {
    const std::vector<Vector> theta{vec({1, 0, 0}), vec({0, 1, 0}), vec({0, 0, 1})};
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    double mc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const Vector x = vec({n01(rng), n01(rng), n01(rng)});
        double best = -1e300, avg = 0.0;
        for (const auto & t : theta) {
            best = std::max(best, x.dot(t));
            avg += x.dot(t) / 3.0;
        }
        mc += (best - avg) / n;
    }
    CHECK(uniform_regret_per_round(theta) == doctest::Approx(mc).epsilon(0.01));
    CHECK_THROWS_AS(uniform_regret_per_round({vec({1})}), Error);
}

TEST_CASE("dimension mismatch is rejected") {
    const auto env = small_env();
    LinUcbPolicy wrong(LinearBanditState(3, 4));
    CHECK_THROWS_AS(run_bandit_episode(env, wrong, 1), Error);
}

TEST_CASE("policy randomness does not perturb environment draws") {
    const auto env = small_env(50);
    BanditEpisode a(env, 9), b(env, 9);
    UniformRandomPolicy uniform(3);
    ThompsonPolicy ts(PosteriorBelief(3, 2));
    while (!a.done()) {
        a.step(uniform);
        b.step(ts);
        CHECK(a.environment_rng() == b.environment_rng());
    }
}

TEST_CASE("full budget dominates zero budget on coupled seeds") {
    auto full = monotone_cohort(10, 10, 60);
    auto none = monotone_cohort(10, 0, 60);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        WhittleAllocator w1, w2;
        const auto a = run_rmab_episode(full, w1, seed);
        const auto b = run_rmab_episode(none, w2, seed);
        for (std::size_t t = 0; t < a.total_reward.size(); ++t)
            CHECK(a.total_reward[t] >= b.total_reward[t]);
    }
}

TEST_CASE("zero budget follows the passive chain") {
    auto spec = monotone_cohort(10, 0, 30);
    spec.initial_states.assign(10, 0);
    double expected = 0.0;
    for (const auto & m : spec.mdps)
        expected += oracle::passive_expected_reward(m, 0, 30);
    std::vector<double> totals;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        RandomAllocator r;
        const auto res = run_rmab_episode(spec, r, seed);
        totals.push_back(std::accumulate(res.total_reward.begin(), res.total_reward.end(), 0.0));
    }
    const double mean = std::accumulate(totals.begin(), totals.end(), 0.0) / 200.0;
    double var = 0.0;
    for (double t : totals)
        var += (t - mean) * (t - mean) / 199.0;
    CHECK(std::abs(mean - expected) <= 4.0 * std::sqrt(var / 200.0));

    // Late rounds sit at the stationary mix.
    double stationary = 0.0;
    for (const auto & m : spec.mdps)
        stationary += oracle::stationary_good(m, kPassive);
    auto late = monotone_cohort(10, 0, 400);
    double tail = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RandomAllocator r;
        const auto res = run_rmab_episode(late, r, seed);
        tail += std::accumulate(res.total_reward.begin() + 100, res.total_reward.end(), 0.0) / (300.0 * 20.0);
    }
    CHECK(std::abs(tail - stationary) < 0.1);
}

TEST_CASE("empty horizon and budget checks") {
    WhittleAllocator w;
    const auto r = run_rmab_episode(monotone_cohort(4, 2, 0), w, 1);
    CHECK(r.total_reward.empty());
    CHECK(r.allocations.empty());
    CHECK_THROWS_AS(run_rmab_episode(monotone_cohort(4, 5, 3), w, 1), Error);
}

TEST_CASE("rmab episodes record allocations and group means") {
    auto spec = monotone_cohort(6, 2, 5);
    WhittleAllocator w;
    const auto r = run_rmab_episode(spec, w, 2);
    REQUIRE(r.allocations.size() == 5);
    for (const auto & a : r.allocations)
        CHECK(a.acted.size() == 2);
    CHECK(r.group_reward_mean.size() == 5);
    CHECK(r.group_reward_mean[0].count("odd") == 1);
}

TEST_CASE("replicate aggregates") {
    const auto env = small_env(100);
    Scenario s{"ts", [&](std::uint64_t seed) {
                   ThompsonPolicy p(PosteriorBelief(3, 2));
                   return run_bandit_episode(env, p, seed);
               }};
    const auto one = replicate(s, 1, 42);
    CHECK(one.aggregate("cumulative_regret.mean") == one.finals("cumulative_regret")[0]);
    CHECK(one.aggregate("cumulative_regret.sd") == 0.0);
    CHECK(replicate(s, 3, 42).rows == replicate(s, 3, 42).rows);
    CHECK(replicate(s, 3, 42).finals("cumulative_regret")[0] == one.finals("cumulative_regret")[0]);
    CHECK_THROWS_AS(replicate(s, 0, 1), Error);

    s.log_every = 10;
    const auto logged = replicate(s, 2, 1);
    std::size_t per_round = 0;
    for (const auto & row : logged.rows)
        per_round += row.round != "final" && row.round != "aggregate" ? 1 : 0;
    CHECK(per_round > 0);
}

TEST_CASE("survival cohort recovers generating coefficients") {
    SurvivalCohortSpec spec;
    spec.n = 5000;
    spec.weights = vec({0.5, -0.3});
    spec.baseline = {-2.0, -1.5, -1.2, -1.0, -1.0};
    spec.layout = {5.0, 1.0};
    spec.censoring_rate = 0.3;
    const auto records = make_survival_cohort(spec, 7);
    CHECK(records.size() == 5000);
    const auto model = fit_discrete_hazard(records, spec.layout);
    for (Eigen::Index i = 0; i < 2; ++i)
        CHECK(std::abs(model.coefficients(i) - spec.weights(i)) < 0.1);
    for (Eigen::Index h = 0; h < 5; ++h)
        CHECK(std::abs(model.coefficients(2 + h) - spec.baseline[static_cast<std::size_t>(h)]) < 0.1);
    CHECK(make_survival_cohort(spec, 7).front().t == records.front().t);
}

}
