#include <doctest.h>

#include "oracles.hpp"

#include <adaptive/rmab.hpp>

#include <random>

using namespace adaptive;

namespace {

// P0(1|0), P0(1|1), P1(1|0), P1(1|1)
TwoStateMdp reference_instance() { return TwoStateMdp::from_good_probs(0.1, 0.5, 0.6, 0.9, 0.9); }

TwoStateMdp random_beneficial(std::mt19937_64 & rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double p00 = u(rng), p01 = u(rng);
    const double p10 = p00 + (1.0 - p00) * u(rng);
    const double p11 = p01 + (1.0 - p01) * u(rng);
    return TwoStateMdp::from_good_probs(p00, p01, p10, p11, 0.5 + 0.45 * u(rng));
}

RmabArm known(std::string id, const TwoStateMdp & m, int state, std::string group = "all") {
    return {std::move(id), state, m, std::move(group)};
}

} // namespace

TEST_SUITE("rmab") {

TEST_CASE("MDP validation") {
    TwoStateMdp m = reference_instance();
    CHECK_NOTHROW(m.validate());
    m.transition[1][0][0] = 0.5;
    CHECK_THROWS_AS(m.validate(), Error);
    CHECK_THROWS_AS(TwoStateMdp::from_good_probs(0.1, 0.5, 0.6, 0.9, 1.0), Error);
    CHECK_THROWS_AS(TwoStateMdp::from_good_probs(-0.1, 0.5, 0.6, 0.9, 0.9), Error);
}

TEST_CASE("value iteration limits") {
    const auto m = reference_instance();
    const auto hi = value_iteration(m, 1e6);
    CHECK(hi.passive_optimal[0]);
    CHECK(hi.passive_optimal[1]);
    const auto lo = value_iteration(m, -1e6);
    CHECK_FALSE(lo.passive_optimal[0]);
    CHECK_FALSE(lo.passive_optimal[1]);
    const auto same = TwoStateMdp::from_good_probs(0.3, 0.7, 0.3, 0.7);
    const auto z = value_iteration(same, 0.0);
    for (int s = 0; s < 2; ++s)
        CHECK(std::abs(z.q_passive[s] - z.q_active[s]) <= 1e-9);
    CHECK(z.residual <= 1e-9);
}

TEST_CASE("value iteration and policy iteration agree; value grows with subsidy") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto m = random_beneficial(rng);
        double prev = -1e300;
        for (double lambda : {-2.0, -0.5, 0.0, 0.3, 1.0, 4.0}) {
            const auto vi = value_iteration(m, lambda);
            const auto pi = solve_subsidy_mdp(m, lambda);
            CHECK(vi.residual <= 1e-9);
            for (int s = 0; s < 2; ++s)
                CHECK(std::abs(vi.value[s] - pi.value[s]) < 1e-7);
            CHECK(vi.value[0] >= prev - 1e-8);
            prev = vi.value[0];
        }
    }
}

TEST_CASE("Whittle index on the reference instance matches the grid scan") {
    const auto m = reference_instance();
    for (int s = 0; s < 2; ++s) {
        const double idx = whittle_index(m, s);
        CHECK(std::abs(idx - oracle::grid_scan_index(m, s)) <= 1e-3);
        const auto sol = solve_subsidy_mdp(m, idx);
        CHECK(std::abs(sol.q_active[s] - sol.q_passive[s]) <= 1e-5);
    }
    CHECK(check_indexability(m));
}

TEST_CASE("action-invariant dynamics have zero index") {
    const auto m = TwoStateMdp::from_good_probs(0.2, 0.8, 0.2, 0.8);
    for (int s = 0; s < 2; ++s)
        CHECK(std::abs(whittle_index(m, s)) <= 1e-6);
    CHECK(check_indexability(m));
}

TEST_CASE("index is monotone in the active lift from the bad state") {
    double prev = -1e300;
    for (double p = 0.1; p <= 0.95; p += 0.05) {
        const auto m = TwoStateMdp::from_good_probs(0.1, 0.5, p, 0.9, 0.9);
        const double idx = whittle_index(m, 0);
        CHECK(idx >= prev - 1e-9);
        prev = idx;
    }
}

TEST_CASE("indexability resolution precondition") {
    CHECK_THROWS_WITH_AS(check_indexability(reference_instance(), 100.0), doctest::Contains("resolution too coarse"),
                         Error);
}

TEST_CASE("indifference on random indexable MDPs") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    while (checked < 30) {
        const auto m = random_beneficial(rng);
        if (!check_indexability(m, 1e-2))
            continue;
        ++checked;
        for (int s = 0; s < 2; ++s) {
            const double idx = whittle_index(m, s);
            const auto sol = solve_subsidy_mdp(m, idx);
            CHECK(std::abs(sol.q_active[s] - sol.q_passive[s]) <= 1e-5);
        }
    }
}

TEST_CASE("allocation budget rules") {
    std::mt19937_64 gen(3);
    std::vector<RmabArm> arms;
    for (int i = 0; i < 5; ++i)
        arms.push_back(known("a" + std::to_string(i), random_beneficial(gen), i % 2));
    Rng rng(1);
    CHECK(allocate(arms, 9, rng).acted.size() == 5);
    CHECK(allocate(arms, 0, rng).acted.empty());
    for (std::size_t k = 0; k <= 6; ++k)
        CHECK(allocate(arms, k, rng).acted.size() == std::min<std::size_t>(k, 5));
}

TEST_CASE("top-1 picks the largest grid-scan index") {
    const std::vector<RmabArm> arms{
        known("x", TwoStateMdp::from_good_probs(0.1, 0.5, 0.2, 0.6), 0),
        known("y", TwoStateMdp::from_good_probs(0.1, 0.5, 0.7, 0.9), 0),
        known("z", TwoStateMdp::from_good_probs(0.1, 0.5, 0.4, 0.7), 0),
    };
    std::vector<double> ref;
    for (const auto & a : arms)
        ref.push_back(oracle::grid_scan_index(std::get<TwoStateMdp>(a.dynamics), 0));
    REQUIRE(ref[1] > ref[2] + 1e-3);
    REQUIRE(ref[2] > ref[0] + 1e-3);
    Rng rng(0);
    const auto alloc = allocate(arms, 1, rng);
    REQUIRE(alloc.acted.size() == 1);
    CHECK(alloc.acted_ids[0] == "y");
}

TEST_CASE("ties are broken by arm id") {
    const auto m = reference_instance();
    const std::vector<RmabArm> arms{known("b", m, 0), known("c", m, 0), known("a", m, 0)};
    Rng rng(0);
    CHECK(allocate(arms, 2, rng).acted_ids == std::vector<std::string>{"b", "a"});
}

TEST_CASE("allocation is deterministic") {
    std::mt19937_64 gen(8);
    std::vector<RmabArm> arms;
    for (int i = 0; i < 12; ++i) {
        RmabArm a{"a" + std::to_string(i), i % 2, DynamicsBelief{}, "g"};
        auto & b = std::get<DynamicsBelief>(a.dynamics);
        b.alpha[1][0] += i;
        arms.push_back(a);
    }
    Rng r1(5), r2(5);
    const auto x = allocate(arms, 4, r1);
    const auto y = allocate(arms, 4, r2);
    CHECK(x.acted == y.acted);
    CHECK(x.indices == y.indices);
}

TEST_CASE("equitable allocation") {
    const auto strong = TwoStateMdp::from_good_probs(0.05, 0.4, 0.9, 0.95);
    const auto weak = TwoStateMdp::from_good_probs(0.3, 0.7, 0.35, 0.75);
    std::vector<RmabArm> arms;
    for (int i = 0; i < 6; ++i)
        arms.push_back(known("A" + std::to_string(i), strong, 0, "A"));
    for (int i = 0; i < 6; ++i)
        arms.push_back(known("B" + std::to_string(i), weak, 0, "B"));
    Rng rng(0);
    auto vanilla = allocate(arms, 4, rng);
    CHECK(vanilla.group_counts["B"] == 0);
    auto eq = equitable_allocate(arms, 4, {0.5, {}}, rng);
    CHECK(eq.group_counts["A"] == 2);
    CHECK(eq.group_counts["B"] == 2);
    CHECK(eq.group_mean_index["A"] > eq.group_mean_index["B"]);

    auto quarter = equitable_allocate(arms, 4, {0.25, {}}, rng);
    CHECK(quarter.group_counts["B"] >= 1);
    CHECK(quarter.group_counts["A"] >= 1);

    const auto none = equitable_allocate(arms, 4, {0.0, {}}, rng);
    CHECK(none.acted == vanilla.acted);

    CHECK_THROWS_AS(equitable_allocate(arms, 4, {0.75, {}}, rng), Error);
    EquityConstraint override_b{0.0, {{"B", 1.0}}};
    CHECK(equitable_allocate(arms, 4, override_b, rng).group_counts["B"] == 4);
}

TEST_CASE("dynamics belief updates") {
    DynamicsBelief b;
    CHECK(b.mean(1, 0) == 0.5);
    update_dynamics(b, 1, 0, 1);
    CHECK(b.alpha[1][0] == 2.0);
    CHECK(b.beta[1][0] == 1.0);
    CHECK(b.mean(1, 0) == doctest::Approx(2.0 / 3.0));

    DynamicsBelief c;
    Rng rng(6);
    std::bernoulli_distribution coin(0.7);
    for (int i = 0; i < 1000; ++i)
        update_dynamics(c, 0, 1, coin(rng) ? 1 : 0);
    CHECK(std::abs(c.mean(0, 1) - 0.7) < 0.05);
    CHECK(c.alpha[0][1] + c.beta[0][1] == 1002.0);
    CHECK(c.alpha[1][1] == 1.0);
}

TEST_CASE("Whittle policy is near optimal on a two-arm instance") {
    oracle::TinyInstance inst;
    inst.arms = {TwoStateMdp::from_good_probs(0.1, 0.5, 0.6, 0.9), TwoStateMdp::from_good_probs(0.2, 0.7, 0.5, 0.8)};
    const std::array<std::array<double, 2>, 2> idx{
        {{whittle_index(inst.arms[0], 0), whittle_index(inst.arms[0], 1)},
         {whittle_index(inst.arms[1], 0), whittle_index(inst.arms[1], 1)}}};
    const oracle::JointPolicy whittle = [&](int s0, int s1) { return idx[1][s1] > idx[0][s0] ? 1 : 0; };
    for (int s0 = 0; s0 < 2; ++s0)
        for (int s1 = 0; s1 < 2; ++s1) {
            const double opt = oracle::joint_value(inst, s0, s1, 3, nullptr);
            const double w = oracle::joint_value(inst, s0, s1, 3, &whittle);
            CHECK(w >= 0.95 * opt);
        }
}

}
