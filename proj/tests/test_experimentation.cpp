#include <doctest.h>

#include <adaptive/experimentation.hpp>

#include <random>
#include <sstream>

using namespace adaptive;

namespace {

ExperimentDesign fixed(std::vector<double> probs, AssignmentUnit unit = AssignmentUnit::individual) {
    ExperimentDesign d;
    d.unit = unit;
    d.mechanism = Mechanism::fixed_random;
    d.arm_labels.clear();
    for (std::size_t i = 0; i < probs.size(); ++i)
        d.arm_labels.push_back("arm" + std::to_string(i));
    d.arm_probabilities = std::move(probs);
    return d;
}

ExperimentDesign mrt(double p) {
    ExperimentDesign d;
    d.mechanism = Mechanism::micro_randomized;
    d.treatment_probability = {p};
    return d;
}

Outcome outcome(std::size_t arm, double propensity, double reward) {
    AssignmentRecord r;
    r.unit_id = "u";
    r.arm = arm;
    r.propensity = propensity;
    return {r, reward};
}

} // namespace

TEST_SUITE("experimentation") {

TEST_CASE("degenerate fixed design") {
    Assigner a(fixed({1.0, 0.0}));
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto r = a.assign("u" + std::to_string(i), std::nullopt, rng);
        CHECK(r.arm == 0);
        CHECK(r.propensity == 1.0);
    }
}

TEST_CASE("fixed design frequencies") {
    Assigner a(fixed({0.5, 0.5}));
    Rng rng(2);
    double zero = 0;
    for (int i = 0; i < 10000; ++i)
        zero += a.assign("u", std::nullopt, rng).arm == 0 ? 1 : 0;
    CHECK(std::abs(zero / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("cluster coherence") {
    Assigner a(fixed({0.3, 0.3, 0.4}, AssignmentUnit::cluster));
    Rng rng(3);
    const auto x = a.assign("u1", std::string("c1"), rng);
    const auto y = a.assign("u2", std::string("c1"), rng);
    CHECK(x.arm == y.arm);
    CHECK(x.propensity == y.propensity);
    CHECK_THROWS_AS(a.assign("u3", std::nullopt, rng), Error);

    std::mt19937_64 gen(4);
    std::uniform_int_distribution<int> cluster(0, 30);
    std::map<std::string, std::size_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::string c = "c" + std::to_string(cluster(gen));
        const auto r = a.assign("u" + std::to_string(i), c, rng);
        const auto [it, fresh] = seen.emplace(c, r.arm);
        CHECK(it->second == r.arm);
    }
}

TEST_CASE("design validation") {
    CHECK_THROWS_AS(fixed({0.5, 0.6}).validate(), Error);
    CHECK_THROWS_AS(fixed({-0.1, 1.1}).validate(), Error);
    CHECK_THROWS_AS(mrt(1.0).validate(), Error);
    CHECK_THROWS_AS(mrt(0.0).validate(), Error);
    CHECK_NOTHROW(mrt(0.999).validate());
    ExperimentDesign sched = mrt(0.5);
    sched.treatment_probability = {0.2, 0.4};
    CHECK(sched.treatment_probability_at(0) == 0.2);
    CHECK(sched.treatment_probability_at(7) == 0.4);
}

TEST_CASE("adaptive assignment logs propensities") {
    ExperimentDesign d;
    d.mechanism = Mechanism::adaptive;
    d.arm_labels = {"a", "b"};
    d.arm_probabilities = {0.5, 0.5};
    Vector x = Vector::Ones(2);
    Rng rng(9);

    PosteriorBelief point(2, 2);
    point.set_arm(0, Vector::Zero(2), Matrix::Identity(2, 2) * 1e-20);
    point.set_arm(1, Vector::Ones(2), Matrix::Identity(2, 2) * 1e-20);
    const auto r = adaptive_assign(d, point, x, "u", rng, 10000);
    CHECK(r.arm == 1);
    CHECK(r.propensity >= 0.99);

    PosteriorBelief sym(2, 2);
    double mean_prop = 0;
    for (int i = 0; i < 20; ++i)
        mean_prop += adaptive_assign(d, sym, x, "u", rng, 10000).propensity / 20.0;
    CHECK(std::abs(mean_prop - 0.5) <= 0.02);

    ExperimentDesign single = d;
    single.arm_labels = {"only"};
    single.arm_probabilities = {1.0};
    const auto s = adaptive_assign(single, PosteriorBelief(1, 2), x, "u", rng, 100);
    CHECK(s.arm == 0);
    CHECK(s.propensity == 1.0);
    CHECK_THROWS_AS(adaptive_assign(d, sym, Vector::Ones(3), "u", rng, 10), Error);
}

TEST_CASE("micro-randomization") {
    Rng rng(5);
    const auto half = mrt(0.5);
    double treated = 0;
    for (std::size_t t = 0; t < 10000; ++t) {
        const auto r = mrt_randomize(half, "u", t, rng);
        treated += static_cast<double>(r.arm);
        CHECK(r.propensity == 0.5);
    }
    CHECK(std::abs(treated / 10000.0 - 0.5) <= 0.02);

    const auto high = mrt(0.999);
    double high_treated = 0;
    for (std::size_t t = 0; t < 1000; ++t) {
        const auto r = mrt_randomize(high, "u", t, rng);
        high_treated += static_cast<double>(r.arm);
        if (r.arm == 1)
            CHECK(r.propensity == 0.999);
        else
            CHECK(r.propensity == doctest::Approx(0.001));
    }
    CHECK(high_treated >= 990);

    ExperimentDesign bad = mrt(0.5);
    bad.treatment_probability = {1.0};
    CHECK_THROWS_AS(mrt_randomize(bad, "u", 0, rng), Error);
}

TEST_CASE("assignments are reproducible") {
    auto run = [] {
        Rng rng(77);
        Assigner a(fixed({0.2, 0.8}, AssignmentUnit::cluster));
        std::vector<AssignmentRecord> out;
        for (int i = 0; i < 50; ++i)
            out.push_back(a.assign("u" + std::to_string(i), "c" + std::to_string(i % 7), rng));
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("effect estimates") {
    const std::vector<Outcome> same{outcome(1, 0.5, 2.0), outcome(0, 0.5, 2.0), outcome(1, 0.5, 2.0),
                                    outcome(0, 0.5, 2.0)};
    CHECK(estimate_effect(same, Estimator::difference_in_means).estimate == 0.0);
    CHECK(estimate_effect(same, Estimator::ipw).estimate == 0.0);

    const std::vector<Outcome> hand{outcome(1, 0.5, 1.0), outcome(1, 0.5, 0.0), outcome(0, 0.5, 1.0),
                                    outcome(0, 0.5, 0.0)};
    const auto ipw = estimate_effect(hand, Estimator::ipw);
    CHECK(ipw.estimate == 0.0);
    CHECK(ipw.sample_size == 4);
    CHECK(ipw.standard_error >= 0.0);

    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise;
    std::vector<Outcome> balanced;
    double tsum = 0, csum = 0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t arm = static_cast<std::size_t>(i % 2);
        const double r = noise(rng) + 0.4 * static_cast<double>(arm);
        (arm ? tsum : csum) += r;
        balanced.push_back(outcome(arm, 0.5, r));
    }
    const auto e = estimate_effect(balanced, Estimator::ipw);
    CHECK(e.estimate == doctest::Approx(2.0 * (tsum - csum) / 200.0).epsilon(1e-12));
    CHECK(e.estimate == doctest::Approx(estimate_effect(balanced, Estimator::difference_in_means).estimate).epsilon(1e-12));

    const std::vector<Outcome> one_arm{outcome(1, 0.5, 1.0), outcome(1, 0.5, 2.0)};
    CHECK_THROWS_AS(estimate_effect(one_arm, Estimator::difference_in_means), Error);
    const std::vector<Outcome> certain{outcome(1, 1.0, 1.0), outcome(0, 1.0, 0.0)};
    CHECK_THROWS_AS(estimate_effect(certain, Estimator::ipw), Error);
}

TEST_CASE("experiment log round trip") {
    std::vector<Outcome> out{outcome(1, 0.3, 1.25), outcome(0, 0.7, -0.5)};
    out[0].record.cluster_id = "c1";
    out[1].record.decision_point = 4;
    std::stringstream ss;
    write_experiment_log(ss, out);
    const auto back = read_experiment_log(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].record.cluster_id == std::optional<std::string>("c1"));
    CHECK_FALSE(back[1].record.cluster_id.has_value());
    CHECK(back[1].record.decision_point == 4);
    CHECK(back[0].record.propensity == 0.3);
    CHECK(back[1].reward == -0.5);
    CHECK(parse_estimator("difference-in-means") == Estimator::difference_in_means);
    CHECK_THROWS_AS(parse_estimator("bogus"), Error);
}

}
