#include <doctest.h>

#include "oracles.hpp"

#include <adaptive/linear_bandits.hpp>

#include <algorithm>
#include <functional>
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

Vector random_vec(std::size_t d, std::mt19937_64 & rng) {
    std::normal_distribution<double> n01;
    Vector x(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x(i) = n01(rng);
    return x;
}

bool is_spd(const Matrix & m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        return false;
    return Eigen::LLT<Matrix>(m).info() == Eigen::Success;
}

double frequency_of_zero(const std::function<std::size_t(Rng &)> & draw, std::size_t K, int n, std::vector<double> & freq) {
    Rng rng(12345);
    freq.assign(K, 0.0);
    for (int i = 0; i < n; ++i)
        freq[draw(rng)] += 1.0 / n;
    return freq[0];
}

} // namespace

TEST_SUITE("linear_bandits") {

TEST_CASE("LinUCB closed-form ridge example") {
    LinearBanditState s(2, 1);
    linucb_update(s, vec({1}), 0, 1.0);
    CHECK(s.arms[0].precision(0, 0) == 2.0);
    CHECK(s.arms[0].response(0) == 1.0);
    CHECK(s.estimate(0)(0) == doctest::Approx(0.5).epsilon(1e-15));
    const auto d = linucb_select(s, vec({1}));
    CHECK(d.scores(0) == doctest::Approx(0.5 + std::sqrt(0.5)).epsilon(1e-12));
    CHECK(d.scores(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.action == 0);
}

TEST_CASE("fresh LinUCB state ties to arm 0") {
    LinearBanditState s(4, 3, 2.0, 1.5);
    const Vector x = vec({1, -2, 0.5});
    const auto d = linucb_select(s, x);
    for (Eigen::Index k = 0; k < 4; ++k)
        CHECK(d.scores(k) == doctest::Approx(1.5 * std::sqrt(x.squaredNorm() / 2.0)));
    CHECK(d.action == 0);
    const auto z = linucb_select(s, Vector::Zero(3));
    CHECK(z.scores.cwiseAbs().maxCoeff() == 0.0);
    CHECK(z.action == 0);
}

TEST_CASE("LinUCB update edge cases") {
    LinearBanditState s(2, 2);
    const auto before = s.arms[1];
    linucb_update(s, Vector::Zero(2), 1, 5.0);
    CHECK(s.arms[1].precision == before.precision);
    CHECK(s.arms[1].response == before.response);
    CHECK(s.arms[1].count == 1);

    LinearBanditState a(1, 2), b(1, 2);
    linucb_update(a, vec({1, 2}), 0, 0.3);
    linucb_update(a, vec({-1, 0.5}), 0, 2.0);
    linucb_update(b, vec({-1, 0.5}), 0, 2.0);
    linucb_update(b, vec({1, 2}), 0, 0.3);
    CHECK(a.arms[0].precision == b.arms[0].precision);
    CHECK(a.arms[0].response == b.arms[0].response);

    CHECK_THROWS_AS(linucb_update(s, vec({1, std::nan("")}), 0, 1.0), Error);
    CHECK_THROWS_AS(linucb_update(s, vec({1, 1}), 0, INFINITY), Error);
    CHECK_THROWS_AS(linucb_update(s, vec({1, 1}), 2, 1.0), Error);
    CHECK_THROWS_AS(linucb_select(s, vec({1})), Error);
}

TEST_CASE("LinUCB invariants under random updates") {
    std::mt19937_64 rng(8);
    LinearBanditState s(3, 4);
    const Vector probe = random_vec(4, rng);
    std::vector<double> widths(3);
    for (std::size_t k = 0; k < 3; ++k)
        widths[k] = s.confidence_width(k, probe);
    for (int i = 0; i < 200; ++i) {
        const std::size_t a = static_cast<std::size_t>(i % 3);
        linucb_update(s, random_vec(4, rng), a, std::normal_distribution<double>()(rng));
        CHECK(is_spd(s.arms[a].precision));
        const double w = s.confidence_width(a, probe);
        CHECK(w <= widths[a] + 1e-15);
        widths[a] = w;
    }
}

TEST_CASE("LinUCB is permutation equivariant") {
    std::mt19937_64 rng(4);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    LinearBanditState s(4, 3), p(4, 3);
    for (int i = 0; i < 60; ++i) {
        const Vector x = random_vec(3, rng);
        const std::size_t a = static_cast<std::size_t>(i % 4);
        const double r = std::normal_distribution<double>()(rng);
        linucb_update(s, x, a, r);
        linucb_update(p, x, perm[a], r);
    }
    for (int i = 0; i < 50; ++i) {
        const Vector x = random_vec(3, rng);
        const auto d = linucb_select(s, x);
        Vector sorted = d.scores;
        std::sort(sorted.data(), sorted.data() + sorted.size());
        if (sorted(3) - sorted(2) < 1e-9)
            continue;
        CHECK(linucb_select(p, x).action == perm[d.action]);
    }
}

TEST_CASE("Thompson conjugate closed form") {
    PosteriorBelief b(1, 1);
    ts_update(b, vec({1}), 0, 1.0);
    CHECK(b.mean(0)(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b.covariance(0)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

    PosteriorBelief z(2, 2);
    const auto before = z.arms[0];
    ts_update(z, Vector::Zero(2), 0, 123.0);
    CHECK(z.arms[0].precision == before.precision);
    CHECK(z.arms[0].shift == before.shift);
}

TEST_CASE("Thompson sequential updates equal the batch posterior") {
    PosteriorBelief seq(1, 1);
    ts_update(seq, vec({1}), 0, 1.0);
    ts_update(seq, vec({1}), 0, 0.0);
    Matrix X(2, 1);
    X << 1, 1;
    const auto batch = oracle::batch_linear_regression(X, vec({1, 0}), 1.0, 1.0);
    CHECK(std::abs(seq.mean(0)(0) - batch.mean(0)) < 1e-12);
    CHECK(std::abs(seq.covariance(0)(0, 0) - batch.covariance(0, 0)) < 1e-12);

    std::mt19937_64 rng(31);
    const std::size_t d = 4, n = 80;
    Matrix Xr(n, d);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        Xr.row(static_cast<Eigen::Index>(i)) = random_vec(d, rng).transpose();
        y(static_cast<Eigen::Index>(i)) = std::normal_distribution<double>()(rng);
    }
    const auto ref = oracle::batch_linear_regression(Xr, y, 2.0, 0.5);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int trial = 0; trial < 3; ++trial) {
        std::shuffle(order.begin(), order.end(), rng);
        PosteriorBelief b(1, d, 0.5, 2.0);
        Matrix prev_cov = b.covariance(0);
        for (auto i : order) {
            ts_update(b, Xr.row(static_cast<Eigen::Index>(i)).transpose(), 0, y(static_cast<Eigen::Index>(i)));
            const Matrix cov = b.covariance(0);
            // Loewner shrinkage: prev - cov is positive semidefinite.
            CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(prev_cov - cov).eigenvalues().minCoeff() > -1e-12);
            prev_cov = cov;
        }
        CHECK((b.mean(0) - ref.mean).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((b.covariance(0) - ref.covariance).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("Thompson selection") {
    PosteriorBelief point(2, 2);
    point.set_arm(0, vec({1, 0}), Matrix::Identity(2, 2) * 1e-20);
    point.set_arm(1, vec({0, 1}), Matrix::Identity(2, 2) * 1e-20);
    const Vector x = vec({1, 0.5});
    Rng rng(1);
    for (int i = 0; i < 200; ++i)
        CHECK(ts_select(point, x, rng) == 0);
    const Vector prop = action_propensity(point, x, 1000, rng);
    CHECK(prop(0) == 1.0);
    CHECK(prop(1) == 0.0);

    for (std::size_t K : {2u, 3u}) {
        PosteriorBelief sym(K, 2);
        std::vector<double> freq;
        frequency_of_zero([&](Rng & r) { return ts_select(sym, x, r); }, K, 10000, freq);
        for (double f : freq)
            CHECK(std::abs(f - 1.0 / static_cast<double>(K)) <= 0.02);
    }

    PosteriorBelief single(1, 2);
    CHECK(ts_select(single, x, rng) == 0);
    CHECK(action_propensity(single, x, 10, rng)(0) == 1.0);

    PosteriorBelief two(2, 2);
    const Vector p = action_propensity(two, x, 10000, rng);
    CHECK(std::abs(p(0) - 0.5) <= 0.02);
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK_THROWS_AS(ts_select(two, vec({1}), rng), Error);
}

TEST_CASE("Thompson draws are deterministic given the seed") {
    std::mt19937_64 gen(3);
    PosteriorBelief b(3, 3);
    for (int i = 0; i < 30; ++i)
        ts_update(b, random_vec(3, gen), static_cast<std::size_t>(i % 3), 1.0);
    const Vector x = random_vec(3, gen);
    Rng r1(77), r2(77);
    for (int i = 0; i < 100; ++i)
        CHECK(ts_select(b, x, r1) == ts_select(b, x, r2));
}

}
