#include "doctest.h"

#include "cbwk/checks.hpp"
#include "cbwk/omd.hpp"

#include <cmath>

using namespace cbwk;

TEST_CASE("initial theta") {
    OmdState one(1, 1);
    CHECK(one.theta()[0] == doctest::Approx(0.5));
    CHECK(one.eta() == doctest::Approx(std::sqrt(std::log(2.0))));

    OmdState three(3, 100);
    CHECK(three.theta().sum() == doctest::Approx(0.75));
    for (int j = 0; j < 3; ++j) CHECK(three.theta()[j] == doctest::Approx(0.25));
}

TEST_CASE("zero payoff leaves theta alone") {
    OmdState s(4, 50);
    const Vector before = s.theta();
    s.step(Vector::Zero(4));
    CHECK(s.theta().isApprox(before, 1e-15));
}

TEST_CASE("one step against the closed form") {
    OmdState s(1, 10);
    s.step(Vector::Constant(1, 1.0));
    const double e = std::exp(s.eta());
    CHECK(s.theta()[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
}

TEST_CASE("constant payoff on one coordinate") {
    const std::size_t d = 3;
    OmdState s(d, 1000);
    Vector g = Vector::Zero(d);
    g[0] = 1.0;
    double prev = s.theta()[0];
    for (int t = 1; t <= 200; ++t) {
        s.step(g);
        const double th = s.theta()[0];
        CHECK(th > prev);
        const double e = std::exp(s.eta() * t);
        CHECK(th == doctest::Approx(e / (e + double(d))).epsilon(1e-12));
        prev = th;
    }
}

TEST_CASE("theta stays in the capped simplex") {
    Rng rng(9);
    OmdState s(5, 10000);
    for (int t = 0; t < 10000; ++t) {
        Vector g(5);
        for (auto& e : g) e = 2.0 * uniform01(rng) - 1.0;
        if (t % 1000 == 0) g.setConstant(1.0);
        s.step(g);
        const Vector th = s.theta();
        CHECK(th.minCoeff() >= 0.0);
        CHECK(th.sum() <= 1.0);
        CHECK(s.weights().minCoeff() > 0.0);
    }
}

TEST_CASE("payoff outside [-1, 1] is a contract violation") {
    OmdState s(2, 10);
    CHECK_THROWS_AS(s.step((Vector(2) << 1.5, 0.0).finished()), ContractViolation);
    CHECK_THROWS_AS(s.step((Vector(2) << 0.0, -1.01).finished()), ContractViolation);
    CHECK_THROWS_AS(s.step(Vector::Zero(3)), ValidationError);
    CHECK_THROWS_AS(OmdState(0, 10), ValidationError);
}

TEST_CASE("best fixed theta in hindsight") {
    {
        const auto b = hindsight_best({(Vector(2) << 1.0, 0.0).finished(), (Vector(2) << 1.0, 0.0).finished()}, 2);
        CHECK(b.value == doctest::Approx(2.0));
        CHECK(b.theta[0] == 1.0);
        CHECK(b.theta[1] == 0.0);
    }
    {
        const auto b = hindsight_best({Vector::Constant(2, -1.0), Vector::Constant(2, -0.5)}, 2);
        CHECK(b.value == 0.0);
        CHECK(b.theta.isZero());
    }
    {
        const auto b = hindsight_best({(Vector(2) << 0.2, 0.5).finished(), (Vector(2) << 0.4, -0.4).finished()}, 2);
        CHECK(b.value == doctest::Approx(0.6));
        CHECK(b.theta[0] == 1.0);
    }
}

TEST_CASE("regret stays under the bound on random payoffs") {
    const auto st = checks::omd_regret(3, 2000, 10, 4);
    CHECK(st.within == st.trials);
}
