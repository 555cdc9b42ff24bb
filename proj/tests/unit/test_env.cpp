#include "doctest.h"

#include "cbwk/agent.hpp"
#include "cbwk/env.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace cbwk;

namespace {

InstanceConfig small_config(std::size_t K, std::size_t C, std::size_t m, std::size_t d) {
    InstanceConfig cfg;
    cfg.K = K;
    cfg.C = C;
    cfg.m = m;
    cfg.d = d;
    return cfg;
}

// Kolmogorov tail Q(lambda) with the usual small-sample correction.
double ks_p_value(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double D = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        D = std::max(D, (i + 1) / n - xs[i]);
        D = std::max(D, xs[i] - i / n);
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * D;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) q += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(q, 0.0, 1.0);
}

}  // namespace

TEST_CASE("balanced proportions split arms evenly") {
    Rng rng(3);
    const Instance inst = generate_instance(small_config(4, 2, 2, 1), rng);
    std::vector<int> counts(2, 0);
    for (auto c : inst.membership) ++counts[c];
    CHECK(counts[0] == 2);
    CHECK(counts[1] == 2);
    CHECK(inst.p_min == doctest::Approx(0.5));
}

TEST_CASE("single cluster needs no separation") {
    InstanceConfig cfg = small_config(5, 1, 3, 2);
    cfg.separation = 0.5;
    Rng rng(4);
    const Instance inst = generate_instance(cfg, rng);
    CHECK(inst.C == 1);
    for (auto c : inst.membership) CHECK(c == 0);
}

TEST_CASE("explicit proportions give the realized minimum share") {
    InstanceConfig cfg = small_config(100, 3, 2, 1);
    cfg.proportions = {0.5, 0.3, 0.2};
    cfg.separation = 0.2;
    Rng rng(5);
    const Instance inst = generate_instance(cfg, rng);
    std::vector<double> counts(3, 0.0);
    for (auto c : inst.membership) counts[c] += 1.0;
    CHECK(counts[0] == 50);
    CHECK(counts[1] == 30);
    CHECK(counts[2] == 20);
    CHECK(inst.p_min == doctest::Approx(0.2));
}

TEST_CASE("rounded cluster sizes always add up to K") {
    for (std::size_t K : {3, 7, 10, 11, 97}) {
        for (const std::vector<double>& p :
             {std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, std::vector<double>{0.6, 0.25, 0.15}}) {
            if (K * *std::min_element(p.begin(), p.end()) < 1.0) continue;  // rejected by validation
            const auto sizes = cluster_sizes(p, K);
            std::size_t total = 0;
            for (auto s : sizes) {
                CHECK(s >= 1);
                total += s;
            }
            CHECK(total == K);
        }
    }
}

TEST_CASE("invalid instance configs are rejected") {
    Rng rng(1);
    InstanceConfig cfg = small_config(10, 2, 2, 1);
    cfg.proportions = {1.0, 0.0};
    CHECK_THROWS_AS(generate_instance(cfg, rng), ValidationError);

    cfg = small_config(10, 2, 2, 1);
    cfg.proportions = {0.5, 0.4};
    CHECK_THROWS_AS(generate_instance(cfg, rng), ValidationError);

    cfg = small_config(1, 2, 2, 1);
    CHECK_THROWS_AS(generate_instance(cfg, rng), ValidationError);

    cfg = small_config(4, 2, 2, 1);
    cfg.noise_half_width = 0.7;
    CHECK_THROWS_AS(generate_instance(cfg, rng), ValidationError);
}

TEST_CASE("unreachable separation is a generation error") {
    // Rows with 1-norm <= 1 in [0,1]^2 are at most sqrt(2) apart.
    InstanceConfig cfg = small_config(4, 2, 2, 1);
    cfg.separation = 1.5;
    Rng rng(9);
    CHECK_THROWS_AS(generate_instance(cfg, rng), GenerationError);
}

TEST_CASE("generated parameters respect their constraints") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        InstanceConfig cfg = small_config(30, 3, 4, 3);
        cfg.separation = 0.3;
        const Instance inst = generate_instance(cfg, rng);
        for (std::size_t c = 0; c < inst.C; ++c) {
            CHECK(inst.mu.row(c).minCoeff() >= 0.0);
            CHECK(inst.mu.row(c).sum() <= 1.0 + 1e-12);
            CHECK(inst.W[c].minCoeff() >= 0.0);
            for (std::size_t j = 0; j < inst.d; ++j) CHECK(inst.W[c].col(j).sum() <= 1.0 + 1e-12);
            for (std::size_t e = c + 1; e < inst.C; ++e)
                CHECK((inst.mu.row(c) - inst.mu.row(e)).norm() >= cfg.separation);
        }
    }
}

TEST_CASE("same seed gives the same instance") {
    InstanceConfig cfg = small_config(12, 2, 3, 2);
    Rng a = derive_stream(42, stream::instance), b = derive_stream(42, stream::instance);
    const Instance x = generate_instance(cfg, a), y = generate_instance(cfg, b);
    CHECK(x.membership == y.membership);
    CHECK(x.mu == y.mu);
    for (std::size_t c = 0; c < x.C; ++c) CHECK(x.W[c] == y.W[c]);
}

TEST_CASE("contexts lie in the unit cube") {
    for (auto dist : {ContextDistribution::uniform(), ContextDistribution::beta(2, 5),
                      ContextDistribution::truncated_gaussian(0.5, 0.8)}) {
        InstanceConfig cfg = small_config(6, 2, 3, 1);
        cfg.context = dist;
        Rng rng(2);
        const Instance inst = generate_instance(cfg, rng);
        for (int i = 0; i < 200; ++i) {
            const Matrix X = draw_context(inst, rng);
            CHECK(X.rows() == 6);
            CHECK(X.cols() == 3);
            CHECK(X.minCoeff() >= 0.0);
            CHECK(X.maxCoeff() <= 1.0);
        }
    }
}

TEST_CASE("beta(1,1) contexts are uniform") {
    InstanceConfig cfg = small_config(1, 1, 1, 1);
    cfg.context = ContextDistribution::beta(1, 1);
    Rng rng(77);
    const Instance inst = generate_instance(cfg, rng);
    std::vector<double> xs;
    for (int i = 0; i < 10000; ++i) xs.push_back(draw_context(inst, rng)(0, 0));
    CHECK(ks_p_value(xs) > 0.01);
}

TEST_CASE("context distribution text round trip") {
    for (const char* text : {"uniform01", "beta(2,3)", "truncated_gaussian(0.5,0.1)"}) {
        const auto d = ContextDistribution::parse(text);
        const auto again = ContextDistribution::parse(d.to_string());
        CHECK(again.kind == d.kind);
        CHECK(again.a == d.a);
        CHECK(again.b == d.b);
    }
    CHECK_THROWS_AS(ContextDistribution::parse("gamma(1,1)"), ValidationError);
    CHECK_THROWS_AS(ContextDistribution::parse("beta(0,1)"), ValidationError);
}

TEST_CASE("no-op consumes nothing") {
    Rng rng(1);
    const Instance inst = generate_instance(small_config(4, 2, 2, 3), rng);
    const PullOutcome out = pull(inst, kNoOp, Vector::Constant(2, 0.5), rng);
    CHECK(out.reward == 0.0);
    CHECK(out.consumption.size() == 3);
    CHECK(out.consumption.isZero());
}

TEST_CASE("bad arm ids are rejected") {
    Rng rng(1);
    const Instance inst = generate_instance(small_config(4, 2, 2, 1), rng);
    CHECK_THROWS_AS(pull(inst, 4, Vector::Constant(2, 0.5), rng), ValidationError);
    CHECK_THROWS_AS(pull(inst, -2, Vector::Constant(2, 0.5), rng), ValidationError);
}

TEST_CASE("zero noise width returns the mean exactly") {
    InstanceConfig cfg = small_config(6, 2, 3, 2);
    cfg.noise_half_width = 0.0;
    Rng rng(8);
    const Instance inst = generate_instance(cfg, rng);
    for (int i = 0; i < 50; ++i) {
        const Matrix X = draw_context(inst, rng);
        for (std::size_t a = 0; a < inst.K; ++a) {
            const Vector x = X.row(a).transpose();
            const PullOutcome out = pull(inst, static_cast<long>(a), x, rng);
            CHECK(out.reward == inst.mean_reward(a, x));
            CHECK(out.consumption == inst.mean_consumption(a, x));
        }
    }
}

TEST_CASE("a mean of one allows no noise") {
    InstanceConfig cfg = small_config(1, 1, 1, 1);
    cfg.mu = Matrix::Constant(1, 1, 1.0);
    cfg.W = std::vector<Matrix>{Matrix::Constant(1, 1, 1.0)};
    Rng rng(8);
    const Instance inst = generate_instance(cfg, rng);
    for (int i = 0; i < 100; ++i) {
        const PullOutcome out = pull(inst, 0, Vector::Constant(1, 1.0), rng);
        CHECK(out.reward == 1.0);
        CHECK(out.consumption[0] == 1.0);
    }
}

TEST_CASE("noise is bounded and has zero mean") {
    InstanceConfig cfg = small_config(3, 1, 2, 1);
    cfg.noise_half_width = 0.25;
    Rng rng(21);
    const Instance inst = generate_instance(cfg, rng);
    const Vector x = Vector::Constant(2, 0.6);
    const double mean = inst.mean_reward(0, x);
    double sum = 0.0, sumsq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const PullOutcome out = pull(inst, 0, x, rng);
        const double e = out.reward - mean;
        CHECK(std::abs(e) <= 2 * cfg.noise_half_width + 1e-15);
        CHECK(out.reward >= 0.0);
        CHECK(out.reward <= 1.0);
        sum += e;
        sumsq += e * e;
    }
    const double sd = std::sqrt(sumsq / n);
    CHECK(std::abs(sum / n) <= 4.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("ledger stops at the first resource reaching the budget") {
    BudgetLedger ledger(1.0, 2);
    ledger.update((Vector(2) << 0.5, 0.1).finished());
    CHECK_FALSE(ledger.stopped());
    ledger.update((Vector(2) << 0.5, 0.1).finished());
    CHECK(ledger.stopped());
    CHECK_THROWS_AS(ledger.update(Vector::Zero(2)), ContractViolation);
}

TEST_CASE("ledger accumulates until exhausted") {
    BudgetLedger ledger(2.0, 1);
    ledger.update(Vector::Constant(1, 0.9));
    ledger.update(Vector::Constant(1, 0.9));
    CHECK_FALSE(ledger.stopped());
    ledger.update(Vector::Constant(1, 0.9));
    CHECK(ledger.stopped());
    CHECK(ledger.cumulative()[0] == doctest::Approx(2.7));
}

TEST_CASE("zero consumption never stops the ledger") {
    BudgetLedger ledger(0.5, 3);
    for (int i = 0; i < 1000; ++i) ledger.update(Vector::Zero(3));
    CHECK_FALSE(ledger.stopped());
    CHECK(ledger.cumulative().isZero());
}

TEST_CASE("ledger rejects bad input") {
    CHECK_THROWS_AS(BudgetLedger(0.0, 1), ValidationError);
    BudgetLedger ledger(1.0, 2);
    CHECK_THROWS_AS(ledger.update(Vector::Zero(3)), ValidationError);
    CHECK_THROWS_AS(ledger.update((Vector(2) << -0.1, 0.0).finished()), ContractViolation);
}

TEST_CASE("ledger cumulative is monotone") {
    Rng rng(4);
    BudgetLedger ledger(50.0, 3);
    Vector prev = ledger.cumulative();
    while (!ledger.stopped()) {
        Vector v(3);
        for (int j = 0; j < 3; ++j) v[j] = uniform01(rng);
        ledger.update(v);
        CHECK((ledger.cumulative().array() >= prev.array()).all());
        prev = ledger.cumulative();
    }
    CHECK(prev.maxCoeff() >= 50.0);
}
