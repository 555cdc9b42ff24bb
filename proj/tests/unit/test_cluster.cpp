#include "doctest.h"

#include "cbwk/checks.hpp"
#include "cbwk/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace cbwk;

namespace {

// Noise-free samples r = mu' x for each arm.
std::vector<ArmSamples> exact_samples(const Matrix& params, std::size_t T0, Rng& rng) {
    std::vector<ArmSamples> data;
    for (Eigen::Index a = 0; a < params.rows(); ++a) {
        ArmSamples s;
        s.contexts.resize(static_cast<Eigen::Index>(T0), params.cols());
        for (Eigen::Index i = 0; i < s.contexts.size(); ++i) s.contexts.data()[i] = uniform01(rng);
        s.rewards = s.contexts * params.row(a).transpose();
        data.push_back(std::move(s));
    }
    return data;
}

double pooled_sse(const std::vector<ArmSamples>& data, const std::vector<std::size_t>& members) {
    if (members.empty()) return 0.0;
    const Eigen::Index m = data.front().contexts.cols();
    Matrix G = Matrix::Zero(m, m);
    Vector b = Vector::Zero(m);
    for (auto a : members) {
        G += data[a].contexts.transpose() * data[a].contexts;
        b += data[a].contexts.transpose() * data[a].rewards;
    }
    const Vector beta = G.ldlt().solve(b);
    double sse = 0.0;
    for (auto a : members) sse += (data[a].rewards - data[a].contexts * beta).squaredNorm();
    return sse;
}

}  // namespace

TEST_CASE("subset size") {
    CHECK(subset_size(100, 0.5, 2, 16, 0.5, 1.0) == 10);
    CHECK(subset_size(5, 0.5, 2, 16, 0.5, 1.0) == 5);
    CHECK(subset_size(1000, 1.0, 1, 100, 0.5, 1.0) == 10);
    CHECK(subset_size(1000, 0.25, 3, 10000, 0.25, 2.0) ==
          static_cast<std::size_t>(std::ceil(2.0 / 0.25 * (10.0 + std::log(3.0)))));
}

TEST_CASE("subset sampling") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = sample_arms(30, 12, rng);
        CHECK(s.size() == 12);
        CHECK(std::is_sorted(s.begin(), s.end()));
        CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 12);
        CHECK(s.back() < 30);
    }
    CHECK(sample_arms(7, 7, rng) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("subset sampling is uniform over arms") {
    Rng rng(5);
    std::vector<double> hits(10, 0.0);
    const int n = 20000;
    for (int i = 0; i < n; ++i)
        for (auto a : sample_arms(10, 3, rng)) hits[a] += 1.0;
    // Each arm appears with probability 0.3.
    for (double h : hits) CHECK(std::abs(h / n - 0.3) <= 4.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("subset covers every cluster with high probability") {
    // p_min 0.2, C 3, delta 0.3, T 1e4.
    const std::size_t K = 500, T = 10000;
    const std::vector<std::size_t> sizes{100, 200, 200};
    std::vector<std::size_t> membership;
    for (std::size_t c = 0; c < sizes.size(); ++c) membership.insert(membership.end(), sizes[c], c);
    Rng rng(19);
    int covered = 0;
    const int draws = 2000;
    for (int i = 0; i < draws; ++i) {
        std::set<std::size_t> seen;
        for (auto a : sample_subset(K, 0.2, 3, T, 0.3, 1.0, rng)) seen.insert(membership[a]);
        covered += seen.size() == 3;
    }
    CHECK(double(covered) / draws >= 0.99);
}

TEST_CASE("default lambda1") {
    CHECK(default_lambda1(16, 0.5) == doctest::Approx(0.25));
    CHECK(default_lambda1(10000, 0.5) == doctest::Approx(0.05));
    ClusteringConfig cfg;
    CHECK(cfg.resolve_lambda1(16) == doctest::Approx(0.25));
    cfg.lambda1 = 0.7;
    CHECK(cfg.resolve_lambda1(16) == 0.7);
}

TEST_CASE("clustering config validation") {
    ClusteringConfig cfg;
    cfg.delta = 0.6;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = ClusteringConfig{};
    cfg.delta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = ClusteringConfig{};
    cfg.lambda1 = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("objective by hand") {
    ArmSamples s{Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 1.0)};
    const Matrix zero = Matrix::Zero(1, 1);
    CHECK(classifier_lasso_objective(zero, zero, {s}, 0.3) == doctest::Approx(0.5));

    // penalty: lambda1 / N * |mu_a - mu_c| with one center
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    CHECK(classifier_lasso_objective(one, zero, {s}, 0.3) == doctest::Approx(0.3));

    // two centers: product of distances
    Matrix centers(2, 1);
    centers << 0.0, 3.0;
    CHECK(classifier_lasso_objective(one, centers, {s}, 0.5) == doctest::Approx(0.5 * 1.0 * 2.0));
}

TEST_CASE("analytic gradient matches finite differences") {
    const auto st = checks::gradient_check(10, 23);
    CHECK(st.max_relative_error <= 1e-5);
}

TEST_CASE("one cluster is the pooled least squares fit") {
    Rng rng(4);
    Matrix params(6, 2);
    for (Eigen::Index i = 0; i < params.size(); ++i) params.data()[i] = uniform01(rng);
    auto data = exact_samples(params, 8, rng);
    const ClusteringConfig cfg;
    const auto fit = classifier_lasso_fit(data, 1, 0.1, cfg, rng);

    Matrix X(48, 2);
    Vector y(48);
    for (std::size_t a = 0; a < 6; ++a) {
        X.middleRows(static_cast<Eigen::Index>(a * 8), 8) = data[a].contexts;
        y.segment(static_cast<Eigen::Index>(a * 8), 8) = data[a].rewards;
    }
    const Vector ls = X.colPivHouseholderQr().solve(y);
    CHECK((fit.centers.row(0).transpose() - ls).norm() <= 1e-6);
    for (int l : fit.labels) CHECK(l == 1);
}

TEST_CASE("noise-free two clusters against exhaustive partitions") {
    Rng rng(31);
    const std::size_t N = 10;
    Matrix params(N, 1);
    for (std::size_t a = 0; a < N; ++a) params(static_cast<Eigen::Index>(a), 0) = (a % 3 == 0) ? 0.0 : 1.0;
    const auto data = exact_samples(params, 20, rng);
    const ClusteringConfig cfg;
    const auto fit = classifier_lasso_fit(data, 2, cfg.resolve_lambda1(20), cfg, rng);

    // Partition with the smallest pooled SSE over all 2^N splits.
    double best = 1e300;
    unsigned best_mask = 0;
    for (unsigned mask = 1; mask + 1 < (1u << N); ++mask) {
        std::vector<std::size_t> g0, g1;
        for (std::size_t a = 0; a < N; ++a) ((mask >> a) & 1u ? g1 : g0).push_back(a);
        const double sse = pooled_sse(data, g0) + pooled_sse(data, g1);
        if (sse < best - 1e-12) {
            best = sse;
            best_mask = mask;
        }
    }
    std::vector<int> oracle(N);
    for (std::size_t a = 0; a < N; ++a) oracle[a] = ((best_mask >> a) & 1u) ? 2 : 1;
    const Vector eps = clustering_error(fit.labels, oracle, 2);
    CHECK(eps.maxCoeff() == 0.0);
    for (int l : fit.labels) CHECK(l != kUnassigned);

    std::vector<double> c(fit.centers.data(), fit.centers.data() + 2);
    std::sort(c.begin(), c.end());
    CHECK(c[0] == doctest::Approx(0.0).epsilon(1e-3).scale(1.0));
    CHECK(c[1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("identical arms do not beat the degenerate configuration") {
    Rng rng(2);
    Matrix params = Matrix::Constant(8, 2, 0.4);
    const auto data = exact_samples(params, 10, rng);
    const ClusteringConfig cfg;
    const double lambda1 = cfg.resolve_lambda1(10);
    const auto fit = classifier_lasso_fit(data, 2, lambda1, cfg, rng);
    const Matrix same = Matrix::Constant(8, 2, 0.4);
    const Matrix centers = Matrix::Constant(2, 2, 0.4);
    CHECK(fit.objective_value <= classifier_lasso_objective(same, centers, data, lambda1) + 1e-9);
    for (Eigen::Index a = 0; a < 8; ++a) CHECK((fit.per_arm_params.row(a) - params.row(a)).norm() <= 1e-3);
}

TEST_CASE("objective history never increases") {
    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix params(12, 3);
        for (Eigen::Index a = 0; a < 12; ++a) params.row(a).setConstant(a % 2 ? 0.1 : 0.3);
        auto data = exact_samples(params, 15, rng);
        for (auto& s : data)
            for (auto& r : s.rewards) r += 0.2 * (uniform01(rng) - 0.5);
        const ClusteringConfig cfg;
        const auto fit = classifier_lasso_fit(data, 2, cfg.resolve_lambda1(15), cfg, rng);
        for (std::size_t i = 1; i < fit.objective_history.size(); ++i)
            CHECK(fit.objective_history[i] <= fit.objective_history[i - 1] + 1e-12);
        CHECK(fit.labels.size() == 12);
    }
}

TEST_CASE("fit rejects bad input") {
    Rng rng(1);
    const ClusteringConfig cfg;
    CHECK_THROWS_AS(classifier_lasso_fit({}, 1, 0.1, cfg, rng), ValidationError);
    const auto data = exact_samples(Matrix::Constant(2, 1, 0.5), 3, rng);
    CHECK_THROWS_AS(classifier_lasso_fit(data, 3, 0.1, cfg, rng), ValidationError);
    CHECK_THROWS_AS(classifier_lasso_fit(data, 1, -0.1, cfg, rng), ValidationError);
}

TEST_CASE("assignment uses the lowest matching center") {
    Matrix centers(2, 1);
    centers << 0.2, 0.2;
    Matrix arms(3, 1);
    arms << 0.2, 0.5, 0.2 + 1e-12;
    const auto labels = assign_clusters(arms, centers, 1e-9);
    CHECK(labels == std::vector<int>{1, kUnassigned, 1});

    centers << 0.0, 1.0;
    arms << 1.0, 0.0, 0.5;
    CHECK(assign_clusters(arms, centers, 1e-9) == std::vector<int>{2, 1, kUnassigned});
}

TEST_CASE("clustering error") {
    CHECK(clustering_error({1, 1, 2, 2}, {1, 1, 2, 2}, 2).maxCoeff() == 0.0);
    CHECK(clustering_error({2, 2, 1, 1}, {1, 1, 2, 2}, 2).maxCoeff() == 0.0);

    std::vector<int> est(10, 1), truth(10, 1);
    truth[9] = 2;
    est.push_back(2);
    truth.push_back(2);
    const Vector eps = clustering_error(est, truth, 2);
    CHECK(eps[0] == doctest::Approx(0.1));
    CHECK(eps[1] == 0.0);

    // unassigned arms are ignored
    CHECK(clustering_error({kUnassigned, 1, 2}, {1, 2, 1}, 2).maxCoeff() == 0.0);
    CHECK_THROWS_AS(clustering_error({1}, {1, 2}, 2), ValidationError);
}

TEST_CASE("clustering error with many clusters") {
    const std::size_t C = 10;
    std::vector<int> truth, est;
    for (std::size_t c = 0; c < C; ++c)
        for (int k = 0; k < 3; ++k) {
            truth.push_back(static_cast<int>(c) + 1);
            est.push_back(static_cast<int>((c * 7) % C) + 1);
        }
    CHECK(clustering_error(est, truth, C).maxCoeff() == 0.0);
    est[0] = est[3];
    const Vector eps = clustering_error(est, truth, C);
    CHECK(eps.maxCoeff() == doctest::Approx(0.25));
}

TEST_CASE("misclustering shrinks with more exploration") {
    const auto few = checks::clustering_accuracy(40, 2, 3, 0.5, 0.1, 6, 30, 99);
    const auto many = checks::clustering_accuracy(40, 2, 3, 0.5, 0.1, 30, 30, 99);
    CHECK(many.mean_max_eps <= few.mean_max_eps);
    CHECK(many.mean_center_error <= few.mean_center_error);
}

TEST_CASE("clustering result json") {
    Rng rng(3);
    const auto data = exact_samples(Matrix::Constant(4, 2, 0.3), 5, rng);
    const ClusteringConfig cfg;
    auto fit = classifier_lasso_fit(data, 2, 0.1, cfg, rng);
    fit.subset = {0, 3, 5, 9};
    const auto j = fit.to_json();
    CHECK(j.at("labels").size() == 4);
    CHECK(j.at("centers").size() == 2);
    CHECK(j.contains("objective_value"));
}
