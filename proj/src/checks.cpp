#include "cbwk/checks.hpp"

#include "cbwk/estimate.hpp"
#include "cbwk/omd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cbwk::checks {

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

Vector uniform_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
    return v;
}

}  // namespace

// =============================================================================
// Oracles
// =============================================================================

VertexOptimum vertex_enumeration(const LpProblem& problem, double tol) {
    const Eigen::Index n = problem.c.size();
    const Eigen::Index k = problem.A.rows();
    // Every constraint as a row g'x <= h.
    Matrix G(k + 2 * n, n);
    Vector h(k + 2 * n);
    G.topRows(k) = problem.A;
    h.head(k) = problem.b;
    G.middleRows(k, n) = -Matrix::Identity(n, n);
    h.segment(k, n).setZero();
    G.bottomRows(n) = Matrix::Identity(n, n);
    h.tail(n) = problem.upper;

    VertexOptimum best;
    const auto rows = static_cast<std::size_t>(G.rows());
    std::vector<bool> pick(rows, false);
    std::fill(pick.end() - n, pick.end(), true);
    do {
        Matrix S(n, n);
        Vector rhs(n);
        Eigen::Index r = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (!pick[i]) continue;
            S.row(r) = G.row(static_cast<Eigen::Index>(i));
            rhs[r] = h[static_cast<Eigen::Index>(i)];
            ++r;
        }
        Eigen::FullPivLU<Matrix> lu(S);
        if (lu.rank() < n) continue;
        const Vector x = lu.solve(rhs);
        if (((G * x - h).array() > tol).any()) continue;
        const double value = problem.c.dot(x);
        if (!best.feasible || value > best.value) best = {true, value};
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

Vector batch_ridge(const Matrix& X, const Vector& y, double lambda) {
    const Matrix M = lambda * Matrix::Identity(X.cols(), X.cols()) + X.transpose() * X;
    return M.ldlt().solve(X.transpose() * y);
}

ClassoGradient finite_difference_gradient(const Matrix& per_arm_params, const Matrix& centers,
                                          const std::vector<ArmSamples>& data, double lambda1, double h) {
    ClassoGradient g{Matrix::Zero(per_arm_params.rows(), per_arm_params.cols()),
                     Matrix::Zero(centers.rows(), centers.cols())};
    Matrix arms = per_arm_params, ctr = centers;
    for (Eigen::Index i = 0; i < arms.rows(); ++i) {
        for (Eigen::Index j = 0; j < arms.cols(); ++j) {
            const double keep = arms(i, j);
            arms(i, j) = keep + h;
            const double up = classifier_lasso_objective(arms, ctr, data, lambda1);
            arms(i, j) = keep - h;
            const double down = classifier_lasso_objective(arms, ctr, data, lambda1);
            arms(i, j) = keep;
            g.arms(i, j) = (up - down) / (2.0 * h);
        }
    }
    for (Eigen::Index i = 0; i < ctr.rows(); ++i) {
        for (Eigen::Index j = 0; j < ctr.cols(); ++j) {
            const double keep = ctr(i, j);
            ctr(i, j) = keep + h;
            const double up = classifier_lasso_objective(arms, ctr, data, lambda1);
            ctr(i, j) = keep - h;
            const double down = classifier_lasso_objective(arms, ctr, data, lambda1);
            ctr(i, j) = keep;
            g.centers(i, j) = (up - down) / (2.0 * h);
        }
    }
    return g;
}

std::vector<std::string> audit_trace(const RunTrace& trace, std::size_t d) {
    std::vector<std::string> problems;
    auto flag = [&](const std::string& what) { problems.push_back(what); };

    if (trace.records.size() != trace.pulls) flag("record count differs from pull count");
    if (trace.T_omega > trace.T) flag("T_omega exceeds T");
    Vector cum = Vector::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const auto& rec = trace.records[i];
        if (rec.t != i + 1) flag("period " + std::to_string(i + 1) + " recorded as " + std::to_string(rec.t));
        if (cum.size() && cum.maxCoeff() >= trace.B)
            flag("pull recorded at t = " + std::to_string(rec.t) + " after the budget was exhausted");
        cum += rec.consumption;
    }
    const bool exhausted = cum.size() && cum.maxCoeff() >= trace.B;
    if (trace.stopped != exhausted) flag("stop flag disagrees with recorded consumption");
    if (trace.records.empty()) {
        flag("no records");
        return problems;
    }
    const std::size_t last = trace.records.back().t;
    if (trace.stopped && trace.T_omega != last) flag("T_omega is not the period of the violating pull");
    if (!trace.stopped && (trace.T_omega != trace.T || last != trace.T)) flag("run ended early without a stop");
    if (trace.final_cumulative.size() != cum.size() || (trace.final_cumulative - cum).cwiseAbs().maxCoeff() > 1e-9)
        flag("ledger totals disagree with the records");
    return problems;
}

// =============================================================================
// Checks
// =============================================================================

CoverageStats ellipsoid_coverage(std::size_t m, double zeta, std::size_t t, double eps, std::size_t replications,
                                 std::uint64_t seed) {
    RadiusConfig rc;
    rc.zeta = zeta;
    rc.lambda2 = 1.0;
    rc.R = 0.5;
    const auto mi = static_cast<Eigen::Index>(m);
    const double radius = reward_radius(t, m, rc, eps);
    std::size_t covered = 0;
    for (std::size_t rep = 0; rep < replications; ++rep) {
        Rng rng = derive_stream(seed, 1000 + rep);
        Vector mu = uniform_vector(rng, mi, 0.0, 1.0);
        if (mu.sum() > 1.0) mu /= mu.sum();
        const Vector gamma = uniform_vector(rng, mi, -1.0, 1.0);
        ClusterEstimate est(m, 1, rc.lambda2);
        const Vector v = Vector::Zero(1);
        // The ellipsoid at time t is built from the t - 1 earlier observations.
        for (std::size_t i = 1; i < t; ++i) {
            const Vector x = uniform_vector(rng, mi, 0.0, 1.0);
            const double mean = mu.dot(x);
            const double w = std::min({2.0 * rc.R, mean, 1.0 - mean});
            const double u = w * (2.0 * uniform01(rng) - 1.0);
            const double h = uniform01(rng) < eps ? gamma.dot(x) : 0.0;
            est.update(x, mean + u + h, v);
        }
        const Vector diff = mu - est.mu_hat();
        if (std::sqrt(diff.dot(est.gram() * diff)) <= radius) ++covered;
    }
    return {static_cast<double>(covered) / static_cast<double>(replications), replications};
}

SumNormStats sum_of_norms(std::size_t m, std::size_t horizon, std::size_t runs, std::uint64_t seed) {
    SumNormStats stats;
    const auto mi = static_cast<Eigen::Index>(m);
    const Vector v = Vector::Zero(1);
    for (std::size_t run = 0; run < runs; ++run) {
        Rng rng = derive_stream(seed, 2000 + run);
        ClusterEstimate est(m, 1, 1.0);
        double sum = 0.0;
        bool violated = false;
        for (std::size_t t = 1; t <= horizon; ++t) {
            const Vector x = uniform_vector(rng, mi, 0.0, 1.0);
            sum += est.inverse_norm(x);
            est.update(x, 0.0, v);
            if (t < 2) continue;
            const double td = static_cast<double>(t);
            const double bound = std::sqrt(static_cast<double>(m) * td * std::log(td));
            ++stats.checks;
            stats.max_ratio = std::max(stats.max_ratio, sum / bound);
            if (sum > bound) {
                ++stats.violations;
                stats.last_violation_t = std::max(stats.last_violation_t, t);
                violated = true;
            }
        }
        if (violated) ++stats.runs_with_violation;
    }
    return stats;
}

OmdRegretStats omd_regret(std::size_t d, std::size_t horizon, std::size_t trials, std::uint64_t seed) {
    OmdRegretStats stats;
    stats.trials = trials;
    const double scale = std::sqrt(static_cast<double>(horizon) * std::log(static_cast<double>(d + 1)));
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng = derive_stream(seed, 3000 + trial);
        OmdState omd(d, horizon);
        Vector total = Vector::Zero(static_cast<Eigen::Index>(d));
        double achieved = 0.0;
        for (std::size_t t = 0; t < horizon; ++t) {
            const Vector g = uniform_vector(rng, static_cast<Eigen::Index>(d), -1.0, 1.0);
            achieved += omd.theta().dot(g);
            omd.step(g);
            total += g;
        }
        const double best = std::max(0.0, total.maxCoeff());
        const double ratio = (best - achieved) / scale;
        stats.max_ratio = std::max(stats.max_ratio, ratio);
        if (ratio <= 2.5) ++stats.within;
    }
    return stats;
}

LpOracleStats lp_oracle(std::size_t problems, std::size_t max_dim, std::uint64_t seed) {
    LpOracleStats stats;
    Rng rng = derive_stream(seed, 4000);
    for (std::size_t p = 0; p < problems; ++p) {
        const auto n = static_cast<Eigen::Index>(1 + std::min<std::size_t>(
                                                         static_cast<std::size_t>(uniform01(rng) * max_dim), max_dim - 1));
        const auto k = static_cast<Eigen::Index>(1 + std::min<std::size_t>(
                                                         static_cast<std::size_t>(uniform01(rng) * max_dim), max_dim - 1));
        LpProblem lp;
        lp.c = uniform_vector(rng, n, -1.0, 1.0);
        lp.A.resize(k, n);
        for (Eigen::Index i = 0; i < k; ++i) lp.A.row(i) = uniform_vector(rng, n, -1.0, 1.0).transpose();
        lp.b = uniform_vector(rng, k, -0.5, 1.5);
        lp.upper = uniform_vector(rng, n, 0.5, 2.0);

        const LpSolution sol = lp_solve(lp);
        const VertexOptimum ref = vertex_enumeration(lp);
        ++stats.problems;
        if (!ref.feasible) {
            if (sol.status == LpStatus::infeasible) ++stats.matched;
            continue;
        }
        if (sol.status != LpStatus::optimal) {
            stats.max_error = INFINITY;
            continue;
        }
        const double err = std::abs(sol.value - ref.value);
        stats.max_error = std::max(stats.max_error, err);
        if (err <= 1e-6) ++stats.matched;
    }
    return stats;
}

LpOracleStats choice_program_oracle(std::size_t problems, std::uint64_t seed) {
    LpOracleStats stats;
    Rng rng = derive_stream(seed, 4500);
    for (std::size_t p = 0; p < problems; ++p) {
        const std::size_t periods = 1 + static_cast<std::size_t>(uniform01(rng) * 6);
        const std::size_t options = 1 + static_cast<std::size_t>(uniform01(rng) * 4);
        const std::size_t resources = 1 + static_cast<std::size_t>(uniform01(rng) * 3);
        ChoiceProgram prog(periods, options, resources);
        for (auto& r : prog.reward) r = uniform(rng, -0.2, 1.0);
        for (auto& c : prog.consumption) c = uniform01(rng);
        prog.scale = 1.0 / static_cast<double>(periods);
        prog.capacity = uniform_vector(rng, static_cast<Eigen::Index>(resources), 0.05, 1.0);
        const ChoiceSolution fast = solve_choice_program(prog);
        const LpSolution flat = lp_solve(prog.to_lp());
        ++stats.problems;
        if (fast.status != LpStatus::optimal || flat.status != LpStatus::optimal) {
            stats.max_error = INFINITY;
            continue;
        }
        const double err = std::abs(fast.value - flat.value);
        stats.max_error = std::max(stats.max_error, err);
        if (err <= 1e-6) ++stats.matched;
    }
    return stats;
}

ClusteringStats clustering_accuracy(std::size_t K, std::size_t C, std::size_t m, double separation, double R,
                                    std::size_t n_s, std::size_t replications, std::uint64_t seed) {
    ClusteringStats stats;
    stats.replications = replications;
    for (std::size_t rep = 0; rep < replications; ++rep) {
        const std::uint64_t s = seed ^ rep;
        InstanceConfig icfg;
        icfg.K = K;
        icfg.C = C;
        icfg.m = m;
        icfg.d = 1;
        icfg.separation = separation;
        icfg.noise_half_width = R;
        icfg.seed = s;
        Rng inst_rng = derive_stream(s, stream::instance);
        const Instance inst = generate_instance(icfg, inst_rng);

        Rng subset_rng = derive_stream(s, stream::subset);
        Rng context_rng = derive_stream(s, stream::context);
        Rng noise_rng = derive_stream(s, stream::noise);
        Rng cluster_rng = derive_stream(s, stream::clustering);
        const auto subset = sample_arms(K, n_s, subset_rng);
        BudgetLedger ledger(static_cast<double>(n_s * n_s) + 1.0, 1);
        const ExplorationData data = explore(inst, subset, n_s, context_rng, noise_rng, ledger);
        const ClusteringResult fit = fit_clusters(data, C, ClusteringConfig{}, cluster_rng);

        std::vector<int> truth(subset.size());
        for (std::size_t i = 0; i < subset.size(); ++i) truth[i] = static_cast<int>(inst.membership[subset[i]]) + 1;
        stats.mean_max_eps += clustering_error(fit.labels, truth, C).maxCoeff();

        std::vector<std::size_t> perm(C);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        double best_sum = INFINITY, best_max = INFINITY;
        do {
            double sum = 0.0, worst = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double e = (fit.centers.row(static_cast<Eigen::Index>(perm[c])) -
                                  inst.mu.row(static_cast<Eigen::Index>(c)))
                                     .norm();
                sum += e;
                worst = std::max(worst, e);
            }
            if (sum < best_sum) {
                best_sum = sum;
                best_max = worst;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        stats.mean_center_error += best_max;
        stats.max_center_error = std::max(stats.max_center_error, best_max);
    }
    stats.mean_max_eps /= static_cast<double>(replications);
    stats.mean_center_error /= static_cast<double>(replications);
    return stats;
}

GradientStats gradient_check(std::size_t points, std::uint64_t seed) {
    GradientStats stats;
    stats.points = points;
    for (std::size_t p = 0; p < points; ++p) {
        Rng rng = derive_stream(seed, 5000 + p);
        const Eigen::Index N = 6, T0 = 5, m = 3, C = 3;
        std::vector<ArmSamples> data(static_cast<std::size_t>(N));
        for (auto& arm : data) {
            arm.contexts.resize(T0, m);
            for (Eigen::Index t = 0; t < T0; ++t) arm.contexts.row(t) = uniform_vector(rng, m, 0.0, 1.0).transpose();
            arm.rewards = uniform_vector(rng, T0, 0.0, 1.0);
        }
        Matrix arms(N, m), centers(C, m);
        bool smooth = false;
        while (!smooth) {
            for (Eigen::Index i = 0; i < N; ++i) arms.row(i) = uniform_vector(rng, m, -1.0, 1.0).transpose();
            for (Eigen::Index c = 0; c < C; ++c) centers.row(c) = uniform_vector(rng, m, -1.0, 1.0).transpose();
            smooth = true;
            for (Eigen::Index i = 0; i < N; ++i)
                for (Eigen::Index c = 0; c < C; ++c) smooth = smooth && (arms.row(i) - centers.row(c)).norm() > 1e-3;
        }
        const double lambda1 = uniform(rng, 0.05, 1.0);
        const ClassoGradient an = classifier_lasso_gradient(arms, centers, data, lambda1);
        const ClassoGradient fd = finite_difference_gradient(arms, centers, data, lambda1, 1e-5);
        const double scale = std::max(fd.arms.cwiseAbs().maxCoeff(), fd.centers.cwiseAbs().maxCoeff());
        const double err =
            std::max((an.arms - fd.arms).cwiseAbs().maxCoeff(), (an.centers - fd.centers).cwiseAbs().maxCoeff());
        stats.max_relative_error = std::max(stats.max_relative_error, err / std::max(scale, 1e-12));
    }
    return stats;
}

}  // namespace cbwk::checks
