#include "cbwk/agent.hpp"

#include "cbwk/benchmark.hpp"
#include "cbwk/omd.hpp"

#include <cmath>

namespace cbwk {

std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::cluster_lcbwk: return "cluster_lcbwk";
        case Baseline::single_cluster_lcbwk: return "single_cluster_lcbwk";
        case Baseline::random: return "random";
        case Baseline::greedy_no_knapsack: return "greedy_no_knapsack";
    }
    return "unknown";
}

Baseline parse_baseline(const std::string& text) {
    for (auto b : {Baseline::cluster_lcbwk, Baseline::single_cluster_lcbwk, Baseline::random,
                   Baseline::greedy_no_knapsack})
        if (text == to_string(b)) return b;
    throw ValidationError("run.baseline: unknown baseline '" + text + "'");
}

void RunConfig::validate() const {
    if (T == 0) throw ValidationError("run.T must be at least 1");
    if (!(B > 0.0)) throw ValidationError("run.B must be positive");
    // The price payoff v - (B'/T') 1 stays in [-1, 1] only when B' <= T'.
    if (B > static_cast<double>(T)) throw ConfigError("run.B must not exceed run.T");
    if (n_s && *n_s == 0) throw ValidationError("run.n_s must be positive");
    if (t0 && *t0 == 0) throw ValidationError("run.t0 must be positive");
    clustering.validate();
    radius.validate();
}

ExplorationPlan plan_exploration(std::size_t K, double p_min, std::size_t C, const RunConfig& cfg) {
    ExplorationPlan plan;
    plan.N_S = cfg.n_s ? *cfg.n_s
                       : subset_size(K, p_min, C, cfg.T, cfg.clustering.delta, cfg.clustering.c0);
    if (plan.N_S > K) throw ConfigError("run.n_s exceeds the number of arms");
    plan.T0 = cfg.t0 ? *cfg.t0 : plan.N_S;
    const double explore = static_cast<double>(plan.periods());
    if (!(cfg.B > explore))
        throw ConfigError("run.B = " + std::to_string(cfg.B) + " violates B > N_S T_0 (N_S = " +
                          std::to_string(plan.N_S) + ", T_0 = " + std::to_string(plan.T0) + ")");
    if (cfg.T <= plan.periods())
        throw ConfigError("run.T = " + std::to_string(cfg.T) + " violates T > N_S T_0 (N_S = " +
                          std::to_string(plan.N_S) + ", T_0 = " + std::to_string(plan.T0) + ")");
    return plan;
}

// =============================================================================
// Phases
// =============================================================================

std::vector<ArmSamples> ExplorationData::arm_samples() const {
    const std::size_t n = subset.size();
    const Eigen::Index m = contexts.empty() ? 0 : contexts.front().cols();
    std::vector<ArmSamples> out(n);
    for (auto& s : out) {
        s.contexts.resize(static_cast<Eigen::Index>(T0), m);
        s.rewards.resize(static_cast<Eigen::Index>(T0));
    }
    std::vector<Eigen::Index> filled(n, 0);
    for (std::size_t t = 0; t < played.size(); ++t) {
        const std::size_t i = played[t];
        auto& row = filled[i];
        out[i].contexts.row(row) = contexts[t].row(static_cast<Eigen::Index>(i));
        out[i].rewards[row] = rewards[t];
        ++row;
    }
    return out;
}

ExplorationData explore(const Instance& instance, const std::vector<std::size_t>& subset, std::size_t T0,
                        Rng& context_rng, Rng& noise_rng, BudgetLedger& ledger) {
    if (subset.empty() || T0 == 0) throw ValidationError("explore: empty subset or T0 = 0");
    ExplorationData data;
    data.subset = subset;
    data.T0 = T0;
    const std::size_t periods = subset.size() * T0;
    data.contexts.reserve(periods);
    data.played.reserve(periods);
    data.rewards.reserve(periods);
    data.consumptions.reserve(periods);

    Matrix rows(static_cast<Eigen::Index>(subset.size()), static_cast<Eigen::Index>(instance.m));
    for (std::size_t t = 0; t < periods; ++t) {
        const Matrix X = draw_context(instance, context_rng);
        for (std::size_t i = 0; i < subset.size(); ++i)
            rows.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(subset[i]));
        const std::size_t i = t % subset.size();
        const Vector x = rows.row(static_cast<Eigen::Index>(i)).transpose();
        PullOutcome out = pull(instance, static_cast<long>(subset[i]), x, noise_rng);
        ledger.update(out.consumption);
        data.contexts.push_back(rows);
        data.played.push_back(i);
        data.rewards.push_back(out.reward);
        data.consumptions.push_back(std::move(out.consumption));
        // B > N_S T0 and consumption <= 1 per pull rule this out.
        if (ledger.stopped() && t + 1 < periods) throw ContractViolation("explore: budget exhausted during exploration");
    }
    return data;
}

ClusteringResult fit_clusters(const ExplorationData& data, std::size_t C, const ClusteringConfig& cfg, Rng& rng) {
    const std::vector<ArmSamples> samples = data.arm_samples();
    const double lambda1 = cfg.resolve_lambda1(data.T0);
    ClusteringResult result = classifier_lasso_fit(samples, C, lambda1, cfg, rng);
    result.subset = data.subset;
    return result;
}

namespace {

struct NormTracker {
    double sum = 0.0;
};

// Feeds one observation to cluster c, optionally checking the running sum of
// ||x_i||_{M_i^{-1}} against sqrt(m n ln n), M_i taken before x_i is added.
void feed(std::vector<ClusterEstimate>& estimates, std::size_t c, const Vector& x, double r, const Vector& v,
          std::vector<NormTracker>* trackers, RunDiagnostics* diag) {
    auto& est = estimates[c];
    if (trackers) {
        auto& tr = (*trackers)[c];
        tr.sum += est.inverse_norm(x);
        const auto n = static_cast<double>(est.count() + 1);
        if (n >= 2.0) {
            const double bound = std::sqrt(static_cast<double>(est.m()) * n * std::log(n));
            ++diag->sum_norm_checks;
            diag->max_sum_norm_ratio = std::max(diag->max_sum_norm_ratio, tr.sum / bound);
            if (tr.sum > bound) {
                if (diag->sum_norm_violations == 0 || est.count() + 1 < diag->first_violation_count)
                    diag->first_violation_count = est.count() + 1;
                ++diag->sum_norm_violations;
            }
        }
    }
    est.update(x, r, v);
}

void warm_start_into(std::vector<ClusterEstimate>& estimates, const ExplorationData& data,
                     const std::vector<int>& labels, std::vector<NormTracker>* trackers, RunDiagnostics* diag) {
    for (std::size_t t = 0; t < data.played.size(); ++t) {
        const std::size_t i = data.played[t];
        if (labels[i] == kUnassigned) continue;
        const Vector x = data.contexts[t].row(static_cast<Eigen::Index>(i)).transpose();
        feed(estimates, static_cast<std::size_t>(labels[i] - 1), x, data.rewards[t], data.consumptions[t], trackers,
             diag);
    }
}

}  // namespace

std::vector<ClusterEstimate> warm_start(const ExplorationData& data, const std::vector<int>& labels, std::size_t C,
                                        std::size_t m, std::size_t d, double lambda2) {
    if (labels.size() != data.subset.size()) throw ValidationError("warm_start: one label per subset arm is required");
    std::vector<ClusterEstimate> estimates(C, ClusterEstimate(m, d, lambda2));
    warm_start_into(estimates, data, labels, nullptr, nullptr);
    return estimates;
}

Choice choose_arm(const std::vector<ClusterEstimate>& estimates, const std::vector<std::size_t>& subset,
                  const std::vector<int>& labels, const Matrix& context, double Z, const Vector& theta,
                  const std::vector<double>& reward_radii, const std::vector<double>& consumption_radii,
                  bool allow_noop) {
    Choice best;
    bool any_labeled = false, any_finite = false;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (labels[i] == kUnassigned) continue;
        any_labeled = true;
        const auto c = static_cast<std::size_t>(labels[i] - 1);
        const Vector x = context.row(static_cast<Eigen::Index>(subset[i])).transpose();
        const double reward = optimistic_reward(estimates[c], x, reward_radii[c]).value;
        const double score =
            Z == 0.0 ? reward
                     : reward - Z * optimistic_consumption(estimates[c], x, consumption_radii[c]).dot(theta);
        if (!std::isfinite(score)) continue;
        // subset is ascending, so strict comparison keeps the lowest id on ties.
        if (!any_finite || score > best.score) {
            best = {static_cast<long>(subset[i]), labels[i], score};
            any_finite = true;
        }
    }
    if (!any_labeled) throw ValidationError("choose_arm: no labeled arm to choose from");
    if (!any_finite) throw NumericalError("choose_arm: every score is non-finite");
    if (allow_noop && best.score < 0.0) return {kNoOp, 0, best.score};
    return best;
}

// =============================================================================
// Runs
// =============================================================================

RunTrace run_agent(const Instance& instance, const RunConfig& cfg, double opt_total) {
    cfg.validate();
    const ExplorationPlan plan = plan_exploration(instance.K, instance.p_min, instance.C, cfg);
    const bool single = cfg.baseline == Baseline::single_cluster_lcbwk;
    const std::size_t C = single ? 1 : instance.C;

    Rng subset_rng = derive_stream(cfg.seed, stream::subset);
    Rng context_rng = derive_stream(cfg.seed, stream::context);
    Rng noise_rng = derive_stream(cfg.seed, stream::noise);
    Rng cluster_rng = derive_stream(cfg.seed, stream::clustering);
    Rng policy_rng = derive_stream(cfg.seed, stream::random_policy);

    RunTrace trace;
    trace.baseline = cfg.baseline;
    trace.T = cfg.T;
    trace.B = cfg.B;
    trace.N_S = plan.N_S;
    trace.T0 = plan.T0;
    trace.phase_boundary = plan.periods();
    trace.subset = sample_arms(instance.K, plan.N_S, subset_rng);

    BudgetLedger ledger(cfg.B, instance.d);
    const ExplorationData data = explore(instance, trace.subset, plan.T0, context_rng, noise_rng, ledger);
    trace.pulls = data.played.size();
    for (std::size_t t = 0; t < data.played.size(); ++t) {
        trace.total_reward += data.rewards[t];
        if (cfg.record_periods) {
            PeriodRecord rec;
            rec.t = t + 1;
            rec.arm = static_cast<long>(trace.subset[data.played[t]]);
            rec.reward = data.rewards[t];
            rec.consumption = data.consumptions[t];
            trace.records.push_back(std::move(rec));
        }
    }

    const ClusteringResult clustering = fit_clusters(data, C, cfg.clustering, cluster_rng);
    trace.labels = clustering.labels;
    {
        std::vector<int> truth(trace.subset.size());
        for (std::size_t i = 0; i < truth.size(); ++i)
            truth[i] = static_cast<int>(instance.membership[trace.subset[i]]) + 1;
        trace.eps_c = clustering_error(trace.labels, truth, instance.C);
        trace.eps_c_max = trace.eps_c.size() ? trace.eps_c.maxCoeff() : 0.0;
    }

    std::vector<ClusterEstimate> estimates(C, ClusterEstimate(instance.m, instance.d, cfg.radius.lambda2));
    std::vector<NormTracker> trackers(C);
    const bool track_norms = cfg.radius.lambda2 == 1.0;
    warm_start_into(estimates, data, trace.labels, track_norms ? &trackers : nullptr, &trace.diagnostics);

    const double B_prime = cfg.B - static_cast<double>(plan.periods());
    const std::size_t T_prime = cfg.T - plan.periods();
    trace.opt_hat = estimate_opt_hat(data.contexts, estimates, trace.labels, instance.K, plan.N_S, plan.T0, cfg.B,
                                     cfg.T);
    trace.Z = compute_Z(trace.opt_hat, plan.N_S, instance.K, B_prime);
    const double Z = cfg.baseline == Baseline::greedy_no_knapsack ? 0.0 : trace.Z;
    const double eps = cfg.radius.resolve_eps(instance.p_min, plan.N_S);
    const double rate = B_prime / static_cast<double>(T_prime);

    bool any_labeled = false;
    for (int l : trace.labels) any_labeled = any_labeled || l != kUnassigned;
    if (!any_labeled && cfg.baseline != Baseline::random)
        throw NumericalError("run: clustering left every explored arm unassigned");

    OmdState omd(instance.d, T_prime);
    std::vector<double> r_rad(C), v_rad(C);
    trace.T_omega = cfg.T;

    for (std::size_t t = plan.periods() + 1; t <= cfg.T; ++t) {
        const Matrix X = draw_context(instance, context_rng);
        const Vector theta = omd.theta();

        Choice choice;
        if (cfg.baseline == Baseline::random) {
            const auto n = trace.subset.size();
            const auto i = std::min(static_cast<std::size_t>(uniform01(policy_rng) * static_cast<double>(n)), n - 1);
            choice = {static_cast<long>(trace.subset[i]), trace.labels[i], std::numeric_limits<double>::quiet_NaN()};
        } else {
            for (std::size_t c = 0; c < C; ++c) {
                r_rad[c] = reward_radius(estimates[c].count(), instance.m, cfg.radius, eps);
                v_rad[c] = consumption_radius(estimates[c].count(), instance.m, instance.d, cfg.radius, eps);
            }
            choice = choose_arm(estimates, trace.subset, trace.labels, X, Z, theta, r_rad, v_rad,
                                cfg.allow_noop_in_argmax);
            if (choice.arm != kNoOp) {
                const auto c = static_cast<std::size_t>(choice.cluster - 1);
                const Vector x = X.row(choice.arm).transpose();
                auto& diag = trace.diagnostics;
                ++diag.optimism_checks;
                const bool reward_ok = optimistic_reward(estimates[c], x, r_rad[c]).value >=
                                       x.dot(estimates[c].mu_hat()) - 1e-12;
                const bool cost_ok = optimistic_consumption(estimates[c], x, v_rad[c]).dot(theta) <=
                                     (estimates[c].W_hat().transpose() * x).dot(theta) + 1e-12;
                if (!reward_ok || !cost_ok) ++diag.optimism_violations;
            }
        }

        const Vector x = choice.arm == kNoOp ? Vector::Zero(static_cast<Eigen::Index>(instance.m))
                                             : Vector(X.row(choice.arm).transpose());
        PullOutcome out = pull(instance, choice.arm, x, noise_rng);
        ledger.update(out.consumption);
        trace.total_reward += out.reward;
        ++trace.pulls;
        if (cfg.record_periods) {
            PeriodRecord rec;
            rec.t = t;
            rec.arm = choice.arm;
            rec.cluster = choice.cluster;
            rec.reward = out.reward;
            rec.consumption = out.consumption;
            rec.theta = theta;
            rec.score = choice.score;
            trace.records.push_back(std::move(rec));
        }
        if (ledger.stopped()) {
            trace.stopped = true;
            trace.T_omega = t;
            break;
        }

        if (choice.arm != kNoOp && choice.cluster != kUnassigned)
            feed(estimates, static_cast<std::size_t>(choice.cluster - 1), x, out.reward, out.consumption,
                 track_norms ? &trackers : nullptr, &trace.diagnostics);
        omd.step(out.consumption.array() - rate);
    }

    trace.final_cumulative = ledger.cumulative();
    trace.opt_total = opt_total;
    trace.regret = opt_total - trace.total_reward;
    return trace;
}

RunTrace run_cluster_lcbwk(const Instance& instance, RunConfig cfg, double opt_total) {
    cfg.baseline = Baseline::cluster_lcbwk;
    return run_agent(instance, cfg, opt_total);
}

RunTrace run_baseline(Baseline kind, const Instance& instance, RunConfig cfg, double opt_total) {
    cfg.baseline = kind;
    return run_agent(instance, cfg, opt_total);
}

}  // namespace cbwk
