// Acceptance gate: one PASS/FAIL line per criterion. Exit status is 0 only
// when every criterion passes.

#include "cbwk/benchmark.hpp"
#include "cbwk/checks.hpp"
#include "cbwk/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace cbwk;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct Line {
    int id;
    bool ok;
    std::string text;
};
std::vector<Line> lines;

void report(int id, const char* name, bool ok, const std::string& detail) {
    char head[96];
    std::snprintf(head, sizeof head, "%s criterion %d (%s): ", ok ? "PASS" : "FAIL", id, name);
    lines.push_back({id, ok, head + detail});
    std::fprintf(stderr, "  done %d\n", id);
}

std::string fmt(const char* pattern, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, pattern, a);
    return buf;
}

// Budget audit shared by every simulation below.
std::size_t audited_runs = 0;
std::vector<std::string> audit_problems;

void audit(const RunTrace& trace, std::size_t d) {
    ++audited_runs;
    for (auto& p : checks::audit_trace(trace, d))
        audit_problems.push_back(to_string(trace.baseline) + " T=" + std::to_string(trace.T) + ": " + p);
}

void criterion_coverage() {
    Clock clock;
    std::string detail;
    bool ok = true;
    for (double eps : {0.0, 0.05}) {
        const auto st = checks::ellipsoid_coverage(3, 0.1, 500, eps, 400, kSeed);
        ok = ok && st.frequency >= 0.90;
        detail += fmt("eps=%.2f ", eps) + fmt("coverage %.4f; ", st.frequency);
    }
    const double secs = clock.seconds();
    ok = ok && secs < 120.0;
    report(1, "ellipsoid coverage", ok, detail + fmt("%.1fs", secs));
}

void criterion_sum_of_norms() {
    std::size_t violations = 0, runs_bad = 0, last = 0, checks = 0;
    std::string detail;
    for (std::size_t m : {2, 5}) {
        const auto st = checks::sum_of_norms(m, 5000, 20, kSeed);
        violations += st.violations;
        runs_bad += st.runs_with_violation;
        checks += st.checks;
        last = std::max(last, st.last_violation_t);
        detail += "m=" + std::to_string(m) + ": " + std::to_string(st.violations) + " violations in " +
                  std::to_string(st.runs_with_violation) + "/20 runs, max ratio " + fmt("%.4f; ", st.max_ratio);
    }
    detail += std::to_string(violations) + "/" + std::to_string(checks) + " checks failed";
    if (violations) detail += ", latest failing t = " + std::to_string(last);
    report(2, "sum-of-norms bound", violations == 0, detail);
}

void criterion_omd() {
    Clock clock;
    bool ok = true;
    double worst = 0.0;
    std::size_t trials = 0, within = 0;
    for (std::size_t d : {2, 8}) {
        for (std::size_t T : {1000, 4000, 16000}) {
            const auto st = checks::omd_regret(d, T, 100, kSeed + d * 100000 + T);
            trials += st.trials;
            within += st.within;
            worst = std::max(worst, st.max_ratio);
        }
    }
    const double secs = clock.seconds();
    ok = within == trials && secs < 60.0;
    report(3, "OMD regret", ok,
           std::to_string(within) + "/" + std::to_string(trials) + " trials within 2.5 sqrt(T' ln(d+1)), max ratio " +
               fmt("%.4f, ", worst) + fmt("%.1fs", secs));
}

void criterion_lp() {
    const auto st = checks::lp_oracle(200, 4, kSeed);
    report(4, "LP oracle equivalence", st.matched == st.problems,
           std::to_string(st.matched) + "/" + std::to_string(st.problems) + " match vertex enumeration, max error " +
               fmt("%.3g", st.max_error));
}

void criterion_clustering() {
    Clock clock;
    const auto st = checks::clustering_accuracy(90, 3, 5, 0.5, 0.1, 60, 50, kSeed);
    const double secs = clock.seconds();
    const bool ok = st.mean_max_eps <= 0.05 && st.mean_center_error <= 0.05 && secs < 300.0;
    report(5, "clustering accuracy", ok,
           fmt("mean max eps_c %.4f, ", st.mean_max_eps) + fmt("mean center error %.4f ", st.mean_center_error) +
               fmt("(worst %.4f), ", st.max_center_error) + fmt("%.1fs", secs));
}

double sign_test_p(std::size_t wins, std::size_t n) {
    // P(Bin(n, 1/2) >= wins)
    double p = 0.0;
    for (std::size_t k = wins; k <= n; ++k)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
    return p;
}

void criterion_sublinear() {
    Clock clock;
    ExperimentConfig cfg;
    cfg.instance.K = 40;
    cfg.instance.C = 2;
    cfg.instance.m = 3;
    cfg.instance.d = 2;
    cfg.instance.separation = 0.5;
    cfg.instance.noise_half_width = 0.5;
    cfg.run.clustering.delta = 0.25;
    cfg.budget_ratio = 0.6;
    cfg.T_grid = {2000, 8000, 32000};
    cfg.replications = 30;
    cfg.n_mc_opt = 20000;
    cfg.seed = kSeed;
    cfg.validate();

    const auto& Ts = cfg.T_grid;
    std::vector<std::vector<double>> cluster(Ts.size()), single(Ts.size());
    for (std::size_t k = 0; k < Ts.size(); ++k) {
        for (std::size_t r = 0; r < cfg.replications; ++r) {
            const ReplicationSetup setup = prepare_replication(cfg, r, Ts[k]);
            for (Baseline b : cfg.baselines) {
                const RunTrace tr = run_baseline(b, setup.instance, setup.run, setup.opt_total);
                audit(tr, setup.instance.d);
                if (b == Baseline::cluster_lcbwk) cluster[k].push_back(tr.regret);
                if (b == Baseline::single_cluster_lcbwk) single[k].push_back(tr.regret);
            }
        }
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double limit = std::pow(4.0, 0.9);
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < Ts.size(); ++k) detail += "T=" + std::to_string(Ts[k]) + fmt(" regret %.1f; ", mean(cluster[k]));
    for (std::size_t k = 1; k < Ts.size(); ++k) {
        const double ratio = mean(cluster[k]) / mean(cluster[k - 1]);
        ok = ok && ratio <= limit;
        detail += fmt("growth %.3f; ", ratio);
        const double per_now = mean(cluster[k]) / static_cast<double>(Ts[k]);
        const double per_before = mean(cluster[k - 1]) / static_cast<double>(Ts[k - 1]);
        ok = ok && per_now < per_before;
    }
    const std::size_t last = Ts.size() - 1;
    std::size_t wins = 0, n = 0;
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        if (cluster[last][r] == single[last][r]) continue;
        ++n;
        wins += cluster[last][r] < single[last][r];
    }
    const double p = sign_test_p(wins, n);
    ok = ok && mean(cluster[last]) <= mean(single[last]) && p < 0.1;
    detail += fmt("single-cluster regret %.1f, ", mean(single[last])) + "wins " + std::to_string(wins) + "/" +
              std::to_string(n) + fmt(", sign test p %.3g; ", p);
    const double secs = clock.seconds();
    ok = ok && secs < 1200.0;
    report(7, "empirical sublinearity", ok, detail + fmt("%.1fs", secs));
}

void criterion_opt_hat() {
    Clock clock;
    const std::size_t K = 60, reps = 50;
    const std::size_t T = 10000;
    const double B = 6000;
    std::size_t shrunk = 0;
    double mean_small = 0.0, mean_large = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        const std::uint64_t seed = kSeed ^ (0x5000 + r);
        InstanceConfig icfg;
        icfg.K = K;
        icfg.C = 2;
        icfg.m = 3;
        icfg.d = 2;
        icfg.separation = 0.5;
        icfg.noise_half_width = 0.0;
        Rng inst_rng = derive_stream(seed, stream::instance);
        const Instance inst = generate_instance(icfg, inst_rng);
        Rng oracle_rng = derive_stream(seed, stream::oracle);
        const double opt = oracle_opt(inst, B, T, 4000, oracle_rng);

        double err[2];
        const std::size_t sizes[2] = {20, 60};
        for (int s = 0; s < 2; ++s) {
            const std::size_t n = sizes[s];
            Rng subset_rng = derive_stream(seed, stream::subset);
            Rng context_rng = derive_stream(seed, stream::context);
            Rng noise_rng = derive_stream(seed, stream::noise);
            Rng cluster_rng = derive_stream(seed, stream::clustering);
            const auto subset = sample_arms(K, n, subset_rng);
            BudgetLedger ledger(static_cast<double>(n * n) + 1.0, inst.d);
            const ExplorationData data = explore(inst, subset, n, context_rng, noise_rng, ledger);
            const ClusteringResult fit = fit_clusters(data, inst.C, ClusteringConfig{}, cluster_rng);
            const auto est = warm_start(data, fit.labels, inst.C, inst.m, inst.d, 1.0);
            const double opt_hat = estimate_opt_hat(data.contexts, est, fit.labels, K, n, n, B, T);
            err[s] = std::abs(opt_hat - opt) / opt;
        }
        mean_small += err[0] / reps;
        mean_large += err[1] / reps;
        shrunk += err[1] < err[0];
    }
    const double secs = clock.seconds();
    const bool ok = shrunk * 10 >= reps * 8 && secs < 300.0;
    report(8, "OPT-hat consistency", ok,
           std::to_string(shrunk) + "/" + std::to_string(reps) + " shrink; mean relative error " +
               fmt("%.4f at (20,20), ", mean_small) + fmt("%.4f at (60,60), ", mean_large) + fmt("%.1fs", secs));
}

void criterion_gradient() {
    const auto st = checks::gradient_check(20, kSeed);
    report(9, "gradient check", st.max_relative_error <= 1e-5,
           fmt("max relative error %.3g over 20 points", st.max_relative_error));
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void criterion_determinism() {
    const std::string text = R"(
[experiment]
replications = 3
seed = 7
n_mc_opt = 300
record_wall_time = false

[instance]
K = 16
C = 2
m = 3
d = 2

[run]
T = 1500
B = 700
)";
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / ("cbwk_acceptance_" + std::to_string(kSeed));
    ExperimentConfig cfg = parse_experiment(text, "determinism");
    std::string first, second;
    for (int pass = 0; pass < 2; ++pass) {
        cfg.output_dir = (base / ("run" + std::to_string(pass))).string();
        run_experiment(cfg);
        (pass == 0 ? first : second) = slurp(fs::path(cfg.output_dir) / "summary.csv");
    }
    // Budget audit on the same runs.
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        const ReplicationSetup setup = prepare_replication(cfg, r, cfg.run.T);
        for (Baseline b : cfg.baselines) audit(run_baseline(b, setup.instance, setup.run, setup.opt_total), setup.instance.d);
    }
    fs::remove_all(base);
    const bool ok = !first.empty() && first == second;
    report(10, "determinism", ok,
           ok ? "summary.csv identical across two executions (" + std::to_string(first.size()) + " bytes)"
              : "summary.csv differs between executions");
}

void criterion_budget() {
    // Tight budgets, with and without the no-op option, on top of the runs above.
    for (std::size_t r = 0; r < 20; ++r) {
        InstanceConfig icfg;
        icfg.K = 10;
        icfg.C = 2;
        icfg.m = 2;
        icfg.d = 3;
        Rng rng = derive_stream(kSeed ^ r, stream::instance);
        const Instance inst = generate_instance(icfg, rng);
        for (Baseline b : {Baseline::cluster_lcbwk, Baseline::single_cluster_lcbwk, Baseline::random,
                           Baseline::greedy_no_knapsack}) {
            RunConfig rc;
            rc.T = 2000;
            rc.B = 150.0 + 10.0 * static_cast<double>(r);
            rc.seed = kSeed ^ r;
            rc.allow_noop_in_argmax = r % 2 == 1;
            audit(run_baseline(b, inst, rc), inst.d);
        }
    }
    std::string detail = std::to_string(audit_problems.size()) + " problems in " + std::to_string(audited_runs) + " runs";
    if (!audit_problems.empty()) detail += "; first: " + audit_problems.front();
    report(6, "budget feasibility", audit_problems.empty(), detail);
}

}  // namespace

int main() {
    try {
        criterion_coverage();
        criterion_sum_of_norms();
        criterion_omd();
        criterion_lp();
        criterion_clustering();
        criterion_sublinear();
        criterion_opt_hat();
        criterion_gradient();
        criterion_determinism();
        criterion_budget();
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 1;
    }
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
    int failures = 0;
    for (const auto& l : lines) {
        std::printf("%s\n", l.text.c_str());
        failures += !l.ok;
    }
    std::printf("%d of %zu criteria failed\n", failures, lines.size());
    return failures == 0 ? 0 : 1;
}
