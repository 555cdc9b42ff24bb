#include "cbwk/cli.hpp"

#include "cbwk/checks.hpp"
#include "cbwk/harness.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"

namespace cbwk {

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool quiet = false;
};

ExperimentConfig load_with_overrides(const Options& opt) {
    ExperimentConfig cfg = load_config(opt.config);
    if (opt.seed) {
        cfg.seed = *opt.seed;
        cfg.instance.seed = *opt.seed;
        cfg.run.seed = *opt.seed;
    }
    if (opt.out) cfg.output_dir = *opt.out;
    return cfg;
}

void print_means(const ExperimentResult& res) {
    std::map<std::pair<std::size_t, std::string>, std::pair<double, double>> acc;  // (T, baseline) -> (sum, n)
    for (const auto& row : res.rows) {
        auto& slot = acc[{row.T, to_string(row.baseline)}];
        slot.first += row.regret;
        slot.second += 1.0;
    }
    std::printf("%-8s %-22s %14s\n", "T", "baseline", "mean_regret");
    for (const auto& [key, v] : acc)
        std::printf("%-8zu %-22s %14.4f\n", key.first, key.second.c_str(), v.first / v.second);
}

int cmd_simulate(const Options& opt, bool sweep) {
    const ExperimentConfig cfg = load_with_overrides(opt);
    if (sweep && cfg.T_grid.empty()) throw ConfigError("sweep needs experiment.T_grid");
    const ExperimentResult res = run_experiment(cfg);
    if (!opt.quiet) {
        print_means(res);
        for (const auto& f : res.files) std::printf("wrote %s\n", f.c_str());
    }
    return 0;
}

int cmd_oracle(const Options& opt) {
    const ExperimentConfig cfg = load_with_overrides(opt);
    const std::size_t T = cfg.horizons().front();
    const ReplicationSetup setup = prepare_replication(cfg, 0, T);
    RunConfig rc = setup.run;
    rc.record_periods = false;
    const RunTrace trace = run_cluster_lcbwk(setup.instance, rc, setup.opt_total);
    std::printf("T = %zu\nB = %s\nN_S = %zu\nT0 = %zu\n", T, format_double(rc.B).c_str(), trace.N_S, trace.T0);
    std::printf("opt_total = %s\nopt_hat = %s\nZ = %s\n", format_double(setup.opt_total).c_str(),
                format_double(trace.opt_hat).c_str(), format_double(trace.Z).c_str());
    return 0;
}

int cmd_cluster_eval(const Options& opt) {
    const ExperimentConfig cfg = load_with_overrides(opt);
    const std::uint64_t seed = replication_seed(cfg.seed, 0);
    InstanceConfig icfg = cfg.instance;
    Rng inst_rng = derive_stream(seed, stream::instance);
    const Instance inst = generate_instance(icfg, inst_rng);

    RunConfig rc = cfg.run;
    rc.T = cfg.horizons().front();
    rc.B = cfg.budget_for(rc.T);
    const ExplorationPlan plan = plan_exploration(inst.K, inst.p_min, inst.C, rc);
    Rng subset_rng = derive_stream(seed, stream::subset);
    Rng context_rng = derive_stream(seed, stream::context);
    Rng noise_rng = derive_stream(seed, stream::noise);
    Rng cluster_rng = derive_stream(seed, stream::clustering);
    const auto subset = sample_arms(inst.K, plan.N_S, subset_rng);
    BudgetLedger ledger(rc.B, inst.d);
    const ExplorationData data = explore(inst, subset, plan.T0, context_rng, noise_rng, ledger);
    const ClusteringResult fit = fit_clusters(data, inst.C, rc.clustering, cluster_rng);

    std::vector<int> truth(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) truth[i] = static_cast<int>(inst.membership[subset[i]]) + 1;
    const Vector eps = clustering_error(fit.labels, truth, inst.C);
    std::size_t unassigned = 0;
    for (int l : fit.labels) unassigned += l == kUnassigned;

    std::printf("N_S = %zu  T0 = %zu  iterations = %d  objective = %s  unassigned = %zu\n", plan.N_S, plan.T0,
                fit.iterations, format_double(fit.objective_value).c_str(), unassigned);
    std::printf("%-8s %10s\n", "cluster", "eps_c");
    for (Eigen::Index c = 0; c < eps.size(); ++c) std::printf("%-8ld %10.4f\n", static_cast<long>(c + 1), eps[c]);

    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "clustering.json";
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << fit.to_json().dump(2) << '\n';
    if (!opt.quiet) std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

int cmd_selftest(const Options& opt) {
    std::vector<checks::Outcome> results;
    auto add = [&](std::string name, bool ok, std::string detail) {
        results.push_back({std::move(name), ok, std::move(detail)});
    };
    const std::uint64_t seed = opt.seed.value_or(20240601);

    for (double eps : {0.0, 0.05}) {
        const auto cov = checks::ellipsoid_coverage(3, 0.1, 200, eps, 100, seed);
        add("ellipsoid coverage eps=" + format_double(eps), cov.frequency >= 0.9,
            "frequency " + format_double(cov.frequency));
    }
    for (std::size_t d : {2, 8}) {
        const auto st = checks::omd_regret(d, 1000, 20, seed);
        add("omd regret d=" + std::to_string(d), st.within == st.trials,
            "max regret/sqrt(T ln(d+1)) " + format_double(st.max_ratio));
    }
    {
        const auto st = checks::lp_oracle(100, 4, seed);
        add("lp vs vertex enumeration", st.matched == st.problems,
            std::to_string(st.matched) + "/" + std::to_string(st.problems));
    }
    {
        const auto st = checks::choice_program_oracle(50, seed);
        add("price-space solve vs flat lp", st.matched == st.problems,
            "max error " + format_double(st.max_error));
    }
    {
        const auto st = checks::gradient_check(5, seed);
        add("classifier-lasso gradient", st.max_relative_error <= 1e-5,
            "max relative error " + format_double(st.max_relative_error));
    }
    {
        const auto st = checks::clustering_accuracy(40, 2, 3, 0.5, 0.1, 30, 5, seed);
        add("clustering accuracy", st.mean_max_eps <= 0.1, "mean max eps " + format_double(st.mean_max_eps));
    }
    {
        // Tight budget so that runs stop early.
        InstanceConfig icfg;
        icfg.K = 12;
        icfg.C = 2;
        icfg.m = 2;
        icfg.d = 2;
        Rng rng = derive_stream(seed, stream::instance);
        const Instance inst = generate_instance(icfg, rng);
        std::size_t problems = 0, runs = 0;
        for (auto b : {Baseline::cluster_lcbwk, Baseline::single_cluster_lcbwk, Baseline::random,
                       Baseline::greedy_no_knapsack}) {
            RunConfig rc;
            rc.T = 3000;
            rc.B = 400;
            rc.seed = seed;
            rc.baseline = b;
            const RunTrace tr = run_agent(inst, rc);
            problems += checks::audit_trace(tr, inst.d).size();
            ++runs;
        }
        add("budget stop semantics", problems == 0,
            std::to_string(problems) + " problems in " + std::to_string(runs) + " runs");
    }

    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.passed;
        if (!opt.quiet || !r.passed)
            std::printf("%s  %-32s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    }
    // Reported only: the bound is known to fail for the first few
    // observations (see README).
    const auto sn = checks::sum_of_norms(2, 500, 5, seed);
    if (!opt.quiet)
        std::printf("INFO  %-32s %zu/%zu checks above bound, last at t=%zu\n", "sum of norms (m=2)", sn.violations,
                    sn.checks, sn.last_violation_t);
    return ok ? 0 : 2;
}

}  // namespace

int cli(int argc, char** argv) {
    CLI::App app{"clustered contextual bandits with knapsacks: simulation and evaluation"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) sub->add_option("config", opt.config, "experiment config file")->required();
        sub->add_option("--seed", opt.seed, "override experiment seed");
        sub->add_option("--out", opt.out, "override output directory");
        sub->add_flag("--quiet", opt.quiet, "print less");
    };
    auto* simulate = app.add_subcommand("simulate", "run replications and write CSV output");
    auto* oracle = app.add_subcommand("oracle", "print OPT, OPT-hat and Z for replication 0");
    auto* cluster_eval = app.add_subcommand("cluster-eval", "clustering only: error table and JSON result");
    auto* sweep = app.add_subcommand("sweep", "run over experiment.T_grid and write regret_curve.csv");
    auto* selftest = app.add_subcommand("selftest", "run the property checks");
    add_common(simulate, true);
    add_common(oracle, true);
    add_common(cluster_eval, true);
    add_common(sweep, true);
    add_common(selftest, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(opt, false);
        if (sweep->parsed()) return cmd_simulate(opt, true);
        if (oracle->parsed()) return cmd_oracle(opt);
        if (cluster_eval->parsed()) return cmd_cluster_eval(opt);
        if (selftest->parsed()) return cmd_selftest(opt);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    }
    std::cerr << app.help();
    return 1;
}

}  // namespace cbwk
