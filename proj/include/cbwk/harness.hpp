#pragma once

// Experiment configuration, replication runner, CSV output, and the CLI.

#include "cbwk/agent.hpp"
#include "cbwk/common.hpp"
#include "cbwk/env.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cbwk {

struct ExperimentConfig {
    InstanceConfig instance;
    RunConfig run;                       // carries the clustering and radius configs
    std::optional<double> budget_ratio;  // B = ratio * T, needed when T varies
    std::size_t replications = 1;
    std::vector<std::size_t> T_grid;     // empty: the single horizon run.T
    std::string output_dir = "out";
    std::size_t n_mc_opt = 1000;
    std::vector<Baseline> baselines{Baseline::cluster_lcbwk, Baseline::single_cluster_lcbwk, Baseline::random,
                                    Baseline::greedy_no_knapsack};
    std::uint64_t seed = 1;
    bool write_traces = true;
    bool record_wall_time = true;

    std::vector<std::size_t> horizons() const;
    double budget_for(std::size_t T) const;

    /// Validates every sub-config and the exploration precondition at every
    /// horizon. Throws ValidationError / ConfigError naming the key.
    void validate() const;
};

ExperimentConfig parse_experiment(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Smallest realized cluster share after deterministic rounding.
double realized_p_min(const InstanceConfig& cfg);

/// seed XOR replication
std::uint64_t replication_seed(std::uint64_t seed, std::size_t r);

/// The world and run settings of one replication at one horizon.
struct ReplicationSetup {
    Instance instance;
    RunConfig run;
    double opt_total = 0.0;
};

ReplicationSetup prepare_replication(const ExperimentConfig& cfg, std::size_t r, std::size_t T);

struct SummaryRow {
    std::size_t replication = 0;
    Baseline baseline = Baseline::cluster_lcbwk;
    std::size_t T = 0;
    double B = 0.0;
    std::size_t N_S = 0, T0 = 0, T_omega = 0;
    double total_reward = 0.0, opt_total = 0.0, opt_hat = 0.0, Z = 0.0, regret = 0.0, eps_c_max = 0.0;
    double wall_ms = 0.0;
};

struct ExperimentResult {
    std::vector<SummaryRow> rows;  // ordered by T, replication, baseline
    std::vector<std::string> files;
};

/// Runs every (horizon, replication) pair on a worker pool capped by
/// BK_THREADS and writes summary.csv, trace_{r}.csv and, with a T grid,
/// regret_curve.csv into cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Shortest text that reads back to the same double.
std::string format_double(double x);

}  // namespace cbwk
