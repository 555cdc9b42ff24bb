#pragma once

// The two-phase learner: round-robin exploration of a random arm subset,
// clustering of the explored arms, then optimistic play with a
// mirror-descent price on resource consumption. Baselines share the same
// exploration phase so that runs on one instance are paired.

#include "cbwk/cluster.hpp"
#include "cbwk/common.hpp"
#include "cbwk/env.hpp"
#include "cbwk/estimate.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cbwk {

enum class Baseline { cluster_lcbwk, single_cluster_lcbwk, random, greedy_no_knapsack };

std::string to_string(Baseline b);
Baseline parse_baseline(const std::string& text);

struct RunConfig {
    std::size_t T = 0;
    double B = 0.0;
    bool allow_noop_in_argmax = false;
    Baseline baseline = Baseline::cluster_lcbwk;
    std::uint64_t seed = 1;
    ClusteringConfig clustering;
    RadiusConfig radius;

    // Fixed exploration sizes, bypassing the subset-size formula (T0 defaults to N_S).
    std::optional<std::size_t> n_s;
    std::optional<std::size_t> t0;

    bool record_periods = true;

    /// Checks everything that does not depend on the instance.
    void validate() const;
};

struct ExplorationPlan {
    std::size_t N_S = 0;
    std::size_t T0 = 0;
    std::size_t periods() const noexcept { return N_S * T0; }
};

/// Resolves N_S and T0 and checks B > N_S T0 and T > N_S T0 (ConfigError).
ExplorationPlan plan_exploration(std::size_t K, double p_min, std::size_t C, const RunConfig& cfg);

struct PeriodRecord {
    std::size_t t = 0;     // 1-based period
    long arm = kNoOp;
    int cluster = 0;       // estimated cluster of the arm; 0 during exploration
    double reward = 0.0;
    Vector consumption;
    Vector theta;          // empty during exploration
    double score = std::numeric_limits<double>::quiet_NaN();
};

struct RunDiagnostics {
    std::size_t sum_norm_checks = 0;
    std::size_t sum_norm_violations = 0;
    std::size_t first_violation_count = 0;  // smallest per-cluster count at which the bound failed
    double max_sum_norm_ratio = 0.0;
    std::size_t optimism_checks = 0;
    std::size_t optimism_violations = 0;
};

struct RunTrace {
    Baseline baseline = Baseline::cluster_lcbwk;
    std::size_t T = 0;
    double B = 0.0;
    std::size_t N_S = 0, T0 = 0;
    std::size_t phase_boundary = 0;  // N_S * T0
    std::vector<std::size_t> subset;
    std::vector<int> labels;
    std::vector<PeriodRecord> records;  // empty unless record_periods
    std::size_t T_omega = 0;
    bool stopped = false;
    std::size_t pulls = 0;
    double total_reward = 0.0;
    double opt_total = std::numeric_limits<double>::quiet_NaN();
    double regret = std::numeric_limits<double>::quiet_NaN();
    double opt_hat = 0.0;
    double Z = 0.0;
    Vector eps_c;
    double eps_c_max = 0.0;
    Vector final_cumulative;
    RunDiagnostics diagnostics;
};

// -----------------------------------------------------------------------------
// Phases, exposed so that tests can drive them with chosen sizes
// -----------------------------------------------------------------------------

struct ExplorationData {
    std::vector<std::size_t> subset;
    std::size_t T0 = 0;
    std::vector<Matrix> contexts;         // per period: |S| x m rows of the subset arms
    std::vector<std::size_t> played;      // per period: index into subset
    std::vector<double> rewards;          // per period
    std::vector<Vector> consumptions;     // per period

    /// Per subset arm, its T0 (context, reward) observations in play order.
    std::vector<ArmSamples> arm_samples() const;
};

/// Plays subset[t mod |S|] at period t for |S| * T0 periods, drawing one
/// K x m context per period and charging the ledger.
ExplorationData explore(const Instance& instance, const std::vector<std::size_t>& subset, std::size_t T0,
                        Rng& context_rng, Rng& noise_rng, BudgetLedger& ledger);

/// Classifier-Lasso on the exploration rewards; C == 1 gives the pooled fit.
ClusteringResult fit_clusters(const ExplorationData& data, std::size_t C, const ClusteringConfig& cfg, Rng& rng);

/// One ridge state per cluster, fed with the exploration samples of the arms
/// carrying that label.
std::vector<ClusterEstimate> warm_start(const ExplorationData& data, const std::vector<int>& labels, std::size_t C,
                                        std::size_t m, std::size_t d, double lambda2);

struct Choice {
    long arm = kNoOp;
    int cluster = 0;
    double score = 0.0;
};

/// argmax over labeled subset arms of
///   optimistic reward - Z * theta' optimistic consumption,
/// ties to the lowest arm id. With allow_noop a negative best score gives the
/// no-op. Throws ValidationError when no arm is labeled and NumericalError
/// when no score is finite.
Choice choose_arm(const std::vector<ClusterEstimate>& estimates, const std::vector<std::size_t>& subset,
                  const std::vector<int>& labels, const Matrix& context, double Z, const Vector& theta,
                  const std::vector<double>& reward_radii, const std::vector<double>& consumption_radii,
                  bool allow_noop);

/// Runs cfg.baseline end to end. When opt_total is given the trace carries
/// the regret against it.
RunTrace run_agent(const Instance& instance, const RunConfig& cfg,
                   double opt_total = std::numeric_limits<double>::quiet_NaN());

RunTrace run_cluster_lcbwk(const Instance& instance, RunConfig cfg,
                           double opt_total = std::numeric_limits<double>::quiet_NaN());
RunTrace run_baseline(Baseline kind, const Instance& instance, RunConfig cfg,
                      double opt_total = std::numeric_limits<double>::quiet_NaN());

// Stream purposes under the run seed.
namespace stream {
inline constexpr std::uint64_t instance = 1;
inline constexpr std::uint64_t subset = 2;
inline constexpr std::uint64_t context = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t clustering = 5;
inline constexpr std::uint64_t random_policy = 6;
inline constexpr std::uint64_t oracle = 7;
}  // namespace stream

}  // namespace cbwk
