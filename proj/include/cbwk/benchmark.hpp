#pragma once

// OPT (the best static policy under true parameters), its estimate from the
// exploration phase, the price Z, and regret.

#include "cbwk/common.hpp"
#include "cbwk/env.hpp"
#include "cbwk/estimate.hpp"
#include "cbwk/lp.hpp"

#include <cstddef>
#include <vector>

namespace cbwk {

struct BenchmarkResult {
    double opt_total = 0.0;
    double opt_hat_total = 0.0;
    double Z = 0.0;
    std::size_t mc_samples = 0;
    LpStatus lp_status = LpStatus::optimal;
};

/// Per-period value of the best static policy over the given arms, with the
/// expectation over contexts replaced by the average over `contexts` (each
/// K x m). Consumption is capped at budget_rate per resource.
double static_policy_value(const Instance& instance, const std::vector<Matrix>& contexts,
                           const std::vector<std::size_t>& arms, double budget_rate);

/// T times the sample-average static-policy value over n_mc fresh context
/// draws. A point-mass context distribution needs a single draw, so n_mc is
/// ignored there. Throws NumericalError if the program is not solved.
double oracle_opt(const Instance& instance, double B, std::size_t T, std::size_t n_mc, Rng& rng);

/// The exploration-phase estimate of OPT.
///
/// contexts[t] holds the context rows of the subset arms at exploration
/// period t (|S| x m, row i belongs to subset arm i); labels are 1-based
/// cluster labels of the subset arms, 0 meaning unassigned; estimates[c-1]
/// is the state of cluster c. Program scale is K / (N_S^2 T0).
double estimate_opt_hat(const std::vector<Matrix>& contexts, const std::vector<ClusterEstimate>& estimates,
                        const std::vector<int>& labels, std::size_t K, std::size_t N_S, std::size_t T0, double B,
                        std::size_t T);

/// N_S * opt_hat / (2 K B'). Throws ConfigError when B' <= 0.
double compute_Z(double opt_hat, std::size_t N_S, std::size_t K, double B_prime);

double regret(double opt_total, const std::vector<double>& rewards);

}  // namespace cbwk
