#pragma once

// Property checks with their reference oracles. The CLI selftest runs small
// versions; the acceptance binary runs them at full size.

#include "cbwk/agent.hpp"
#include "cbwk/common.hpp"
#include "cbwk/lp.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cbwk::checks {

struct Outcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

// -----------------------------------------------------------------------------
// Oracles
// -----------------------------------------------------------------------------

struct VertexOptimum {
    bool feasible = false;
    double value = 0.0;
};

/// Brute force over every basis of { A x <= b, 0 <= x <= upper }. Only for
/// tiny problems.
VertexOptimum vertex_enumeration(const LpProblem& problem, double tol = 1e-9);

/// Ridge estimate from a dense solve of (lambda I + X'X) mu = X'y.
Vector batch_ridge(const Matrix& X, const Vector& y, double lambda);

/// Central finite-difference gradient of the classifier-Lasso objective.
ClassoGradient finite_difference_gradient(const Matrix& per_arm_params, const Matrix& centers,
                                          const std::vector<ArmSamples>& data, double lambda1, double h);

/// Problems found in a trace: records after the stop, a missed stop, a
/// cumulative consumption at or above B before the last record, or ledger
/// totals that disagree with the records. Empty means the trace is clean.
std::vector<std::string> audit_trace(const RunTrace& trace, std::size_t d);

// -----------------------------------------------------------------------------
// Checks
// -----------------------------------------------------------------------------

struct CoverageStats {
    double frequency = 0.0;
    std::size_t replications = 0;
};

/// Fraction of replications with ||mu - mu_hat||_M <= radius after t
/// observations of y = mu'x + u + h, where h = gamma'x with probability eps.
CoverageStats ellipsoid_coverage(std::size_t m, double zeta, std::size_t t, double eps, std::size_t replications,
                                 std::uint64_t seed);

struct SumNormStats {
    std::size_t checks = 0;
    std::size_t violations = 0;
    std::size_t runs_with_violation = 0;
    std::size_t last_violation_t = 0;  // largest t at which the bound failed
    double max_ratio = 0.0;
};

/// Running sum of ||x_i||_{M_i^{-1}} (M_i before x_i, lambda2 = 1) against
/// sqrt(m t ln t) for every t in [2, horizon], uniform contexts in [0,1]^m.
SumNormStats sum_of_norms(std::size_t m, std::size_t horizon, std::size_t runs, std::uint64_t seed);

struct OmdRegretStats {
    std::size_t trials = 0;
    std::size_t within = 0;
    double max_ratio = 0.0;  // regret / sqrt(T ln(d+1))
};

OmdRegretStats omd_regret(std::size_t d, std::size_t horizon, std::size_t trials, std::uint64_t seed);

struct LpOracleStats {
    std::size_t problems = 0;
    std::size_t matched = 0;
    double max_error = 0.0;
};

LpOracleStats lp_oracle(std::size_t problems, std::size_t max_dim, std::uint64_t seed);

/// lp_solve on the flat program against the price-space route.
LpOracleStats choice_program_oracle(std::size_t problems, std::uint64_t seed);

struct ClusteringStats {
    std::size_t replications = 0;
    double mean_max_eps = 0.0;
    double mean_center_error = 0.0;  // permutation-matched, max over clusters
    double max_center_error = 0.0;
};

/// Explore-and-fit on generated instances with fixed N_S = T0.
ClusteringStats clustering_accuracy(std::size_t K, std::size_t C, std::size_t m, double separation, double R,
                                    std::size_t n_s, std::size_t replications, std::uint64_t seed);

struct GradientStats {
    std::size_t points = 0;
    double max_relative_error = 0.0;
};

GradientStats gradient_check(std::size_t points, std::uint64_t seed);

}  // namespace cbwk::checks
