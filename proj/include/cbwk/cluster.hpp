#pragma once

// Arm-subset sampling and classifier-Lasso clustering of per-arm reward
// parameters.
//
// The fitted objective over per-arm parameters mu_a and centers mu_c is
//
//   Q = 1/(N T0) sum_a sum_t 1/2 (r_t(a) - mu_a' x_t(a))^2
//     + lambda1/N sum_a prod_c || mu_a - mu_c ||
//
// An arm belongs to cluster c when its parameter coincides with center c; the
// product penalty is zero exactly there, which is what makes arms fuse.

#include "cbwk/common.hpp"

#include <cstddef>
#include <optional>
#include <vector>

#include "json.hpp"

namespace cbwk {

inline constexpr int kUnassigned = 0;

struct ClusteringConfig {
    double delta = 0.25;
    double c0 = 1.0;
    std::optional<double> lambda1;  // nullopt: c1 * T0^(-1/4)
    double c1 = 0.5;
    int max_iter = 200;
    double tol = 1e-8;
    double match_tol = 1e-9;
    int kmeans_restarts = 10;

    void validate() const;
    double resolve_lambda1(std::size_t T0) const;
};

/// Observations of one arm: T0 x m contexts and T0 rewards.
struct ArmSamples {
    Matrix contexts;
    Vector rewards;
};

struct ClusteringResult {
    std::vector<std::size_t> subset;
    Matrix per_arm_params;   // |S| x m
    Matrix centers;          // C x m
    std::vector<int> labels; // 1..C, or kUnassigned
    double objective_value = 0.0;
    int iterations = 0;
    std::vector<double> objective_history;

    nlohmann::json to_json() const;
};

/// min(K, ceil(c0 / p_min * (T^delta + ln C)))
std::size_t subset_size(std::size_t K, double p_min, std::size_t C, std::size_t T, double delta, double c0);

/// n distinct arms out of K, uniformly without replacement, ascending.
std::vector<std::size_t> sample_arms(std::size_t K, std::size_t n, Rng& rng);

/// sample_arms with n = subset_size(...).
std::vector<std::size_t> sample_subset(std::size_t K, double p_min, std::size_t C, std::size_t T, double delta,
                                       double c0, Rng& rng);

double default_lambda1(std::size_t T0, double c1);

double classifier_lasso_objective(const Matrix& per_arm_params, const Matrix& centers,
                                  const std::vector<ArmSamples>& data, double lambda1);

struct ClassoGradient {
    Matrix arms;     // dQ / dmu_a, one row per arm
    Matrix centers;  // dQ / dmu_c, one row per center
};

/// Analytic gradient; only meaningful where every ||mu_a - mu_c|| > 0.
ClassoGradient classifier_lasso_gradient(const Matrix& per_arm_params, const Matrix& centers,
                                         const std::vector<ArmSamples>& data, double lambda1);

/// Alternating block minimization of Q from a k-means start. The returned
/// objective history is nonincreasing.
ClusteringResult classifier_lasso_fit(const std::vector<ArmSamples>& data, std::size_t C, double lambda1,
                                      const ClusteringConfig& cfg, Rng& rng);

/// Label of each arm: the lowest-index center within match_tol, else kUnassigned.
std::vector<int> assign_clusters(const Matrix& per_arm_params, const Matrix& centers, double match_tol);

/// Per-cluster error after the best relabeling of estimated clusters.
/// Labels are 1-based; kUnassigned arms are ignored. Entry c-1 is the error
/// of the estimated cluster matched to true cluster c.
Vector clustering_error(const std::vector<int>& estimated, const std::vector<int>& truth, std::size_t C);

}  // namespace cbwk
