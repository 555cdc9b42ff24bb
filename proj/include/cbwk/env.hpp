#pragma once

// Synthetic clustered world: instance generation, contexts, pulls, and the
// per-resource budget ledger.

#include "cbwk/common.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cbwk {

enum class ContextKind { uniform01, beta, truncated_gaussian };

struct ContextDistribution {
    ContextKind kind = ContextKind::uniform01;
    double a = 0.0;  // beta: alpha, truncated_gaussian: mean
    double b = 0.0;  // beta: beta,  truncated_gaussian: stddev

    static ContextDistribution uniform() { return {}; }
    static ContextDistribution beta(double alpha, double beta_) {
        return {ContextKind::beta, alpha, beta_};
    }
    static ContextDistribution truncated_gaussian(double mean, double stddev) {
        return {ContextKind::truncated_gaussian, mean, stddev};
    }

    /// A point mass (truncated gaussian with zero spread).
    bool degenerate() const noexcept {
        return kind == ContextKind::truncated_gaussian && b == 0.0;
    }

    /// Parses "uniform01", "beta(a,b)" or "truncated_gaussian(mu,sigma)".
    static ContextDistribution parse(const std::string& text);
    std::string to_string() const;
};

struct InstanceConfig {
    std::size_t K = 0;
    std::size_t C = 1;
    std::size_t m = 1;
    std::size_t d = 1;
    double separation = 0.5;        // xi_1
    double noise_half_width = 0.5;  // R; noise magnitude is at most 2R
    std::vector<double> proportions;  // empty means balanced
    ContextDistribution context;
    std::uint64_t seed = 1;

    // Optional fixed parameters; when set, sampling is skipped.
    std::optional<Matrix> mu;              // C x m
    std::optional<std::vector<Matrix>> W;  // C entries of m x d

    /// Throws ValidationError naming the offending field.
    void validate() const;
    std::vector<double> resolved_proportions() const;
};

/// Arm counts per cluster after deterministic rounding of p * K.
std::vector<std::size_t> cluster_sizes(const std::vector<double>& p, std::size_t K);

struct Instance {
    std::size_t K = 0, C = 0, m = 0, d = 0;
    double noise_half_width = 0.0;
    ContextDistribution context;
    std::vector<std::size_t> membership;  // 0-based cluster of each arm
    Matrix mu;                            // C x m
    std::vector<Matrix> W;                // per cluster, m x d
    std::vector<double> p;
    double p_min = 0.0;

    double mean_reward(std::size_t arm, const Vector& x) const;
    Vector mean_consumption(std::size_t arm, const Vector& x) const;
};

Instance generate_instance(const InstanceConfig& cfg, Rng& rng);

/// K x m matrix, one context row per arm.
Matrix draw_context(const Instance& instance, Rng& rng);

inline constexpr long kNoOp = -1;

struct PullOutcome {
    double reward = 0.0;
    Vector consumption;

    PullOutcome(double reward_, Vector consumption_);
    static PullOutcome zero(std::size_t d) { return {0.0, Vector::Zero(static_cast<Eigen::Index>(d))}; }
};

PullOutcome pull(const Instance& instance, long arm, const Vector& context_row, Rng& rng);

class BudgetLedger {
public:
    BudgetLedger(double budget, std::size_t d);

    void update(const Vector& v);

    double budget() const noexcept { return budget_; }
    const Vector& cumulative() const noexcept { return cumulative_; }
    bool stopped() const noexcept { return stopped_; }

private:
    double budget_;
    Vector cumulative_;
    bool stopped_ = false;
};

}  // namespace cbwk
