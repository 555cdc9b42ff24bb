#pragma once

// Per-cluster ridge state with rank-1 updates, confidence radii, and the
// closed-form optimistic estimates over the confidence ellipsoids.

#include "cbwk/common.hpp"

#include <cstddef>
#include <optional>

#include "json.hpp"

namespace cbwk {

struct RadiusConfig {
    double zeta = 0.1;
    /// Fixed eps-hat; std::nullopt selects the rate c2 / (p_min * N_S).
    std::optional<double> eps_hat;
    double c2 = 1.0;
    double lambda2 = 1.0;
    double R = 0.5;

    void validate() const;
    /// eps-hat actually plugged into the radius for a given clustering size.
    double resolve_eps(double p_min, std::size_t n_s) const;
};

class ClusterEstimate {
public:
    static constexpr std::size_t kResolveEvery = 256;

    ClusterEstimate(std::size_t m, std::size_t d, double lambda2);

    void update(const Vector& x, double r, const Vector& v);

    const Matrix& gram() const noexcept { return M_; }
    const Matrix& gram_inverse() const noexcept { return M_inv_; }
    const Vector& mu_hat() const noexcept { return mu_hat_; }
    const Matrix& W_hat() const noexcept { return W_hat_; }
    const Vector& reward_moment() const noexcept { return b_r_; }
    const Matrix& consumption_moment() const noexcept { return B_v_; }
    std::size_t count() const noexcept { return t_; }
    std::size_t m() const noexcept { return static_cast<std::size_t>(M_.rows()); }
    std::size_t d() const noexcept { return static_cast<std::size_t>(W_hat_.cols()); }
    double lambda2() const noexcept { return lambda2_; }

    /// ||x||_{M^{-1}}
    double inverse_norm(const Vector& x) const;

    nlohmann::json to_json() const;

private:
    void resolve();

    double lambda2_;
    Matrix M_, M_inv_;
    Vector mu_hat_, b_r_;
    Matrix W_hat_, B_v_;
    std::size_t t_ = 0;
};

/// 2(R+1) sqrt(m ln(t m / (lambda2 zeta))) + eps m sqrt(t) + sqrt(lambda2 m),
/// log argument clamped below at e.
double reward_radius(std::size_t t, std::size_t m, const RadiusConfig& cfg, double eps_hat);
/// Same with an extra factor d inside the log.
double consumption_radius(std::size_t t, std::size_t m, std::size_t d, const RadiusConfig& cfg,
                          double eps_hat);

struct OptimisticReward {
    double value;
    Vector witness;
};

OptimisticReward optimistic_reward(const ClusterEstimate& state, const Vector& x, double radius);

/// Entry j is x'w_j - radius ||x||_{M^{-1}}; not clipped.
Vector optimistic_consumption(const ClusterEstimate& state, const Vector& x, double radius);

}  // namespace cbwk
