#pragma once

// Exponentiated-gradient learner over {theta in [0,1]^d : |theta|_1 <= 1}.
// Coordinate 0 of the weight vector is a slack coordinate with zero payoff,
// so theta is the remaining d coordinates of a point on the (d+1)-simplex.

#include "cbwk/common.hpp"

#include <cstddef>
#include <vector>

namespace cbwk {

class OmdState {
public:
    OmdState(std::size_t d, std::size_t horizon);

    /// Multiplicative update that favours coordinates with large payoff.
    /// Throws ContractViolation if any |g_j| > 1.
    void step(const Vector& payoff);

    Vector theta() const;
    /// Normalized weights (length d+1, slack first); strictly positive.
    Vector weights() const;
    double eta() const noexcept { return eta_; }
    std::size_t horizon() const noexcept { return horizon_; }
    std::size_t d() const noexcept { return static_cast<std::size_t>(log_w_.size()) - 1; }

private:
    Vector log_w_;  // log-weights, normalized so that logsumexp == 0
    double eta_;
    std::size_t horizon_;
};

struct HindsightBest {
    Vector theta;  // 0 or a basis vector
    double value;
};

/// Best fixed theta for a sequence of linear payoffs.
HindsightBest hindsight_best(const std::vector<Vector>& payoffs, std::size_t d);

}  // namespace cbwk
