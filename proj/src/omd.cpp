#include "cbwk/omd.hpp"

#include <cmath>

namespace cbwk {

OmdState::OmdState(std::size_t d, std::size_t horizon) : horizon_(horizon) {
    if (d == 0) throw ValidationError("OmdState: d must be at least 1");
    if (horizon == 0) throw ValidationError("OmdState: horizon must be at least 1");
    const auto n = static_cast<Eigen::Index>(d + 1);
    log_w_ = Vector::Constant(n, -std::log(static_cast<double>(n)));
    eta_ = std::sqrt(std::log(static_cast<double>(d + 1)) / static_cast<double>(horizon));
}

void OmdState::step(const Vector& g) {
    if (g.size() + 1 != log_w_.size()) throw ValidationError("OmdState::step: payoff has wrong dimension");
    for (Eigen::Index j = 0; j < g.size(); ++j)
        if (!(std::abs(g[j]) <= 1.0)) throw ContractViolation("OmdState::step: payoff entry outside [-1, 1]");

    log_w_.tail(g.size()) += eta_ * g;
    const double top = log_w_.maxCoeff();
    const double lse = top + std::log((log_w_.array() - top).exp().sum());
    log_w_.array() -= lse;
}

Vector OmdState::weights() const {
    Vector w = log_w_.array().exp();
    return w / w.sum();
}

Vector OmdState::theta() const {
    const Vector w = weights();
    Vector theta = w.tail(w.size() - 1);
    // Rounding can push the sum a hair above 1 when the slack weight is tiny.
    for (double s = theta.sum(); s > 1.0; s = theta.sum()) theta *= std::nextafter(1.0 / s, 0.0);
    return theta;
}

HindsightBest hindsight_best(const std::vector<Vector>& payoffs, std::size_t d) {
    Vector total = Vector::Zero(static_cast<Eigen::Index>(d));
    for (const auto& g : payoffs) total += g;
    HindsightBest best{Vector::Zero(static_cast<Eigen::Index>(d)), 0.0};
    Eigen::Index arg = 0;
    if (d > 0 && total.maxCoeff(&arg) > 0.0) {
        best.value = total[arg];
        best.theta[arg] = 1.0;
    }
    return best;
}

}  // namespace cbwk
