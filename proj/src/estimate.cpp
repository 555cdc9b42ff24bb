#include "cbwk/estimate.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace cbwk {

void RadiusConfig::validate() const {
    if (!(zeta > 0.0 && zeta < 1.0)) throw ValidationError("radius.zeta must lie in (0, 1)");
    if (eps_hat && !(*eps_hat >= 0.0)) throw ValidationError("radius.eps_hat must be nonnegative");
    if (!(c2 >= 0.0)) throw ValidationError("radius.c2 must be nonnegative");
    if (!(lambda2 > 0.0)) throw ValidationError("radius.lambda2 must be positive");
    if (!(R >= 0.0)) throw ValidationError("radius.R must be nonnegative");
}

double RadiusConfig::resolve_eps(double p_min, std::size_t n_s) const {
    if (eps_hat) return *eps_hat;
    return c2 / (p_min * static_cast<double>(n_s));
}

ClusterEstimate::ClusterEstimate(std::size_t m, std::size_t d, double lambda2) : lambda2_(lambda2) {
    if (!(lambda2 > 0.0)) throw ValidationError("ClusterEstimate: lambda2 must be positive");
    const auto mm = static_cast<Eigen::Index>(m);
    const auto dd = static_cast<Eigen::Index>(d);
    M_ = lambda2 * Matrix::Identity(mm, mm);
    M_inv_ = Matrix::Identity(mm, mm) / lambda2;
    mu_hat_ = Vector::Zero(mm);
    b_r_ = Vector::Zero(mm);
    W_hat_ = Matrix::Zero(mm, dd);
    B_v_ = Matrix::Zero(mm, dd);
}

void ClusterEstimate::update(const Vector& x, double r, const Vector& v) {
    M_.noalias() += x * x.transpose();
    // Sherman-Morrison
    const Vector Mx = M_inv_ * x;
    M_inv_.noalias() -= (Mx * Mx.transpose()) / (1.0 + x.dot(Mx));
    b_r_.noalias() += x * r;
    B_v_.noalias() += x * v.transpose();
    ++t_;
    if (t_ % kResolveEvery == 0) {
        resolve();
        return;
    }
    mu_hat_.noalias() = M_inv_ * b_r_;
    W_hat_.noalias() = M_inv_ * B_v_;
}

void ClusterEstimate::resolve() {
    const Eigen::LLT<Matrix> llt(M_);
    M_inv_ = llt.solve(Matrix::Identity(M_.rows(), M_.cols()));
    mu_hat_ = llt.solve(b_r_);
    W_hat_ = llt.solve(B_v_);
}

double ClusterEstimate::inverse_norm(const Vector& x) const {
    return std::sqrt(std::max(0.0, x.dot(M_inv_ * x)));
}

nlohmann::json ClusterEstimate::to_json() const {
    auto mat = [](const Matrix& A) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    return {{"count", t_},     {"lambda2", lambda2_},
            {"M", mat(M_)},    {"mu_hat", std::vector<double>(mu_hat_.data(), mu_hat_.data() + mu_hat_.size())},
            {"W_hat", mat(W_hat_)}};
}

namespace {

double radius_impl(double log_argument, std::size_t t, std::size_t m, const RadiusConfig& cfg,
                   double eps_hat) {
    const double md = static_cast<double>(m);
    const double log_term = std::log(std::max(log_argument, std::exp(1.0)));
    return 2.0 * (cfg.R + 1.0) * std::sqrt(md * log_term) +
           eps_hat * md * std::sqrt(static_cast<double>(t)) + std::sqrt(cfg.lambda2 * md);
}

}  // namespace

double reward_radius(std::size_t t, std::size_t m, const RadiusConfig& cfg, double eps_hat) {
    const double tt = static_cast<double>(std::max<std::size_t>(t, 1));
    return radius_impl(tt * static_cast<double>(m) / (cfg.lambda2 * cfg.zeta), t, m, cfg, eps_hat);
}

double consumption_radius(std::size_t t, std::size_t m, std::size_t d, const RadiusConfig& cfg,
                          double eps_hat) {
    const double tt = static_cast<double>(std::max<std::size_t>(t, 1));
    return radius_impl(static_cast<double>(d) * tt * static_cast<double>(m) / (cfg.lambda2 * cfg.zeta), t, m,
                       cfg, eps_hat);
}

OptimisticReward optimistic_reward(const ClusterEstimate& state, const Vector& x, double radius) {
    const Vector Minv_x = state.gram_inverse() * x;
    const double norm = std::sqrt(std::max(0.0, x.dot(Minv_x)));
    const double value = x.dot(state.mu_hat()) + radius * norm;
    if (norm == 0.0) return {value, state.mu_hat()};
    return {value, state.mu_hat() + (radius / norm) * Minv_x};
}

Vector optimistic_consumption(const ClusterEstimate& state, const Vector& x, double radius) {
    const double shrink = radius * state.inverse_norm(x);
    Vector out = state.W_hat().transpose() * x;
    out.array() -= shrink;
    return out;
}

}  // namespace cbwk
