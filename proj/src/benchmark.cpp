#include "cbwk/benchmark.hpp"

#include <numeric>

namespace cbwk {

namespace {

double solved_value(const ChoiceProgram& program, const char* who) {
    const ChoiceSolution sol = solve_choice_program(program);
    if (sol.status != LpStatus::optimal)
        throw NumericalError(std::string(who) + ": program not solved (" + to_string(sol.status) + ")");
    return sol.value;
}

}  // namespace

double static_policy_value(const Instance& instance, const std::vector<Matrix>& contexts,
                           const std::vector<std::size_t>& arms, double budget_rate) {
    if (contexts.empty()) throw ValidationError("static_policy_value: no context samples");
    if (!(budget_rate >= 0.0)) throw ValidationError("static_policy_value: budget rate must be nonnegative");
    ChoiceProgram program(contexts.size(), arms.size(), instance.d);
    program.scale = 1.0 / static_cast<double>(contexts.size());
    program.capacity = Vector::Constant(static_cast<Eigen::Index>(instance.d), budget_rate);
    for (std::size_t s = 0; s < contexts.size(); ++s) {
        for (std::size_t i = 0; i < arms.size(); ++i) {
            const Vector x = contexts[s].row(static_cast<Eigen::Index>(arms[i])).transpose();
            program.reward_at(s, i) = instance.mean_reward(arms[i], x);
            const Vector v = instance.mean_consumption(arms[i], x);
            for (std::size_t j = 0; j < instance.d; ++j) program.consumption_at(s, i, j) = v[static_cast<Eigen::Index>(j)];
        }
    }
    return solved_value(program, "oracle_opt");
}

double oracle_opt(const Instance& instance, double B, std::size_t T, std::size_t n_mc, Rng& rng) {
    if (n_mc == 0) throw ValidationError("oracle_opt: n_mc must be at least 1");
    if (T == 0) throw ValidationError("oracle_opt: T must be at least 1");
    if (instance.context.degenerate()) n_mc = 1;
    std::vector<Matrix> contexts;
    contexts.reserve(n_mc);
    for (std::size_t s = 0; s < n_mc; ++s) contexts.push_back(draw_context(instance, rng));
    std::vector<std::size_t> arms(instance.K);
    std::iota(arms.begin(), arms.end(), std::size_t{0});
    const double rate = B / static_cast<double>(T);
    return static_cast<double>(T) * static_policy_value(instance, contexts, arms, rate);
}

double estimate_opt_hat(const std::vector<Matrix>& contexts, const std::vector<ClusterEstimate>& estimates,
                        const std::vector<int>& labels, std::size_t K, std::size_t N_S, std::size_t T0, double B,
                        std::size_t T) {
    if (N_S == 0 || T0 == 0 || T == 0) throw ValidationError("estimate_opt_hat: N_S, T0 and T must be positive");
    if (contexts.size() != N_S * T0)
        throw ValidationError("estimate_opt_hat: expected N_S * T0 exploration periods");
    if (labels.size() != N_S) throw ValidationError("estimate_opt_hat: one label per subset arm is required");

    std::vector<std::size_t> playable;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) continue;
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) > estimates.size())
            throw ValidationError("estimate_opt_hat: label without an estimate");
        playable.push_back(i);
    }
    if (playable.empty()) return 0.0;

    const std::size_t d = estimates.front().d();
    ChoiceProgram program(contexts.size(), playable.size(), d);
    const double ns = static_cast<double>(N_S);
    program.scale = static_cast<double>(K) / (ns * ns * static_cast<double>(T0));
    program.capacity = Vector::Constant(static_cast<Eigen::Index>(d), B / static_cast<double>(T));
    for (std::size_t t = 0; t < contexts.size(); ++t) {
        for (std::size_t k = 0; k < playable.size(); ++k) {
            const std::size_t i = playable[k];
            const auto& est = estimates[static_cast<std::size_t>(labels[i] - 1)];
            const Vector x = contexts[t].row(static_cast<Eigen::Index>(i)).transpose();
            program.reward_at(t, k) = x.dot(est.mu_hat());
            const Vector v = est.W_hat().transpose() * x;
            for (std::size_t j = 0; j < d; ++j) program.consumption_at(t, k, j) = v[static_cast<Eigen::Index>(j)];
        }
    }
    const ChoiceSolution sol = solve_choice_program(program);
    if (sol.status != LpStatus::optimal)
        throw NumericalError("estimate_opt_hat: program not solved (" + to_string(sol.status) + ")");
    return static_cast<double>(T) * sol.value;
}

double compute_Z(double opt_hat, std::size_t N_S, std::size_t K, double B_prime) {
    if (!(B_prime > 0.0))
        throw ConfigError("budget left after exploration must be positive (need B > N_S T_0)");
    if (K == 0) throw ValidationError("compute_Z: K must be positive");
    return static_cast<double>(N_S) * opt_hat / (2.0 * static_cast<double>(K) * B_prime);
}

double regret(double opt_total, const std::vector<double>& rewards) {
    return opt_total - std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

}  // namespace cbwk
