#include "cbwk/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cbwk {

namespace {

constexpr int kMaxSeparationAttempts = 1000;
constexpr int kMaxTruncationRejections = 100;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

// "name(a,b)" -> {a, b}
std::pair<double, double> parse_two_args(const std::string& text, const std::string& name) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    const auto comma = text.find(',', open);
    if (open == std::string::npos || close == std::string::npos || comma == std::string::npos ||
        close != text.size() - 1 || comma > close) {
        throw ValidationError("context: expected " + name + "(a,b), got '" + text + "'");
    }
    try {
        return {std::stod(text.substr(open + 1, comma - open - 1)),
                std::stod(text.substr(comma + 1, close - comma - 1))};
    } catch (const std::exception&) {
        throw ValidationError("context: non-numeric argument in '" + text + "'");
    }
}

double row_l1(const Matrix& m, Eigen::Index row) { return m.row(row).cwiseAbs().sum(); }

double min_pairwise_distance(const Matrix& mu) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < mu.rows(); ++i)
        for (Eigen::Index j = i + 1; j < mu.rows(); ++j)
            best = std::min(best, (mu.row(i) - mu.row(j)).norm());
    return best;
}

void sample_capped_row(Matrix& out, Eigen::Index i, Rng& rng) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = uniform01(rng);
    const double l1 = row_l1(out, i);
    if (l1 > 1.0) out.row(i) /= l1;
}

Matrix sample_capped_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) sample_capped_row(out, i, rng);
    return out;
}

// One attempt: rows placed in order, each redrawn until it clears the rows
// before it. Joint rejection almost never succeeds once C and m grow.
bool sample_separated_rows(Matrix& out, double separation, Rng& rng) {
    constexpr int kRowTries = 100;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        bool placed = false;
        for (int tries = 0; tries < kRowTries && !placed; ++tries) {
            sample_capped_row(out, i, rng);
            placed = true;
            for (Eigen::Index k = 0; k < i && placed; ++k) placed = (out.row(i) - out.row(k)).norm() >= separation;
        }
        if (!placed) return false;
    }
    return true;
}

double sample_gamma(double shape, Rng& rng) {
    std::gamma_distribution<double> g(shape, 1.0);
    return g(rng);
}

double draw_entry(const ContextDistribution& dist, Rng& rng) {
    switch (dist.kind) {
        case ContextKind::uniform01:
            return uniform01(rng);
        case ContextKind::beta: {
            const double x = sample_gamma(dist.a, rng);
            const double y = sample_gamma(dist.b, rng);
            return (x + y > 0.0) ? x / (x + y) : 0.5;
        }
        case ContextKind::truncated_gaussian: {
            if (dist.degenerate()) return std::clamp(dist.a, 0.0, 1.0);
            std::normal_distribution<double> normal(dist.a, dist.b);
            double v = normal(rng);
            for (int i = 0; i < kMaxTruncationRejections && (v < 0.0 || v > 1.0); ++i) v = normal(rng);
            return std::clamp(v, 0.0, 1.0);
        }
    }
    return 0.0;
}

// Symmetric noise on [-w, w] with w chosen so the response stays in [0, 1].
double noisy_response(double mean, double R, Rng& rng) {
    mean = std::clamp(mean, 0.0, 1.0);
    const double w = std::min({2.0 * R, mean, 1.0 - mean});
    const double g = w * (2.0 * uniform01(rng) - 1.0);
    return std::clamp(mean + g, 0.0, 1.0);
}

}  // namespace

// =============================================================================
// ContextDistribution
// =============================================================================

ContextDistribution ContextDistribution::parse(const std::string& raw) {
    const std::string text = trim(raw);
    if (text == "uniform01") return uniform();
    if (text.rfind("beta", 0) == 0) {
        auto [a, b] = parse_two_args(text, "beta");
        if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("context: beta parameters must be positive");
        return beta(a, b);
    }
    if (text.rfind("truncated_gaussian", 0) == 0) {
        auto [mu, sigma] = parse_two_args(text, "truncated_gaussian");
        if (!(sigma >= 0.0)) throw ValidationError("context: truncated_gaussian sigma must be >= 0");
        return truncated_gaussian(mu, sigma);
    }
    throw ValidationError("context: unknown distribution '" + text + "'");
}

std::string ContextDistribution::to_string() const {
    std::ostringstream os;
    switch (kind) {
        case ContextKind::uniform01: return "uniform01";
        case ContextKind::beta: os << "beta(" << a << "," << b << ")"; break;
        case ContextKind::truncated_gaussian: os << "truncated_gaussian(" << a << "," << b << ")"; break;
    }
    return os.str();
}

// =============================================================================
// InstanceConfig
// =============================================================================

std::vector<double> InstanceConfig::resolved_proportions() const {
    if (proportions.empty()) return std::vector<double>(C, 1.0 / static_cast<double>(C));
    return proportions;
}

void InstanceConfig::validate() const {
    if (K == 0) throw ValidationError("instance.K must be a positive integer");
    if (C == 0) throw ValidationError("instance.C must be a positive integer");
    if (C > K) throw ValidationError("instance.C must not exceed instance.K");
    if (m == 0) throw ValidationError("instance.m must be a positive integer");
    if (d == 0) throw ValidationError("instance.d must be a positive integer");
    if (!(separation >= 0.0)) throw ValidationError("instance.separation must be nonnegative");
    if (!(noise_half_width >= 0.0 && noise_half_width <= 0.5))
        throw ValidationError("instance.noise_half_width must lie in [0, 1/2]");

    const auto p = resolved_proportions();
    if (p.size() != C) throw ValidationError("instance.proportions must have length C");
    double sum = 0.0;
    for (double pc : p) {
        if (!(pc > 0.0)) throw ValidationError("instance.proportions entries must be positive");
        sum += pc;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("instance.proportions must sum to 1");
    const double pmin = *std::min_element(p.begin(), p.end());
    if (static_cast<double>(K) * pmin < 1.0 - 1e-12)
        throw ValidationError("instance.proportions: K * min(p) must be at least 1");

    if (context.kind == ContextKind::beta && !(context.a > 0.0 && context.b > 0.0))
        throw ValidationError("instance.context: beta parameters must be positive");

    if (mu) {
        if (mu->rows() != static_cast<Eigen::Index>(C) || mu->cols() != static_cast<Eigen::Index>(m))
            throw ValidationError("instance.mu must be C x m");
        if (mu->minCoeff() < 0.0 || mu->maxCoeff() > 1.0)
            throw ValidationError("instance.mu entries must lie in [0, 1]");
        for (Eigen::Index c = 0; c < mu->rows(); ++c)
            if (row_l1(*mu, c) > 1.0 + 1e-12) throw ValidationError("instance.mu rows must have 1-norm <= 1");
        if (C > 1 && min_pairwise_distance(*mu) < separation)
            throw ValidationError("instance.mu violates instance.separation");
    }
    if (W) {
        if (W->size() != C) throw ValidationError("instance.W must have C matrices");
        for (const auto& w : *W) {
            if (w.rows() != static_cast<Eigen::Index>(m) || w.cols() != static_cast<Eigen::Index>(d))
                throw ValidationError("instance.W entries must be m x d");
            if (w.minCoeff() < 0.0 || w.maxCoeff() > 1.0)
                throw ValidationError("instance.W entries must lie in [0, 1]");
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                if (w.col(j).cwiseAbs().sum() > 1.0 + 1e-12)
                    throw ValidationError("instance.W columns must have 1-norm <= 1");
        }
    }
}

std::vector<std::size_t> cluster_sizes(const std::vector<double>& p, std::size_t K) {
    const std::size_t C = p.size();
    std::vector<std::size_t> counts(C);
    long total = 0;
    for (std::size_t c = 0; c < C; ++c) {
        counts[c] = static_cast<std::size_t>(std::llround(p[c] * static_cast<double>(K)));
        total += static_cast<long>(counts[c]);
    }
    std::vector<std::size_t> by_size(C);
    std::iota(by_size.begin(), by_size.end(), std::size_t{0});
    std::stable_sort(by_size.begin(), by_size.end(), [&](auto a, auto b) { return p[a] < p[b]; });

    // Deficit goes to the smallest clusters, excess comes off the largest.
    for (std::size_t i = 0; total < static_cast<long>(K); ++i, ++total) ++counts[by_size[i % C]];
    for (std::size_t i = 0; total > static_cast<long>(K); ++i) {
        const std::size_t c = by_size[C - 1 - (i % C)];
        if (counts[c] > 1) {
            --counts[c];
            --total;
        }
    }
    return counts;
}

// =============================================================================
// Instance
// =============================================================================

double Instance::mean_reward(std::size_t arm, const Vector& x) const {
    return mu.row(static_cast<Eigen::Index>(membership[arm])).dot(x);
}

Vector Instance::mean_consumption(std::size_t arm, const Vector& x) const {
    return W[membership[arm]].transpose() * x;
}

Instance generate_instance(const InstanceConfig& cfg, Rng& rng) {
    cfg.validate();

    Instance inst;
    inst.K = cfg.K;
    inst.C = cfg.C;
    inst.m = cfg.m;
    inst.d = cfg.d;
    inst.noise_half_width = cfg.noise_half_width;
    inst.context = cfg.context;

    const auto counts = cluster_sizes(cfg.resolved_proportions(), cfg.K);
    inst.membership.reserve(cfg.K);
    for (std::size_t c = 0; c < cfg.C; ++c) inst.membership.insert(inst.membership.end(), counts[c], c);
    for (std::size_t i = inst.membership.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(inst.membership[i - 1], inst.membership[std::min(j, i - 1)]);
    }
    inst.p.resize(cfg.C);
    for (std::size_t c = 0; c < cfg.C; ++c)
        inst.p[c] = static_cast<double>(counts[c]) / static_cast<double>(cfg.K);
    inst.p_min = *std::min_element(inst.p.begin(), inst.p.end());

    const auto C = static_cast<Eigen::Index>(cfg.C);
    const auto m = static_cast<Eigen::Index>(cfg.m);
    const auto d = static_cast<Eigen::Index>(cfg.d);

    if (cfg.mu) {
        inst.mu = *cfg.mu;
    } else {
        bool separated = false;
        inst.mu.resize(C, m);
        for (int attempt = 0; attempt < kMaxSeparationAttempts && !separated; ++attempt)
            separated = sample_separated_rows(inst.mu, cfg.separation, rng);
        if (!separated)
            throw GenerationError("generate_instance: separation " + std::to_string(cfg.separation) +
                                  " not achieved after 1000 attempts");
    }

    if (cfg.W) {
        inst.W = *cfg.W;
    } else {
        inst.W.reserve(cfg.C);
        for (std::size_t c = 0; c < cfg.C; ++c)
            inst.W.push_back(sample_capped_rows(d, m, rng).transpose());  // columns capped
    }
    return inst;
}

Matrix draw_context(const Instance& instance, Rng& rng) {
    Matrix X(static_cast<Eigen::Index>(instance.K), static_cast<Eigen::Index>(instance.m));
    for (Eigen::Index a = 0; a < X.rows(); ++a)
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(a, j) = draw_entry(instance.context, rng);
    return X;
}

// =============================================================================
// Pulls and the ledger
// =============================================================================

PullOutcome::PullOutcome(double reward_, Vector consumption_)
    : reward(reward_), consumption(std::move(consumption_)) {
    if (!(reward >= 0.0 && reward <= 1.0)) throw ContractViolation("PullOutcome: reward outside [0, 1]");
    if (consumption.size() > 0 && (consumption.minCoeff() < 0.0 || consumption.maxCoeff() > 1.0))
        throw ContractViolation("PullOutcome: consumption outside [0, 1]");
}

PullOutcome pull(const Instance& instance, long arm, const Vector& x, Rng& rng) {
    if (arm == kNoOp) return PullOutcome::zero(instance.d);
    if (arm < 0 || static_cast<std::size_t>(arm) >= instance.K)
        throw ValidationError("pull: arm id " + std::to_string(arm) + " out of range");
    if (x.size() != static_cast<Eigen::Index>(instance.m))
        throw ValidationError("pull: context row has wrong dimension");

    const auto a = static_cast<std::size_t>(arm);
    const double R = instance.noise_half_width;
    const double reward = noisy_response(instance.mean_reward(a, x), R, rng);
    const Vector means = instance.mean_consumption(a, x);
    Vector v(means.size());
    for (Eigen::Index j = 0; j < means.size(); ++j) v[j] = noisy_response(means[j], R, rng);
    return {reward, std::move(v)};
}

BudgetLedger::BudgetLedger(double budget, std::size_t d)
    : budget_(budget), cumulative_(Vector::Zero(static_cast<Eigen::Index>(d))) {
    if (!(budget > 0.0)) throw ValidationError("BudgetLedger: budget must be positive");
}

void BudgetLedger::update(const Vector& v) {
    if (stopped_) throw ContractViolation("BudgetLedger: update after the budget was exhausted");
    if (v.size() != cumulative_.size()) throw ValidationError("BudgetLedger: dimension mismatch");
    if (v.size() > 0 && v.minCoeff() < 0.0) throw ContractViolation("BudgetLedger: negative consumption");
    cumulative_ += v;
    stopped_ = (cumulative_.array() >= budget_).any();
}

}  // namespace cbwk
