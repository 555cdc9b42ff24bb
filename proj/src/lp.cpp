#include "cbwk/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbwk {

std::string to_string(LpStatus status) {
    switch (status) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::pivot_limit: return "pivot_limit";
    }
    return "unknown";
}

void LpProblem::validate() const {
    if (A.rows() != b.size()) throw ValidationError("LpProblem: A and b row counts differ");
    if (A.cols() != c.size() || upper.size() != c.size())
        throw ValidationError("LpProblem: A, c and upper column counts differ");
    if (!b.allFinite() || !upper.allFinite() || !c.allFinite() || !A.allFinite())
        throw ValidationError("LpProblem: entries must be finite");
    if (upper.size() > 0 && upper.minCoeff() < 0.0) throw ValidationError("LpProblem: negative upper bound");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kRefactorEvery = 64;

enum class VarState : unsigned char { basic, at_lower, at_upper };

// Standard form: rows scaled by sign so the rhs is nonnegative.
//   sign_i * (A_i x + s_i) + art_i = sign_i * b_i   (art only where sign_i < 0)
class Simplex {
public:
    Simplex(const LpProblem& p, double tol, std::size_t max_pivots)
        : p_(p), tol_(tol), max_pivots_(max_pivots),
          k_(static_cast<std::size_t>(p.A.rows())), n_(static_cast<std::size_t>(p.A.cols())) {
        sign_.assign(k_, 1.0);
        for (std::size_t i = 0; i < k_; ++i)
            if (p.b[static_cast<Eigen::Index>(i)] < 0.0) sign_[i] = -1.0;
        art_row_.clear();
        for (std::size_t i = 0; i < k_; ++i)
            if (sign_[i] < 0.0) art_row_.push_back(i);
        total_ = n_ + k_ + art_row_.size();

        upper_.assign(total_, kInf);
        for (std::size_t j = 0; j < n_; ++j) upper_[j] = p.upper[static_cast<Eigen::Index>(j)];
        x_.assign(total_, 0.0);
        state_.assign(total_, VarState::at_lower);
        rhs_.resize(static_cast<Eigen::Index>(k_));
        for (std::size_t i = 0; i < k_; ++i)
            rhs_[static_cast<Eigen::Index>(i)] = sign_[i] * p.b[static_cast<Eigen::Index>(i)];

        basis_.resize(k_);
        std::size_t art = 0;
        for (std::size_t i = 0; i < k_; ++i) {
            basis_[i] = sign_[i] > 0.0 ? n_ + i : n_ + k_ + art++;
            state_[basis_[i]] = VarState::basic;
            x_[basis_[i]] = rhs_[static_cast<Eigen::Index>(i)];
        }
        Binv_ = Matrix::Identity(static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(k_));
    }

    LpSolution run() {
        LpSolution out;
        if (!art_row_.empty()) {
            std::vector<double> phase1(total_, 0.0);
            for (std::size_t j = n_ + k_; j < total_; ++j) phase1[j] = -1.0;
            const auto st = optimize(phase1);
            out.pivots = pivots_;
            if (st == LpStatus::pivot_limit) {
                out.status = st;
                return out;
            }
            double infeas = 0.0;
            for (std::size_t j = n_ + k_; j < total_; ++j) infeas += x_[j];
            if (infeas > tol_ * std::max(1.0, rhs_.cwiseAbs().maxCoeff())) {
                out.status = LpStatus::infeasible;
                return out;
            }
            for (std::size_t j = n_ + k_; j < total_; ++j) {
                upper_[j] = 0.0;
                if (state_[j] != VarState::basic) {
                    x_[j] = 0.0;
                    state_[j] = VarState::at_lower;
                }
            }
        }
        std::vector<double> phase2(total_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) phase2[j] = p_.c[static_cast<Eigen::Index>(j)];
        out.status = optimize(phase2);
        out.pivots = pivots_;

        out.x.resize(static_cast<Eigen::Index>(n_));
        for (std::size_t j = 0; j < n_; ++j)
            out.x[static_cast<Eigen::Index>(j)] = std::clamp(x_[j], 0.0, upper_[j]);
        out.value = p_.c.dot(out.x);
        const Vector y = duals(phase2);
        out.duals.resize(static_cast<Eigen::Index>(k_));
        for (std::size_t i = 0; i < k_; ++i)
            out.duals[static_cast<Eigen::Index>(i)] = sign_[i] * y[static_cast<Eigen::Index>(i)];
        return out;
    }

private:
    Vector column(std::size_t j) const {
        Vector col = Vector::Zero(static_cast<Eigen::Index>(k_));
        if (j < n_) {
            for (std::size_t i = 0; i < k_; ++i)
                col[static_cast<Eigen::Index>(i)] =
                    sign_[i] * p_.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        } else if (j < n_ + k_) {
            col[static_cast<Eigen::Index>(j - n_)] = sign_[j - n_];
        } else {
            col[static_cast<Eigen::Index>(art_row_[j - n_ - k_])] = 1.0;
        }
        return col;
    }

    double column_dot(std::size_t j, const Vector& y) const {
        if (j < n_) {
            double s = 0.0;
            for (std::size_t i = 0; i < k_; ++i)
                s += y[static_cast<Eigen::Index>(i)] * sign_[i] *
                     p_.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            return s;
        }
        if (j < n_ + k_) return y[static_cast<Eigen::Index>(j - n_)] * sign_[j - n_];
        return y[static_cast<Eigen::Index>(art_row_[j - n_ - k_])];
    }

    Vector duals(const std::vector<double>& cost) const {
        Vector cb(static_cast<Eigen::Index>(k_));
        for (std::size_t r = 0; r < k_; ++r) cb[static_cast<Eigen::Index>(r)] = cost[basis_[r]];
        return Binv_.transpose() * cb;
    }

    void refactor() {
        Matrix B(static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(k_));
        for (std::size_t r = 0; r < k_; ++r) B.col(static_cast<Eigen::Index>(r)) = column(basis_[r]);
        Binv_ = B.partialPivLu().inverse();
        Vector residual = rhs_;
        for (std::size_t j = 0; j < total_; ++j)
            if (state_[j] != VarState::basic && x_[j] != 0.0) residual -= x_[j] * column(j);
        const Vector xb = Binv_ * residual;
        for (std::size_t r = 0; r < k_; ++r) x_[basis_[r]] = xb[static_cast<Eigen::Index>(r)];
    }

    LpStatus optimize(const std::vector<double>& cost) {
        std::size_t since_refactor = 0;
        while (true) {
            const Vector y = duals(cost);

            // Bland: lowest-index improving variable enters.
            std::size_t q = total_;
            double dir = 0.0;
            for (std::size_t j = 0; j < total_; ++j) {
                if (state_[j] == VarState::basic || upper_[j] <= 0.0) continue;
                const double dj = cost[j] - column_dot(j, y);
                if (state_[j] == VarState::at_lower && dj > tol_) {
                    q = j;
                    dir = 1.0;
                    break;
                }
                if (state_[j] == VarState::at_upper && dj < -tol_) {
                    q = j;
                    dir = -1.0;
                    break;
                }
            }
            if (q == total_) return LpStatus::optimal;
            if (pivots_ >= max_pivots_) return LpStatus::pivot_limit;

            const Vector alpha = Binv_ * column(q);
            double theta = upper_[q];  // bound flip
            std::size_t leave = k_;
            bool leave_to_upper = false;
            for (std::size_t r = 0; r < k_; ++r) {
                const double rate = -dir * alpha[static_cast<Eigen::Index>(r)];
                const std::size_t var = basis_[r];
                double limit = kInf;
                bool to_upper = false;
                if (rate < -kPivotTol) {
                    limit = std::max(0.0, x_[var]) / -rate;
                } else if (rate > kPivotTol && std::isfinite(upper_[var])) {
                    limit = std::max(0.0, upper_[var] - x_[var]) / rate;
                    to_upper = true;
                }
                if (limit < theta || (limit == theta && leave < k_ && var < basis_[leave])) {
                    theta = limit;
                    leave = r;
                    leave_to_upper = to_upper;
                }
            }
            if (!std::isfinite(theta)) return LpStatus::unbounded;

            for (std::size_t r = 0; r < k_; ++r) x_[basis_[r]] -= dir * theta * alpha[static_cast<Eigen::Index>(r)];
            x_[q] += dir * theta;
            ++pivots_;

            if (leave == k_) {
                state_[q] = dir > 0.0 ? VarState::at_upper : VarState::at_lower;
                x_[q] = dir > 0.0 ? upper_[q] : 0.0;
                continue;
            }

            const std::size_t out = basis_[leave];
            state_[out] = leave_to_upper ? VarState::at_upper : VarState::at_lower;
            x_[out] = leave_to_upper ? upper_[out] : 0.0;
            basis_[leave] = q;
            state_[q] = VarState::basic;

            const auto lr = static_cast<Eigen::Index>(leave);
            const double piv = alpha[lr];
            Binv_.row(lr) /= piv;
            for (Eigen::Index i = 0; i < Binv_.rows(); ++i)
                if (i != lr && alpha[i] != 0.0) Binv_.row(i) -= alpha[i] * Binv_.row(lr);

            if (++since_refactor >= kRefactorEvery) {
                refactor();
                since_refactor = 0;
            }
        }
    }

    static constexpr double kPivotTol = 1e-11;

    const LpProblem& p_;
    double tol_;
    std::size_t max_pivots_;
    std::size_t k_, n_, total_ = 0;
    std::vector<double> sign_;
    std::vector<std::size_t> art_row_;
    std::vector<double> upper_, x_;
    std::vector<VarState> state_;
    std::vector<std::size_t> basis_;
    Vector rhs_;
    Matrix Binv_;
    std::size_t pivots_ = 0;
};

}  // namespace

LpSolution lp_solve(const LpProblem& problem, double tol, std::size_t max_pivots) {
    problem.validate();
    if (problem.A.rows() == 0) {
        // Box only: each variable sits at whichever bound its cost prefers.
        LpSolution out;
        out.x = Vector::Zero(problem.c.size());
        for (Eigen::Index j = 0; j < problem.c.size(); ++j)
            if (problem.c[j] > 0.0) out.x[j] = problem.upper[j];
        out.value = problem.c.dot(out.x);
        out.status = LpStatus::optimal;
        return out;
    }
    return Simplex(problem, tol, max_pivots).run();
}

// =============================================================================
// ChoiceProgram
// =============================================================================

ChoiceProgram::ChoiceProgram(std::size_t periods_, std::size_t options_, std::size_t resources_)
    : periods(periods_), options(options_), resources(resources_),
      reward(periods_ * options_, 0.0), consumption(periods_ * options_ * resources_, 0.0),
      capacity(Vector::Zero(static_cast<Eigen::Index>(resources_))) {}

LpProblem ChoiceProgram::to_lp() const {
    const auto n = static_cast<Eigen::Index>(periods * options);
    const auto rows = static_cast<Eigen::Index>(resources + periods);
    LpProblem lp;
    lp.c.resize(n);
    lp.A = Matrix::Zero(rows, n);
    lp.b.resize(rows);
    lp.upper = Vector::Ones(n);
    for (std::size_t s = 0; s < periods; ++s) {
        for (std::size_t a = 0; a < options; ++a) {
            const auto v = static_cast<Eigen::Index>(s * options + a);
            lp.c[v] = scale * reward_at(s, a);
            for (std::size_t j = 0; j < resources; ++j)
                lp.A(static_cast<Eigen::Index>(j), v) = scale * consumption_at(s, a, j);
            lp.A(static_cast<Eigen::Index>(resources + s), v) = 1.0;
        }
    }
    for (std::size_t j = 0; j < resources; ++j) lp.b[static_cast<Eigen::Index>(j)] = capacity[static_cast<Eigen::Index>(j)];
    for (std::size_t s = 0; s < periods; ++s) lp.b[static_cast<Eigen::Index>(resources + s)] = 1.0;
    return lp;
}

namespace {

struct DualPoint {
    double value;     // full dual objective capacity'lambda + h(lambda)
    double h;         // scale * sum_s max(0, max_a reward - lambda'consumption)
    Vector h_slope;   // subgradient of h
};

DualPoint evaluate_dual(const ChoiceProgram& p, const Vector& lambda) {
    DualPoint out{0.0, 0.0, Vector::Zero(static_cast<Eigen::Index>(p.resources))};
    for (std::size_t s = 0; s < p.periods; ++s) {
        double best = 0.0;
        std::size_t arg = p.options;
        for (std::size_t a = 0; a < p.options; ++a) {
            double val = p.reward_at(s, a);
            for (std::size_t j = 0; j < p.resources; ++j)
                val -= lambda[static_cast<Eigen::Index>(j)] * p.consumption_at(s, a, j);
            if (val > best) {
                best = val;
                arg = a;
            }
        }
        if (arg == p.options) continue;
        out.h += best;
        for (std::size_t j = 0; j < p.resources; ++j) out.h_slope[static_cast<Eigen::Index>(j)] -= p.consumption_at(s, arg, j);
    }
    out.h *= p.scale;
    out.h_slope *= p.scale;
    out.value = p.capacity.dot(lambda) + out.h;
    return out;
}

struct Cut {
    Vector slope;      // subgradient of h at the cut point
    double intercept;  // h(lambda_k) - slope' lambda_k
};

}  // namespace

ChoiceSolution solve_choice_program(const ChoiceProgram& p, double tol) {
    if (p.capacity.size() != static_cast<Eigen::Index>(p.resources))
        throw ValidationError("ChoiceProgram: capacity has wrong length");
    if (p.reward.size() != p.periods * p.options || p.consumption.size() != p.periods * p.options * p.resources)
        throw ValidationError("ChoiceProgram: data has wrong size");

    ChoiceSolution out;
    out.prices = Vector::Zero(static_cast<Eigen::Index>(p.resources));
    if (p.periods == 0 || p.options == 0) return out;

    // Zero or negative capacity leaves no finite bound on the prices; use the
    // flat LP there.
    if (p.resources > 0 && p.capacity.minCoeff() <= 0.0) {
        const auto sol = lp_solve(p.to_lp(), tol);
        out.status = sol.status;
        out.value = sol.value;
        if (sol.status == LpStatus::optimal) out.prices = sol.duals.head(static_cast<Eigen::Index>(p.resources));
        return out;
    }

    const auto d = static_cast<Eigen::Index>(p.resources);
    const DualPoint at_zero = evaluate_dual(p, out.prices);
    if (at_zero.value <= 0.0 || p.resources == 0) {
        out.value = at_zero.value;
        return out;
    }

    // Some optimal price vector satisfies capacity_j * lambda_j <= phi(0).
    Vector price_cap(d);
    for (Eigen::Index j = 0; j < d; ++j) price_cap[j] = at_zero.value / p.capacity[j];

    std::vector<Cut> cuts;
    cuts.push_back({at_zero.h_slope, at_zero.h});
    double upper = at_zero.value;
    Vector best_lambda = out.prices;

    constexpr std::size_t kMaxCuts = 20000;
    while (cuts.size() < kMaxCuts) {
        // Master in dual form: a convex combination of cuts, with multipliers
        // rho for the price caps. Rows: sum beta <= 1, and one row per resource.
        const auto nc = static_cast<Eigen::Index>(cuts.size());
        LpProblem master;
        master.c.resize(nc + d);
        master.A = Matrix::Zero(d + 1, nc + d);
        master.b.resize(d + 1);
        master.upper.resize(nc + d);
        double slope_max = 0.0;
        for (Eigen::Index k = 0; k < nc; ++k) {
            const auto& cut = cuts[static_cast<std::size_t>(k)];
            master.c[k] = cut.intercept;
            master.A(0, k) = 1.0;
            for (Eigen::Index j = 0; j < d; ++j) master.A(1 + j, k) = -cut.slope[j];
            master.upper[k] = 2.0;
            slope_max = std::max(slope_max, cut.slope.cwiseAbs().maxCoeff());
        }
        master.b[0] = 1.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            master.c[nc + j] = -price_cap[j];
            master.A(1 + j, nc + j) = -1.0;
            master.b[1 + j] = p.capacity[j];
            master.upper[nc + j] = 2.0 * (slope_max + p.capacity[j]) + 1.0;
        }
        const auto sol = lp_solve(master, 1e-12);
        if (sol.status != LpStatus::optimal) {
            out.status = sol.status;
            break;
        }
        const double lower = sol.value;
        Vector lambda = sol.duals.tail(d).cwiseMax(0.0).cwiseMin(price_cap);

        const DualPoint point = evaluate_dual(p, lambda);
        if (point.value < upper) {
            upper = point.value;
            best_lambda = lambda;
        }
        cuts.push_back({point.h_slope, point.h - point.h_slope.dot(lambda)});
        if (upper - lower <= tol * std::max(1.0, std::abs(upper))) break;
    }
    if (cuts.size() >= kMaxCuts) out.status = LpStatus::pivot_limit;
    out.value = upper;
    out.prices = best_lambda;
    out.cuts = cuts.size();
    return out;
}

}  // namespace cbwk
