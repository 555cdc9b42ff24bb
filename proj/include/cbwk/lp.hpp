#pragma once

// Dense bounded-variable revised simplex, and the structured program that
// both benchmark quantities reduce to.

#include "cbwk/common.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace cbwk {

enum class LpStatus { optimal, infeasible, unbounded, pivot_limit };

std::string to_string(LpStatus status);

/// maximize c'x  subject to  A x <= b,  0 <= x <= upper
struct LpProblem {
    Vector c;
    Matrix A;
    Vector b;
    Vector upper;

    void validate() const;
};

struct LpSolution {
    Vector x;
    double value = 0.0;
    LpStatus status = LpStatus::infeasible;
    Vector duals;  // one per row of A; valid when optimal
    std::size_t pivots = 0;
};

/// Two-phase revised simplex with Bland's rule. Deterministic.
LpSolution lp_solve(const LpProblem& problem, double tol = 1e-9, std::size_t max_pivots = 1'000'000);

// =============================================================================
// Per-period choice program
// =============================================================================
//
//   maximize   scale * sum_s sum_a reward(s,a) pi(s,a)
//   subject to scale * sum_s sum_a consumption(s,a) pi(s,a) <= capacity
//              sum_a pi(s,a) <= 1   for every period s   (remainder is no-op)
//              0 <= pi <= 1
//
// This is the sample-average static-policy program; it is solved through its
// Lagrangian dual over the d resource prices, which is a convex piecewise
// linear function minimized by cutting planes.

struct ChoiceProgram {
    std::size_t periods = 0;
    std::size_t options = 0;
    std::size_t resources = 0;
    std::vector<double> reward;       // [s * options + a]
    std::vector<double> consumption;  // [(s * options + a) * resources + j]
    double scale = 1.0;
    Vector capacity;

    ChoiceProgram(std::size_t periods_, std::size_t options_, std::size_t resources_);

    double& reward_at(std::size_t s, std::size_t a) { return reward[s * options + a]; }
    double reward_at(std::size_t s, std::size_t a) const { return reward[s * options + a]; }
    double& consumption_at(std::size_t s, std::size_t a, std::size_t j) {
        return consumption[(s * options + a) * resources + j];
    }
    double consumption_at(std::size_t s, std::size_t a, std::size_t j) const {
        return consumption[(s * options + a) * resources + j];
    }

    /// The same program written out as a flat LP (periods*options variables).
    LpProblem to_lp() const;
};

struct ChoiceSolution {
    double value = 0.0;
    LpStatus status = LpStatus::optimal;
    Vector prices;  // resource prices at the best dual point
    std::size_t cuts = 0;
};

ChoiceSolution solve_choice_program(const ChoiceProgram& program, double tol = 1e-9);

}  // namespace cbwk
