#pragma once

#include <functional>
#include <optional>

#include "vefl/common.hpp"

namespace vefl::cvx {

// minimize c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi.
// Lower bounds must be finite; upper bounds may be +inf.
struct LinearProgram {
    Vec c;
    Mat a_ub;
    Vec b_ub;
    Mat a_eq;
    Vec b_eq;
    Vec lo;
    Vec hi;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Optimal;
    Vec x;
    double objective = 0.0;
};

LpResult solve_lp(const LinearProgram& lp, double tol = 1e-9);

// Smooth convex objective over a closed convex set given by a projection
// operator. The caller guarantees convexity; gradient consistency is checked
// by the test suite via check_gradient.
struct SmoothConvexProgram {
    // Returns objective value; fills grad (same size as x).
    std::function<double(const Vec& x, Vec& grad)> objective;
    std::function<void(Vec& x)> project;
};

struct SmoothResult {
    Vec x;
    double objective = 0.0;
    double pg_norm = 0.0;  // projected-gradient norm at the returned point
    bool converged = false;
    int iterations = 0;
};

SmoothResult solve_smooth(const SmoothConvexProgram& prog, Vec start, double tol = 1e-6,
                          int max_iters = 2000);

// Central-difference gradient check; returns max relative error over coords.
double check_gradient(const std::function<double(const Vec&, Vec&)>& evaluator, const Vec& point,
                      double h = 1e-6);

// Exact projections used to assemble feasible sets.
void project_box(Vec& x, const Vec& lo, const Vec& hi);

// Projection onto {lo <= x <= hi, sum x <= budget} via breakpoint search.
void project_box_budget(Vec& x, const Vec& lo, const Vec& hi, double budget);

// Projection onto {sum x = s, 0 <= x <= 1}.
void project_capped_simplex(Vec& x, double s);

// Dykstra's alternating projection onto an intersection of convex sets.
void dykstra_project(Vec& x, const std::vector<std::function<void(Vec&)>>& projectors,
                     double tol = 1e-9, int max_sweeps = 500);

}  // namespace vefl::cvx
