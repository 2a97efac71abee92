#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "vefl/convex.hpp"
#include "vefl/cost_model.hpp"

namespace vefl::opt {

struct InfeasiblePoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoFeasiblePlan : std::runtime_error {
    std::string binding_constraint;
    NoFeasiblePlan(const std::string& msg, std::string binding)
        : std::runtime_error(msg), binding_constraint(std::move(binding)) {}
};

struct RoundBudget {
    double money = 500.0;         // units per round
    double deadline = 5.0;        // seconds in the round window
    int desired_iters = 5;        // target local iteration count
    int subset_size = 1;          // |C_k|
    int iter_min = 1;
    int iter_max = 50;

    bool valid() const {
        return money > 0 && deadline > 0 && subset_size >= 1 && iter_min >= 1 &&
               iter_min <= iter_max && desired_iters >= iter_min;
    }
};

// Relaxed iterate of the lifted selection/iteration/frequency program.
struct SubproblemPoint {
    Vec selection;     // relaxed membership in [0,1]
    Vec lifted_iters;  // l~ = l * sel
    Vec raw_iters;     // l
    Vec freqs;         // eta, Hz
};

struct RoundPlan {
    std::vector<bool> selected;
    std::vector<int> iters;
    Vec freqs;                 // Hz per CV (0 when unselected)
    Vec est_delay;             // s, compute + worst-case tx
    Vec est_energy;            // J, compute + worst-case tx upper bound
    Vec est_charge;            // units, the upper-bound charge the server pays
    Vec theta;                 // importance weights used in the objective
    double objective = 0.0;    // Sum theta * l over selected CVs
    int sca_iterations = 0;
    Vec surrogate_trace;       // surrogate objective per SCA iteration
    Vec relaxed_selection;     // converged fractional indicators, pre-rounding
};

struct SolverOptions {
    double penalty_base = 0.0;  // 0 means auto-scaled from the objective
    int max_iters = 40;
    double tol = 1e-7;
};

Vec theta_weights(const std::vector<double>& dataset_bits,
                  const std::vector<double>& sojourn_bounds, double lambda_bar);

// Emits the linearized convex subproblem around the given point. Variable
// layout per CV v: [sel, l~, l, eta'] with eta' in GHz for conditioning.
cvx::LinearProgram linearize_subproblem(const SubproblemPoint& point,
                                           const std::vector<cost::SlaTerms>& slas,
                                           const std::vector<double>& sojourn_bounds,
                                           const Vec& theta, const RoundBudget& budget,
                                           const std::vector<long long>& worst_tx,
                                           const radio::RadioConfig& cfg, double penalty,
                                           bool fdpc);

RoundPlan solve_vefl_round(const std::vector<cost::SlaTerms>& slas,
                           const std::vector<double>& sojourn_bounds, const Vec& theta,
                           const RoundBudget& budget, const std::vector<long long>& worst_tx,
                           const radio::RadioConfig& cfg, bool fdpc,
                           const SolverOptions& opts = {});

}  // namespace vefl::opt
