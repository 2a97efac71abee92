#pragma once

#include <stdexcept>
#include <vector>

#include "vefl/convex.hpp"
#include "vefl/radio.hpp"

namespace vefl::rat {

struct ExpiredDeadline : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleRateFloor : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Remaining-model-payload bits per selected CV.
struct PayloadQueue {
    Vec remaining;
    double payload_total = 0.0;  // S, bits
};

// Running energy-efficiency ratio for the Dinkelbach transform.
struct EeTracker {
    double cum_rate = 0.0;   // bits/s summed over past slots
    double cum_power = 0.0;  // W summed over past slots

    double ratio() const { return cum_power > 0.0 ? cum_rate / cum_power : 0.0; }
    void add(double rate_sum, double power_sum) {
        cum_rate += rate_sum;
        cum_power += power_sum;
    }
};

// One slot's scheduling decision for the scheduled set (rows index into it).
struct SlotAllocation {
    std::vector<int> scheduled;   // CV ids
    std::vector<int> prb_owner;   // per pRB: row index into scheduled
    Mat powers;                   // P, W, rows x Z (zero where unassigned)
    Mat lifted_powers;            // P~ = I * P
    Mat assign;                   // rounded indicators I
    double utility = 0.0;
    Vec surrogate_trace;          // per SCA iteration
    Vec relaxed_assign;           // converged fractional indicators, pre-rounding
    std::vector<int> relaxed_floors;  // rows whose rate floor had to be dropped
};

struct LyapunovConfig {
    double control = 1.0;       // C, trade-off between EE and backlog pressure
    double penalty_base = 1.0;  // theta_0 for the indicator DC penalty
    int max_iters = 12;         // J
    int owner_search_sweeps = 8;  // rounding polish budget on large slots
    int relax_iters = 300;        // inner budget for the penalty-free start
    int inner_iters = 200;        // inner budget per penalized subproblem
    int dykstra_sweeps = 100;     // projection budget per inner step
    double tol = 1e-6;
    double floor_weight = 1e-6;  // squared-hinge weight per unit rate shortfall
};

PayloadQueue update_queue(const PayloadQueue& q, const Vec& rates, double tti);

double success_probability(double q_final, double payload_total);

// Deadline per candidate in remaining slots; at most Z CVs survive, earliest
// deadline first, ties by larger backlog then lower position.
std::vector<int> edf_schedule(const std::vector<int>& candidates, const Vec& deadlines,
                              const Vec& backlogs, int prb_count);

// Minimum per-slot rate that still drains the backlog before the deadline,
// discounted by the guaranteed pRB share when CVs outnumber pRBs.
double min_rate_requirement(double backlog, double remaining_slots, int subset_size,
                            int prb_count, double tti);

// C * beta * sum(P~) - omega(1-upsilon) * sum_v (C + kappa Q_v) sum_z
// log2(1 + P~ g / (omega varsigma^2)).
double slot_utility(const Mat& lifted_powers, const Mat& gains, const Vec& queues,
                    double ee_ratio, double control, const radio::RadioConfig& cfg);

// Single scheduled CV: it owns every pRB; power by exact multiplier bisection
// on the rate floor plus a projected-gradient polish. Sets *kkt_residual and
// *floor_met when provided; best-effort power is returned even when the floor
// cannot be met.
Vec solve_single_cv_power(const Vec& gains, double backlog, double rate_floor, double ee_ratio,
                          const LyapunovConfig& cfg, const radio::RadioConfig& radio,
                          double p_max, double* kkt_residual = nullptr,
                          bool* floor_met = nullptr);

// Multi-CV slot: SCA over relaxed indicators and lifted powers, Dykstra
// projection onto the assignment/budget/coupling sets, then rounding with a
// per-CV power polish. Deadlines order rate-floor relaxation when the floors
// are jointly unsatisfiable.
SlotAllocation solve_prb_power(const std::vector<int>& scheduled, const Mat& gains,
                               const Vec& backlogs, const Vec& rate_floors, const Vec& deadlines,
                               const EeTracker& ee, const LyapunovConfig& cfg,
                               const radio::RadioConfig& radio, const Vec& p_max);

// Appendix-style queue-independent drift constant for the current channel.
double drift_bound_const(const Mat& gains, const Vec& p_max, const radio::RadioConfig& cfg);

// Realized one-step drift-plus-penalty (lhs) and its bound (rhs).
std::pair<double, double> drift_penalty_bound(const Mat& lifted_powers, const Mat& gains,
                                              const Vec& queues, const Vec& p_max,
                                              double ee_ratio, double control,
                                              const radio::RadioConfig& cfg);

}  // namespace vefl::rat
