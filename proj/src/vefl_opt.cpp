#include "vefl/vefl_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vefl::opt {

namespace {

constexpr double kEtaScale = 1e9;  // internal frequency unit (GHz) for conditioning

struct CvDerived {
    double window = 0.0;     // min{round deadline, sojourn} minus the tx tail, s
    double tx_seconds = 0.0; // kappa * worst-case TTIs
    double tx_energy = 0.0;  // kappa * P_max * worst-case TTIs, J
    double comp_coeff = 0.0; // cycles: c * D
};

CvDerived derive(const cost::SlaTerms& sla, double sojourn, long long tx_slots,
                 const RoundBudget& budget, const radio::RadioConfig& cfg) {
    CvDerived d;
    d.tx_seconds = cfg.tti * static_cast<double>(tx_slots);
    d.tx_energy = d.tx_seconds * sla.p_max;
    d.comp_coeff = sla.cycles_per_bit * sla.dataset_bits;
    // Two-TTI guard: slot-quantized transmit windows round the compute
    // finish up and the exit deadline down, so a continuous plan packed to
    // the exact limit can land on an empty discrete window.
    d.window = std::min(budget.deadline, sojourn) - 2.0 * cfg.tti - d.tx_seconds;
    return d;
}

// Largest iteration count a lone CV can feasibly run at frequency eta.
double iter_cap(const cost::SlaTerms& sla, const CvDerived& d, double eta,
                const RoundBudget& budget) {
    double by_delay = d.window > 0 ? d.window * eta / d.comp_coeff : 0.0;
    double e_room = sla.energy_budget - d.tx_energy;
    double by_energy =
        e_room > 0 ? e_room / (sla.chip_capacitance * d.comp_coeff * eta * eta) : 0.0;
    return std::max(0.0, std::min({static_cast<double>(budget.iter_max), by_delay, by_energy}));
}

void add_row(Mat& a, Vec& b, const Vec& row, double rhs) {
    // Row-normalize so the simplex tolerances see O(1) coefficients.
    double scale = std::fabs(rhs);
    for (double v : row) scale = std::max(scale, std::fabs(v));
    if (scale < 1.0) scale = 1.0;
    for (std::size_t j = 0; j < row.size(); ++j) a(a.rows - 1, j) = row[j] / scale;
    b.push_back(rhs / scale);
}

Mat& grow(Mat& a) {
    a.rows += 1;
    a.data.resize(a.rows * a.cols, 0.0);
    return a;
}

}  // namespace

Vec theta_weights(const std::vector<double>& dataset_bits,
                  const std::vector<double>& sojourn_bounds, double lambda_bar) {
    // Same mixture as the aggregation weights; kept separate so the planner
    // can emphasize sojourn differently from the aggregator.
    if (dataset_bits.empty() || dataset_bits.size() != sojourn_bounds.size())
        throw DimensionMismatch("theta_weights: size mismatch");
    if (lambda_bar < 0 || lambda_bar > 1) throw std::invalid_argument("theta_weights: lambda_bar");
    double sum_d = std::accumulate(dataset_bits.begin(), dataset_bits.end(), 0.0);
    double sum_s = std::accumulate(sojourn_bounds.begin(), sojourn_bounds.end(), 0.0);
    Vec theta(dataset_bits.size());
    double total = 0.0;
    for (std::size_t v = 0; v < theta.size(); ++v) {
        double data_part = sum_d > 0 ? dataset_bits[v] / sum_d : 0.0;
        double soj_part = sum_s > 0 ? sojourn_bounds[v] / sum_s : 0.0;
        theta[v] = (1.0 - lambda_bar) * data_part + lambda_bar * soj_part;
        total += theta[v];
    }
    if (total <= 0) throw std::domain_error("theta_weights: degenerate weights");
    for (auto& t : theta) t /= total;
    return theta;
}

cvx::LinearProgram linearize_subproblem(const SubproblemPoint& point,
                                        const std::vector<cost::SlaTerms>& slas,
                                        const std::vector<double>& sojourn_bounds,
                                        const Vec& theta, const RoundBudget& budget,
                                        const std::vector<long long>& worst_tx,
                                        const radio::RadioConfig& cfg, double penalty,
                                        bool fdpc) {
    const std::size_t n = slas.size();
    if (point.selection.size() != n || point.lifted_iters.size() != n || point.freqs.size() != n)
        throw DimensionMismatch("linearize_subproblem: point size mismatch");
    for (std::size_t v = 0; v < n; ++v) {
        if (point.freqs[v] < slas[v].eta_min - 1e-6 || point.freqs[v] > slas[v].eta_max + 1e-6 ||
            point.selection[v] < -1e-9 || point.selection[v] > 1 + 1e-9 ||
            point.lifted_iters[v] < -1e-9)
            throw InfeasiblePoint("linearize_subproblem: expansion point violates bounds");
    }

    // Variables per CV: [sel, l~, l, eta'] with eta' = eta / 1e9.
    const std::size_t nv = 4 * n;
    cvx::LinearProgram lp;
    lp.c.assign(nv, 0.0);
    lp.lo.assign(nv, 0.0);
    lp.hi.assign(nv, 0.0);
    lp.a_ub = Mat(0, nv);
    lp.a_eq = Mat(0, nv);

    Vec budget_row(nv, 0.0);
    double budget_rhs = budget.money;

    for (std::size_t v = 0; v < n; ++v) {
        const auto& sla = slas[v];
        CvDerived d = derive(sla, sojourn_bounds[v], worst_tx[v], budget, cfg);
        const std::size_t js = 4 * v, jl = 4 * v + 1, jr = 4 * v + 2, je = 4 * v + 3;
        double sel_i = point.selection[v];
        double lt_i = std::max(point.lifted_iters[v], 1e-9);
        double eta_i = point.freqs[v] / kEtaScale;
        bool viable = d.window > 0 && sla.energy_budget > d.tx_energy;

        // Objective: maximize sum theta * l~, plus the DC penalty
        // theta_bar * (sum sel - H) with H linearized at the current point.
        lp.c[jl] = -theta[v];
        if (!fdpc) lp.c[js] = penalty * (1.0 - 2.0 * sel_i);

        // Boxes. FDPC pins every selection at 1; a CV that cannot even fit
        // its transmission tail is pinned unselected (FDPC keeps it at the
        // minimum effort and lets delivery fail downstream).
        lp.lo[js] = fdpc ? 1.0 : 0.0;
        lp.hi[js] = fdpc || viable ? 1.0 : 0.0;
        lp.hi[jl] = viable ? budget.iter_max : (fdpc ? budget.iter_min : 0.0);
        lp.lo[jl] = fdpc && !viable ? budget.iter_min : 0.0;
        lp.lo[jr] = budget.iter_min;
        lp.hi[jr] = budget.iter_max;
        lp.lo[je] = sla.eta_min / kEtaScale;
        lp.hi[je] = sla.eta_max / kEtaScale;

        // Lifting couplers: l_min sel <= l~ <= l_max sel and
        // l_min (1-sel) <= l - l~ <= l_max (1-sel).
        Vec row(nv, 0.0);
        row[jl] = 1.0;
        row[js] = -budget.iter_max;
        add_row(grow(lp.a_ub), lp.b_ub, row, 0.0);
        std::fill(row.begin(), row.end(), 0.0);
        row[jl] = -1.0;
        row[js] = budget.iter_min;
        add_row(grow(lp.a_ub), lp.b_ub, row, 0.0);
        std::fill(row.begin(), row.end(), 0.0);
        row[jr] = 1.0;
        row[jl] = -1.0;
        row[js] = budget.iter_max;
        add_row(grow(lp.a_ub), lp.b_ub, row, budget.iter_max);
        std::fill(row.begin(), row.end(), 0.0);
        row[jr] = -1.0;
        row[jl] = 1.0;
        row[js] = -budget.iter_min;
        add_row(grow(lp.a_ub), lp.b_ub, row, -budget.iter_min);

        double zeta_cd = sla.chip_capacitance * d.comp_coeff * kEtaScale * kEtaScale;
        if (viable) {
            // Delay: the product l~ c D / eta is kept in exact affine form
            // l~ cD <= window * eta, and additionally as its first-order
            // surrogate around the expansion point (exact there, so the SCA
            // trajectory stays consistent with the energy surrogate below).
            double cd = d.comp_coeff / kEtaScale;  // seconds per unit of eta'
            std::fill(row.begin(), row.end(), 0.0);
            row[jl] = cd;
            row[je] = -d.window;
            add_row(grow(lp.a_ub), lp.b_ub, row, 0.0);
            std::fill(row.begin(), row.end(), 0.0);
            row[jl] = cd / eta_i;
            row[je] = -cd * lt_i / (eta_i * eta_i);
            add_row(grow(lp.a_ub), lp.b_ub, row, d.window - cd * lt_i / eta_i);

            // Energy: linearize l~ eta^2 at the expansion point.
            std::fill(row.begin(), row.end(), 0.0);
            row[jl] = zeta_cd * eta_i * eta_i;
            row[je] = zeta_cd * 2.0 * lt_i * eta_i;
            row[js] = d.tx_energy;
            add_row(grow(lp.a_ub), lp.b_ub, row,
                    sla.energy_budget + zeta_cd * 2.0 * lt_i * eta_i * eta_i);

            // Iteration floor: ask for at least min{l_des, feasible cap at
            // the expansion point} whenever the CV is (fractionally)
            // selected.
            double cap_pt = iter_cap(sla, d, point.freqs[v], budget);
            double floor_pt =
                std::max(0.0, std::min(static_cast<double>(budget.desired_iters), cap_pt));
            std::fill(row.begin(), row.end(), 0.0);
            row[jl] = -1.0;
            row[js] = floor_pt;
            add_row(grow(lp.a_ub), lp.b_ub, row, 0.0);
        }

        // Charge upper bound accumulates into the shared money constraint;
        // the surrogate's constant expansion term moves to the right side.
        budget_row[js] += sla.participation_fee + sla.energy_price * d.tx_energy;
        budget_row[jl] += sla.energy_price * zeta_cd * eta_i * eta_i;
        budget_row[je] += sla.energy_price * zeta_cd * 2.0 * lt_i * eta_i;
        budget_rhs += sla.energy_price * zeta_cd * 2.0 * lt_i * eta_i * eta_i;
    }

    if (!fdpc) {
        Vec row(nv, 0.0);
        for (std::size_t v = 0; v < n; ++v) row[4 * v] = 1.0;
        add_row(grow(lp.a_ub), lp.b_ub, row, static_cast<double>(budget.subset_size));
    }
    add_row(grow(lp.a_ub), lp.b_ub, budget_row, budget_rhs);
    return lp;
}

namespace {

// Exact per-CV feasibility check for a candidate (selected, l, eta) point,
// reusing the cost-model formulas rather than solver residuals.
bool cv_feasible(const cost::SlaTerms& sla, double sojourn, long long tx_slots,
                 const RoundBudget& budget, const radio::RadioConfig& cfg, int l, double eta) {
    if (eta < sla.eta_min || eta > sla.eta_max) return false;
    if (l < budget.iter_min || l > budget.iter_max) return false;
    double tx_s = cfg.tti * static_cast<double>(tx_slots);
    double delay = cost::compute_delay(l, sla, eta) + tx_s;
    if (delay > std::min(budget.deadline, sojourn) - 2.0 * cfg.tti + 1e-9) return false;
    double energy = cost::compute_energy(l, sla, eta) + tx_s * sla.p_max;
    return energy <= sla.energy_budget + 1e-9;
}

double charge_upper(const cost::SlaTerms& sla, long long tx_slots, const radio::RadioConfig& cfg,
                    int l, double eta) {
    return cost::cv_charge_upper(l, eta, tx_slots, sla, cfg);
}

// Frequency that meets the delay window at minimal energy for a given l.
double pick_eta(const cost::SlaTerms& sla, double sojourn, long long tx_slots,
                const RoundBudget& budget, const radio::RadioConfig& cfg, int l) {
    double tx_s = cfg.tti * static_cast<double>(tx_slots);
    double window = std::min(budget.deadline, sojourn) - 2.0 * cfg.tti - tx_s;
    if (window <= 0) return sla.eta_min;
    double needed = static_cast<double>(l) * sla.cycles_per_bit * sla.dataset_bits / window;
    return std::clamp(needed, sla.eta_min, sla.eta_max);
}

double surrogate_value(const cvx::LinearProgram& lp, const Vec& x) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += lp.c[j] * x[j];
    return s;
}

}  // namespace

RoundPlan solve_vefl_round(const std::vector<cost::SlaTerms>& slas,
                           const std::vector<double>& sojourn_bounds, const Vec& theta,
                           const RoundBudget& budget, const std::vector<long long>& worst_tx,
                           const radio::RadioConfig& cfg, bool fdpc, const SolverOptions& opts) {
    const std::size_t n = slas.size();
    if (n == 0) throw NoFeasiblePlan("solve_vefl_round: empty fleet", "C1 (no candidates)");
    if (!budget.valid()) throw ConfigError("solve_vefl_round: invalid round budget");

    // Feasible initialization: uniform fractional selection, mid frequency,
    // the largest lifted iterate the delay/energy caps allow there.
    SubproblemPoint pt;
    pt.selection.assign(n, fdpc ? 1.0
                                : std::min(1.0, static_cast<double>(budget.subset_size) / n));
    pt.freqs.resize(n);
    pt.lifted_iters.resize(n);
    pt.raw_iters.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        // Start each CV at the cheapest frequency that still meets the delay
        // window at the desired iteration count; a mid-range start would make
        // the linearized energy charges look artificially expensive and trap
        // the iteration in a poor local point.
        pt.freqs[v] =
            pick_eta(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg, budget.desired_iters);
        CvDerived d = derive(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg);
        double cap = iter_cap(slas[v], d, pt.freqs[v], budget);
        pt.raw_iters[v] = std::max(static_cast<double>(budget.iter_min), cap);
        pt.lifted_iters[v] = pt.selection[v] * cap;
    }

    double penalty_base = opts.penalty_base;
    if (penalty_base <= 0.0) {
        double scale = 0.0;
        for (std::size_t v = 0; v < n; ++v) scale = std::max(scale, theta[v] * budget.iter_max);
        penalty_base = 10.0 * std::max(scale, 1e-6);
    }

    RoundPlan plan;
    plan.theta = theta;

    auto step = [&](double penalty) {
        // Anchor constant of the linearized concavity penalty; the LP drops
        // it, so it is restored here to keep the recorded surrogate values
        // comparable across expansion points.
        double anchor_const = 0.0;
        for (double s : pt.selection) anchor_const += penalty * s * s;
        auto lp = linearize_subproblem(pt, slas, sojourn_bounds, theta, budget, worst_tx, cfg,
                                       penalty, fdpc);
        auto res = cvx::solve_lp(lp);
        if (res.status == cvx::LpStatus::Infeasible)
            throw NoFeasiblePlan("solve_vefl_round: subproblem infeasible",
                                 "C5 (budget) or C2/C3 window at the expansion point");
        if (res.status == cvx::LpStatus::Unbounded)
            throw NoFeasiblePlan("solve_vefl_round: subproblem unbounded", "model error");
        for (std::size_t v = 0; v < n; ++v) {
            pt.selection[v] = std::clamp(res.x[4 * v], 0.0, 1.0);
            pt.lifted_iters[v] = std::max(res.x[4 * v + 1], 0.0);
            pt.raw_iters[v] = res.x[4 * v + 2];
            pt.freqs[v] = std::clamp(res.x[4 * v + 3] * kEtaScale, slas[v].eta_min,
                                     slas[v].eta_max);
        }
        return std::make_pair(res.objective, surrogate_value(lp, res.x) + anchor_const);
    };

    // Presolve: iterate the relaxed problem (no concavity penalty) so the
    // subset cap and the shared budget identify the strongest candidates
    // without any pressure toward a vertex.
    double prev_obj = kInf;
    for (int i = 1; i <= opts.max_iters; ++i) {
        double obj = step(0.0).first;
        if (std::fabs(prev_obj - obj) < opts.tol) break;
        prev_obj = obj;
    }

    // Binarize the anchor: keep the subset-cap strongest fractional picks at
    // one, drop the rest, and shrink the lifted iterates accordingly. The
    // penalized iterations start from this point so the penalty only has to
    // hold a vertex, never cross the interior.
    if (!fdpc) {
        std::vector<std::size_t> rank(n);
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
            if (pt.selection[a] != pt.selection[b]) return pt.selection[a] > pt.selection[b];
            if (theta[a] != theta[b]) return theta[a] > theta[b];
            return a < b;
        });
        int kept = 0;
        for (std::size_t v : rank) {
            bool keep = kept < budget.subset_size && pt.selection[v] > 1e-6;
            if (keep) ++kept;
            double sel = keep ? 1.0 : 0.0;
            pt.lifted_iters[v] = pt.selection[v] > 1e-12
                                     ? pt.lifted_iters[v] * sel / pt.selection[v]
                                     : 0.0;
            pt.selection[v] = sel;
        }
    }

    // Penalized phase at a fixed penalty, with a descent safeguard: a step
    // whose surrogate value fails to improve on the last accepted one means
    // the moving linearizations have stopped making progress, so the loop
    // keeps the previous iterate and terminates.
    prev_obj = kInf;
    SubproblemPoint accepted = pt;
    for (int i = 1; i <= opts.max_iters; ++i) {
        auto [obj, surrogate] = step(penalty_base);
        if (!plan.surrogate_trace.empty() && surrogate > plan.surrogate_trace.back()) {
            pt = accepted;
            break;
        }
        accepted = pt;
        plan.surrogate_trace.push_back(surrogate);
        plan.sca_iterations = i;
        bool binary = true;
        for (double s : pt.selection)
            if (std::min(s, 1.0 - s) > 1e-3) binary = false;
        if (std::fabs(prev_obj - obj) < opts.tol && binary) break;
        prev_obj = obj;
    }

    plan.relaxed_selection = pt.selection;

    const int cap = fdpc ? static_cast<int>(n) : budget.subset_size;

    std::vector<std::size_t> rank_theta(n);
    std::iota(rank_theta.begin(), rank_theta.end(), 0);
    std::stable_sort(rank_theta.begin(), rank_theta.end(), [&](std::size_t a, std::size_t b) {
        if (theta[a] != theta[b]) return theta[a] > theta[b];
        return a < b;
    });

    struct Allocation {
        bool ok = false;
        double objective = 0.0;
        std::vector<bool> selected;
        std::vector<int> iters;
        Vec freqs, charges;
        std::string last_block = "C1 (subset size)";
    };

    // Allocate a concrete schedule for one candidate subset: admit members
    // at the desired-iteration floor (shrunk while the delay/energy windows
    // refuse it), then spend the remaining money one iteration at a time on
    // whichever CV buys the most objective per unit of charge.
    auto allocate = [&](const std::vector<bool>& pick) {
        Allocation al;
        al.selected.assign(n, false);
        al.iters.assign(n, 0);
        al.freqs.assign(n, 0.0);
        al.charges.assign(n, 0.0);
        std::vector<bool> best_effort(n, false);
        double money_left = budget.money;
        int taken = 0;
        for (std::size_t v : rank_theta) {
            if (!pick[v] || taken >= cap) continue;
            int l = std::clamp(budget.desired_iters, budget.iter_min, budget.iter_max);
            double eta = pick_eta(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg, l);
            while (l > budget.iter_min &&
                   !cv_feasible(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg, l, eta)) {
                --l;
                eta = pick_eta(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg, l);
            }
            if (!cv_feasible(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg, l, eta)) {
                if (!fdpc) {
                    al.last_block = "C2/C3 (delay or energy window)";
                    continue;
                }
                // Full participation keeps infeasible CVs at minimum effort
                // and the fastest frequency the energy budget still allows;
                // their delivery is simply expected to fail.
                best_effort[v] = true;
                l = budget.iter_min;
                double tx_e = cfg.tti * static_cast<double>(worst_tx[v]) * slas[v].p_max;
                double e_room = slas[v].energy_budget - tx_e;
                double cap_eta = slas[v].eta_min;
                if (e_room > 0) {
                    double coeff = slas[v].chip_capacitance * slas[v].cycles_per_bit *
                                   slas[v].dataset_bits * l;
                    cap_eta =
                        std::clamp(std::sqrt(e_room / coeff), slas[v].eta_min, slas[v].eta_max);
                }
                eta = cap_eta;
            }
            double charge = charge_upper(slas[v], worst_tx[v], cfg, l, eta);
            if (charge > money_left + 1e-9) {
                al.last_block = "C5 (money budget)";
                continue;
            }
            money_left -= charge;
            al.selected[v] = true;
            al.iters[v] = l;
            al.freqs[v] = eta;
            al.charges[v] = charge;
            ++taken;
        }
        if (taken == 0) return al;
        for (;;) {
            std::size_t grow_v = n;
            double grow_ratio = -1.0, grow_eta = 0.0, grow_charge = 0.0;
            for (std::size_t v = 0; v < n; ++v) {
                if (!al.selected[v] || best_effort[v] || al.iters[v] >= budget.iter_max) continue;
                double eta_next = pick_eta(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg,
                                           al.iters[v] + 1);
                if (!cv_feasible(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg,
                                 al.iters[v] + 1, eta_next))
                    continue;
                double next_charge =
                    charge_upper(slas[v], worst_tx[v], cfg, al.iters[v] + 1, eta_next);
                double delta = next_charge - al.charges[v];
                if (delta > money_left + 1e-9) continue;
                double ratio = theta[v] / std::max(delta, 1e-12);
                if (ratio > grow_ratio) {
                    grow_ratio = ratio;
                    grow_v = v;
                    grow_eta = eta_next;
                    grow_charge = next_charge;
                }
            }
            if (grow_v == n) break;
            money_left -= grow_charge - al.charges[grow_v];
            al.iters[grow_v] += 1;
            al.freqs[grow_v] = grow_eta;
            al.charges[grow_v] = grow_charge;
        }
        // Pairwise transfers: the greedy growth ranks single iterations by
        // marginal price, which can strand money on a member whose next
        // iteration is cheap but low-value. Try shifting k iterations from
        // one member to another and keep the best strictly improving move.
        auto charge_at = [&](std::size_t v, int l, double* eta_out) {
            double eta = pick_eta(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg, l);
            if (!cv_feasible(slas[v], sojourn_bounds[v], worst_tx[v], budget, cfg, l, eta))
                return kInf;
            if (eta_out) *eta_out = eta;
            return charge_upper(slas[v], worst_tx[v], cfg, l, eta);
        };
        for (int round = 0; round < 200; ++round) {
            double best_gain = 1e-12;
            std::size_t mv_a = n, mv_b = n;
            int mv_la = 0, mv_lb = 0;
            for (std::size_t a = 0; a < n; ++a) {
                if (!al.selected[a] || best_effort[a]) continue;
                for (int k = 1; al.iters[a] - k >= budget.iter_min; ++k) {
                    double ca = charge_at(a, al.iters[a] - k, nullptr);
                    if (ca == kInf) break;
                    double freed = money_left + (al.charges[a] - ca);
                    for (std::size_t b = 0; b < n; ++b) {
                        if (b == a || !al.selected[b] || best_effort[b]) continue;
                        int lb = al.iters[b];
                        while (lb < budget.iter_max) {
                            double cb = charge_at(b, lb + 1, nullptr);
                            if (cb == kInf || cb - al.charges[b] > freed + 1e-9) break;
                            ++lb;
                        }
                        double gain = theta[b] * (lb - al.iters[b]) - theta[a] * k;
                        if (gain > best_gain) {
                            best_gain = gain;
                            mv_a = a;
                            mv_b = b;
                            mv_la = al.iters[a] - k;
                            mv_lb = lb;
                        }
                    }
                }
            }
            if (mv_a == n) break;
            double eta_a = 0.0, eta_b = 0.0;
            double ca = charge_at(mv_a, mv_la, &eta_a);
            double cb = charge_at(mv_b, mv_lb, &eta_b);
            money_left += (al.charges[mv_a] - ca) - (cb - al.charges[mv_b]);
            al.iters[mv_a] = mv_la;
            al.freqs[mv_a] = eta_a;
            al.charges[mv_a] = ca;
            al.iters[mv_b] = mv_lb;
            al.freqs[mv_b] = eta_b;
            al.charges[mv_b] = cb;
        }

        for (std::size_t v = 0; v < n; ++v)
            if (al.selected[v]) al.objective += theta[v] * al.iters[v];
        al.ok = true;
        return al;
    };

    // Seed the subset from the converged indicators (capped at |C_k| in the
    // indicator-then-theta order used throughout for determinism).
    std::vector<bool> pick(n, false);
    {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (pt.selection[a] != pt.selection[b]) return pt.selection[a] > pt.selection[b];
            if (theta[a] != theta[b]) return theta[a] > theta[b];
            return a < b;
        });
        int taken = 0;
        for (std::size_t v : order)
            if ((fdpc || pt.selection[v] >= 0.5) && taken < cap) {
                pick[v] = true;
                ++taken;
            }
    }
    Allocation best = allocate(pick);
    if (!best.ok) {
        // The indicated subset cannot be scheduled at all; fall back to the
        // best viable singleton before giving up.
        for (std::size_t v : rank_theta) {
            std::vector<bool> single(n, false);
            single[v] = true;
            Allocation al = allocate(single);
            if (al.ok) {
                best = al;
                pick = single;
                break;
            }
            if (best.last_block == "C1 (subset size)") best.last_block = al.last_block;
        }
    }
    if (!best.ok)
        throw NoFeasiblePlan("solve_vefl_round: no CV admits a feasible schedule",
                             best.last_block);

    // Deterministic local search over subsets (partial participation only):
    // the iteration allocation is a pure function of the subset, so swap,
    // add, and drop moves can be scored exactly and accepted greedily.
    if (!fdpc) {
        for (int sweep = 0; sweep < 64; ++sweep) {
            Allocation sweep_best;
            std::vector<bool> sweep_pick;
            auto consider = [&](const std::vector<bool>& cand) {
                Allocation al = allocate(cand);
                if (al.ok && al.objective >
                                 std::max(best.objective, sweep_best.ok ? sweep_best.objective
                                                                        : -kInf) +
                                     1e-12) {
                    sweep_best = al;
                    sweep_pick = cand;
                }
            };
            int count = static_cast<int>(std::count(pick.begin(), pick.end(), true));
            for (std::size_t u = 0; u < n; ++u) {
                if (pick[u]) {
                    std::vector<bool> cand = pick;
                    cand[u] = false;
                    consider(cand);
                    continue;
                }
                if (count < cap) {
                    std::vector<bool> cand = pick;
                    cand[u] = true;
                    consider(cand);
                }
                for (std::size_t s = 0; s < n; ++s) {
                    if (!pick[s]) continue;
                    std::vector<bool> cand = pick;
                    cand[s] = false;
                    cand[u] = true;
                    consider(cand);
                }
            }
            if (!sweep_best.ok) break;
            best = sweep_best;
            pick = sweep_pick;
        }
    }

    plan.selected = best.selected;
    plan.iters = best.iters;
    plan.freqs = best.freqs;
    plan.est_delay.assign(n, 0.0);
    plan.est_energy.assign(n, 0.0);
    plan.est_charge = best.charges;
    plan.objective = best.objective;
    for (std::size_t v = 0; v < n; ++v) {
        if (!plan.selected[v]) continue;
        double tx_s = cfg.tti * static_cast<double>(worst_tx[v]);
        plan.est_delay[v] = cost::compute_delay(plan.iters[v], slas[v], plan.freqs[v]) + tx_s;
        plan.est_energy[v] =
            cost::compute_energy(plan.iters[v], slas[v], plan.freqs[v]) + tx_s * slas[v].p_max;
    }
    return plan;
}

}  // namespace vefl::opt
