#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vefl/cost_model.hpp"
#include "vefl/vefl_opt.hpp"

using namespace vefl;
using namespace vefl::opt;

namespace {

struct Instance {
    std::vector<cost::SlaTerms> slas;
    std::vector<double> sojourn;
    std::vector<long long> worst_tx;
    Vec theta;
    RoundBudget budget;
    radio::RadioConfig radio;
};

Instance random_instance(std::uint64_t seed, int n_cvs, int subset, double money) {
    Instance in;
    Rng rng = make_rng(seed, "plan-instance");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> bits;
    for (int v = 0; v < n_cvs; ++v) {
        cost::SlaTerms sla;
        sla.eta_min = 1e3 + 4e3 * uni(rng);
        sla.eta_max = 1.9e9 + 0.9e9 * uni(rng);
        sla.p_max = 0.2;
        sla.energy_budget = 20.0 + 10.0 * uni(rng);
        sla.dataset_bits = 8e6 * (0.5 + 1.5 * uni(rng));
        sla.cycles_per_bit = 20.0 + 10.0 * uni(rng);
        sla.chip_capacitance = 5e-27 + 1.5e-26 * uni(rng);
        sla.energy_price = 5.0 + 5.0 * uni(rng);
        sla.participation_fee = 10.0 + 10.0 * uni(rng);
        in.slas.push_back(sla);
        in.sojourn.push_back(2.0 + 38.0 * uni(rng));
        in.worst_tx.push_back(static_cast<long long>(50 + 350 * uni(rng)));
        bits.push_back(sla.dataset_bits);
    }
    in.theta = theta_weights(bits, in.sojourn, 0.5);
    in.budget.money = money;
    in.budget.deadline = 1.0 + 4.0 * uni(rng);
    in.budget.desired_iters = 5;
    in.budget.subset_size = subset;
    in.budget.iter_min = 1;
    in.budget.iter_max = 50;
    return in;
}

// Cheapest admissible operating point of one CV at a fixed iteration count:
// the slowest frequency that still meets the delay window minimizes both the
// energy draw and the charge. Returns the charge, or infinity if no
// frequency works.
double best_charge_at(const Instance& in, std::size_t v, int l, double* eta_out = nullptr) {
    const auto& sla = in.slas[v];
    double tx_s = in.radio.tti * static_cast<double>(in.worst_tx[v]);
    double window = std::min(in.budget.deadline, in.sojourn[v]) - 2.0 * in.radio.tti - tx_s;
    if (window <= 0) return kInf;
    double eta = std::clamp(static_cast<double>(l) * sla.cycles_per_bit * sla.dataset_bits / window,
                            sla.eta_min, sla.eta_max);
    double delay = cost::compute_delay(l, sla, eta) + tx_s;
    if (delay > std::min(in.budget.deadline, in.sojourn[v]) - 2.0 * in.radio.tti + 1e-9) return kInf;
    double energy = cost::compute_energy(l, sla, eta) + tx_s * sla.p_max;
    if (energy > sla.energy_budget + 1e-9) return kInf;
    if (eta_out) *eta_out = eta;
    return cost::cv_charge_upper(l, eta, in.worst_tx[v], sla, in.radio);
}

struct OracleResult {
    double objective = -1.0;
    std::vector<std::size_t> subset;
};

// Exhaustive search over every nonempty subset within the cap and every
// iteration-count combination on the integer grid.
OracleResult exhaustive_pairs(const Instance& in) {
    const std::size_t n = in.slas.size();
    const int lmin = in.budget.iter_min, lmax = in.budget.iter_max;
    std::vector<std::vector<double>> charge(n, std::vector<double>(lmax + 1, kInf));
    for (std::size_t v = 0; v < n; ++v)
        for (int l = lmin; l <= lmax; ++l) charge[v][static_cast<std::size_t>(l)] = best_charge_at(in, v, l);

    OracleResult best;
    for (std::size_t a = 0; a < n; ++a) {
        for (int l = lmin; l <= lmax; ++l) {
            double c = charge[a][static_cast<std::size_t>(l)];
            if (c > in.budget.money) continue;
            double obj = in.theta[a] * l;
            if (obj > best.objective + 1e-12) best = {obj, {a}};
        }
        if (in.budget.subset_size < 2) continue;
        for (std::size_t b = a + 1; b < n; ++b)
            for (int la = lmin; la <= lmax; ++la) {
                double ca = charge[a][static_cast<std::size_t>(la)];
                if (ca > in.budget.money) continue;
                for (int lb = lmin; lb <= lmax; ++lb) {
                    double cb = charge[b][static_cast<std::size_t>(lb)];
                    if (ca + cb > in.budget.money) continue;
                    double obj = in.theta[a] * la + in.theta[b] * lb;
                    if (obj > best.objective + 1e-12) best = {obj, {a, b}};
                }
            }
    }
    return best;
}

}  // namespace

TEST_CASE("importance weights mix data share and sojourn share") {
    Vec w = theta_weights({1.0, 3.0}, {2.0, 2.0}, 0.5);
    CHECK(w[0] == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.625).epsilon(1e-12));

    Vec d_only = theta_weights({1.0, 3.0}, {5.0, 9.0}, 0.0);
    CHECK(d_only[0] == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(theta_weights({1.0}, {1.0, 2.0}, 0.5), DimensionMismatch);
    CHECK_THROWS_AS(theta_weights({1.0, 2.0}, {1.0, 2.0}, 1.5), std::invalid_argument);

    Rng rng = make_rng(5, "theta");
    std::uniform_real_distribution<double> uni(0.1, 9.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> d(5), s(5);
        for (int i = 0; i < 5; ++i) {
            d[static_cast<std::size_t>(i)] = uni(rng);
            s[static_cast<std::size_t>(i)] = uni(rng);
        }
        Vec w5 = theta_weights(d, s, uni(rng) / 9.0);
        double sum = 0;
        for (double v : w5) sum += v;
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("money below every participation fee is rejected") {
    Instance in = random_instance(11, 4, 2, 1.0);
    CHECK_THROWS_AS(
        solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx, in.radio, false),
        NoFeasiblePlan);
    try {
        solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx, in.radio, false);
    } catch (const NoFeasiblePlan& e) {
        CHECK(e.binding_constraint.find("C5") != std::string::npos);
    }
}

TEST_CASE("a transmission tail longer than every stay is rejected") {
    Instance in = random_instance(12, 3, 2, 1e6);
    for (auto& s : in.sojourn) s = 0.01;  // 20 slots of stay vs >=50 slots of tail
    CHECK_THROWS_AS(
        solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx, in.radio, false),
        NoFeasiblePlan);
}

TEST_CASE("single-vehicle plan matches the iteration-grid optimum") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Instance in = random_instance(100 + seed, 1, 1, 1e6);
        double best = -1.0;
        int best_l = 0;
        for (int l = in.budget.iter_min; l <= in.budget.iter_max; ++l)
            if (best_charge_at(in, 0, l) <= in.budget.money && in.theta[0] * l > best) {
                best = in.theta[0] * l;
                best_l = l;
            }
        if (best < 0) {
            CHECK_THROWS_AS(solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx,
                                             in.radio, false),
                            NoFeasiblePlan);
            continue;
        }
        RoundPlan plan = solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx,
                                          in.radio, false);
        REQUIRE(plan.selected[0]);
        CHECK(plan.iters[0] == best_l);
        CHECK(plan.objective == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("four-vehicle pair selection tracks the exhaustive optimum") {
    int subset_matches = 0;
    int total = 0;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        Instance in = random_instance(200 + seed, 4, 2, 150.0 + 20.0 * static_cast<double>(seed));
        OracleResult oracle = exhaustive_pairs(in);
        RoundPlan plan;
        try {
            plan = solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx,
                                    in.radio, false);
        } catch (const NoFeasiblePlan&) {
            CHECK(oracle.objective < 0);
            continue;
        }
        REQUIRE(oracle.objective > 0);
        ++total;
        // The plan can never beat an exhaustive search over the same grid,
        // and should land within 2% of it.
        CHECK(plan.objective <= oracle.objective + 1e-9);
        CHECK(plan.objective >= 0.98 * oracle.objective);
        std::vector<std::size_t> got;
        for (std::size_t v = 0; v < 4; ++v)
            if (plan.selected[v]) got.push_back(v);
        if (got == oracle.subset) ++subset_matches;
    }
    REQUIRE(total >= 20);
    CHECK(subset_matches >= (total * 9) / 10);
}

TEST_CASE("surrogate trace descends and the relaxed selection converges to a vertex") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Instance in = random_instance(300 + seed, 6, 2, 400.0);
        RoundPlan plan;
        try {
            plan = solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx,
                                    in.radio, false);
        } catch (const NoFeasiblePlan&) {
            continue;
        }
        REQUIRE(plan.surrogate_trace.size() >= 1);
        for (std::size_t i = 1; i < plan.surrogate_trace.size(); ++i)
            CHECK(plan.surrogate_trace[i] <=
                  plan.surrogate_trace[i - 1] + 1e-6 * (1.0 + std::fabs(plan.surrogate_trace[i - 1])));
        for (double s : plan.relaxed_selection) CHECK(std::min(s, 1.0 - s) <= 1e-3);
    }
}

TEST_CASE("plans respect every budget when rechecked from scratch") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        bool fdpc = seed % 2 == 0;
        Instance in = random_instance(400 + seed, 5, 2, 200.0 + 30.0 * static_cast<double>(seed));
        RoundPlan plan;
        try {
            plan = solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx,
                                    in.radio, fdpc);
        } catch (const NoFeasiblePlan&) {
            continue;
        }
        int taken = 0;
        double spent = 0.0;
        for (std::size_t v = 0; v < 5; ++v) {
            if (!plan.selected[v]) {
                CHECK(plan.iters[v] == 0);
                continue;
            }
            ++taken;
            spent += plan.est_charge[v];
            CHECK(plan.iters[v] >= in.budget.iter_min);
            CHECK(plan.iters[v] <= in.budget.iter_max);
            CHECK(plan.freqs[v] >= in.slas[v].eta_min - 1e-6);
            CHECK(plan.freqs[v] <= in.slas[v].eta_max + 1e-6);
            double tx_s = in.radio.tti * static_cast<double>(in.worst_tx[v]);
            double delay = cost::compute_delay(plan.iters[v], in.slas[v], plan.freqs[v]) + tx_s;
            double energy =
                cost::compute_energy(plan.iters[v], in.slas[v], plan.freqs[v]) +
                tx_s * in.slas[v].p_max;
            CHECK(delay == doctest::Approx(plan.est_delay[v]).epsilon(1e-9));
            CHECK(energy == doctest::Approx(plan.est_energy[v]).epsilon(1e-9));
            double window = std::min(in.budget.deadline, in.sojourn[v]);
            if (fdpc) {
                // Full participation may carry best-effort stragglers whose
                // delivery is expected to fail; they still must not overrun
                // their own energy budget.
                CHECK(energy <= in.slas[v].energy_budget + 1e-6);
            } else {
                CHECK(delay <= window + 1e-9);
                CHECK(energy <= in.slas[v].energy_budget + 1e-9);
            }
            CHECK(plan.est_charge[v] ==
                  doctest::Approx(cost::cv_charge_upper(plan.iters[v], plan.freqs[v],
                                                        in.worst_tx[v], in.slas[v], in.radio))
                      .epsilon(1e-9));
        }
        CHECK(taken >= 1);
        if (!fdpc) CHECK(taken <= in.budget.subset_size);
        CHECK(spent <= in.budget.money + 1e-6);
    }
}

TEST_CASE("full participation keeps every viable vehicle in the plan") {
    Instance in = random_instance(77, 6, 2, 1e7);
    RoundPlan plan =
        solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx, in.radio, true);
    for (std::size_t v = 0; v < 6; ++v) CHECK(plan.selected[v]);
}

TEST_CASE("planning is deterministic") {
    Instance in = random_instance(88, 5, 2, 500.0);
    RoundPlan a =
        solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx, in.radio, false);
    RoundPlan b =
        solve_vefl_round(in.slas, in.sojourn, in.theta, in.budget, in.worst_tx, in.radio, false);
    CHECK(a.selected == b.selected);
    CHECK(a.iters == b.iters);
    CHECK(a.freqs == b.freqs);
    CHECK(a.objective == b.objective);
    CHECK(a.surrogate_trace == b.surrogate_trace);
}
