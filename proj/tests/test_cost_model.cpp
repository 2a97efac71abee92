#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vefl/cost_model.hpp"

using namespace vefl;
using namespace vefl::cost;

namespace {

SlaTerms example_sla() {
    SlaTerms sla;
    sla.eta_min = 1e3;
    sla.eta_max = 2.5e9;
    sla.cycles_per_bit = 25.0;
    sla.dataset_bits = 8e6;
    sla.chip_capacitance = 1e-28;  // halved coefficient
    sla.energy_price = 7.0;
    sla.participation_fee = 15.0;
    return sla;
}

}  // namespace

TEST_CASE("compute_delay examples") {
    SlaTerms sla = example_sla();
    CHECK(compute_delay(0, sla, 2e9) == 0.0);
    CHECK(compute_delay(5, sla, 2e9) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(compute_delay(5, sla, 1e9) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(compute_delay(5, sla, 3e9), FrequencyOutOfRange);
    CHECK_THROWS_AS(compute_delay(5, sla, 1.0), FrequencyOutOfRange);
}

TEST_CASE("compute_energy examples") {
    SlaTerms sla = example_sla();
    CHECK(compute_energy(0, sla, 2e9) == 0.0);
    // 5 * 1e-28 * 25 * 8e6 * (2e9)^2 = 5 * 2.5e-27 * 8e6 * 4e18 = 0.4 J
    CHECK(compute_energy(5, sla, 2e9) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(compute_energy(5, sla, 1e9) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("payload bit counts") {
    CHECK(payload_bits(PayloadSpec::uniform(1, 31)) == 32.0);
    CHECK(payload_bits(PayloadSpec::uniform(1000, 15)) == 16000.0);
    PayloadSpec mixed{3, {7, 15, 31}};
    CHECK(payload_bits(mixed) == 56.0);
}

TEST_CASE("worst-case transmission slot count") {
    radio::RadioConfig rc;
    rc.prb_bandwidth = 1.8e6;
    rc.tti = 5e-4;
    rc.overhead_fraction = 1.0 / 14.0;
    rc.prb_count = 10;
    PayloadSpec spec{1, {0}};
    // Exactly one slot's worth of bits.
    double per_slot = 5e-4 * (13.0 / 14.0) * 1.8e6 * 2.0;  // log2(1+3) = 2
    spec.fpp_bits = {static_cast<int>(per_slot) - 1};
    CHECK(worst_case_tx_ttis(spec, rc, 3.0, 5) == 1);

    // 1e6 bits at the same per-slot service: ceil(598.3) = 599.
    PayloadSpec big = PayloadSpec::uniform(1, 0);
    big.fpp_bits = {999999};  // 1 + 999999 = 1e6 bits
    CHECK(worst_case_tx_ttis(big, rc, 3.0, 5) == 599);

    // More CVs than pRBs halves the guaranteed share (V=20, Z=10).
    long long crowded = worst_case_tx_ttis(big, rc, 3.0, 20);
    CHECK(crowded == 1197);  // ceil(1e6 / (per_slot * 0.5))
    CHECK_THROWS_AS(worst_case_tx_ttis(big, rc, 0.0, 5), ZeroWorstRate);
}

TEST_CASE("worst-case slot count monotonicity") {
    radio::RadioConfig rc;
    PayloadSpec spec = PayloadSpec::uniform(1000, 31);
    long long prev = worst_case_tx_ttis(spec, rc, 0.1, 5);
    for (double snr : {0.3, 1.0, 3.0, 10.0}) {
        long long cur = worst_case_tx_ttis(spec, rc, snr, 5);
        CHECK(cur <= prev);
        prev = cur;
    }
    CHECK(worst_case_tx_ttis(PayloadSpec::uniform(2000, 31), rc, 1.0, 5) >=
          worst_case_tx_ttis(PayloadSpec::uniform(1000, 31), rc, 1.0, 5));
}

TEST_CASE("charge arithmetic") {
    SlaTerms sla = example_sla();
    CHECK(cv_charge(0.0, sla) == 15.0);
    CHECK(cv_charge(2.0, sla) == doctest::Approx(29.0).epsilon(1e-12));
}

TEST_CASE("upper-bound charge dominates the realized charge") {
    SlaTerms sla = example_sla();
    sla.p_max = 0.2;
    radio::RadioConfig rc;
    rc.tti = 5e-4;
    Rng rng = make_rng(8, "charge");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        int iters = 1 + static_cast<int>(uni(rng) * 10);
        double eta = 1e9 + uni(rng) * 1e9;
        long long tx_slots = 1 + static_cast<long long>(uni(rng) * 500);
        double upper = cv_charge_upper(iters, eta, tx_slots, sla, rc);
        // Any realized transmission at <= p_max for <= tx_slots slots.
        double realized_tx = uni(rng) * rc.tti * sla.p_max * static_cast<double>(tx_slots);
        double realized = cv_charge(compute_energy(iters, sla, eta) + realized_tx, sla);
        CHECK(upper >= realized - 1e-12);
    }
}

TEST_CASE("transmission start slot") {
    radio::RadioConfig rc;
    rc.tti = 5e-4;
    // Long sojourn: start so the worst-case transmission ends at the round end.
    CHECK(tx_start_slot(0, 10000, 1e9, 599, rc) == 9401);
    // Worst-case transmission spanning the whole round starts at the round start.
    CHECK(tx_start_slot(0, 10000, 1e9, 10000, rc) == 0);
    // Short sojourn (5 s < 10 s round): deadline floor(5/5e-4) = 10000... the
    // CV's own exit clips the window instead of the round end.
    CHECK(tx_start_slot(0, 20000, 5.0, 599, rc) == 9401);
    // Clamping: worst-case transmission longer than the window.
    bool clamped = false;
    CHECK(tx_start_slot(0, 100, 1e9, 500, rc, true, &clamped) == 0);
    CHECK(clamped);
    CHECK_THROWS_AS(tx_start_slot(0, 100, 1e9, 500, rc, false), InfeasibleWindow);
}

TEST_CASE("worst-SNR percentile is conservative and monotone") {
    radio::RadioConfig rc;
    Rng rng = make_rng(5, "snrp");
    double p5 = worst_snr_percentile(300.0, 0.2, rc, 5.0, 2000, rng);
    Rng rng2 = make_rng(5, "snrp");
    double p50 = worst_snr_percentile(300.0, 0.2, rc, 50.0, 2000, rng2);
    CHECK(p5 > 0.0);
    CHECK(p5 < p50);
    Rng rng3 = make_rng(5, "snrp");
    double far = worst_snr_percentile(450.0, 0.2, rc, 5.0, 2000, rng3);
    CHECK(far < p5);
}
