#pragma once

#include <stdexcept>
#include <vector>

#include "vefl/common.hpp"
#include "vefl/radio.hpp"

namespace vefl::cost {

struct FrequencyOutOfRange : std::domain_error {
    using std::domain_error::domain_error;
};
struct ZeroWorstRate : std::domain_error {
    using std::domain_error::domain_error;
};
struct InfeasibleWindow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-CV service-level agreement terms reported to the server.
struct SlaTerms {
    double eta_min = 1e3;          // Hz
    double eta_max = 2e9;          // Hz
    double p_max = 0.2;            // W
    double energy_budget = 25.0;   // J, per round
    double dataset_bits = 8e6;     // bits
    double cycles_per_bit = 25.0;  // cycles/bit
    double chip_capacitance = 5e-30;  // J*s^2/cycle^3 (the halved coefficient)
    double energy_price = 7.0;     // units/J
    double participation_fee = 15.0;  // units

    bool valid() const {
        return eta_min >= 0 && eta_min <= eta_max && p_max > 0 && energy_budget >= 0 &&
               dataset_bits >= 0 && cycles_per_bit >= 0 && chip_capacitance >= 0 &&
               energy_price >= 0 && participation_fee >= 0;
    }
};

// Model payload layout: per-element precision plus one sign bit.
struct PayloadSpec {
    int dim = 0;
    std::vector<int> fpp_bits;  // per-element precision; broadcast if size 1

    static PayloadSpec uniform(int dim, int fpp) { return PayloadSpec{dim, {fpp}}; }
};

double compute_delay(double iters, const SlaTerms& sla, double eta);
double compute_energy(double iters, const SlaTerms& sla, double eta);

double payload_bits(const PayloadSpec& spec);

// Conservative TTI count needed to drain the payload at the worst-case SNR,
// assuming the fair pRB share z~ = Z/V when pRBs are scarce.
long long worst_case_tx_ttis(const PayloadSpec& spec, const radio::RadioConfig& cfg,
                             double worst_snr, int fleet_size);

double cv_charge(double e_tot, const SlaTerms& sla);
double cv_charge_upper(double iters, double eta, long long tx_slots, const SlaTerms& sla,
                       const radio::RadioConfig& cfg);

// Latest slot at which a CV can start transmitting and still make both its
// own departure and the round deadline. Negative (pre-round) values are
// clamped to the round start unless allow_clamp is false.
long long tx_start_slot(long long round_start, long long round_end, double sojourn_bound,
                        long long worst_tx, const radio::RadioConfig& cfg,
                        bool allow_clamp = true, bool* clamped = nullptr);

// Percentile estimate of the per-pRB SNR at full per-pRB power, Monte Carlo
// over the fading model; used as the planning-time worst case.
double worst_snr_percentile(double distance, double power_w, const radio::RadioConfig& cfg,
                            double percentile, int draws, Rng& rng);

}  // namespace vefl::cost
