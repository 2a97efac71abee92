#include "vefl/cost_model.hpp"

#include <algorithm>
#include <cmath>

namespace vefl::cost {

namespace {

void require_eta(const SlaTerms& sla, double eta) {
    if (!(eta >= sla.eta_min && eta <= sla.eta_max))
        throw FrequencyOutOfRange("cpu frequency outside [eta_min, eta_max]");
}

}  // namespace

double compute_delay(double iters, const SlaTerms& sla, double eta) {
    require_eta(sla, eta);
    if (iters < 0) throw std::invalid_argument("compute_delay: negative iteration count");
    return iters * sla.cycles_per_bit * sla.dataset_bits / eta;
}

double compute_energy(double iters, const SlaTerms& sla, double eta) {
    require_eta(sla, eta);
    if (iters < 0) throw std::invalid_argument("compute_energy: negative iteration count");
    return iters * sla.chip_capacitance * sla.cycles_per_bit * sla.dataset_bits * eta * eta;
}

double payload_bits(const PayloadSpec& spec) {
    if (spec.dim < 1) throw std::invalid_argument("payload_bits: empty payload");
    double total = 0.0;
    for (int m = 0; m < spec.dim; ++m) {
        int fpp = spec.fpp_bits.size() == 1 ? spec.fpp_bits[0]
                                            : spec.fpp_bits.at(static_cast<std::size_t>(m));
        total += 1.0 + fpp;  // sign bit plus mantissa precision
    }
    return total;
}

long long worst_case_tx_ttis(const PayloadSpec& spec, const radio::RadioConfig& cfg,
                             double worst_snr, int fleet_size) {
    if (worst_snr <= 0.0) throw ZeroWorstRate("worst_case_tx_ttis: zero worst-case SNR");
    double z_share = cfg.prb_count < fleet_size
                         ? static_cast<double>(cfg.prb_count) / fleet_size
                         : 1.0;
    double per_slot_bits = cfg.tti * (1.0 - cfg.overhead_fraction) * cfg.prb_bandwidth *
                           std::log2(1.0 + worst_snr) * z_share;
    return static_cast<long long>(std::ceil(payload_bits(spec) / per_slot_bits));
}

double cv_charge(double e_tot, const SlaTerms& sla) {
    return e_tot * sla.energy_price + sla.participation_fee;
}

double cv_charge_upper(double iters, double eta, long long tx_slots, const SlaTerms& sla,
                       const radio::RadioConfig& cfg) {
    double e_upper = compute_energy(iters, sla, eta) +
                     cfg.tti * sla.p_max * static_cast<double>(tx_slots);
    return cv_charge(e_upper, sla);
}

long long tx_start_slot(long long round_start, long long round_end, double sojourn_bound,
                        long long worst_tx, const radio::RadioConfig& cfg, bool allow_clamp,
                        bool* clamped) {
    if (round_end <= round_start)
        throw std::invalid_argument("tx_start_slot: empty round window");
    if (worst_tx < 0) throw std::invalid_argument("tx_start_slot: negative slot count");
    double round_seconds = cfg.tti * static_cast<double>(round_end - round_start);
    long long tau;
    if (sojourn_bound < round_seconds)
        tau = round_start + static_cast<long long>(std::floor(sojourn_bound / cfg.tti)) - worst_tx;
    else
        tau = round_end - worst_tx;
    if (clamped) *clamped = false;
    if (tau < round_start) {
        if (!allow_clamp)
            throw InfeasibleWindow("tx_start_slot: transmission window precedes round start");
        if (clamped) *clamped = true;
        tau = round_start;
    }
    return tau;
}

double worst_snr_percentile(double distance, double power_w, const radio::RadioConfig& cfg,
                            double percentile, int draws, Rng& rng) {
    if (draws < 1) throw std::invalid_argument("worst_snr_percentile: no draws");
    std::vector<double> snrs(static_cast<std::size_t>(draws));
    for (auto& s : snrs)
        s = radio::uplink_snr(power_w, radio::sample_channel_gain(distance, cfg, rng), cfg);
    std::sort(snrs.begin(), snrs.end());
    double rank = percentile / 100.0 * (draws - 1);
    auto lo = static_cast<std::size_t>(std::floor(rank));
    auto hi = std::min(lo + 1, snrs.size() - 1);
    double frac = rank - static_cast<double>(lo);
    return snrs[lo] + frac * (snrs[hi] - snrs[lo]);
}

}  // namespace vefl::cost
