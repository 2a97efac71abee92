#include "vefl/radio.hpp"

#include <cmath>
#include <random>

namespace vefl::radio {

double pathloss_gain(double distance, const RadioConfig& cfg) {
    double d = std::max(distance, 1.0);  // reference clamp below 1 m
    double gain_db = cfg.pathloss_ref_gain_db - 10.0 * cfg.pathloss_exponent * std::log10(d);
    return std::pow(10.0, gain_db / 10.0);
}

std::vector<std::complex<double>> sample_channel(double distance, const RadioConfig& cfg,
                                                 Rng& rng) {
    std::normal_distribution<double> shadow(0.0, cfg.shadowing_sigma_db);
    double large_scale = pathloss_gain(distance, cfg) * std::pow(10.0, shadow(rng) / 10.0);
    double amp = std::sqrt(large_scale);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));  // CN(0,1) components
    std::vector<std::complex<double>> h(static_cast<std::size_t>(cfg.antennas));
    for (auto& c : h) c = amp * std::complex<double>(gauss(rng), gauss(rng));
    return h;
}

double sample_channel_gain(double distance, const RadioConfig& cfg, Rng& rng) {
    double g = 0.0;
    for (const auto& c : sample_channel(distance, cfg, rng)) g += std::norm(c);
    return g;
}

ChannelRealization sample_channels(const std::vector<double>& distances, const RadioConfig& cfg,
                                   Rng& rng) {
    ChannelRealization out;
    out.n_cvs = static_cast<int>(distances.size());
    out.n_prbs = cfg.prb_count;
    out.gains.resize(static_cast<std::size_t>(out.n_cvs) * out.n_prbs);
    for (int v = 0; v < out.n_cvs; ++v)
        for (int z = 0; z < out.n_prbs; ++z)
            out.gain(v, z) = sample_channel_gain(distances[static_cast<std::size_t>(v)], cfg, rng);
    return out;
}

double uplink_snr(double power_w, double gain, const RadioConfig& cfg) {
    if (power_w <= 0.0) return 0.0;
    return power_w * gain / cfg.noise_over_prb();
}

double achievable_rate(const std::vector<double>& per_prb_power,
                       const std::vector<double>& per_prb_gain, const RadioConfig& cfg) {
    if (per_prb_power.size() != per_prb_gain.size())
        throw DimensionMismatch("achievable_rate: power/gain length mismatch");
    double sum = 0.0;
    for (std::size_t z = 0; z < per_prb_power.size(); ++z)
        sum += std::log2(1.0 + uplink_snr(per_prb_power[z], per_prb_gain[z], cfg));
    return cfg.prb_bandwidth * (1.0 - cfg.overhead_fraction) * sum;
}

}  // namespace vefl::radio
