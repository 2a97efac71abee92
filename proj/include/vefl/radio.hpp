#pragma once

#include <complex>
#include <vector>

#include "vefl/common.hpp"

namespace vefl::radio {

struct RadioConfig {
    int prb_count = 10;                  // Z
    double prb_bandwidth = 1.8e6;        // omega, Hz
    int antennas = 4;                    // N
    double noise_power_density = 4e-20;  // varsigma^2, W/Hz
    double overhead_fraction = 1.0 / 14.0;  // upsilon in {1/14, 2/14}
    double tti = 5e-4;                   // kappa, s
    int numerology = 1;                  // n_bar
    double bwp_bandwidth = 18e6;         // W, Hz
    double pathloss_exponent = 3.5;      // UMa-like log-distance exponent
    double pathloss_ref_gain_db = -30.0; // gain at 1 m, dB
    double shadowing_sigma_db = 4.0;     // log-Normal shadowing std, dB

    bool valid() const {
        bool ov = std::fabs(overhead_fraction - 1.0 / 14.0) < 1e-12 ||
                  std::fabs(overhead_fraction - 2.0 / 14.0) < 1e-12;
        return prb_count >= 1 && antennas >= 1 && ov && tti > 0 && prb_bandwidth > 0;
    }

    double noise_over_prb() const { return prb_bandwidth * noise_power_density; }
};

// One block-fading realization: ||h||^2 per (cv, prb) for the scheduled set.
struct ChannelRealization {
    int n_cvs = 0;
    int n_prbs = 0;
    Vec gains;  // row-major (cv, prb), squared channel norms

    double gain(int cv, int prb) const { return gains[static_cast<std::size_t>(cv) * n_prbs + prb]; }
    double& gain(int cv, int prb) { return gains[static_cast<std::size_t>(cv) * n_prbs + prb]; }
};

// sqrt(psi) * rho * h_breve with i.i.d. CN(0,1) fast fading per antenna.
std::vector<std::complex<double>> sample_channel(double distance, const RadioConfig& cfg, Rng& rng);

// ||h||^2 for one (cv, prb) draw.
double sample_channel_gain(double distance, const RadioConfig& cfg, Rng& rng);

ChannelRealization sample_channels(const std::vector<double>& distances, const RadioConfig& cfg,
                                   Rng& rng);

double pathloss_gain(double distance, const RadioConfig& cfg);

// Gamma = P * ||h||^2 / (omega * varsigma^2); 0 at zero power.
double uplink_snr(double power_w, double gain, const RadioConfig& cfg);

// r_v = omega(1-upsilon) * sum_z log2(1+Gamma_z) over the powers actually
// allocated to this CV; bits/s. Zero when unscheduled (all powers zero).
double achievable_rate(const std::vector<double>& per_prb_power,
                       const std::vector<double>& per_prb_gain, const RadioConfig& cfg);

}  // namespace vefl::radio
