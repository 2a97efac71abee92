#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vefl/radio.hpp"

using namespace vefl;
using namespace vefl::radio;

TEST_CASE("mean channel gain decreases with distance") {
    RadioConfig cfg;
    double m1 = 0.0, m2 = 0.0;
    Rng rng = make_rng(2, "pl");
    for (int i = 0; i < 10000; ++i) {
        m1 += sample_channel_gain(100.0, cfg, rng);
        m2 += sample_channel_gain(400.0, cfg, rng);
    }
    CHECK(m1 / 10000.0 > m2 / 10000.0);
    // The deterministic pathloss component follows the configured exponent.
    double ratio = pathloss_gain(100.0, cfg) / pathloss_gain(400.0, cfg);
    CHECK(ratio == doctest::Approx(std::pow(4.0, cfg.pathloss_exponent)).epsilon(1e-9));
}

TEST_CASE("per-antenna vector has the configured length") {
    RadioConfig cfg;
    cfg.antennas = 4;
    Rng rng = make_rng(2, "shape");
    auto h = sample_channel(250.0, cfg, rng);
    CHECK(h.size() == 4);
    cfg.antennas = 7;
    auto h7 = sample_channel(250.0, cfg, rng);
    CHECK(h7.size() == 7);
}

TEST_CASE("identical seeds replay identical realizations") {
    RadioConfig cfg;
    Rng a = make_rng(77, "replay");
    Rng b = make_rng(77, "replay");
    std::vector<double> d = {120.0, 260.0, 410.0};
    auto ca = sample_channels(d, cfg, a);
    auto cb = sample_channels(d, cfg, b);
    CHECK(ca.gains == cb.gains);
}

TEST_CASE("uplink SNR arithmetic") {
    RadioConfig cfg;
    cfg.prb_bandwidth = 1.8e6;
    cfg.noise_power_density = 1e-13 / 1.8e6;  // noise over one pRB = 1e-13 W
    CHECK(uplink_snr(0.0, 1e-9, cfg) == 0.0);
    CHECK(uplink_snr(0.2, 1e-9, cfg) == doctest::Approx(2000.0).epsilon(1e-9));
    CHECK(uplink_snr(0.4, 1e-9, cfg) == doctest::Approx(4000.0).epsilon(1e-9));
}

TEST_CASE("rate for unit SNR on one pRB") {
    RadioConfig cfg;
    double noise = cfg.noise_over_prb();
    // One pRB with P*g/noise = 1 -> omega * (1 - upsilon) * log2(2).
    Vec p = {0.1}, g = {noise / 0.1};
    double r = achievable_rate(p, g, cfg);
    CHECK(r == doctest::Approx(cfg.prb_bandwidth * (1.0 - cfg.overhead_fraction)).epsilon(1e-9));
}

TEST_CASE("rate sums over pRBs") {
    RadioConfig cfg;
    double noise = cfg.noise_over_prb();
    const int z = cfg.prb_count;
    // SNR = 3 on every pRB -> log2(4) = 2 each.
    Vec p(static_cast<std::size_t>(z), 0.1), g(static_cast<std::size_t>(z), 3.0 * noise / 0.1);
    double r = achievable_rate(p, g, cfg);
    CHECK(r == doctest::Approx(cfg.prb_bandwidth * (1.0 - cfg.overhead_fraction) * 2.0 * z)
                   .epsilon(1e-9));

    // Additivity: rate of the whole equals the sum over single-pRB calls.
    double sum = 0.0;
    for (int i = 0; i < z; ++i) {
        Vec pi = {p[static_cast<std::size_t>(i)]}, gi = {g[static_cast<std::size_t>(i)]};
        sum += achievable_rate(pi, gi, cfg);
    }
    CHECK(r == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("rate is monotone in every per-pRB power") {
    RadioConfig cfg;
    Rng rng = make_rng(12, "mono");
    std::uniform_real_distribution<double> uni(0.0, 0.2);
    for (int trial = 0; trial < 100; ++trial) {
        Vec p(3), g(3);
        for (int i = 0; i < 3; ++i) {
            p[static_cast<std::size_t>(i)] = uni(rng);
            g[static_cast<std::size_t>(i)] = 1e-12 * (1.0 + uni(rng));
        }
        double base = achievable_rate(p, g, cfg);
        for (int i = 0; i < 3; ++i) {
            Vec p2 = p;
            p2[static_cast<std::size_t>(i)] += 0.01;
            CHECK(achievable_rate(p2, g, cfg) >= base - 1e-12);
        }
    }
}

TEST_CASE("doubled overhead scales the rate by 12/13") {
    RadioConfig one;
    RadioConfig two;
    two.overhead_fraction = 2.0 / 14.0;
    REQUIRE(one.valid());
    REQUIRE(two.valid());
    Vec p = {0.15, 0.05}, g = {3e-12, 7e-13};
    double r1 = achievable_rate(p, g, one);
    double r2 = achievable_rate(p, g, two);
    CHECK(r2 == doctest::Approx(r1 * 12.0 / 13.0).epsilon(1e-12));
}

TEST_CASE("invalid overhead fraction is rejected by validation") {
    RadioConfig cfg;
    cfg.overhead_fraction = 0.25;
    CHECK(!cfg.valid());
}

TEST_CASE("dimension mismatch raises") {
    RadioConfig cfg;
    Vec p = {0.1, 0.1}, g = {1e-12};
    CHECK_THROWS_AS(achievable_rate(p, g, cfg), DimensionMismatch);
}

TEST_CASE("zero power yields zero SNR and zero rate") {
    RadioConfig cfg;
    Vec p(4, 0.0), g(4, 1e-11);
    CHECK(achievable_rate(p, g, cfg) == 0.0);
    CHECK(uplink_snr(0.0, 1e-11, cfg) == 0.0);
}
