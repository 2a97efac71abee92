#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vefl/common.hpp"

namespace vefl::mobility {

struct IdmParams {
    double u_max = 20.12;     // m/s, maximum road velocity
    double a_max = 2.0;       // m/s^2, maximum acceleration
    double b_comf = 3.0;      // m/s^2, comfortable braking deceleration
    double s_saf = 2.0;       // m, safety distance
    double t_headway = 1.5;   // s, desired time headway

    bool valid() const {
        return u_max > 0 && a_max > 0 && b_comf > 0 && s_saf > 0 && t_headway > 0;
    }
};

struct VehicleState {
    std::uint64_t id = 0;
    double x = 0.0;                       // m
    double y = 0.0;                       // m
    double speed = 0.0;                   // m/s, >= 0
    double accel = 0.0;                   // m/s^2
    double gap_to_leader = kInf;          // m, +inf when no leader
    double speed_delta_to_leader = 0.0;   // m/s, own speed minus leader's
    int lane_id = 0;
    long entry_slot = 0;
    bool departed = false;
};

struct CoverageGeometry {
    double radius = 500.0;  // m, circle centered at the origin
};

struct PositionOutsideCoverage : std::domain_error {
    using std::domain_error::domain_error;
};

// Straight multi-lane road in the +x direction; lane v gives the y offset.
struct RoadConfig {
    std::vector<double> lane_offsets = {0.0};  // m
    double arrival_rate = 0.1;                 // vehicles/s per lane (Poisson)
    double entry_speed_frac = 0.8;             // entry speed = frac * u_max
    double min_spawn_gap = 10.0;               // m, suppress arrivals closer than this
};

double idm_acceleration(const VehicleState& state, const IdmParams& params);

// One explicit-Euler step for the whole fleet. Vehicles past the coverage
// boundary are flagged departed; arrivals are spawned per lane from the rng.
struct Fleet {
    std::vector<VehicleState> vehicles;  // ordered by lane then decreasing x
    std::uint64_t next_id = 1;
};

void step_mobility(Fleet& fleet, const IdmParams& params, const RoadConfig& road,
                   const CoverageGeometry& geom, double dt, long slot, Rng& rng);

// |x -+ sqrt(r^2-y^2)| and |y -+ sqrt(r^2-x^2)|: {x1, x2, y1, y2}.
std::array<double, 4> coverage_boundary_distances(double x, double y,
                                                  const CoverageGeometry& geom);

double sojourn_lower_bound(double x, double y, const CoverageGeometry& geom, double u_max);

}  // namespace vefl::mobility
