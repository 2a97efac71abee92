#include "vefl/mobility.hpp"

#include <algorithm>
#include <cmath>

namespace vefl::mobility {

double idm_acceleration(const VehicleState& state, const IdmParams& params) {
    double free_term = params.a_max * (1.0 - std::pow(state.speed / params.u_max, 4.0));
    if (!std::isfinite(state.gap_to_leader)) return free_term;
    double s_star = params.s_saf + state.speed * params.t_headway +
                    state.speed * state.speed_delta_to_leader /
                        (2.0 * std::sqrt(params.a_max * params.b_comf));
    double ratio = s_star / state.gap_to_leader;
    return free_term - params.a_max * ratio * ratio;
}

void step_mobility(Fleet& fleet, const IdmParams& params, const RoadConfig& road,
                   const CoverageGeometry& geom, double dt, long slot, Rng& rng) {
    auto& vs = fleet.vehicles;

    // Refresh leader links (vehicles are kept ordered by lane, decreasing x).
    for (std::size_t i = 0; i < vs.size(); ++i) {
        VehicleState& v = vs[i];
        if (i > 0 && vs[i - 1].lane_id == v.lane_id && !vs[i - 1].departed) {
            v.gap_to_leader = vs[i - 1].x - v.x;
            v.speed_delta_to_leader = v.speed - vs[i - 1].speed;
        } else {
            v.gap_to_leader = kInf;
            v.speed_delta_to_leader = 0.0;
        }
    }

    for (VehicleState& v : vs) {
        if (v.departed) continue;
        v.accel = idm_acceleration(v, params);
        v.x += v.speed * dt;
        v.speed = std::clamp(v.speed + v.accel * dt, 0.0, params.u_max);
        if (v.x * v.x + v.y * v.y >= geom.radius * geom.radius) v.departed = true;
    }

    // Poisson arrivals per lane at the left intersection of the lane chord.
    for (std::size_t lane = 0; lane < road.lane_offsets.size(); ++lane) {
        double y = road.lane_offsets[lane];
        if (std::fabs(y) >= geom.radius) continue;
        std::poisson_distribution<int> arrivals(road.arrival_rate * dt);
        int n_new = arrivals(rng);
        double x_entry = -std::sqrt(geom.radius * geom.radius - y * y) + 1e-3;
        for (int a = 0; a < n_new; ++a) {
            // Find the rearmost active vehicle in this lane.
            double rear_x = kInf;
            for (const VehicleState& v : vs)
                if (!v.departed && v.lane_id == static_cast<int>(lane)) rear_x = std::min(rear_x, v.x);
            if (rear_x - x_entry < road.min_spawn_gap) continue;
            VehicleState nv;
            nv.id = fleet.next_id++;
            nv.x = x_entry;
            nv.y = y;
            nv.speed = road.entry_speed_frac * params.u_max;
            nv.lane_id = static_cast<int>(lane);
            nv.entry_slot = slot;
            vs.push_back(nv);
        }
    }

    std::stable_sort(vs.begin(), vs.end(), [](const VehicleState& a, const VehicleState& b) {
        if (a.lane_id != b.lane_id) return a.lane_id < b.lane_id;
        return a.x > b.x;
    });
}

std::array<double, 4> coverage_boundary_distances(double x, double y,
                                                  const CoverageGeometry& geom) {
    double r2 = geom.radius * geom.radius;
    if (x * x + y * y >= r2) throw PositionOutsideCoverage("position outside coverage circle");
    double bx = std::sqrt(r2 - y * y);
    double by = std::sqrt(r2 - x * x);
    return {std::fabs(x - bx), std::fabs(x + bx), std::fabs(y - by), std::fabs(y + by)};
}

double sojourn_lower_bound(double x, double y, const CoverageGeometry& geom, double u_max) {
    auto d = coverage_boundary_distances(x, y, geom);
    return *std::min_element(d.begin(), d.end()) / u_max;
}

}  // namespace vefl::mobility
