#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vefl/mobility.hpp"

using namespace vefl;
using namespace vefl::mobility;

TEST_CASE("acceleration from rest on a free road is maximal") {
    IdmParams p;
    VehicleState v;
    v.speed = 0.0;
    CHECK(idm_acceleration(v, p) == doctest::Approx(p.a_max).epsilon(1e-12));
}

TEST_CASE("acceleration at top speed on a free road is zero") {
    IdmParams p;
    VehicleState v;
    v.speed = p.u_max;
    CHECK(idm_acceleration(v, p) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("car-following acceleration matches the hand-evaluated value") {
    IdmParams p;  // a_max=2, b_comf=3, s_saf=2, t_headway=1.5, u_max=20.12
    VehicleState v;
    v.speed = 10.0;
    v.gap_to_leader = 20.0;
    v.speed_delta_to_leader = 0.0;
    // desired gap = 2 + 10*1.5 + 0 = 17
    double expected = 2.0 * (1.0 - std::pow(10.0 / p.u_max, 4.0)) -
                      2.0 * (17.0 / 20.0) * (17.0 / 20.0);
    CHECK(idm_acceleration(v, p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("acceleration is non-increasing in speed on a free road") {
    IdmParams p;
    double prev = kInf;
    for (double u = 0.0; u <= p.u_max; u += 0.5) {
        VehicleState v;
        v.speed = u;
        double a = idm_acceleration(v, p);
        CHECK(a <= prev + 1e-12);
        prev = a;
    }
}

TEST_CASE("acceleration is non-increasing as the gap shrinks") {
    IdmParams p;
    double prev = -kInf;
    for (double gap = 5.0; gap <= 100.0; gap += 5.0) {
        VehicleState v;
        v.speed = 12.0;
        v.gap_to_leader = gap;
        double a = idm_acceleration(v, p);
        CHECK(a >= prev - 1e-12);  // larger gap, no harder braking
        prev = a;
    }
}

TEST_CASE("stepping an empty fleet stays empty without arrivals") {
    Fleet fleet;
    IdmParams p;
    RoadConfig road;
    road.arrival_rate = 0.0;
    CoverageGeometry geom;
    Rng rng = make_rng(1, "empty");
    step_mobility(fleet, p, road, geom, 0.1, 0, rng);
    CHECK(fleet.vehicles.empty());
}

TEST_CASE("a lone vehicle at top speed advances linearly") {
    Fleet fleet;
    IdmParams p;
    RoadConfig road;
    road.arrival_rate = 0.0;
    CoverageGeometry geom;
    VehicleState v;
    v.id = 1;
    v.x = -100.0;
    v.speed = p.u_max;
    fleet.vehicles.push_back(v);
    Rng rng = make_rng(1, "lone");
    step_mobility(fleet, p, road, geom, 0.1, 0, rng);
    CHECK(fleet.vehicles[0].x == doctest::Approx(-100.0 + p.u_max * 0.1).epsilon(1e-12));
    CHECK(fleet.vehicles[0].speed == doctest::Approx(p.u_max).epsilon(1e-12));
}

namespace {

// Reference integration of the same two-vehicle dynamics at a much finer
// step, leader pinned at constant speed.
std::pair<double, double> fine_follower(double dt, int coarse_steps, double gap0, double u0,
                                        double leader_u, const IdmParams& p) {
    double fine = dt / 100.0;
    double gap = gap0, u = u0;
    for (int s = 0; s < coarse_steps * 100; ++s) {
        VehicleState f;
        f.speed = u;
        f.gap_to_leader = gap;
        f.speed_delta_to_leader = u - leader_u;
        double a = idm_acceleration(f, p);
        gap += (leader_u - u) * fine;
        u = std::clamp(u + a * fine, 0.0, p.u_max);
    }
    return {gap, u};
}

}  // namespace

TEST_CASE("two-vehicle platoon tracks a fine-step reference") {
    IdmParams p;
    RoadConfig road;
    road.arrival_rate = 0.0;
    CoverageGeometry geom;
    geom.radius = 5000.0;  // keep both inside for the whole horizon

    const double dt = 0.1;
    const double leader_u = 14.0, gap0 = 40.0, u0 = 8.0;
    Fleet fleet;
    VehicleState lead;
    lead.id = 1;
    lead.x = -1000.0 + gap0;
    lead.speed = leader_u;
    VehicleState foll;
    foll.id = 2;
    foll.x = -1000.0;
    foll.speed = u0;
    fleet.vehicles = {lead, foll};

    Rng rng = make_rng(1, "platoon");
    for (int s = 0; s < 300; ++s) {
        // Pin the leader to constant speed so the reference ODE is scalar.
        fleet.vehicles[0].speed = leader_u;
        step_mobility(fleet, p, road, geom, dt, s, rng);
    }
    double gap = fleet.vehicles[0].x - fleet.vehicles[1].x;
    auto [ref_gap, ref_u] = fine_follower(dt, 300, gap0, u0, leader_u, p);
    CHECK(std::fabs(gap - ref_gap) <= 0.35);
    CHECK(std::fabs(fleet.vehicles[1].speed - ref_u) <= 0.1);
    // After 10 s the follower should be near its desired gap at the leader's
    // speed: s_saf + u * headway.
    double desired = p.s_saf + fleet.vehicles[1].speed * p.t_headway;
    CHECK(std::fabs(gap - desired) <= 6.0);
}

TEST_CASE("boundary distances at the center") {
    CoverageGeometry geom;
    auto d = coverage_boundary_distances(0.0, 0.0, geom);
    for (double v : d) CHECK(v == doctest::Approx(500.0).epsilon(1e-12));
}

TEST_CASE("boundary distances on the x-axis") {
    CoverageGeometry geom;
    auto d = coverage_boundary_distances(300.0, 0.0, geom);
    CHECK(d[0] == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(800.0).epsilon(1e-12));
    // Vertical boundary at x=300 sits at y = +-sqrt(500^2-300^2) = +-400.
    CHECK(d[2] == doctest::Approx(400.0).epsilon(1e-12));
    CHECK(d[3] == doctest::Approx(400.0).epsilon(1e-12));
}

TEST_CASE("boundary distances at a 3-4-5 point") {
    // (300, 400) lies exactly on the circle; probe just inside it.
    CoverageGeometry geom;
    auto d = coverage_boundary_distances(300.0 - 1e-7, 400.0 - 1e-7, geom);
    CHECK(std::fabs(d[0] - 0.0) <= 1e-3);
    CHECK(std::fabs(d[1] - 600.0) <= 1e-3);
    CHECK(std::fabs(d[2] - 0.0) <= 1e-3);
    CHECK(std::fabs(d[3] - 800.0) <= 1e-3);
}

TEST_CASE("positions on or outside the circle are rejected") {
    CoverageGeometry geom;
    CHECK_THROWS_AS(coverage_boundary_distances(500.0, 0.0, geom), PositionOutsideCoverage);
    CHECK_THROWS_AS(coverage_boundary_distances(400.0, 301.0, geom), PositionOutsideCoverage);
    CHECK_THROWS_AS(sojourn_lower_bound(0.0, 500.0, geom, 20.12), PositionOutsideCoverage);
}

TEST_CASE("horizontal and vertical distances sum to their chord lengths") {
    CoverageGeometry geom;
    Rng rng = make_rng(9, "chord");
    std::uniform_real_distribution<double> uni(-0.7, 0.7);
    for (int i = 0; i < 200; ++i) {
        double x = uni(rng) * geom.radius, y = uni(rng) * geom.radius;
        auto d = coverage_boundary_distances(x, y, geom);
        double chord_x = 2.0 * std::sqrt(geom.radius * geom.radius - y * y);
        double chord_y = 2.0 * std::sqrt(geom.radius * geom.radius - x * x);
        CHECK(d[0] + d[1] == doctest::Approx(chord_x).epsilon(1e-10));
        CHECK(d[2] + d[3] == doctest::Approx(chord_y).epsilon(1e-10));
    }
}

TEST_CASE("sojourn bound examples") {
    CoverageGeometry geom;
    CHECK(sojourn_lower_bound(0.0, 0.0, geom, 20.12) ==
          doctest::Approx(500.0 / 20.12).epsilon(1e-12));
    CHECK(sojourn_lower_bound(0.0, 0.0, geom, 0.45) ==
          doctest::Approx(500.0 / 0.45).epsilon(1e-12));
    // A point whose nearest boundary distance is 0 gives a 0 bound.
    CHECK(sojourn_lower_bound(300.0 - 1e-9, 400.0 - 1e-9, geom, 20.12) ==
          doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("sojourn bound is sound over random trajectories") {
    CoverageGeometry geom;
    RoadConfig road;
    road.arrival_rate = 0.0;
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        IdmParams p;
        p.u_max = (seed % 3 == 0) ? 11.18 : (seed % 3 == 1 ? 20.12 : 26.82);
        Rng rng = make_rng(seed, "traj");
        std::uniform_real_distribution<double> xs(-0.9, 0.2);
        Fleet fleet;
        for (int i = 0; i < 30; ++i) {
            VehicleState v;
            v.id = static_cast<std::uint64_t>(i + 1);
            v.x = xs(rng) * geom.radius;
            v.y = (i % 2 == 0) ? 0.0 : 3.5;
            v.speed = std::uniform_real_distribution<double>(0.3, 1.0)(rng) * p.u_max;
            fleet.vehicles.push_back(v);
        }
        std::stable_sort(fleet.vehicles.begin(), fleet.vehicles.end(),
                         [](const VehicleState& a, const VehicleState& b) {
                             return a.lane_id != b.lane_id ? a.lane_id < b.lane_id : a.x > b.x;
                         });
        const double dt = 0.1;
        // Bound recorded at t=0 for every vehicle; compare against realized
        // departure time.
        std::vector<double> bounds;
        for (const auto& v : fleet.vehicles)
            bounds.push_back(sojourn_lower_bound(v.x, v.y, geom, p.u_max));
        std::vector<double> depart(fleet.vehicles.size(), -1.0);
        for (int s = 0; s < 3000; ++s) {
            step_mobility(fleet, p, road, geom, dt, s, rng);
            for (std::size_t i = 0; i < fleet.vehicles.size(); ++i)
                if (fleet.vehicles[i].departed && depart[i] < 0)
                    depart[i] = (s + 1) * dt;
        }
        for (std::size_t i = 0; i < bounds.size(); ++i) {
            if (depart[i] < 0) continue;  // never left within the horizon
            CHECK(bounds[i] <= depart[i] + 1e-9);
            ++checked;
        }
    }
    CHECK(checked >= 1000);
}

TEST_CASE("vehicle count is conserved modulo arrivals and departures") {
    CoverageGeometry geom;
    IdmParams p;
    RoadConfig road;
    road.arrival_rate = 0.5;
    Fleet fleet;
    VehicleState v;
    v.id = 1;
    v.x = -100.0;
    v.speed = 10.0;
    fleet.vehicles.push_back(v);
    fleet.next_id = 2;
    Rng rng = make_rng(4, "conserve");
    std::size_t before = fleet.vehicles.size();
    for (int s = 0; s < 500; ++s) {
        std::size_t pre = fleet.vehicles.size();
        long departed_pre = std::count_if(fleet.vehicles.begin(), fleet.vehicles.end(),
                                          [](const VehicleState& w) { return w.departed; });
        step_mobility(fleet, p, road, geom, 0.1, s, rng);
        long departed_post = std::count_if(fleet.vehicles.begin(), fleet.vehicles.end(),
                                           [](const VehicleState& w) { return w.departed; });
        std::size_t arrivals = fleet.vehicles.size() - pre;
        // Active count changes only by arrivals minus new departures.
        CHECK(static_cast<long>(fleet.vehicles.size()) - departed_post ==
              static_cast<long>(pre) - departed_pre + static_cast<long>(arrivals) -
                  (departed_post - departed_pre));
    }
    CHECK(fleet.vehicles.size() >= before);
}
