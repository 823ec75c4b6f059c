#include "gk/fire_sim.hpp"
#include <cstdio>

#include <doctest.h>

using namespace gk;

namespace {

Grid2 arena(double half, double cell) {
    int n = static_cast<int>(std::llround(2.0 * half / cell)) + 1;
    return Grid2{Vec2(-half, -half), cell, n, n};
}

// mean radius of the zero level set, from sign changes along grid rows
double front_radius(const FireField& f) {
    const Grid2& g = f.grid;
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            double a = f.phi[g.idx(i, j)];
            double b = f.phi[g.idx(i + 1, j)];
            if (a * b < 0.0) {
                double frac = a / (a - b);
                Vec2 p = g.pos(i, j) + Vec2(frac * g.cell, 0.0);
                sum += p.norm();
                ++count;
            }
        }
    REQUIRE(count > 0);
    return sum / count;
}

}  // namespace

TEST_CASE("frozen front: sigma = 0 leaves phi bitwise fixed") {
    FireField f = make_circular_fire(arena(500, 10), Vec2::Zero(), 200.0,
                                     RosField::constant(0.0));
    std::vector<double> before = f.phi;
    for (int i = 0; i < 50; ++i) f = step_levelset(f, 1.0);
    CHECK(f.phi == before);
    CHECK(f.t == doctest::Approx(50.0));
}

TEST_CASE("cfl violation is a config error") {
    FireField f = make_circular_fire(arena(200, 10), Vec2::Zero(), 50.0,
                                     RosField::constant(2.0));
    CHECK_THROWS_AS(step_levelset(f, 4.0), std::invalid_argument);  // 2*4 > 10/2
}

TEST_CASE("constant sigma circular front expands at the analytic rate") {
    const double r0 = 300.0, c = 1.0, T = 300.0;
    FireField f = make_circular_fire(arena(1500, 10), Vec2::Zero(), r0,
                                     RosField::constant(c));
    for (double t = 0.0; t < T; t += 1.0) f = step_levelset(f, 1.0);
    CHECK(std::abs(front_radius(f) - (r0 + c * T)) <= 20.0);  // two cells
}

TEST_CASE("comparison principle: fast sector outruns slow sector") {
    RosField sector{[](const Vec2& p) { return p.x() >= 0.0 ? 1.8 : 0.4; }, 1.8};
    FireField f = make_circular_fire(arena(1200, 10), Vec2::Zero(), 200.0, sector);
    for (double t = 0.0; t < 240.0; t += 1.0) f = step_levelset(f, 1.0);
    // radius along +x vs -x
    auto radius_along = [&](double dir) {
        for (double r = 1150.0; r > 0.0; r -= 1.0)
            if (true_distance_to_fire(f, Vec2(dir * r, 0.0)) <= 0.0) return r;
        return 0.0;
    };
    double fast = radius_along(1.0), slow = radius_along(-1.0);
    CHECK(fast > slow + 100.0);
    CHECK(fast == doctest::Approx(200.0 + 1.8 * 240.0).epsilon(0.1));
    CHECK(slow == doctest::Approx(200.0 + 0.4 * 240.0).epsilon(0.1));
}

TEST_CASE("burning region never shrinks and reinit preserves the front") {
    FireField f = make_circular_fire(arena(800, 10), Vec2::Zero(), 250.0,
                                     RosField::smooth_random(arena(800, 10), 42, 0.4, 2.0));
    for (int step = 0; step < 60; ++step) {
        FireField next = step_levelset(f, 1.0);
        bool reinit_happened = next.steps_since_reinit == 0;
        for (int c = 0; c < f.grid.size(); ++c) {
            if (!reinit_happened) CHECK(next.phi[c] <= f.phi[c] + 1e-12);
            // sign flips only happen within a cell of the front
            if (std::abs(f.phi[c]) > f.grid.cell + 2.1)
                CHECK((next.phi[c] < 0.0) == (f.phi[c] < 0.0));
        }
        f = next;
    }
}

TEST_CASE("thermal sensing classifies range and fire correctly") {
    FireField f = make_circular_fire(arena(800, 10), Vec2::Zero(), 200.0,
                                     RosField::constant(1.0));
    ThermalSensor sensor{300.0, 0.1};

    // vehicle far from any fire: everything sensed is free
    Bitmask far = sense(f, sensor, Vec2(700.0, 700.0), 0.0);
    for (int c = 0; c < f.grid.size(); ++c) {
        if (far.cells[c] == CellState::Unknown) continue;
        CHECK(far.cells[c] == CellState::Free);
    }
    CHECK(far.t_meas == 0.0);

    // vehicle on the front: both burning and free cells in range
    Bitmask on_front = sense(f, sensor, Vec2(200.0, 0.0), 5.0);
    int burning = 0, free = 0;
    for (int c = 0; c < f.grid.size(); ++c) {
        if (on_front.cells[c] == CellState::Burning) ++burning;
        if (on_front.cells[c] == CellState::Free) ++free;
    }
    CHECK(burning > 0);
    CHECK(free > 0);

    // full-coverage sensor reproduces the exact sublevel set
    ThermalSensor full{std::numeric_limits<double>::infinity(), 0.1};
    Bitmask all = sense(f, full, Vec2::Zero(), 0.0);
    for (int c = 0; c < f.grid.size(); ++c) {
        CHECK(all.cells[c] != CellState::Unknown);
        CHECK((all.cells[c] == CellState::Burning) == (f.phi[c] <= 0.0));
    }
}

TEST_CASE("true distance to fire: boundary, 16 km perimeter geometry, sign") {
    const double r0 = 16000.0 / (2.0 * M_PI);  // 2546.48 m
    FireField f = make_circular_fire(arena(3200, 10), Vec2::Zero(), r0,
                                     RosField::constant(1.0));
    CHECK(std::abs(true_distance_to_fire(f, Vec2(r0, 0.0))) <= 10.0);
    CHECK(true_distance_to_fire(f, Vec2(3000.0, 0.0)) ==
          doctest::Approx(3000.0 - r0).epsilon(0.01));
    CHECK(true_distance_to_fire(f, Vec2(1000.0, 0.0)) < 0.0);
    CHECK_THROWS_AS(true_distance_to_fire(f, Vec2(5000.0, 0.0)), std::out_of_range);
}

TEST_CASE("truth-vs-forecast consistency: perceived sets stay inside the true safe set") {
    // Assumption-1 validation at simulation level: a perceived set built from
    // a sensed bitmask with spread_max >= sup sigma never certifies a point
    // the evolving truth burns. One query pad absorbs bilinear and Godunov
    // discretization.
    Grid2 g = arena(1000, 10);
    FireField f = make_circular_fire(g, Vec2::Zero(), 300.0,
                                     RosField::smooth_random(g, 7, 0.3, 1.9));
    ThermalSensor sensor{1000.0, 0.1};
    Bitmask mask = sense(f, sensor, Vec2(450.0, 0.0), 0.0);
    SdfForecastSet B = build_sdf_from_bitmask(mask, 2.0);  // sup sigma = 1.9

    std::mt19937_64 rng(31);
    for (double t = 0.0; t <= 120.0; t += 1.0) {
        if (t > 0.0) f = step_levelset(f, 1.0);
        for (int s = 0; s < 40; ++s) {
            Vec2 p(-950 + 1900 * uniform01(rng), -950 + 1900 * uniform01(rng));
            if (B.contains(p, t, B.query_pad() + 1.0))
                CHECK(true_distance_to_fire(f, p) >= 0.0);
        }
    }
}

TEST_CASE("fire snapshots round trip through the shared grid format") {
    FireField f = make_circular_fire(arena(300, 10), Vec2::Zero(), 100.0,
                                     RosField::constant(1.5));
    for (int i = 0; i < 10; ++i) f = step_levelset(f, 1.0);
    SdfForecastSet snap = fire_snapshot(f);
    CHECK(snap.t_meas() == f.t);
    CHECK(snap.spread_max() == 1.5);
    snap.write("/tmp/gk_fire_snap.txt");
    SdfForecastSet back = SdfForecastSet::read("/tmp/gk_fire_snap.txt");
    for (int c = 0; c < f.grid.size(); ++c) CHECK(back.phi0()[c] == f.phi[c]);
    std::remove("/tmp/gk_fire_snap.txt");
}

TEST_CASE("all-free sensing gives a range floor inside the sensed region") {
    // no fire anywhere near the sensor: the perceived distance inside the
    // sensed disk is at least the distance to its unknown rim
    FireField f = make_circular_fire(arena(2000, 10), Vec2(1900.0, 1900.0), 60.0,
                                     RosField::constant(1.0));
    ThermalSensor sensor{1000.0, 0.1};
    Vec2 vehicle(-800.0, -800.0);  // ~3.9 km from the fire
    Bitmask mask = sense(f, sensor, vehicle, 0.0);
    SdfForecastSet B = build_sdf_from_bitmask(mask, 2.0);
    std::mt19937_64 rng(77);
    for (int s = 0; s < 300; ++s) {
        Vec2 p = vehicle + DisturbanceSpec::sample_in_ball(rng, 2, 950.0).head<2>();
        double floor = 1000.0 - (p - vehicle).norm() - 2.0 * f.grid.cell * M_SQRT2;
        CHECK(B.signed_distance(p, 0.0) >= floor);
    }
}
