#pragma once

#include "gk/sets.hpp"

namespace gk {

/// Hidden rate-of-spread field sigma(p) with a known global bound. The
/// controllers never see the field itself, only sigma_max.
struct RosField {
    std::function<double(const Vec2&)> fn;
    double sigma_max = 0.0;

    double operator()(const Vec2& p) const { return fn(p); }

    static RosField constant(double c);
    /// Seeded smooth random field in [lo, hi], bilinear value noise with
    /// smoothstep weights over a coarse lattice covering `extent`.
    static RosField smooth_random(const Grid2& extent, uint64_t seed, double lo,
                                  double hi, int lattice = 9);
};

/// Ground-truth fire state: level-set function phi (signed distance, phi <= 0
/// burning) evolved under dphi/dt + sigma(p) |grad phi| = 0.
struct FireField {
    Grid2 grid;
    std::vector<double> phi;
    RosField sigma;
    double t = 0.0;
    int reinit_every = 20;
    int steps_since_reinit = 0;
};

/// Circular initial fire: exact signed distance to the circle of radius r0.
FireField make_circular_fire(const Grid2& grid, const Vec2& center, double r0,
                             RosField sigma, double t0 = 0.0);

/// One first-order Godunov upwind step of duration dt, with periodic
/// redistancing back to a signed distance function. Requires the CFL bound
/// sigma_max * dt <= cell / 2.
FireField step_levelset(const FireField& field, double dt);

/// Rebuild phi as a signed distance to the current zero level set (sub-cell
/// front anchors propagated by a generalized distance transform). Exposed for
/// tests; step_levelset calls it on its own cadence.
void reinitialize(FireField& field);

struct ThermalSensor {
    double range = 1000.0;  // meters; infinity = full coverage (test-only)
    double rate_hz = 0.1;
};

/// Bitmask measurement: cells within sensor range are classified
/// burning (phi <= 0) or free; everything else is Unknown. Stamped with t.
Bitmask sense(const FireField& field, const ThermalSensor& sensor,
              const Vec2& vehicle_pos, double t);

/// Bilinear phi at p, positive = safe. Out-of-grid queries are an error.
double true_distance_to_fire(const FireField& field, const Vec2& p);

/// Snapshot of the truth field in the shared grid format (spread_max carries
/// the sigma bound), for serialization and inspection.
SdfForecastSet fire_snapshot(const FireField& field);

}  // namespace gk
