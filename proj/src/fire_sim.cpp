#include "gk/fire_sim.hpp"

#include <cmath>

namespace gk {

RosField RosField::constant(double c) {
    return RosField{[c](const Vec2&) { return c; }, c};
}

RosField RosField::smooth_random(const Grid2& extent, uint64_t seed, double lo,
                                 double hi, int lattice) {
    std::mt19937_64 rng(seed);
    auto values = std::make_shared<std::vector<double>>(lattice * lattice);
    for (double& v : *values) v = lo + uniform01(rng) * (hi - lo);
    Vec2 origin = extent.origin;
    double span_x = (extent.nx - 1) * extent.cell;
    double span_y = (extent.ny - 1) * extent.cell;
    int n = lattice;
    auto fn = [values, origin, span_x, span_y, n](const Vec2& p) {
        double sx = std::clamp((p.x() - origin.x()) / span_x, 0.0, 1.0) * (n - 1);
        double sy = std::clamp((p.y() - origin.y()) / span_y, 0.0, 1.0) * (n - 1);
        int i = std::min(static_cast<int>(sx), n - 2);
        int j = std::min(static_cast<int>(sy), n - 2);
        auto smooth = [](double a) { return a * a * (3.0 - 2.0 * a); };
        double ax = smooth(sx - i), ay = smooth(sy - j);
        const std::vector<double>& v = *values;
        double f00 = v[j * n + i], f10 = v[j * n + i + 1];
        double f01 = v[(j + 1) * n + i], f11 = v[(j + 1) * n + i + 1];
        return (1 - ax) * (1 - ay) * f00 + ax * (1 - ay) * f10 +
               (1 - ax) * ay * f01 + ax * ay * f11;
    };
    return RosField{fn, hi};
}

FireField make_circular_fire(const Grid2& grid, const Vec2& center, double r0,
                             RosField sigma, double t0) {
    FireField f;
    f.grid = grid;
    f.sigma = std::move(sigma);
    f.t = t0;
    f.phi.resize(grid.size());
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            f.phi[grid.idx(i, j)] = (grid.pos(i, j) - center).norm() - r0;
    return f;
}

void reinitialize(FireField& field) {
    const Grid2& g = field.grid;
    const std::vector<double>& phi = field.phi;
    std::vector<uint8_t> front(g.size(), 0);
    std::vector<double> anchor_sq(g.size(), 0.0);
    bool any_front = false;

    auto consider = [&](int c, double pc, int nbr) {
        double pn = phi[nbr];
        if (pc * pn < 0.0) {
            double d = g.cell * std::abs(pc) / (std::abs(pc) + std::abs(pn));
            if (!front[c] || d * d < anchor_sq[c]) anchor_sq[c] = d * d;
            front[c] = 1;
        }
    };
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            int c = g.idx(i, j);
            double pc = phi[c];
            if (pc == 0.0) {
                front[c] = 1;
                anchor_sq[c] = 0.0;
                any_front = true;
                continue;
            }
            if (i > 0) consider(c, pc, g.idx(i - 1, j));
            if (i + 1 < g.nx) consider(c, pc, g.idx(i + 1, j));
            if (j > 0) consider(c, pc, g.idx(i, j - 1));
            if (j + 1 < g.ny) consider(c, pc, g.idx(i, j + 1));
            if (front[c]) any_front = true;
        }
    }
    if (!any_front) return;  // uniformly signed field, nothing to anchor on

    std::vector<double> dist = distance_transform(g, front, anchor_sq);
    for (int c = 0; c < g.size(); ++c)
        field.phi[c] = (phi[c] < 0.0 ? -dist[c] : dist[c]);
    field.steps_since_reinit = 0;
}

FireField step_levelset(const FireField& field, double dt) {
    const Grid2& g = field.grid;
    if (!(field.sigma.sigma_max * dt <= g.cell / 2.0 + 1e-12))
        throw std::invalid_argument("step_levelset: CFL violated, need sigma_max*dt <= cell/2");

    FireField next = field;
    next.t = field.t + dt;
    const std::vector<double>& phi = field.phi;
    const double inv_cell = 1.0 / g.cell;
    double max_change = 0.0;

    // Godunov upwind for an outward-moving front (sigma >= 0).
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            int c = g.idx(i, j);
            double s = field.sigma(g.pos(i, j));
            if (s == 0.0) continue;
            double pc = phi[c];
            double dxm = i > 0 ? (pc - phi[g.idx(i - 1, j)]) * inv_cell : 0.0;
            double dxp = i + 1 < g.nx ? (phi[g.idx(i + 1, j)] - pc) * inv_cell : 0.0;
            double dym = j > 0 ? (pc - phi[g.idx(i, j - 1)]) * inv_cell : 0.0;
            double dyp = j + 1 < g.ny ? (phi[g.idx(i, j + 1)] - pc) * inv_cell : 0.0;
            double a = std::max(dxm, 0.0), b = std::min(dxp, 0.0);
            double cc = std::max(dym, 0.0), d = std::min(dyp, 0.0);
            double grad = std::sqrt(a * a + b * b + cc * cc + d * d);
            double change = dt * s * grad;
            next.phi[c] = pc - change;
            max_change = std::max(max_change, change);
        }
    }
    if (max_change == 0.0) return next;  // frozen front: phi bitwise unchanged

    next.steps_since_reinit = field.steps_since_reinit + 1;
    if (next.steps_since_reinit >= next.reinit_every) reinitialize(next);
    return next;
}

Bitmask sense(const FireField& field, const ThermalSensor& sensor,
              const Vec2& vehicle_pos, double t) {
    if (!vehicle_pos.allFinite())
        throw std::invalid_argument("sense: non-finite vehicle position");
    Bitmask m;
    m.grid = field.grid;
    m.t_meas = t;
    m.cells.resize(field.grid.size());
    const bool full = std::isinf(sensor.range);
    const double r2 = sensor.range * sensor.range;
    for (int j = 0; j < field.grid.ny; ++j)
        for (int i = 0; i < field.grid.nx; ++i) {
            int c = field.grid.idx(i, j);
            if (full || (field.grid.pos(i, j) - vehicle_pos).squaredNorm() <= r2)
                m.cells[c] = field.phi[c] <= 0.0 ? CellState::Burning : CellState::Free;
            else
                m.cells[c] = CellState::Unknown;
        }
    return m;
}

SdfForecastSet fire_snapshot(const FireField& field) {
    return SdfForecastSet(field.grid, field.phi, field.t, field.sigma.sigma_max);
}

double true_distance_to_fire(const FireField& field, const Vec2& p) {
    const Grid2& g = field.grid;
    if (p.x() < g.origin.x() || p.y() < g.origin.y() ||
        p.x() > g.origin.x() + (g.nx - 1) * g.cell ||
        p.y() > g.origin.y() + (g.ny - 1) * g.cell)
        throw std::out_of_range("true_distance_to_fire: position outside fire grid");
    return bilinear_sample(g, field.phi, p);
}

}  // namespace gk
